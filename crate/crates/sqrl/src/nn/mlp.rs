use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqrlError};
use crate::mdp::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Tanh,
    Sigmoid,
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => z,
            OutputActivation::Tanh => z.tanh(),
            OutputActivation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Tanh => 1.0 - y * y,
            OutputActivation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected network with ReLU hidden layers.
///
/// All weights and biases live in one flat parameter vector so optimizers,
/// target-network averaging and checkpoints can treat the network as a
/// single slice. Layer `l` stores its weight as a row-major
/// `(fan_in, fan_out)` block followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Activations kept from a forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input, the last entry is the output.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.activations[0]
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Array2<f64>,
}

impl Mlp {
    /// Zero-initialized network. Panics on fewer than two layer sizes or a
    /// zero-width layer.
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut n = 0;
        for w in sizes.windows(2) {
            offsets.push(n);
            n += w[0] * w[1] + w[1];
        }
        offsets.push(n);
        Self {
            sizes: sizes.to_vec(),
            output,
            params: vec![0.0; n],
            offsets,
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut RngStream) -> Self {
        let mut net = Self::zeros(sizes, output);
        for l in 0..net.n_layers() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let (w0, end) = (net.offsets[l], net.offsets[l + 1]);
            for p in &mut net.params[w0..end] {
                *p = rng.uniform_range(-bound, bound);
            }
        }
        net
    }

    pub fn from_params(sizes: &[usize], output: OutputActivation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, output);
        if params.len() != net.params.len() {
            return Err(SqrlError::DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_split(&self, l: usize) -> (usize, usize, usize) {
        let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
        let w0 = self.offsets[l];
        (w0, w0 + fi * fo, fi)
    }

    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w0, b0, fi) = self.layer_split(l);
        ArrayView2::from_shape((fi, self.sizes[l + 1]), &self.params[w0..b0]).expect("layout")
    }

    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let (_, b0, _) = self.layer_split(l);
        ArrayView1::from(&self.params[b0..b0 + self.sizes[l + 1]])
    }

    pub fn weight_mut(&mut self, l: usize) -> ArrayViewMut2<'_, f64> {
        let (w0, b0, fi) = self.layer_split(l);
        let fo = self.sizes[l + 1];
        ArrayViewMut2::from_shape((fi, fo), &mut self.params[w0..b0]).expect("layout")
    }

    pub fn bias_mut(&mut self, l: usize) -> ArrayViewMut1<'_, f64> {
        let (_, b0, _) = self.layer_split(l);
        let fo = self.sizes[l + 1];
        ArrayViewMut1::from(&mut self.params[b0..b0 + fo])
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(SqrlError::DimensionMismatch {
                expected: self.input_dim(),
                got: cols,
            });
        }
        Ok(())
    }

    /// Evaluate a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Evaluate a `(batch, input_dim)` matrix without keeping activations.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for l in 0..self.n_layers() {
            a = self.layer(l, a.view());
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_owned());
        for l in 0..self.n_layers() {
            let next = self.layer(l, activations[l].view());
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Smallest absolute hidden pre-activation over the batch, i.e. how far
    /// the input sits from the nearest ReLU kink. Infinite without hidden
    /// layers.
    pub fn relu_margin(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        let mut margin = f64::INFINITY;
        for l in 0..self.n_layers() - 1 {
            let mut z = a.dot(&self.weight(l));
            z += &self.bias(l);
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            z.mapv_inplace(|v| v.max(0.0));
            a = z;
        }
        Ok(margin)
    }

    fn layer(&self, l: usize, a: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weight(l));
        z += &self.bias(l);
        if l + 1 == self.n_layers() {
            let act = self.output;
            if act != OutputActivation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
        } else {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }

    /// Reverse-mode gradients of `sum(upstream * output)` with respect to
    /// every parameter and to the input. ReLU uses subgradient 0 at 0.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>) -> Result<Gradients> {
        self.backward_impl(cache, upstream, true)
    }

    /// Like [`Mlp::backward`] but only the input gradient is computed.
    pub fn input_gradient(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.backward_impl(cache, upstream, false)?.input)
    }

    fn backward_impl(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>, with_params: bool) -> Result<Gradients> {
        let out = cache.output();
        if upstream.dim() != out.dim() || cache.activations.len() != self.sizes.len() {
            return Err(SqrlError::DimensionMismatch {
                expected: out.len(),
                got: upstream.len(),
            });
        }
        let act = self.output;
        let mut delta = Array2::from_shape_fn(out.dim(), |(i, j)| upstream[(i, j)] * act.derivative_from_output(out[(i, j)]));
        let mut grads = if with_params { vec![0.0; self.params.len()] } else { Vec::new() };
        for l in (0..self.n_layers()).rev() {
            let a_prev = &cache.activations[l];
            if with_params {
                let (w0, b0, fi) = self.layer_split(l);
                let fo = self.sizes[l + 1];
                let dw = a_prev.t().dot(&delta);
                let db: Array1<f64> = delta.sum_axis(Axis(0));
                ArrayViewMut2::from_shape((fi, fo), &mut grads[w0..b0])
                    .expect("layout")
                    .assign(&dw);
                ArrayViewMut1::from(&mut grads[b0..b0 + fo]).assign(&db);
            }
            let mut prev = delta.dot(&self.weight(l).t());
            if l > 0 {
                prev.zip_mut_with(a_prev, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            delta = prev;
        }
        Ok(Gradients {
            params: grads,
            input: delta,
        })
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        debug_assert_eq!(self.params.len(), online.params.len());
        if tau == 1.0 {
            self.params.copy_from_slice(&online.params);
            return;
        }
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Stack rows into a `(rows, cols)` matrix.
pub fn stack_rows<I, R>(rows: I, cols: usize) -> Array2<f64>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        let r = r.as_ref();
        debug_assert_eq!(r.len(), cols);
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, cols), data).expect("rows have equal length")
}
