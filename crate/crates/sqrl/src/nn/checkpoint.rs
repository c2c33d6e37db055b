use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqrlError};
use crate::nn::{Mlp, OutputActivation};

pub const MLP_FORMAT: &str = "sqrl-mlp/1";

/// Serialized network. Parameters are written with shortest round-trip
/// float formatting, so save then load is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub layer_sizes: Vec<usize>,
    pub output: OutputActivation,
    pub params: Vec<f64>,
}

impl From<&Mlp> for MlpCheckpoint {
    fn from(net: &Mlp) -> Self {
        Self {
            format: MLP_FORMAT.to_string(),
            layer_sizes: net.sizes().to_vec(),
            output: net.output_activation(),
            params: net.params().to_vec(),
        }
    }
}

impl MlpCheckpoint {
    pub fn into_mlp(self) -> Result<Mlp> {
        if self.format != MLP_FORMAT {
            return Err(SqrlError::Checkpoint(format!(
                "unsupported network format {:?}, expected {MLP_FORMAT:?}",
                self.format
            )));
        }
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(SqrlError::Checkpoint(format!("bad layer sizes {:?}", self.layer_sizes)));
        }
        Mlp::from_params(&self.layer_sizes, self.output, self.params)
    }
}

pub fn save_mlp(net: &Mlp, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&MlpCheckpoint::from(net))?;
    fs::write(path, text).map_err(|e| SqrlError::io(path, e))
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    if !path.exists() {
        return Err(SqrlError::MissingCheckpoint(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| SqrlError::io(path, e))?;
    let ckpt: MlpCheckpoint = serde_json::from_str(&text)?;
    ckpt.into_mlp()
}
