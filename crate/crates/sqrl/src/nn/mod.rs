//! Small dense networks with hand-written backpropagation.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::Adam;
pub use checkpoint::{load_mlp, save_mlp, MlpCheckpoint, MLP_FORMAT};
pub use gradcheck::{grad_check, relative_error, DifferentiableLoss, GradCheckReport, FD_STEP, REL_ERROR_FLOOR};
pub use mlp::{sigmoid, stack_rows, ForwardCache, Gradients, Mlp, OutputActivation};
