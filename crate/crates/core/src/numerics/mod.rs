//! Tensors, parameter storage and the hand-written forward/backward passes
//! for the layers the model uses.

mod adam;
mod gradcheck;
mod lstm;
pub mod ops;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, Differentiable, GradCheckReport};
pub use lstm::{lstm_cell_forward, LstmCache, LstmCell};
pub use ops::{log_softmax, logsumexp, sigmoid, softmax};
pub use params::{Grads, ParamId, ParamStore, Values};
pub use tensor::Tensor;
