//! Dense tensors, reverse-mode differentiation, the LSTM cell, Adam and
//! gradient clipping.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::{load_checkpoint, restore, save_checkpoint};
pub use lstm::{lstm_cell, LstmCellParams, LstmVars};
pub use optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use params::{Bindings, Param, ParameterStore};
pub use tape::{Activation, Gradients, Tape, Var};
pub use tensor::Tensor;

/// A tape-based computation is a [`Tape`]; kept as a named alias for the
/// record-then-replay structure it implements.
pub type ComputationTape = Tape;
