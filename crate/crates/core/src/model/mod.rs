//! The next-place network and the interface the trainer drives.

pub mod config;
pub mod pg2net;

pub use config::{ModelConfig, Variant, VocabSizes};
pub use pg2net::{ForwardOutput, GroupVectors, Part, PartSpan, Pg2Net};

use crate::data::QuerySample;
use crate::error::{Error, Result};
use crate::numeric::{Bindings, ParameterStore, Tape, Var};
use crate::priors::PriorSet;

/// A trainable scorer over the location vocabulary.
pub trait NextPlaceModel: Sync {
    fn label(&self) -> String;
    fn params(&self) -> &ParameterStore;
    fn params_mut(&mut self) -> &mut ParameterStore;
    fn num_locations(&self) -> usize;

    /// Records the loss of one sample on `tape`.
    fn sample_loss(&self, tape: &mut Tape, b: &Bindings, q: &QuerySample, priors: &PriorSet) -> Result<Var>;

    /// Log-probabilities over known locations.
    fn log_probs(&self, q: &QuerySample, priors: &PriorSet) -> Result<Vec<f64>>;
}

/// Forward and backward for one sample; adds its gradients to the parameter
/// slots and returns the loss.
pub fn accumulate_sample<M: NextPlaceModel + ?Sized>(model: &mut M, q: &QuerySample, priors: &PriorSet) -> Result<f64> {
    let mut tape = Tape::new();
    let b = model.params().bind_trainable(&mut tape);
    let loss = model.sample_loss(&mut tape, &b, q, priors)?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss(q.id));
    }
    let grads = tape.backward(loss)?;
    model.params_mut().accumulate(&b, &grads);
    Ok(value)
}

/// Loss of one sample without touching gradients.
pub fn sample_loss_value<M: NextPlaceModel + ?Sized>(model: &M, q: &QuerySample, priors: &PriorSet) -> Result<f64> {
    let mut tape = Tape::new();
    let b = model.params().bind_trainable(&mut tape);
    let loss = model.sample_loss(&mut tape, &b, q, priors)?;
    Ok(tape.scalar(loss))
}
