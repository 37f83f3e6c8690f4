//! Next-place prediction from check-in and call-detail trajectories.
//!
//! The crate covers the whole pipeline:
//!
//! - [`data`]: parsing, cleaning, sessionization, 48-slot time codes and
//!   (history, recent, target) query construction.
//! - [`graph`]: visit-succession graphs and frozen node2vec embeddings.
//! - [`priors`]: geo-distance, slot-correlation and activity-time priors and
//!   the per-position weight vectors derived from them.
//! - [`model`]: the recurrent attention network with personalized and
//!   group preference branches and the auxiliary embedding-matching loss.
//! - [`train`]: training loop, ranking metrics, Markov and LSTM baselines,
//!   ablations and analysis reports.
//! - [`cli`]: the `pg2net` command-line surface and staged pipeline.
//! - [`numeric`]: the small tensor/autodiff engine underneath it all.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod cli;
pub mod data;
pub mod digest;
pub mod error;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod priors;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
