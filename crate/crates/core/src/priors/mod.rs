//! Population-level spatio-temporal priors and the per-position weight
//! vectors derived from them.
//!
//! Distance weights normalize over sequence positions. Time and activity
//! weights are read from distributions normalized over the 48 slots, so
//! those position weights do not sum to one.

pub mod activity;
pub mod bundle;
pub mod geo;
pub mod time;

pub use activity::{activity_weights, build_activity_graph, ActivityBipartite};
pub use bundle::{PriorConfig, PriorSet, SequenceWeights};
pub use geo::{distance_weights, haversine, GeoTable, EARTH_RADIUS_KM};
pub use time::{build_time_correlation, time_weights, TimeCorrelation};
