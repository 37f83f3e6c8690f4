//! Raw trajectories to indexed sessions and query samples.

pub mod dataset;
pub mod query;
pub mod record;
pub mod session;
pub mod vocab;

pub use dataset::{vocab_path, Dataset, PreprocessStats, Session, Split, Visit};
pub use query::{build_queries, Poi, QueryConfig, QuerySample};
pub use record::{parse_records, parse_str, CheckinRecord, DatasetMode, ParseOptions, ParseOutcome};
pub use session::{
    filter_users, merge_close, sessionize, sessionize_all, slot_of, split_train_test, RawSession,
    SessionConfig, WindowAnchor, SLOTS,
};
pub use vocab::{IdTable, Level, Vocab};
