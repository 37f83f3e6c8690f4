//! Training loop, ranking metrics, baselines, ablations and analysis reports.

pub mod experiment;
pub mod fit;
pub mod lstm_baseline;
pub mod markov;
pub mod metrics;
pub mod reports;

pub use experiment::{embed_level, run_ablation, walk_for_level, Experiment, ExperimentConfig};
pub use fit::{fit, holdout_split, loss_curve_csv, write_loss_curve, FitOutcome, LossRow, TrainConfig};
pub use lstm_baseline::LstmBaseline;
pub use markov::MarkovModel;
pub use metrics::{
    evaluate_with, ndcg_at_k, rank_queries, rank_target, recall_at_k, top1, EvalReport, MetricAt, QueryRank,
    DEFAULT_KS,
};
pub use reports::{
    distance_distribution_report, histogram, weight_proportion_report, DistanceHistogram, PartShare,
    WeightProportions, DEFAULT_BIN_EDGES,
};
