use crate::data::{build_queries, Dataset, Level, QueryConfig, QuerySample, Split};
use crate::digest::stage_seed;
use crate::error::{Error, Result};
use crate::graph::{build_transition_graph, embed_graph, EmbeddingTable, WalkConfig};
use crate::model::{ModelConfig, NextPlaceModel, Pg2Net, Variant, VocabSizes};
use crate::priors::{PriorConfig, PriorSet};

use super::fit::{fit, holdout_split, FitOutcome, TrainConfig};
use super::lstm_baseline::LstmBaseline;
use super::markov::MarkovModel;
use super::metrics::{evaluate_with, EvalReport};

/// Walk settings for one level: the embedding width follows the model's
/// location or category dimension.
pub fn walk_for_level(walk: &WalkConfig, model: &ModelConfig, level: Level, seed: u64) -> WalkConfig {
    WalkConfig {
        embedding_dim: match level {
            Level::Location => model.location_dim,
            Level::Category => model.category_dim,
        },
        seed,
        ..walk.clone()
    }
}

/// Builds the frozen node2vec table of one level from the training sessions.
pub fn embed_level(ds: &Dataset, level: Level, walk: &WalkConfig) -> Result<EmbeddingTable> {
    let rows = match level {
        Level::Location => ds.num_locations(),
        Level::Category => {
            if !ds.has_categories() {
                return Err(Error::UnsupportedMode {
                    mode: "cdr",
                    what: "category embeddings need venue categories",
                });
            }
            ds.num_categories()
        }
    };
    let graph = build_transition_graph(&ds.sessions, level, rows);
    embed_graph(&graph, level, walk, &ds.vocab.level_digest(level))
}

/// Everything a run needs once preprocessing is done: priors, frozen tables
/// and query sets, plus the configs used to train and score models on them.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub dataset: Dataset,
    pub priors: PriorSet,
    pub location_table: EmbeddingTable,
    pub category_table: Option<EmbeddingTable>,
    /// Training queries minus the held-out ones.
    pub train_queries: Vec<QuerySample>,
    /// Queries of each user's last training session, for early stopping.
    pub heldout_queries: Vec<QuerySample>,
    pub test_queries: Vec<QuerySample>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub per_user_metrics: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub walk: WalkConfig,
    pub priors: PriorConfig,
    pub query: QueryConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub per_user_metrics: bool,
}

impl ExperimentConfig {
    /// Default settings with every width shrunk and a larger step size, for
    /// corpora of a few dozen users and locations.
    pub fn compact(seed: u64) -> Self {
        Self {
            walk: WalkConfig {
                walk_length: 40,
                ..WalkConfig::default()
            },
            priors: PriorConfig::default(),
            query: QueryConfig::default(),
            model: ModelConfig {
                user_dim: 8,
                location_dim: 32,
                category_dim: 4,
                time_dim: 4,
                hidden: 24,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                learning_rate: 0.01,
                epochs: 50,
                accumulation: 8,
                patience: 8,
                ..TrainConfig::default()
            },
            seed,
            per_user_metrics: false,
        }
    }
}

impl Experiment {
    /// Derives priors and node2vec tables from `dataset`; stage seeds come
    /// from `cfg.seed`.
    pub fn prepare(dataset: Dataset, cfg: &ExperimentConfig) -> Result<Self> {
        let priors = PriorSet::build(&dataset, &cfg.priors)?;
        let loc_walk = walk_for_level(&cfg.walk, &cfg.model, Level::Location, stage_seed(cfg.seed, "graph-embed/location"));
        let location_table = embed_level(&dataset, Level::Location, &loc_walk)?;
        let category_table = if dataset.has_categories() {
            let w = walk_for_level(&cfg.walk, &cfg.model, Level::Category, stage_seed(cfg.seed, "graph-embed/category"));
            Some(embed_level(&dataset, Level::Category, &w)?)
        } else {
            None
        };
        Self::from_parts(dataset, priors, location_table, category_table, cfg)
    }

    pub fn from_parts(
        dataset: Dataset,
        priors: PriorSet,
        location_table: EmbeddingTable,
        category_table: Option<EmbeddingTable>,
        cfg: &ExperimentConfig,
    ) -> Result<Self> {
        let train_all = build_queries(&dataset, Split::Train, &cfg.query);
        let (train_queries, heldout_queries) = holdout_split(&train_all, dataset.num_locations());
        let test_queries = build_queries(&dataset, Split::Test, &cfg.query);
        Ok(Self {
            dataset,
            priors,
            location_table,
            category_table,
            train_queries,
            heldout_queries,
            test_queries,
            model: cfg.model.clone(),
            train: cfg.train.clone(),
            seed: cfg.seed,
            per_user_metrics: cfg.per_user_metrics,
        })
    }

    pub fn num_locations(&self) -> usize {
        self.dataset.num_locations()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: stage_seed(self.seed, "train"),
            ..self.train.clone()
        }
    }

    pub fn init_model(&self, variant: Variant) -> Result<Pg2Net> {
        Pg2Net::new(
            self.model.clone(),
            VocabSizes::of(&self.dataset),
            variant,
            Some(&self.location_table),
            self.category_table.as_ref(),
            stage_seed(self.seed, "model"),
        )
    }

    pub fn train_variant(&self, variant: Variant) -> Result<(Pg2Net, FitOutcome)> {
        let mut model = self.init_model(variant)?;
        let outcome = fit(&mut model, &self.train_queries, &self.heldout_queries, &self.priors, &self.train_config())?;
        Ok((model, outcome))
    }

    pub fn evaluate<M: NextPlaceModel>(&self, model: &M) -> Result<EvalReport> {
        evaluate_with(&model.label(), self.seed, &self.test_queries, self.num_locations(), self.per_user_metrics, |q| {
            model.log_probs(q, &self.priors)
        })
    }

    pub fn markov(&self) -> (MarkovModel, Result<EvalReport>) {
        let m = MarkovModel::fit(&self.dataset);
        let report = evaluate_with("markov", self.seed, &self.test_queries, self.num_locations(), self.per_user_metrics, |q| {
            Ok(m.predict(q))
        });
        (m, report)
    }

    pub fn train_lstm(&self) -> Result<(LstmBaseline, FitOutcome)> {
        let mut model = LstmBaseline::new(&self.model, self.num_locations(), stage_seed(self.seed, "model/lstm"))?;
        let outcome = fit(&mut model, &self.train_queries, &self.heldout_queries, &self.priors, &self.train_config())?;
        Ok((model, outcome))
    }

    /// Mean `‖v^l_target − ĥ‖²` over the held-out queries.
    pub fn heldout_aux_distance(&self, model: &Pg2Net) -> Result<f64> {
        use rayon::prelude::*;
        let d: Vec<f64> = self
            .heldout_queries
            .par_iter()
            .map(|q| model.aux_distance(q, &self.priors))
            .collect::<Result<_>>()?;
        Ok(d.iter().sum::<f64>() / d.len().max(1) as f64)
    }
}

/// Trains `variant` from the shared initialization and scores it on the test
/// queries.
pub fn run_ablation(exp: &Experiment, variant: Variant) -> Result<(Pg2Net, EvalReport)> {
    let (model, _) = exp.train_variant(variant)?;
    let report = exp.evaluate(&model)?;
    Ok((model, report))
}
