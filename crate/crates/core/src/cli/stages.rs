//! Stage runner over an output directory. Each stage records the digest of
//! its inputs and of every file it wrote in `manifest.json`; a stage whose
//! inputs and outputs still match is skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::data::{parse_records, vocab_path, Dataset, Level, ParseOptions};
use crate::digest::{file_digest, sha256_hex, stage_seed};
use crate::error::{Error, Result};
use crate::graph::EmbeddingTable;
use crate::model::{ModelConfig, NextPlaceModel, Pg2Net, Variant, VocabSizes};
use crate::numeric::{load_checkpoint, restore, save_checkpoint};
use crate::priors::PriorSet;
use crate::train::{
    distance_distribution_report, embed_level, walk_for_level, weight_proportion_report, write_loss_curve,
    EvalReport, Experiment, ExperimentConfig, LstmBaseline,
};

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const SESSIONS: &str = "sessions.jsonl";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: String,
    /// File name → sha256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

/// What a checkpoint holds, stored next to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// `pg2net` or `lstm`.
    pub kind: String,
    pub variant: Option<Variant>,
    pub model: ModelConfig,
    pub sizes: VocabSizes,
    pub best_epoch: usize,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

pub struct Runner {
    pub cfg: RunConfig,
    pub out: PathBuf,
    manifest: Manifest,
}

fn digest_json<T: Serialize>(parts: &T) -> String {
    sha256_hex(&serde_json::to_vec(parts).expect("digest input serializes"))
}

impl Runner {
    /// Opens (or creates) the output directory and echoes the resolved config.
    pub fn open(cfg: RunConfig) -> Result<Self> {
        let out = cfg.out.clone();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let mpath = out.join(MANIFEST);
        let manifest = match std::fs::read_to_string(&mpath) {
            Ok(text) => {
                let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
                if m.seed == cfg.seed {
                    m
                } else {
                    Manifest {
                        seed: cfg.seed,
                        ..Default::default()
                    }
                }
            }
            Err(_) => Manifest {
                seed: cfg.seed,
                ..Default::default()
            },
        };
        let rc = out.join(RESOLVED_CONFIG);
        std::fs::write(&rc, cfg.to_toml()).map_err(|e| Error::io(&rc, e))?;
        Ok(Self { cfg, out, manifest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn save_manifest(&self) -> Result<()> {
        let path = self.path(MANIFEST);
        let tmp = self.path("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&self.manifest)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn up_to_date(&self, name: &str, inputs: &str) -> bool {
        let Some(rec) = self.manifest.stages.get(name) else {
            return false;
        };
        rec.inputs == inputs
            && rec
                .outputs
                .iter()
                .all(|(file, d)| file_digest(&self.path(file)).is_ok_and(|cur| &cur == d))
    }

    /// Runs `body` unless the stage's recorded inputs and outputs match.
    /// Returns whether the stage was cached.
    fn stage<F>(&mut self, name: &str, inputs: String, outputs: &[String], body: F) -> Result<bool>
    where
        F: FnOnce(&Self) -> Result<()>,
    {
        if self.up_to_date(name, &inputs) {
            println!("{name}: cached");
            return Ok(true);
        }
        let start = std::time::Instant::now();
        body(self)?;
        let mut rec = StageRecord {
            inputs,
            outputs: BTreeMap::new(),
        };
        for file in outputs {
            rec.outputs.insert(file.clone(), file_digest(&self.path(file))?);
        }
        self.manifest.stages.insert(name.to_string(), rec);
        self.save_manifest()?;
        println!("{name}: done in {:.1}s", start.elapsed().as_secs_f64());
        Ok(false)
    }

    fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            walk: self.cfg.walk.clone(),
            priors: self.cfg.priors.clone(),
            query: self.cfg.query,
            model: self.cfg.model.clone(),
            train: self.cfg.train.clone(),
            seed: self.cfg.seed,
            per_user_metrics: self.cfg.eval.per_user_metrics,
        }
    }

    fn sessions_digest(&self, sessions: &Path) -> Result<String> {
        Ok(format!("{}+{}", file_digest(sessions)?, file_digest(&vocab_path(sessions))?))
    }

    pub fn preprocess(&mut self) -> Result<PathBuf> {
        let input = self.cfg.input_path()?.to_path_buf();
        let inputs = digest_json(&(
            "preprocess",
            file_digest(&input)?,
            &self.cfg.input.mode,
            self.cfg.input.has_header,
            self.cfg.input.delimiter,
            &self.cfg.preprocess,
        ));
        let outputs = [SESSIONS.to_string(), format!("{SESSIONS}.vocab.json"), "preprocess_stats.json".into()];
        self.stage("preprocess", inputs, &outputs, |r| {
            let opts = ParseOptions {
                has_header: r.cfg.input.has_header,
                delimiter: r.cfg.input.delimiter.map(|c| c as u8),
            };
            let parsed = parse_records(&input, r.cfg.input.mode, &opts)?;
            for w in &parsed.warnings {
                log::warn!("{w}");
            }
            let (ds, mut stats) = Dataset::preprocess(parsed.records, r.cfg.input.mode, &r.cfg.preprocess);
            stats.malformed_lines = parsed.malformed.len();
            if ds.sessions.is_empty() {
                return Err(Error::Data("no user survived preprocessing".into()));
            }
            ds.save(&r.path(SESSIONS))?;
            let sp = r.path("preprocess_stats.json");
            std::fs::write(&sp, serde_json::to_string_pretty(&stats)?).map_err(|e| Error::io(&sp, e))
        })?;
        Ok(self.path(SESSIONS))
    }

    pub fn embed(&mut self, sessions: &Path, level: Level) -> Result<PathBuf> {
        let seed = stage_seed(self.cfg.seed, &format!("graph-embed/{}", level.as_str()));
        let walk = walk_for_level(&self.cfg.walk, &self.cfg.model, level, seed);
        let file = format!("embed_{}.bin", level.as_str());
        let inputs = digest_json(&("graph-embed", level.as_str(), self.sessions_digest(sessions)?, &walk));
        let name = format!("graph-embed-{}", level.as_str());
        self.stage(&name, inputs, std::slice::from_ref(&file), |r| {
            let ds = Dataset::load(sessions)?;
            let table = embed_level(&ds, level, &walk)?;
            if !table.is_finite() {
                return Err(Error::Invariant(format!("non-finite {} embedding", level.as_str())));
            }
            table.save(&r.path(&file))
        })?;
        Ok(self.path(&file))
    }

    pub fn priors(&mut self, sessions: &Path) -> Result<PathBuf> {
        let file = "priors.bin".to_string();
        let inputs = digest_json(&("priors", self.sessions_digest(sessions)?, &self.cfg.priors));
        self.stage("priors", inputs, std::slice::from_ref(&file), |r| {
            let ds = Dataset::load(sessions)?;
            PriorSet::build(&ds, &r.cfg.priors)?.save(&r.path(&file))
        })?;
        Ok(self.path(&file))
    }

    /// Preprocessing, embeddings and priors; returns the digest that
    /// summarizes all of them.
    fn prepare(&mut self) -> Result<String> {
        let sessions = if self.cfg.input.path.is_some() {
            self.preprocess()?
        } else {
            let p = self.path(SESSIONS);
            if !p.exists() {
                return Err(Error::Config(vec!["input.path is required (set it in the file or pass --input)".into()]));
            }
            p
        };
        let ds_has_categories = Dataset::load(&sessions)?.has_categories();
        let mut digests = vec![self.sessions_digest(&sessions)?];
        digests.push(file_digest(&self.embed(&sessions, Level::Location)?)?);
        if ds_has_categories {
            digests.push(file_digest(&self.embed(&sessions, Level::Category)?)?);
        }
        digests.push(file_digest(&self.priors(&sessions)?)?);
        Ok(digests.join("+"))
    }

    /// Loads the prepared artifacts into an experiment.
    pub fn experiment(&mut self) -> Result<(Experiment, String)> {
        let upstream = self.prepare()?;
        let ds = Dataset::load(&self.path(SESSIONS))?;
        let loc = EmbeddingTable::load(&self.path("embed_location.bin"))?;
        loc.verify(Level::Location, ds.num_locations(), &ds.vocab.level_digest(Level::Location))?;
        let cat = if ds.has_categories() {
            let t = EmbeddingTable::load(&self.path("embed_category.bin"))?;
            t.verify(Level::Category, ds.num_categories(), &ds.vocab.level_digest(Level::Category))?;
            Some(t)
        } else {
            None
        };
        let priors = PriorSet::load(&self.path("priors.bin"))?;
        let exp = Experiment::from_parts(ds, priors, loc, cat, &self.experiment_config())?;
        Ok((exp, upstream))
    }

    fn train_inputs(&self, upstream: &str, what: &str) -> String {
        digest_json(&(
            "train",
            what,
            upstream,
            &self.cfg.model,
            &self.cfg.train,
            &self.cfg.query,
            self.cfg.seed,
        ))
    }

    /// Trains one variant; returns the checkpoint path.
    pub fn train(&mut self, exp: &Experiment, upstream: &str, variant: Variant) -> Result<PathBuf> {
        let tag = variant.as_str();
        let ckpt = format!("model_{tag}.ckpt");
        let outputs = [ckpt.clone(), format!("model_{tag}.json"), format!("loss_{tag}.csv")];
        let inputs = self.train_inputs(upstream, tag);
        self.stage(&format!("train-{tag}"), inputs, &outputs, |r| {
            let (model, outcome) = exp.train_variant(variant)?;
            save_checkpoint(&model.params, &r.path(&ckpt))?;
            let meta = CheckpointMeta {
                kind: "pg2net".into(),
                variant: Some(variant),
                model: model.config.clone(),
                sizes: model.sizes,
                best_epoch: outcome.best_epoch,
            };
            write_json(&r.path(&outputs[1]), &meta)?;
            write_loss_curve(&r.path(&outputs[2]), &outcome.curve)
        })?;
        Ok(self.path(&ckpt))
    }

    pub fn train_lstm(&mut self, exp: &Experiment, upstream: &str) -> Result<PathBuf> {
        let outputs = ["model_lstm.ckpt".to_string(), "model_lstm.json".into(), "loss_lstm.csv".into()];
        let inputs = self.train_inputs(upstream, "lstm");
        self.stage("train-lstm", inputs, &outputs, |r| {
            let (model, outcome) = exp.train_lstm()?;
            save_checkpoint(&model.params, &r.path(&outputs[0]))?;
            let meta = CheckpointMeta {
                kind: "lstm".into(),
                variant: None,
                model: r.cfg.model.clone(),
                sizes: VocabSizes::of(&exp.dataset),
                best_epoch: outcome.best_epoch,
            };
            write_json(&r.path(&outputs[1]), &meta)?;
            write_loss_curve(&r.path(&outputs[2]), &outcome.curve)
        })?;
        Ok(self.path(&outputs[0]))
    }

    /// Scores a checkpoint on the test queries; writes `eval_<label>.json`
    /// and `.txt`.
    pub fn evaluate(&mut self, exp: &Experiment, checkpoint: &Path) -> Result<EvalReport> {
        let meta: CheckpointMeta = read_json(&meta_path(checkpoint))?;
        let label = meta.variant.map_or(meta.kind.clone(), |v| v.as_str().to_string());
        let json = format!("eval_{label}.json");
        let txt = format!("eval_{label}.txt");
        let inputs = digest_json(&(
            "evaluate",
            file_digest(checkpoint)?,
            file_digest(&meta_path(checkpoint))?,
            &self.cfg.eval,
            self.cfg.seed,
        ));
        self.stage(&format!("evaluate-{label}"), inputs, &[json.clone(), txt.clone()], |r| {
            let report = match load_model(exp, checkpoint, &meta)? {
                Loaded::Pg2Net(m) => exp.evaluate(&m)?,
                Loaded::Lstm(m) => exp.evaluate(&m)?,
            };
            report.save_json(&r.path(&json))?;
            let tp = r.path(&txt);
            std::fs::write(&tp, report.table()).map_err(|e| Error::io(&tp, e))
        })?;
        EvalReport::load_json(&self.path(&json))
    }

    pub fn markov(&mut self, exp: &Experiment, upstream: &str) -> Result<EvalReport> {
        let json = "eval_markov.json".to_string();
        let txt = "eval_markov.txt".to_string();
        let inputs = digest_json(&("markov", upstream, &self.cfg.query, &self.cfg.eval, self.cfg.seed));
        self.stage("baseline-markov", inputs, &[json.clone(), txt.clone()], |r| {
            let (_, report) = exp.markov();
            let report = report?;
            report.save_json(&r.path(&json))?;
            let tp = r.path(&txt);
            std::fs::write(&tp, report.table()).map_err(|e| Error::io(&tp, e))
        })?;
        EvalReport::load_json(&self.path(&json))
    }

    pub fn distance_report(&mut self, exp: &Experiment, checkpoint: &Path) -> Result<PathBuf> {
        let meta: CheckpointMeta = read_json(&meta_path(checkpoint))?;
        let label = meta.variant.map_or(meta.kind.clone(), |v| v.as_str().to_string());
        let file = format!("report_distance_{label}.csv");
        let inputs = digest_json(&("distance", file_digest(checkpoint)?, &self.cfg.eval.bin_edges));
        self.stage(&format!("report-distance-{label}"), inputs, std::slice::from_ref(&file), |r| {
            let edges = &r.cfg.eval.bin_edges;
            let hist = match load_model(exp, checkpoint, &meta)? {
                Loaded::Pg2Net(m) => {
                    distance_distribution_report(&exp.test_queries, &exp.priors.geo, edges, |q| m.log_probs(q, &exp.priors))
                }
                Loaded::Lstm(m) => {
                    distance_distribution_report(&exp.test_queries, &exp.priors.geo, edges, |q| m.log_probs(q, &exp.priors))
                }
            }?;
            hist.save_csv(&r.path(&file))
        })?;
        Ok(self.path(&file))
    }

    pub fn weights_report(&mut self, exp: &Experiment, checkpoint: &Path) -> Result<PathBuf> {
        let meta: CheckpointMeta = read_json(&meta_path(checkpoint))?;
        let Some(variant) = meta.variant else {
            return Err(Error::Data("weight proportions need a PG²Net checkpoint".into()));
        };
        let file = format!("report_weights_{}.csv", variant.as_str());
        let inputs = digest_json(&("weights", file_digest(checkpoint)?));
        self.stage(&format!("report-weights-{}", variant.as_str()), inputs, std::slice::from_ref(&file), |r| {
            let Loaded::Pg2Net(m) = load_model(exp, checkpoint, &meta)? else {
                unreachable!("variant implies pg2net");
            };
            let w = weight_proportion_report(&m, &exp.test_queries, &exp.priors)?;
            let p = r.path(&file);
            std::fs::write(&p, w.csv()).map_err(|e| Error::io(&p, e))
        })?;
        Ok(self.path(&file))
    }
}

pub enum Loaded {
    Pg2Net(Pg2Net),
    Lstm(LstmBaseline),
}

pub fn load_model(exp: &Experiment, checkpoint: &Path, meta: &CheckpointMeta) -> Result<Loaded> {
    let entries = load_checkpoint(checkpoint)?;
    if meta.sizes != VocabSizes::of(&exp.dataset) {
        return Err(Error::Checkpoint(format!(
            "checkpoint vocabulary {:?} does not match the dataset {:?}",
            meta.sizes,
            VocabSizes::of(&exp.dataset)
        )));
    }
    match (meta.kind.as_str(), meta.variant) {
        ("pg2net", Some(v)) => {
            let mut m = Pg2Net::skeleton(meta.model.clone(), meta.sizes, v)?;
            restore(&mut m.params, entries)?;
            Ok(Loaded::Pg2Net(m))
        }
        ("lstm", _) => {
            let mut m = LstmBaseline::new(&meta.model, meta.sizes.locations, 0)?;
            restore(&mut m.params, entries)?;
            Ok(Loaded::Lstm(m))
        }
        (kind, _) => Err(Error::Checkpoint(format!("unknown checkpoint kind `{kind}`"))),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
