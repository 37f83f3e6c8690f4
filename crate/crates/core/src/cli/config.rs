use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DatasetMode, QueryConfig, SessionConfig};
use crate::error::{Error, Result};
use crate::graph::WalkConfig;
use crate::model::{ModelConfig, Variant};
use crate::priors::PriorConfig;
use crate::train::{TrainConfig, DEFAULT_BIN_EDGES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub mode: DatasetMode,
    pub has_header: bool,
    /// Single-character field delimiter; detected when unset.
    pub delimiter: Option<char>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: None,
            mode: DatasetMode::Checkin,
            has_header: false,
            delimiter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Also report per-user macro averages.
    pub per_user_metrics: bool,
    /// Distance histogram bin edges in km.
    pub bin_edges: Vec<f64>,
    /// Variants trained by `ablate`.
    pub ablation_variants: Vec<Variant>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            per_user_metrics: false,
            bin_edges: DEFAULT_BIN_EDGES.to_vec(),
            ablation_variants: Variant::ALL.to_vec(),
        }
    }
}

/// One file configuring every stage of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub input: InputConfig,
    pub preprocess: SessionConfig,
    pub walk: WalkConfig,
    pub priors: PriorConfig,
    pub query: QueryConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("run"),
            workers: None,
            input: InputConfig::default(),
            preprocess: SessionConfig::default(),
            walk: WalkConfig::default(),
            priors: PriorConfig::default(),
            query: QueryConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn prefixed(section: &str, errs: Vec<String>) -> impl Iterator<Item = String> + '_ {
    errs.into_iter().map(move |e| format!("{section}.{e}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim_end().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msgs) => Error::Config(msgs.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every violation, each naming its key.
    pub fn violations(&self) -> Vec<String> {
        let mut errs: Vec<String> = Vec::new();
        errs.extend(prefixed("preprocess", self.preprocess.validate()));
        errs.extend(prefixed("walk", self.walk.validate()));
        errs.extend(prefixed("model", self.model.validate()));
        errs.extend(prefixed("train", self.train.validate()));
        if self.priors.distance_clamp_km.is_nan() || self.priors.distance_clamp_km <= 0.0 {
            errs.push("priors.distance_clamp_km must be > 0".into());
        }
        if self.workers == Some(0) {
            errs.push("workers must be positive".into());
        }
        if let Some(d) = self.input.delimiter {
            if !d.is_ascii() {
                errs.push(format!("input.delimiter must be an ASCII character (got {d:?})"));
            }
        }
        let e = &self.eval.bin_edges;
        if e.len() < 2 || e.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
            errs.push("eval.bin_edges must be strictly increasing with at least two edges".into());
        }
        if self.input.mode == DatasetMode::Cdr && self.priors.activity == Some(true) {
            errs.push(
                "priors.activity = true is not allowed with input.mode = \"cdr\": the activity prior is built from venue categories, which call detail records lack".into(),
            );
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn input_path(&self) -> Result<&Path> {
        self.input
            .path
            .as_deref()
            .ok_or_else(|| Error::Config(vec!["input.path is required (set it in the file or pass --input)".into()]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.validate().is_ok());
        assert!(cfg.input_path().is_err());
    }

    #[test]
    fn negative_epsilon_names_key() {
        let cfg = RunConfig::from_toml("[model]\nepsilon = -1.0\n").unwrap();
        let errs = cfg.violations();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].starts_with("model.aux_weight (epsilon) must be >= 0"), "{errs:?}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml("[walk]\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn cdr_with_activity_rejected() {
        let cfg = RunConfig::from_toml("[input]\nmode = \"cdr\"\n[priors]\nactivity = true\n").unwrap();
        let errs = cfg.violations();
        assert!(errs.iter().any(|e| e.contains("priors.activity") && e.contains("cdr")));
    }

    #[test]
    fn resolved_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
