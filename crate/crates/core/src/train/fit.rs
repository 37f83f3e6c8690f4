use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::QuerySample;
use crate::digest::combine_seed;
use crate::error::{Error, Result};
use crate::model::{accumulate_sample, sample_loss_value, NextPlaceModel, Variant};
use crate::numeric::{adam_step, clip_global_norm, AdamConfig, AdamState, ParameterStore};
use crate::priors::PriorSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    /// Samples per optimizer step; gradients are averaged over the window.
    pub accumulation: usize,
    /// Shuffle seed. Not a config key: runs derive it from the root seed.
    #[serde(skip)]
    pub seed: u64,
    /// Epochs without held-out improvement before stopping; 0 disables.
    pub patience: usize,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            clip_norm: 5.0,
            epochs: 30,
            accumulation: 32,
            seed: 0,
            patience: 5,
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            errs.push("learning_rate must be > 0".into());
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            errs.push("weight_decay must be >= 0".into());
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            errs.push("clip_norm must be > 0".into());
        }
        if self.accumulation == 0 {
            errs.push("accumulation must be positive".into());
        }
        errs
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean loss on the held-out queries (each user's last training session).
    pub test_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub curve: Vec<LossRow>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
    pub steps: u64,
}

pub fn loss_curve_csv(curve: &[LossRow]) -> String {
    let mut s = String::from("epoch,train_loss,test_loss\n");
    for r in curve {
        let _ = writeln!(s, "{},{},{}", r.epoch, r.train_loss, r.test_loss);
    }
    s
}

pub fn write_loss_curve(path: &Path, curve: &[LossRow]) -> Result<()> {
    std::fs::write(path, loss_curve_csv(curve)).map_err(|e| Error::io(path, e))
}

/// Splits training queries into (fit, held-out): held-out are the queries
/// drawn from each user's last training session that produced queries.
/// Queries whose target is unknown are dropped from both.
pub fn holdout_split(queries: &[QuerySample], num_locations: usize) -> (Vec<QuerySample>, Vec<QuerySample>) {
    let mut last: HashMap<usize, usize> = HashMap::new();
    for q in queries {
        let e = last.entry(q.user).or_insert(q.session_index);
        *e = (*e).max(q.session_index);
    }
    queries
        .iter()
        .filter(|q| q.target.location < num_locations)
        .cloned()
        .partition(|q| last[&q.user] != q.session_index)
}

fn mean_loss<M: NextPlaceModel>(model: &M, queries: &[QuerySample], priors: &PriorSet) -> Result<f64> {
    if queries.is_empty() {
        return Ok(f64::NAN);
    }
    let losses: Vec<f64> = queries
        .par_iter()
        .map(|q| sample_loss_value(model, q, priors))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Trains `model` on `train` with seeded shuffling, gradient accumulation,
/// global-norm clipping and Adam. Early-stops on `heldout` loss and leaves
/// the best parameters in the model. Queries with unknown targets are skipped.
pub fn fit<M: NextPlaceModel>(
    model: &mut M,
    train: &[QuerySample],
    heldout: &[QuerySample],
    priors: &PriorSet,
    cfg: &TrainConfig,
) -> Result<FitOutcome> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let num_locations = model.num_locations();
    let usable: Vec<&QuerySample> = train.iter().filter(|q| q.target.location < num_locations).collect();
    let heldout: Vec<QuerySample> = heldout
        .iter()
        .filter(|q| q.target.location < num_locations)
        .cloned()
        .collect();
    let mut adam = AdamState::new(cfg.adam(), model.params());
    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, ParameterStore)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..usable.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(combine_seed(&[cfg.seed, epoch as u64])));
        let mut total = 0.0;
        for window in order.chunks(cfg.accumulation) {
            model.params_mut().zero_grads();
            for &i in window {
                total += accumulate_sample(model, usable[i], priors)?;
            }
            let params = model.params_mut();
            params.scale_grads(1.0 / window.len() as f64);
            clip_global_norm(&mut params.grads_mut(), cfg.clip_norm);
            adam_step(params, &mut adam)?;
        }
        let train_loss = total / usable.len().max(1) as f64;
        let test_loss = mean_loss(model, &heldout, priors)?;
        log::info!("epoch {epoch}: train loss {train_loss:.5}, held-out loss {test_loss:.5}");
        curve.push(LossRow {
            epoch,
            train_loss,
            test_loss,
        });

        if heldout.is_empty() {
            continue;
        }
        match &best {
            Some((b, _, _)) if test_loss >= *b => {
                stale += 1;
                if cfg.patience > 0 && stale >= cfg.patience {
                    log::info!("early stop after epoch {epoch}");
                    break;
                }
            }
            _ => {
                best = Some((test_loss, epoch, model.params().clone()));
                stale = 0;
            }
        }
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            let version = model.params().version;
            *model.params_mut() = params;
            model.params_mut().version = version;
            epoch
        }
        None => curve.last().map_or(0, |r| r.epoch),
    };
    model.params_mut().zero_grads();
    Ok(FitOutcome {
        curve,
        best_epoch,
        steps: adam.step_count,
    })
}
