use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::top1;
use crate::data::QuerySample;
use crate::error::{Error, Result};
use crate::model::pg2net::W_P;
use crate::model::{Part, Pg2Net};
use crate::priors::{GeoTable, PriorSet};

/// Default distance bins in km; the last bin is open-ended.
pub const DEFAULT_BIN_EDGES: [f64; 9] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, f64::INFINITY];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartShare {
    pub part: Part,
    pub share: f64,
}

/// Mean share of each preference part in the output logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProportions {
    /// Column-block L1 attribution: per query, `‖W_p[:, x]·x‖₁` over the sum
    /// across preference parts, averaged over queries.
    pub method: String,
    pub queries: usize,
    pub shares: Vec<PartShare>,
}

impl WeightProportions {
    pub fn share(&self, part: Part) -> Option<f64> {
        self.shares.iter().find(|s| s.part == part).map(|s| s.share)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("part,share\n");
        for p in &self.shares {
            let _ = writeln!(s, "{:?},{}", p.part, p.share);
        }
        s
    }
}

/// L1 norm of `W_p[:, start..start+len] · x`.
fn block_logit_l1(w: &[f64], cols: usize, start: usize, x: &[f64]) -> f64 {
    w.chunks(cols)
        .map(|row| row[start..start + x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
        .sum()
}

pub fn weight_proportion_report(model: &Pg2Net, queries: &[QuerySample], priors: &PriorSet) -> Result<WeightProportions> {
    let w = model.params.tensor(W_P)?;
    let cols = w.cols();
    let parts: Vec<_> = model.layout().into_iter().filter(|p| p.part != Part::User).collect();
    let per_query: Vec<Option<Vec<f64>>> = queries
        .par_iter()
        .map(|q| {
            let out = model.forward(q, priors)?;
            let norms: Vec<f64> = parts
                .iter()
                .map(|p| block_logit_l1(&w.data, cols, p.start, &out.concat[p.start..p.start + p.len]))
                .collect();
            let total: f64 = norms.iter().sum();
            Ok((total > 0.0).then(|| norms.iter().map(|n| n / total).collect()))
        })
        .collect::<Result<_>>()?;
    let used: Vec<&Vec<f64>> = per_query.iter().flatten().collect();
    let n = used.len();
    let shares = parts
        .iter()
        .enumerate()
        .map(|(i, p)| PartShare {
            part: p.part,
            share: if n == 0 { 0.0 } else { used.iter().map(|v| v[i]).sum::<f64>() / n as f64 },
        })
        .collect();
    Ok(WeightProportions {
        method: "column-block L1 attribution".into(),
        queries: n,
        shares,
    })
}

/// Binned distances from the current location to the actual and to the
/// predicted next location, as proportions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub edges: Vec<f64>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Queries that had coordinates for all three locations.
    pub queries: usize,
}

fn bin_of(edges: &[f64], d: f64) -> Option<usize> {
    (0..edges.len() - 1).find(|&i| d >= edges[i] && d < edges[i + 1])
}

/// Proportions over `[edges[i], edges[i+1])`.
pub fn histogram(edges: &[f64], distances: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0; edges.len().saturating_sub(1)];
    let mut n = 0.0;
    for &d in distances {
        if let Some(b) = bin_of(edges, d) {
            counts[b] += 1.0;
            n += 1.0;
        }
    }
    if n > 0.0 {
        counts.iter_mut().for_each(|c| *c /= n);
    }
    counts
}

impl DistanceHistogram {
    pub fn csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,actual_prop,predicted_prop\n");
        for i in 0..self.actual.len() {
            let _ = writeln!(s, "{},{},{},{}", self.edges[i], self.edges[i + 1], self.actual[i], self.predicted[i]);
        }
        s
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv()).map_err(|e| Error::io(path, e))
    }
}

/// `score` returns scores over known locations; the top-1 uses the ranking
/// tie rule. Queries lacking any of the three coordinates are skipped.
pub fn distance_distribution_report<F>(
    queries: &[QuerySample],
    geo: &GeoTable,
    edges: &[f64],
    score: F,
) -> Result<DistanceHistogram>
where
    F: Fn(&QuerySample) -> Result<Vec<f64>> + Sync,
{
    if edges.len() < 2 || edges.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
        return Err(Error::Config(vec!["bin edges must be strictly increasing, at least two".into()]));
    }
    let pairs: Vec<Option<(f64, f64)>> = queries
        .par_iter()
        .map(|q| {
            let cur = q.current().location;
            let predicted = top1(&score(q)?);
            Ok(geo.distance(cur, q.target.location).zip(geo.distance(cur, predicted)))
        })
        .collect::<Result<_>>()?;
    let (actual, predicted): (Vec<f64>, Vec<f64>) = pairs.into_iter().flatten().unzip();
    Ok(DistanceHistogram {
        edges: edges.to_vec(),
        queries: actual.len(),
        actual: histogram(edges, &actual),
        predicted: histogram(edges, &predicted),
    })
}
