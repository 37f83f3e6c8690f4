use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::QuerySample;
use crate::error::{Error, Result};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// 1 iff the target is inside the top `k`.
pub fn recall_at_k(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0
    } else {
        0.0
    }
}

/// `1 / log2(rank + 1)` inside the top `k`, else 0.
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// 1 + number of locations scoring strictly higher, plus tied locations with
/// a smaller index.
pub fn rank_target(scores: &[f64], target: usize) -> usize {
    let t = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > t || (s == t && j < target))
        .count()
}

/// Index of the best score under the same tie rule.
pub fn top1(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = j;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub id: usize,
    pub user: usize,
    /// `None` when the target is outside the training vocabulary: always a miss.
    pub rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricAt {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub seed: u64,
    pub queries: usize,
    pub metrics: Vec<MetricAt>,
    /// Per-user macro averages, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_user_metrics: Option<Vec<MetricAt>>,
    pub ranks: Vec<QueryRank>,
    /// Wall time of the evaluation; left out of the serialized report.
    #[serde(skip)]
    pub runtime_secs: f64,
}

fn aggregate(ranks: &[QueryRank], ks: &[usize]) -> Vec<MetricAt> {
    let n = ranks.len().max(1) as f64;
    ks.iter()
        .map(|&k| {
            let (mut r, mut g) = (0.0, 0.0);
            for q in ranks {
                if let Some(rank) = q.rank {
                    r += recall_at_k(rank, k);
                    g += ndcg_at_k(rank, k);
                }
            }
            MetricAt {
                k,
                recall: r / n,
                ndcg: g / n,
            }
        })
        .collect()
}

impl EvalReport {
    pub fn from_ranks(variant: &str, seed: u64, ranks: Vec<QueryRank>, ks: &[usize], per_user: bool) -> Self {
        let per_user_metrics = per_user.then(|| {
            let mut by_user: BTreeMap<usize, Vec<QueryRank>> = BTreeMap::new();
            for r in &ranks {
                by_user.entry(r.user).or_default().push(r.clone());
            }
            let users = by_user.len().max(1) as f64;
            let mut acc: Vec<MetricAt> = ks
                .iter()
                .map(|&k| MetricAt {
                    k,
                    recall: 0.0,
                    ndcg: 0.0,
                })
                .collect();
            for rs in by_user.values() {
                for (a, m) in acc.iter_mut().zip(aggregate(rs, ks)) {
                    a.recall += m.recall / users;
                    a.ndcg += m.ndcg / users;
                }
            }
            acc
        });
        Self {
            variant: variant.to_string(),
            seed,
            queries: ranks.len(),
            metrics: aggregate(&ranks, ks),
            per_user_metrics,
            ranks,
            runtime_secs: 0.0,
        }
    }

    pub fn recall(&self, k: usize) -> f64 {
        self.metrics.iter().find(|m| m.k == k).map_or(0.0, |m| m.recall)
    }

    pub fn ndcg(&self, k: usize) -> f64 {
        self.metrics.iter().find(|m| m.k == k).map_or(0.0, |m| m.ndcg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Aligned plain-text table. Runtime is left out so saved tables are
    /// reproducible.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "variant {}  seed {}  queries {}", self.variant, self.seed, self.queries);
        let _ = writeln!(s, "{:>4}  {:>8}  {:>8}", "K", "Recall", "NDCG");
        for m in &self.metrics {
            let _ = writeln!(s, "{:>4}  {:>8.4}  {:>8.4}", m.k, m.recall, m.ndcg);
        }
        if let Some(pu) = &self.per_user_metrics {
            let _ = writeln!(s, "per-user averages:");
            for m in pu {
                let _ = writeln!(s, "{:>4}  {:>8.4}  {:>8.4}", m.k, m.recall, m.ndcg);
            }
        }
        s
    }
}

/// Ranks every query's target under `score`, in parallel; output follows
/// query order. Targets at or beyond `num_locations` count as misses.
pub fn rank_queries<F>(queries: &[QuerySample], num_locations: usize, score: F) -> Result<Vec<QueryRank>>
where
    F: Fn(&QuerySample) -> Result<Vec<f64>> + Sync,
{
    queries
        .par_iter()
        .map(|q| {
            let rank = if q.target.location < num_locations {
                let s = score(q)?;
                Some(rank_target(&s, q.target.location))
            } else {
                None
            };
            Ok(QueryRank {
                id: q.id,
                user: q.user,
                rank,
            })
        })
        .collect()
}

/// Ranks queries and aggregates them into a report.
pub fn evaluate_with<F>(
    label: &str,
    seed: u64,
    queries: &[QuerySample],
    num_locations: usize,
    per_user: bool,
    score: F,
) -> Result<EvalReport>
where
    F: Fn(&QuerySample) -> Result<Vec<f64>> + Sync,
{
    let start = std::time::Instant::now();
    let ranks = rank_queries(queries, num_locations, score)?;
    let mut report = EvalReport::from_ranks(label, seed, ranks, &DEFAULT_KS, per_user);
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures() {
        assert_eq!(recall_at_k(1, 1), 1.0);
        assert_eq!(recall_at_k(6, 5), 0.0);
        assert_eq!(ndcg_at_k(1, 10), 1.0);
        assert_eq!(ndcg_at_k(3, 5), 0.5);
        assert_eq!(ndcg_at_k(6, 5), 0.0);
    }

    #[test]
    fn tie_rule() {
        assert_eq!(rank_target(&[0.2; 5], 0), 1);
        assert_eq!(rank_target(&[0.2; 5], 3), 4);
        assert_eq!(rank_target(&[0.1, 0.5, 0.3], 1), 1);
        assert_eq!(top1(&[0.3, 0.5, 0.5]), 1);
    }

    #[test]
    fn mean_of_ranks() {
        let ranks = [1, 3, 12]
            .iter()
            .enumerate()
            .map(|(i, &r)| QueryRank {
                id: i,
                user: 0,
                rank: Some(r),
            })
            .collect();
        let rep = EvalReport::from_ranks("t", 0, ranks, &DEFAULT_KS, true);
        assert!((rep.recall(10) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rep.recall(1), rep.ndcg(1));
        assert_eq!(rep.per_user_metrics.as_ref().unwrap()[2].recall, rep.recall(10));
    }

    #[test]
    fn unknown_target_is_a_miss() {
        let ranks = vec![
            QueryRank { id: 0, user: 0, rank: Some(1) },
            QueryRank { id: 1, user: 0, rank: None },
        ];
        let rep = EvalReport::from_ranks("t", 0, ranks, &DEFAULT_KS, false);
        assert_eq!(rep.recall(10), 0.5);
    }

    #[test]
    fn json_skips_runtime() {
        let mut rep = EvalReport::from_ranks("t", 0, vec![], &DEFAULT_KS, false);
        rep.runtime_secs = 3.0;
        assert!(!rep.to_json().unwrap().contains("runtime"));
    }
}
