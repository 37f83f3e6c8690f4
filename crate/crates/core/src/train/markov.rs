use serde::{Deserialize, Serialize};

use crate::data::{Dataset, QuerySample};

/// First-order transition table over known locations, with per-user and
/// global visit frequencies as fallbacks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub num_locations: usize,
    /// Raw pair counts, row-major `[from × to]`.
    pub counts: Vec<u64>,
    /// Row-normalized counts; all-zero rows stay zero.
    pub probs: Vec<f64>,
    pub user_freq: Vec<Vec<f64>>,
    pub global_freq: Vec<f64>,
}

fn normalize(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

impl MarkovModel {
    /// Counts consecutive within-session pairs of the training sessions.
    pub fn fit(ds: &Dataset) -> Self {
        let n = ds.num_locations();
        let mut counts = vec![0u64; n * n];
        let mut user_counts = vec![vec![0u64; n]; ds.num_users()];
        let mut global = vec![0u64; n];
        for s in ds.train_sessions() {
            for v in &s.visits {
                if v.location < n {
                    user_counts[s.user][v.location] += 1;
                    global[v.location] += 1;
                }
            }
            for w in s.visits.windows(2) {
                let (a, b) = (w[0].location, w[1].location);
                if a < n && b < n {
                    counts[a * n + b] += 1;
                }
            }
        }
        let probs = counts.chunks(n.max(1)).flat_map(normalize).collect();
        Self {
            num_locations: n,
            counts,
            probs,
            user_freq: user_counts.iter().map(|c| normalize(c)).collect(),
            global_freq: normalize(&global),
        }
    }

    pub fn row(&self, from: usize) -> Option<&[f64]> {
        if from >= self.num_locations {
            return None;
        }
        let n = self.num_locations;
        let row = &self.probs[from * n..(from + 1) * n];
        row.iter().any(|&p| p > 0.0).then_some(row)
    }

    /// Scores over known locations: the transition row of the last recent
    /// location, else the user's visit frequencies, else global frequencies.
    pub fn predict(&self, q: &QuerySample) -> Vec<f64> {
        if let Some(row) = self.row(q.current().location) {
            return row.to_vec();
        }
        match self.user_freq.get(q.user) {
            Some(f) if f.iter().any(|&p| p > 0.0) => f.clone(),
            _ => self.global_freq.clone(),
        }
    }
}
