use std::collections::BTreeSet;

use crate::data::{Session, Split, SLOTS};
use crate::numeric::tensor::softmax;

/// 48×48 Jaccard similarity of the location sets visited in each slot.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeCorrelation {
    /// Row-major `[48 × 48]`.
    pub gamma: Vec<f64>,
    /// Row `c` is the slot distribution softmax(Γ[c]).
    distributions: Vec<f64>,
}

impl TimeCorrelation {
    pub fn from_gamma(gamma: Vec<f64>) -> Self {
        assert_eq!(gamma.len(), SLOTS * SLOTS, "Γ must be 48×48");
        let distributions = (0..SLOTS)
            .flat_map(|c| softmax(&gamma[c * SLOTS..(c + 1) * SLOTS]))
            .collect();
        Self {
            gamma,
            distributions,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * SLOTS + j]
    }

    /// β over the 48 slots for a query at `current_slot`.
    pub fn slot_distribution(&self, current_slot: u8) -> &[f64] {
        let c = current_slot as usize;
        &self.distributions[c * SLOTS..(c + 1) * SLOTS]
    }
}

/// Γ[i][j] = |T_i ∩ T_j| / |T_i ∪ T_j| over training visits, 0 if both empty.
pub fn build_time_correlation<'a>(sessions: impl IntoIterator<Item = &'a Session>) -> TimeCorrelation {
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); SLOTS];
    for s in sessions.into_iter().filter(|s| s.split == Split::Train) {
        for v in &s.visits {
            sets[v.slot as usize].insert(v.location);
        }
    }
    let mut gamma = vec![0.0; SLOTS * SLOTS];
    for i in 0..SLOTS {
        for j in i..SLOTS {
            let inter = sets[i].intersection(&sets[j]).count();
            let union = sets[i].len() + sets[j].len() - inter;
            let g = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
            gamma[i * SLOTS + j] = g;
            gamma[j * SLOTS + i] = g;
        }
    }
    TimeCorrelation::from_gamma(gamma)
}

/// Position weights β[slot_k] with β = softmax over slots of Γ[current].
pub fn time_weights(current_slot: u8, sequence_slots: &[u8], tc: &TimeCorrelation) -> Vec<f64> {
    let beta = tc.slot_distribution(current_slot);
    sequence_slots.iter().map(|&s| beta[s as usize]).collect()
}
