use crate::data::{Dataset, Split, SLOTS};
use crate::error::{Error, Result};
use crate::numeric::tensor::softmax;

/// Category × slot visit counts from training data.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityBipartite {
    pub categories: usize,
    /// Row-major `[categories × 48]` raw counts.
    pub counts: Vec<f64>,
    /// Row `c` is softmax(counts[c] / max(counts[c])) over the 48 slots.
    distributions: Vec<f64>,
}

impl ActivityBipartite {
    pub fn from_counts(categories: usize, counts: Vec<f64>) -> Self {
        assert_eq!(counts.len(), categories * SLOTS, "activity counts must be C×48");
        let distributions = counts
            .chunks(SLOTS)
            .flat_map(|row| {
                let max = row.iter().cloned().fold(0.0, f64::max);
                let scaled: Vec<f64> = if max > 0.0 {
                    row.iter().map(|&c| c / max).collect()
                } else {
                    vec![0.0; SLOTS]
                };
                softmax(&scaled)
            })
            .collect();
        Self {
            categories,
            counts,
            distributions,
        }
    }

    pub fn count(&self, category: usize, slot: usize) -> f64 {
        self.counts[category * SLOTS + slot]
    }

    /// Slot distribution of a category; UNKNOWN categories get the uniform row.
    pub fn slot_distribution(&self, category: usize) -> Option<&[f64]> {
        (category < self.categories).then(|| &self.distributions[category * SLOTS..(category + 1) * SLOTS])
    }
}

pub fn build_activity_graph(ds: &Dataset) -> Result<ActivityBipartite> {
    if !ds.has_categories() {
        return Err(Error::UnsupportedMode {
            mode: "cdr",
            what: "activity priors need venue categories",
        });
    }
    let c = ds.num_categories();
    let mut counts = vec![0.0; c * SLOTS];
    for s in ds.sessions.iter().filter(|s| s.split == Split::Train) {
        for v in &s.visits {
            if let Some(cat) = v.category.filter(|&k| k < c) {
                counts[cat * SLOTS + v.slot as usize] += 1.0;
            }
        }
    }
    Ok(ActivityBipartite::from_counts(c, counts))
}

/// For each position with category c: softmax over slots of c's scaled
/// counts, read at `current_slot`.
pub fn activity_weights(current_slot: u8, sequence_categories: &[usize], a: &ActivityBipartite) -> Vec<f64> {
    sequence_categories
        .iter()
        .map(|&c| {
            a.slot_distribution(c)
                .map_or(1.0 / SLOTS as f64, |d| d[current_slot as usize])
        })
        .collect()
}
