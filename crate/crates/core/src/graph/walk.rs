use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transition::TransitionGraph;
use crate::digest::{combine_seed, sha256_hex};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negative_samples: usize,
    /// Not a config key: runs take it from the model's location or category width.
    #[serde(skip)]
    pub embedding_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Not a config key: runs derive it from the root seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            walks_per_node: 10,
            walk_length: 80,
            window: 5,
            negative_samples: 5,
            embedding_dim: 500,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.p > 0.0 && self.p.is_finite()) {
            errs.push("p must be > 0".into());
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            errs.push("q must be > 0".into());
        }
        for (name, v) in [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("negative_samples", self.negative_samples),
            ("embedding_dim", self.embedding_dim),
            ("epochs", self.epochs),
        ] {
            if v == 0 {
                errs.push(format!("{name} must be positive"));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            errs.push("learning_rate must be > 0".into());
        }
        errs
    }

    /// Digest of the settings, stored in embedding file headers.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        sha256_hex(format!("{json}/{}/{}", self.embedding_dim, self.seed).as_bytes())
    }
}

/// Precomputed alias tables for first- and second-order transitions.
pub struct Node2Vec<'g> {
    graph: &'g TransitionGraph,
    p: f64,
    q: f64,
    first: Vec<Option<WeightedAliasIndex<f64>>>,
    /// Sorted undirected neighbor lists, for the distance-1 test.
    undirected: Vec<Vec<usize>>,
    /// Alias table for each directed edge (t, v), indexed like `graph.adjacency[t]`.
    second: Option<Vec<Vec<Option<WeightedAliasIndex<f64>>>>>,
}

impl<'g> Node2Vec<'g> {
    pub fn new(graph: &'g TransitionGraph, p: f64, q: f64) -> Self {
        let first: Vec<_> = graph
            .adjacency
            .iter()
            .map(|row| {
                (!row.is_empty())
                    .then(|| WeightedAliasIndex::new(row.iter().map(|&(_, w)| w as f64).collect()).ok())
                    .flatten()
            })
            .collect();
        let mut undirected = vec![Vec::new(); graph.num_nodes()];
        for (a, row) in graph.adjacency.iter().enumerate() {
            for &(b, _) in row {
                undirected[a].push(b);
                undirected[b].push(a);
            }
        }
        for u in &mut undirected {
            u.sort_unstable();
            u.dedup();
        }
        let mut n2v = Self {
            graph,
            p,
            q,
            first,
            undirected,
            second: None,
        };
        // With p = q = 1 every bias is 1 and the first-order tables suffice.
        if p != 1.0 || q != 1.0 {
            let second = graph
                .adjacency
                .iter()
                .enumerate()
                .map(|(t, row)| {
                    row.iter()
                        .map(|&(v, _)| {
                            let w = n2v.biased_weights(t, v);
                            (!w.is_empty()).then(|| WeightedAliasIndex::new(w).ok()).flatten()
                        })
                        .collect()
                })
                .collect();
            n2v.second = Some(second);
        }
        n2v
    }

    /// Unnormalized second-order weights for stepping out of `v` having
    /// arrived from `t`, aligned with `graph.neighbors(v)`.
    pub fn biased_weights(&self, t: usize, v: usize) -> Vec<f64> {
        self.graph
            .neighbors(v)
            .iter()
            .map(|&(x, w)| {
                let bias = if x == t {
                    1.0 / self.p
                } else if self.undirected[t].binary_search(&x).is_ok() {
                    1.0
                } else {
                    1.0 / self.q
                };
                w as f64 * bias
            })
            .collect()
    }

    fn step(&self, prev: Option<usize>, cur: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        let nbrs = self.graph.neighbors(cur);
        let table = match (prev, &self.second) {
            (Some(t), Some(second)) => {
                let edge = self.graph.neighbors(t).binary_search_by_key(&cur, |e| e.0).ok()?;
                second[t][edge].as_ref()
            }
            _ => self.first[cur].as_ref(),
        }?;
        Some(nbrs[table.sample(rng)].0)
    }

    /// One walk starting at `start`; stops early at nodes without out-edges.
    pub fn walk(&self, start: usize, length: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        let mut prev = None;
        while walk.len() < length {
            let cur = *walk.last().unwrap();
            match self.step(prev, cur, rng) {
                Some(next) => {
                    prev = Some(cur);
                    walk.push(next);
                }
                None => break,
            }
        }
        walk
    }
}

/// `walks_per_node` rounds over every non-isolated node. Each round visits
/// nodes in a seeded shuffled order; each walk has its own derived seed so
/// walks can be generated in parallel.
pub fn node2vec_walks(graph: &TransitionGraph, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let n2v = Node2Vec::new(graph, cfg.p, cfg.q);
    let starts: Vec<usize> = graph
        .connected_nodes()
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| c.then_some(i))
        .collect();
    let mut walks = Vec::with_capacity(starts.len() * cfg.walks_per_node);
    for round in 0..cfg.walks_per_node {
        let mut order = starts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(combine_seed(&[cfg.seed, u64::MAX, round as u64]));
        order.shuffle(&mut rng);
        let batch: Vec<Vec<usize>> = order
            .par_iter()
            .map(|&node| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(combine_seed(&[cfg.seed, node as u64, round as u64]));
                n2v.walk(node, cfg.walk_length, &mut rng)
            })
            .collect();
        walks.extend(batch);
    }
    Ok(walks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WalkConfig {
        WalkConfig {
            walks_per_node: 3,
            walk_length: 10,
            ..Default::default()
        }
    }

    #[test]
    fn chain_walks_are_prefixes() {
        let g = TransitionGraph::from_edges(3, [(0, 1, 1), (1, 2, 1)]);
        let walks = node2vec_walks(&g, &cfg()).unwrap();
        for w in walks.iter().filter(|w| w[0] == 0) {
            assert_eq!(w, &vec![0, 1, 2]);
        }
    }

    #[test]
    fn isolated_nodes_emit_nothing() {
        let g = TransitionGraph::from_edges(4, [(0, 1, 1)]);
        let walks = node2vec_walks(&g, &cfg()).unwrap();
        assert_eq!(walks.len(), 6);
        assert!(walks.iter().all(|w| w[0] < 2));
    }

    #[test]
    fn bias_factors() {
        // 0 -> 1, 1 -> {0, 2, 3}, 0 -- 2 connected.
        let g = TransitionGraph::from_edges(4, [(0, 1, 1), (1, 0, 2), (1, 2, 1), (1, 3, 4), (2, 0, 1)]);
        let n2v = Node2Vec::new(&g, 2.0, 0.5);
        assert_eq!(n2v.biased_weights(0, 1), vec![2.0 / 2.0, 1.0, 4.0 / 0.5]);
    }

    #[test]
    fn rejects_bad_config() {
        let g = TransitionGraph::from_edges(2, [(0, 1, 1)]);
        let bad = WalkConfig { q: 0.0, ..cfg() };
        assert!(node2vec_walks(&g, &bad).is_err());
    }
}
