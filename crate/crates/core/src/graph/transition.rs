use std::collections::BTreeMap;

use crate::data::{Level, Session, Split, Visit};

/// Directed visit-succession graph with integer edge counts.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionGraph {
    /// Out-edges per node, sorted by neighbor index.
    pub adjacency: Vec<Vec<(usize, u64)>>,
}

impl TransitionGraph {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); num_nodes],
        }
    }

    /// Builds a graph from explicit weighted edges; repeated edges add up.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, u64)>) -> Self {
        let mut maps = vec![BTreeMap::<usize, u64>::new(); num_nodes];
        for (a, b, w) in edges {
            if a < num_nodes && b < num_nodes && w > 0 {
                *maps[a].entry(b).or_default() += w;
            }
        }
        Self {
            adjacency: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, u64)] {
        &self.adjacency[node]
    }

    pub fn weight(&self, a: usize, b: usize) -> u64 {
        let row = &self.adjacency[a];
        row.binary_search_by_key(&b, |e| e.0).map_or(0, |i| row[i].1)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.weight(a, b) > 0
    }

    /// Nodes with at least one incoming or outgoing edge.
    pub fn connected_nodes(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes()];
        for (a, row) in self.adjacency.iter().enumerate() {
            for &(b, _) in row {
                seen[a] = true;
                seen[b] = true;
            }
        }
        seen
    }
}

fn node_of(v: &Visit, level: Level) -> Option<usize> {
    match level {
        Level::Location => Some(v.location),
        Level::Category => v.category,
    }
}

/// Counts within-session consecutive pairs of training sessions. Indices at
/// or beyond `num_nodes` (UNKNOWN) are ignored; self-loops are kept.
pub fn build_transition_graph<'a>(
    sessions: impl IntoIterator<Item = &'a Session>,
    level: Level,
    num_nodes: usize,
) -> TransitionGraph {
    let edges = sessions
        .into_iter()
        .filter(|s| s.split == Split::Train)
        .flat_map(|s| {
            s.visits
                .windows(2)
                .filter_map(|w| Some((node_of(&w[0], level)?, node_of(&w[1], level)?, 1)))
                .collect::<Vec<_>>()
        });
    TransitionGraph::from_edges(num_nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_pair_counts() {
        let g = TransitionGraph::from_edges(3, [(0, 1, 1), (0, 1, 1), (2, 2, 1)]);
        assert_eq!(g.weight(0, 1), 2);
        assert_eq!(g.weight(1, 0), 0);
        assert_eq!(g.weight(2, 2), 1);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn isolated_node() {
        let g = TransitionGraph::from_edges(2, []);
        assert_eq!(g.connected_nodes(), vec![false, false]);
        assert!(g.neighbors(0).is_empty());
    }
}
