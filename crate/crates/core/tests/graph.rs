mod common;

use std::collections::HashMap;

use common::pair_counts;
use pg2net::data::{Dataset, DatasetMode, Level, SessionConfig};
use pg2net::graph::{build_transition_graph, cosine, embed_graph, node2vec_walks, Node2Vec, TransitionGraph, WalkConfig};
use pg2net::synth::{barbell_graph, random_corpus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus() -> Dataset {
    Dataset::preprocess(random_corpus(30, 25, 300, 21), DatasetMode::Checkin, &SessionConfig::default()).0
}

#[test]
fn edge_weights_equal_pair_counts() {
    let ds = corpus();
    for (level, n) in [(Level::Location, ds.num_locations()), (Level::Category, ds.num_categories())] {
        let g = build_transition_graph(&ds.sessions, level, n);
        let oracle = pair_counts(&ds, level);
        let mut edges = 0;
        for a in 0..n {
            for &(b, w) in g.neighbors(a) {
                assert_eq!(oracle.get(&(a, b)).copied(), Some(w), "{level:?} {a}->{b}");
                edges += 1;
            }
        }
        assert_eq!(edges, oracle.len());
        assert_eq!(g.num_edges(), oracle.len());
    }
}

#[test]
fn unbiased_walk_steps_follow_edge_weights() {
    let g = TransitionGraph::from_edges(4, [(0, 1, 1), (0, 2, 3), (0, 3, 6), (1, 0, 1), (2, 0, 1), (3, 0, 1)]);
    let n2v = Node2Vec::new(&g, 1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 100_000;
    let mut hits: HashMap<usize, usize> = HashMap::new();
    for _ in 0..trials {
        let w = n2v.walk(0, 2, &mut rng);
        *hits.entry(w[1]).or_default() += 1;
    }
    for (node, p) in [(1, 0.1), (2, 0.3), (3, 0.6)] {
        let freq = hits[&node] as f64 / trials as f64;
        assert!((freq - p).abs() < 0.02, "node {node}: {freq} vs {p}");
    }
}

#[test]
fn biased_steps_follow_return_and_in_out_parameters() {
    // Triangle 0-1-2 plus a pendant 3 off node 1; walk arrives at 1 from 0.
    let und = [(0, 1), (1, 2), (0, 2), (1, 3)];
    let edges = und.iter().flat_map(|&(a, b)| [(a, b, 1), (b, a, 1)]);
    let g = TransitionGraph::from_edges(4, edges);
    let (p, q) = (2.0, 0.5);
    let n2v = Node2Vec::new(&g, p, q);
    // Neighbors of 1 are 0 (return), 2 (shared with 0), 3 (outward).
    let w = n2v.biased_weights(0, 1);
    assert_eq!(w, vec![1.0 / p, 1.0, 1.0 / q]);
    let total: f64 = w.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 100_000;
    let mut hits = [0usize; 4];
    let mut counted = 0;
    while counted < trials {
        let walk = n2v.walk(0, 3, &mut rng);
        if walk[1] == 1 {
            hits[walk[2]] += 1;
            counted += 1;
        }
    }
    for (node, wi) in [(0, w[0]), (2, w[1]), (3, w[2])] {
        let freq = hits[node] as f64 / trials as f64;
        assert!((freq - wi / total).abs() < 0.02, "node {node}: {freq}");
    }
}

#[test]
fn walks_are_seeded() {
    let g = barbell_graph(5);
    let cfg = WalkConfig {
        walks_per_node: 4,
        walk_length: 12,
        p: 0.7,
        q: 1.6,
        seed: 3,
        ..Default::default()
    };
    let a = node2vec_walks(&g, &cfg).unwrap();
    assert_eq!(a, node2vec_walks(&g, &cfg).unwrap());
    assert_eq!(a.len(), 4 * 10);
    assert!(a.iter().all(|w| w.len() == 12));
    for w in &a {
        for s in w.windows(2) {
            assert!(g.has_edge(s[0], s[1]));
        }
    }
    let other = WalkConfig { seed: 4, ..cfg };
    assert_ne!(a, node2vec_walks(&g, &other).unwrap());
}

#[test]
fn communities_separate_in_embedding_space() {
    let k = 8;
    let g = barbell_graph(k);
    let cfg = WalkConfig {
        walks_per_node: 20,
        walk_length: 20,
        embedding_dim: 16,
        epochs: 3,
        seed: 9,
        ..Default::default()
    };
    let t = embed_graph(&g, Level::Location, &cfg, "barbell").unwrap();
    assert_eq!((t.rows, t.dim), (2 * k, 16));
    assert!(t.is_finite());
    let (mut intra, mut inter) = (vec![], vec![]);
    for a in 0..2 * k {
        for b in a + 1..2 * k {
            let c = cosine(t.row(a), t.row(b));
            if (a < k) == (b < k) {
                intra.push(c)
            } else {
                inter.push(c)
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&intra) - mean(&inter) >= 0.2, "{} vs {}", mean(&intra), mean(&inter));
    assert_eq!(t.checksum(), embed_graph(&g, Level::Location, &cfg, "barbell").unwrap().checksum());
}

#[test]
fn isolated_nodes_keep_their_rows() {
    let g = TransitionGraph::from_edges(5, [(0, 1, 2), (1, 0, 1), (1, 2, 1), (2, 0, 1)]);
    let cfg = WalkConfig {
        walks_per_node: 5,
        walk_length: 10,
        embedding_dim: 4,
        epochs: 1,
        ..Default::default()
    };
    let t = embed_graph(&g, Level::Location, &cfg, "x").unwrap();
    assert_eq!(t.rows, 5);
    assert!(t.is_finite());
    let walks = node2vec_walks(&g, &cfg).unwrap();
    assert!(walks.iter().flatten().all(|&n| n < 3));
}
