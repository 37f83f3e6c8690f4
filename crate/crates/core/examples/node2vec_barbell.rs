//! Embeds a barbell graph (two cliques joined by one edge) with node2vec and
//! compares cosine similarity inside and across the cliques.

use pg2net::data::Level;
use pg2net::graph::{cosine, embed_graph, node2vec_walks, WalkConfig};
use pg2net::synth::barbell_graph;

fn main() -> pg2net::Result<()> {
    let k = 8;
    let graph = barbell_graph(k);
    for (p, q) in [(1.0, 1.0), (1.0, 0.5), (1.0, 2.0)] {
        let cfg = WalkConfig {
            p,
            q,
            walks_per_node: 20,
            walk_length: 20,
            embedding_dim: 16,
            epochs: 3,
            seed: 9,
            ..Default::default()
        };
        let walks = node2vec_walks(&graph, &cfg)?;
        let table = embed_graph(&graph, Level::Location, &cfg, "barbell")?;
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for a in 0..2 * k {
            for b in a + 1..2 * k {
                let c = cosine(table.row(a), table.row(b));
                if (a < k) == (b < k) {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "p={p} q={q}: {} walks, intra-clique cosine {:.3}, across {:.3}, checksum {}",
            walks.len(),
            mean(&intra),
            mean(&inter),
            &table.checksum()[..12]
        );
    }
    Ok(())
}
