//! Frozen node embedding tables and their file format.
//!
//! ```text
//! magic          8 bytes  "PG2EMB\0\0"
//! version        u32      1
//! level          u8       0 = location, 1 = category
//! rows, dim      u64, u64
//! seed           u64
//! config digest  string (u32 length + utf-8)
//! vocab digest   string
//! data           f64 * rows * dim, row-major
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::skipgram::train_skipgram;
use super::transition::TransitionGraph;
use super::walk::{node2vec_walks, WalkConfig};
use crate::data::Level;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::numeric::checkpoint::Reader;

const MAGIC: &[u8; 8] = b"PG2EMB\0\0";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub level: Level,
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub seed: u64,
    pub config_digest: String,
    pub vocab_digest: String,
    pub frozen: bool,
}

impl EmbeddingTable {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Digest of the raw values; unchanged by any training run when frozen.
    pub fn checksum(&self) -> String {
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        sha256_hex(&bytes)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.level {
            Level::Location => 0,
            Level::Category => 1,
        });
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for s in [&self.config_digest, &self.vocab_digest] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |msg: String| Error::format(path, msg);
        let mut r = Reader::new(bytes);
        if r.take(8).map_err(fail)? != MAGIC {
            return Err(fail("not an embedding file".into()));
        }
        let version = r.u32().map_err(fail)?;
        if version != VERSION {
            return Err(fail(format!("unsupported embedding version {version}")));
        }
        let level = match r.u8().map_err(fail)? {
            0 => Level::Location,
            1 => Level::Category,
            t => return Err(fail(format!("unknown level tag {t}"))),
        };
        let rows = r.u64().map_err(fail)? as usize;
        let dim = r.u64().map_err(fail)? as usize;
        let seed = r.u64().map_err(fail)?;
        let config_digest = r.string().map_err(fail)?;
        let vocab_digest = r.string().map_err(fail)?;
        let n = rows.checked_mul(dim).ok_or_else(|| fail("size overflow".into()))?;
        let data = r.f64s(n).map_err(fail)?;
        if !r.finished() {
            return Err(fail("trailing bytes".into()));
        }
        Ok(Self {
            level,
            rows,
            dim,
            data,
            seed,
            config_digest,
            vocab_digest,
            frozen: true,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }

    /// Checks the table against the vocabulary it is about to index.
    pub fn verify(&self, level: Level, rows: usize, vocab_digest: &str) -> Result<()> {
        if self.level != level || self.rows != rows || self.vocab_digest != vocab_digest {
            return Err(Error::Checkpoint(format!(
                "{} embedding table ({} rows) does not match the {} vocabulary ({} rows)",
                self.level.as_str(),
                self.rows,
                level.as_str(),
                rows
            )));
        }
        Ok(())
    }
}

/// Walks plus skip-gram: the whole node2vec pipeline for one graph.
pub fn embed_graph(
    graph: &TransitionGraph,
    level: Level,
    cfg: &WalkConfig,
    vocab_digest: &str,
) -> Result<EmbeddingTable> {
    let walks = node2vec_walks(graph, cfg)?;
    let data = train_skipgram(&walks, graph.num_nodes(), cfg)?;
    Ok(EmbeddingTable {
        level,
        rows: graph.num_nodes(),
        dim: cfg.embedding_dim,
        data,
        seed: cfg.seed,
        config_digest: cfg.digest(),
        vocab_digest: vocab_digest.to_string(),
        frozen: true,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WalkConfig {
        WalkConfig {
            walks_per_node: 4,
            walk_length: 12,
            embedding_dim: 6,
            epochs: 2,
            ..Default::default()
        }
    }

    #[test]
    fn file_round_trip() {
        let g = TransitionGraph::from_edges(4, [(0, 1, 2), (1, 2, 1), (2, 0, 1)]);
        let t = embed_graph(&g, Level::Location, &small(), "abc").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loc.emb");
        t.save(&path).unwrap();
        let back = EmbeddingTable::load(&path).unwrap();
        assert_eq!(back, t);
        // Node 3 never appears in a walk.
        assert!(back.row(3).iter().all(|&v| v == 0.0));
        assert!(back.verify(Level::Location, 4, "abc").is_ok());
        assert!(back.verify(Level::Location, 4, "other").is_err());
    }

    #[test]
    fn same_seed_same_table() {
        let g = TransitionGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (2, 0, 3), (2, 1, 1)]);
        let a = embed_graph(&g, Level::Category, &small(), "").unwrap();
        let b = embed_graph(&g, Level::Category, &small(), "").unwrap();
        assert_eq!(a.checksum(), b.checksum());
        let c = embed_graph(&g, Level::Category, &WalkConfig { seed: 9, ..small() }, "").unwrap();
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn truncated_file_rejected() {
        let g = TransitionGraph::from_edges(2, [(0, 1, 1)]);
        let bytes = embed_graph(&g, Level::Location, &small(), "").unwrap().encode();
        assert!(EmbeddingTable::decode(&bytes[..bytes.len() - 3], Path::new("x")).is_err());
    }
}
