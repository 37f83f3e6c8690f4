use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};

use super::walk::WalkConfig;
use crate::digest::combine_seed;
use crate::error::{Error, Result};
use crate::numeric::tensor::sigmoid;

/// Seed stream tag separating skip-gram draws from walk draws.
const SKIPGRAM_STREAM: u64 = 0x736b_6970;

/// Skip-gram with negative sampling over `walks`. Returns the input-vector
/// matrix `[vocab × embedding_dim]`, row-major. Nodes that never occur in
/// any walk keep a zero row.
pub fn train_skipgram(walks: &[Vec<usize>], vocab: usize, cfg: &WalkConfig) -> Result<Vec<f64>> {
    let dim = cfg.embedding_dim;
    let mut counts = vec![0u64; vocab];
    for w in walks {
        for &n in w {
            if n >= vocab {
                return Err(Error::Index {
                    what: "embedding vocabulary",
                    index: n,
                    len: vocab,
                });
            }
            counts[n] += 1;
        }
    }
    if !walks.iter().any(|w| w.len() >= 2) {
        return Err(Error::Data("skip-gram needs at least one walk of length 2".into()));
    }

    let noise_weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let noise = WeightedAliasIndex::new(noise_weights)
        .map_err(|e| Error::Data(format!("negative sampling table: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(combine_seed(&[cfg.seed, SKIPGRAM_STREAM]));
    let mut syn0 = vec![0.0; vocab * dim];
    for (n, &c) in counts.iter().enumerate() {
        if c > 0 {
            for v in &mut syn0[n * dim..(n + 1) * dim] {
                *v = (rng.random::<f64>() - 0.5) / dim as f64;
            }
        }
    }
    let mut syn1 = vec![0.0; vocab * dim];
    let mut grad = vec![0.0; dim];

    let tokens: u64 = counts.iter().sum();
    let total = (tokens * cfg.epochs as u64).max(1) as f64;
    let min_lr = cfg.learning_rate * 1e-4;
    let mut seen = 0u64;
    for _ in 0..cfg.epochs {
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = (cfg.learning_rate * (1.0 - seen as f64 / total)).max(min_lr);
                seen += 1;
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(walk.len());
                for (j, &ctx) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let input = ctx * dim;
                    for d in 0..=cfg.negative_samples {
                        let (target, label) = if d == 0 {
                            (center, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = target * dim;
                        let f: f64 = (0..dim).map(|k| syn0[input + k] * syn1[out + k]).sum();
                        let g = (label - sigmoid(f)) * lr;
                        for k in 0..dim {
                            grad[k] += g * syn1[out + k];
                            syn1[out + k] += g * syn0[input + k];
                        }
                    }
                    for k in 0..dim {
                        syn0[input + k] += grad[k];
                    }
                }
            }
        }
    }
    Ok(syn0)
}
