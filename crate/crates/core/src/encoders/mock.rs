use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{CrossEntropyTable, EmbeddingMatrix, Encoder, Entropies};
use crate::document::{LabeledPair, Side};
use crate::error::{Error, Result};

/// Context-free stand-in for a neural encoder.
///
/// A token's row depends only on its surface and the seed, so identical
/// surfaces always get identical unit vectors. Entropies follow a fixed rule:
/// `h_alone` is drawn from `[0.5, 8)` per surface, and the other document
/// cuts it to a quarter when it contains the same surface.
#[derive(Debug, Clone)]
pub struct MockEncoder {
    seed: u64,
    dim: usize,
    layer: u32,
}

impl MockEncoder {
    pub const CONTEXT_FACTOR: f64 = 0.25;

    pub fn new(seed: u64, dim: usize, layer: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("mock dimension must be positive".into()));
        }
        Ok(Self { seed, dim, layer })
    }

    fn digest(&self, domain: &[u8], surface: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(domain);
        h.update(self.seed.to_le_bytes());
        h.update(surface.as_bytes());
        h.finalize().into()
    }

    pub fn row(&self, surface: &str) -> Vec<f32> {
        let mut rng = ChaCha8Rng::from_seed(self.digest(b"semdiff/embedding", surface));
        let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| (x / norm) as f32).collect()
    }

    pub fn h_alone(&self, surface: &str) -> f64 {
        let d = self.digest(b"semdiff/entropy", surface);
        let bits = u64::from_le_bytes(d[..8].try_into().unwrap());
        let unit = (bits >> 11) as f64 / (1u64 << 53) as f64;
        0.5 + 7.5 * unit
    }
}

impl Encoder for MockEncoder {
    fn layer(&self) -> u32 {
        self.layer
    }

    fn encode_surfaces(&self, surfaces: &[&str]) -> Result<EmbeddingMatrix> {
        let data = surfaces.iter().flat_map(|s| self.row(s)).collect();
        EmbeddingMatrix::new(self.layer, self.dim, data)
    }

    fn mask_cross_entropy(&self, pair: &LabeledPair, side: Side) -> Result<CrossEntropyTable> {
        let other: HashSet<&str> = pair
            .side(side.other())
            .tokens
            .iter()
            .filter(|t| !t.is_special)
            .map(|t| t.surface.as_str())
            .collect();
        let mut table = CrossEntropyTable::new();
        for (i, token) in pair.side(side).tokens.iter().enumerate() {
            if token.is_special {
                continue;
            }
            let h_alone = self.h_alone(&token.surface);
            let factor = if other.contains(token.surface.as_str()) {
                Self::CONTEXT_FACTOR
            } else {
                1.0
            };
            table.insert(
                &pair.pair_id,
                side,
                i,
                Entropies {
                    h_alone,
                    h_with_context: h_alone * factor,
                },
            )?;
        }
        Ok(table)
    }
}
