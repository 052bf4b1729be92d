//! Encoder abstraction: per-token hidden states and masked cross-entropies.
//!
//! Two backends exist. [`MockEncoder`] derives context-free unit vectors from
//! token surfaces, which makes alignment ground truth computable in tests.
//! [`FixtureEncoder`] serves hidden states and entropies exported from a real
//! masked language model (see [`fixture`] for the on-disk layout).

pub mod fixture;
mod mock;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::document::{LabeledPair, Side, TokenizedDocument};
use crate::error::{Error, Result};

pub use fixture::{read_fixture_store, write_fixture_store, FixtureDocument, FixtureStore, Manifest};
pub use mock::MockEncoder;

/// Hidden states of one document at one layer, stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    layer: u32,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(layer: u32, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("embedding dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Contract(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite entry at flat index {i}")));
        }
        Ok(Self { layer, dim, data })
    }

    pub fn from_rows(layer: u32, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Contract("rows differ in length".into()));
        }
        Self::new(layer, dim, rows.concat())
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Applies `f` to every row, keeping the layer id.
    pub fn map_rows(&self, mut f: impl FnMut(&[f32]) -> Vec<f32>) -> Result<Self> {
        let rows: Vec<Vec<f32>> = self.rows().map(&mut f).collect();
        let mut out = Self::from_rows(self.layer, &rows)?;
        if rows.is_empty() {
            out.dim = self.dim;
        }
        Ok(out)
    }
}

/// Masked-LM cross-entropies (nats) of one token, without and with the other document as context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropies {
    pub h_alone: f64,
    pub h_with_context: f64,
}

/// One line of the cross-entropy file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEntropyRecord {
    pub pair_id: String,
    pub side: Side,
    pub token_index: usize,
    pub h_alone: f64,
    pub h_with_context: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossEntropyTable {
    entries: BTreeMap<(String, Side, usize), Entropies>,
}

impl CrossEntropyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pair_id: &str, side: Side, token_index: usize, entropies: Entropies) -> Result<()> {
        for (name, v) in [
            ("h_alone", entropies.h_alone),
            ("h_with_context", entropies.h_with_context),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Contract(format!(
                    "{name} = {v} for {pair_id}/{side}/{token_index} is not a finite nonnegative entropy"
                )));
            }
        }
        self.entries.insert((pair_id.to_string(), side, token_index), entropies);
        Ok(())
    }

    pub fn get(&self, pair_id: &str, side: Side, token_index: usize) -> Option<Entropies> {
        self.entries.get(&(pair_id.to_string(), side, token_index)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: CrossEntropyTable) {
        self.entries.extend(other.entries);
    }

    pub fn records(&self) -> Vec<CrossEntropyRecord> {
        self.entries
            .iter()
            .map(|((pair_id, side, token_index), e)| CrossEntropyRecord {
                pair_id: pair_id.clone(),
                side: *side,
                token_index: *token_index,
                h_alone: e.h_alone,
                h_with_context: e.h_with_context,
            })
            .collect()
    }

    pub fn from_records(records: impl IntoIterator<Item = CrossEntropyRecord>) -> Result<Self> {
        let mut table = Self::new();
        for r in records {
            table.insert(
                &r.pair_id,
                r.side,
                r.token_index,
                Entropies {
                    h_alone: r.h_alone,
                    h_with_context: r.h_with_context,
                },
            )?;
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum Backend {
    Mock { seed: u64, dim: usize },
    Fixture { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    #[serde(flatten)]
    pub backend: Backend,
    pub layer: u32,
}

impl EncoderSpec {
    pub fn mock(seed: u64, dim: usize, layer: u32) -> Self {
        Self {
            backend: Backend::Mock { seed, dim },
            layer,
        }
    }

    pub fn fixture(path: impl Into<PathBuf>, layer: u32) -> Self {
        Self {
            backend: Backend::Fixture { path: path.into() },
            layer,
        }
    }
}

pub trait Encoder: Send + Sync {
    fn layer(&self) -> u32;

    /// Hidden states for an arbitrary token sequence (used for partial re-encoding).
    fn encode_surfaces(&self, surfaces: &[&str]) -> Result<EmbeddingMatrix>;

    fn encode(&self, doc: &TokenizedDocument) -> Result<EmbeddingMatrix> {
        if doc.tokens.is_empty() {
            return Err(Error::Contract("cannot encode a document without tokens".into()));
        }
        let states = self.encode_surfaces(&doc.surfaces())?;
        if states.len() != doc.token_count() {
            return Err(Error::format(
                doc.content_hash(),
                format!("{} rows for {} tokens", states.len(), doc.token_count()),
            ));
        }
        Ok(states)
    }

    /// Entropies for every non-special token of `side`, masked one token at a time.
    fn mask_cross_entropy(&self, pair: &LabeledPair, side: Side) -> Result<CrossEntropyTable>;
}

pub fn open_encoder(spec: &EncoderSpec) -> Result<Arc<dyn Encoder>> {
    match &spec.backend {
        Backend::Mock { seed, dim } => Ok(Arc::new(MockEncoder::new(*seed, *dim, spec.layer)?)),
        Backend::Fixture { path } => {
            let store = Arc::new(read_fixture_store(path)?);
            Ok(Arc::new(FixtureEncoder::new(store, spec.layer)?))
        }
    }
}

/// Serves one layer of a [`FixtureStore`].
pub struct FixtureEncoder {
    store: Arc<FixtureStore>,
    layer: u32,
}

impl FixtureEncoder {
    pub fn new(store: Arc<FixtureStore>, layer: u32) -> Result<Self> {
        if !store.manifest().layers.contains(&layer) {
            return Err(Error::Config(format!(
                "layer {layer} not exported (available: {:?})",
                store.manifest().layers
            )));
        }
        Ok(Self { store, layer })
    }
}

impl Encoder for FixtureEncoder {
    fn layer(&self) -> u32 {
        self.layer
    }

    fn encode_surfaces(&self, surfaces: &[&str]) -> Result<EmbeddingMatrix> {
        let hash = crate::document::content_hash(surfaces);
        self.store.embeddings(&hash, self.layer).cloned()
    }

    fn mask_cross_entropy(&self, pair: &LabeledPair, side: Side) -> Result<CrossEntropyTable> {
        let mut table = CrossEntropyTable::new();
        for (i, token) in pair.side(side).tokens.iter().enumerate() {
            if token.is_special {
                continue;
            }
            let e = self
                .store
                .cross_entropy()
                .get(&pair.pair_id, side, i)
                .ok_or_else(|| Error::MissingFixture(format!("cross-entropy entry {}/{side}/{i}", pair.pair_id)))?;
            table.insert(&pair.pair_id, side, i, e)?;
        }
        Ok(table)
    }
}
