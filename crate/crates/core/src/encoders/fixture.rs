//! On-disk store of exported hidden states and cross-entropies.
//!
//! Layout of a store directory:
//!
//! ```text
//! manifest.json        {version, dim, layers, documents: [{hash, token_count, file}], ce_file, masking}
//! <hash>.bin           one embedding blob per document
//! cross_entropy.jsonl  {pair_id, side, token_index, h_alone, h_with_context} per line
//! ```
//!
//! Embedding blob, all integers little-endian `u32`:
//! magic `RSDF`, version, layer_count, then per layer `layer_id`, `token_count`,
//! `dim` followed by `token_count * dim` little-endian `f32` values, row-major.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CrossEntropyRecord, CrossEntropyTable, EmbeddingMatrix};
use crate::document::content_hash;
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

pub const MAGIC: &[u8; 4] = b"RSDF";
pub const VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const CE_FILE: &str = "cross_entropy.jsonl";

fn single_token() -> String {
    "single_token".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDocument {
    pub hash: String,
    pub token_count: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dim: usize,
    pub layers: Vec<u32>,
    pub documents: Vec<ManifestDocument>,
    pub ce_file: Option<String>,
    /// How multi-subword words were masked by the exporter.
    #[serde(default = "single_token")]
    pub masking: String,
}

/// A document to export: its token surfaces and one matrix per layer.
#[derive(Debug, Clone)]
pub struct FixtureDocument {
    pub surfaces: Vec<String>,
    pub layers: Vec<EmbeddingMatrix>,
}

/// Read-only handle over a fully loaded store.
#[derive(Debug)]
pub struct FixtureStore {
    manifest: Manifest,
    documents: HashMap<String, BTreeMap<u32, EmbeddingMatrix>>,
    cross_entropy: CrossEntropyTable,
}

impl FixtureStore {
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn document_count(&self) -> usize {
        self.documents.len()
    }

    pub fn embeddings(&self, hash: &str, layer: u32) -> Result<&EmbeddingMatrix> {
        self.documents
            .get(hash)
            .ok_or_else(|| Error::MissingFixture(format!("document {hash}")))?
            .get(&layer)
            .ok_or_else(|| Error::MissingFixture(format!("document {hash} layer {layer}")))
    }

    pub fn cross_entropy(&self) -> &CrossEntropyTable {
        &self.cross_entropy
    }
}

fn encode_blob(layers: &[EmbeddingMatrix]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for m in layers {
        out.extend_from_slice(&m.layer().to_le_bytes());
        out.extend_from_slice(&(m.len() as u32).to_le_bytes());
        out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct BlobReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl BlobReader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.file, format!("truncated: wanted {n} bytes at offset {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn decode_blob(bytes: &[u8], file: &str) -> Result<Vec<EmbeddingMatrix>> {
    let mut r = BlobReader { bytes, pos: 0, file };
    if r.take(4)? != MAGIC {
        return Err(Error::format(file, "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(file, format!("unsupported version {version}")));
    }
    let layer_count = r.u32()?;
    let mut layers = Vec::with_capacity(layer_count as usize);
    for _ in 0..layer_count {
        let layer = r.u32()?;
        let tokens = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let raw = r.take(tokens * dim * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = EmbeddingMatrix::new(layer, dim, data).map_err(|e| Error::format(file, e.to_string()))?;
        layers.push(m);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(file, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(layers)
}

/// Writes a store. Documents with identical surfaces are stored once.
pub fn write_fixture_store(
    dir: &Path,
    dim: usize,
    layers: &[u32],
    documents: &[FixtureDocument],
    cross_entropy: &CrossEntropyTable,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries: Vec<ManifestDocument> = Vec::new();
    for doc in documents {
        let hash = content_hash(&doc.surfaces);
        if entries.iter().any(|e| e.hash == hash) {
            continue;
        }
        let exported: Vec<u32> = doc.layers.iter().map(EmbeddingMatrix::layer).collect();
        if exported != layers {
            return Err(Error::Contract(format!(
                "document {hash} has layers {exported:?}, store declares {layers:?}"
            )));
        }
        for m in &doc.layers {
            if m.dim() != dim || m.len() != doc.surfaces.len() {
                return Err(Error::Contract(format!(
                    "document {hash} layer {} is {}x{}, expected {}x{dim}",
                    m.layer(),
                    m.len(),
                    m.dim(),
                    doc.surfaces.len()
                )));
            }
        }
        let file = format!("{hash}.bin");
        let path = dir.join(&file);
        fs::write(&path, encode_blob(&doc.layers)).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestDocument {
            hash,
            token_count: doc.surfaces.len(),
            file,
        });
    }
    write_jsonl(&dir.join(CE_FILE), &cross_entropy.records())?;
    let manifest = Manifest {
        version: VERSION,
        dim,
        layers: layers.to_vec(),
        documents: entries,
        ce_file: Some(CE_FILE.to_string()),
        masking: single_token(),
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

/// Opens and fully validates a store.
pub fn read_fixture_store(dir: &Path) -> Result<FixtureStore> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(MANIFEST, e.to_string()))?;
    if manifest.version != VERSION {
        return Err(Error::format(
            MANIFEST,
            format!("unsupported version {}", manifest.version),
        ));
    }
    let mut documents = HashMap::new();
    for entry in &manifest.documents {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let layers = decode_blob(&bytes, &entry.file)?;
        let ids: Vec<u32> = layers.iter().map(EmbeddingMatrix::layer).collect();
        if ids != manifest.layers {
            return Err(Error::format(
                &entry.file,
                format!("layers {ids:?} differ from manifest {:?}", manifest.layers),
            ));
        }
        let mut by_layer = BTreeMap::new();
        for m in layers {
            if m.len() != entry.token_count {
                return Err(Error::format(
                    &entry.file,
                    format!("{} tokens, manifest says {}", m.len(), entry.token_count),
                ));
            }
            if m.dim() != manifest.dim {
                return Err(Error::format(
                    &entry.file,
                    format!("dimension {}, manifest says {}", m.dim(), manifest.dim),
                ));
            }
            by_layer.insert(m.layer(), m);
        }
        documents.insert(entry.hash.clone(), by_layer);
    }
    let cross_entropy = match &manifest.ce_file {
        Some(name) => {
            let records: Vec<CrossEntropyRecord> = read_jsonl(&dir.join(name))?;
            CrossEntropyTable::from_records(records).map_err(|e| Error::format(name, e.to_string()))?
        }
        None => CrossEntropyTable::new(),
    };
    Ok(FixtureStore {
        manifest,
        documents,
        cross_entropy,
    })
}
