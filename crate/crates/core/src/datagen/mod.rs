//! Construction of every evaluation-set variant: iSTS conversion, negative
//! mixing, synthetic documents, sentence permutation and cross-lingual pairing.
//!
//! All randomness is drawn from ChaCha8 streams seeded by the caller, so each
//! operation is a pure function of its input and seed.

mod crosslingual;
mod documents;
mod ists;
mod negatives;
mod permutation;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::document::{SentenceSpan, Token, TokenizedDocument};
use crate::error::{Error, Result};

pub use crosslingual::{make_crosslingual, TranslationRecord, Translations};
pub use documents::build_documents;
pub use ists::{convert_ists, parse_ists, ChunkAlignment, IstsPair};
pub use negatives::{add_negatives, negatives_needed, paraphrase_to_pair, parse_paraphrase_tsv, ParaphrasePair};
pub use permutation::{inversion_count, max_inversions, permute_dataset, permute_document, InversionSampler};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the substream owned by one pair: `seed ^ hash(pair_id)`.
pub fn pair_seed(seed: u64, pair_id: &str) -> u64 {
    let digest = Sha256::digest(pair_id.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Parameters of one cumulative dataset variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub negatives_ratio: f64,
    pub doc_size: usize,
    pub inversions: usize,
    pub target_language: Option<String>,
    pub seed: u64,
}

impl SynthesisPlan {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.negatives_ratio) {
            return Err(Error::Argument(format!(
                "ratio {} outside [0, 1]",
                self.negatives_ratio
            )));
        }
        if self.doc_size == 0 {
            return Err(Error::Argument("document size must be positive".into()));
        }
        if self.inversions > max_inversions(self.doc_size) {
            return Err(Error::Argument(format!(
                "{} inversions impossible with {} sentences",
                self.inversions, self.doc_size
            )));
        }
        Ok(())
    }
}

/// Concatenates documents. A part without sentence spans becomes one sentence
/// tagged with the given origin; parts that already have spans keep them.
/// Special tokens are dropped.
pub(crate) fn concat(language: &str, parts: &[(&TokenizedDocument, Option<&str>)]) -> TokenizedDocument {
    let mut out = TokenizedDocument {
        language: language.to_string(),
        words: Vec::new(),
        tokens: Vec::new(),
        sentences: Vec::new(),
    };
    for (doc, origin) in parts {
        let offset = out.words.len();
        out.words.extend(doc.words.iter().cloned());
        out.tokens
            .extend(doc.tokens.iter().filter(|t| !t.is_special).map(|t| Token {
                word_index: t.word_index + offset,
                ..t.clone()
            }));
        if doc.sentences.is_empty() {
            out.sentences.push(SentenceSpan {
                start: offset,
                end: offset + doc.words.len(),
                origin: origin.map(str::to_string),
            });
        } else {
            out.sentences.extend(doc.sentences.iter().map(|s| SentenceSpan {
                start: s.start + offset,
                end: s.end + offset,
                origin: s.origin.clone(),
            }));
        }
    }
    out
}

/// Splits a document along its sentence spans into single-sentence documents.
pub(crate) fn split_sentences(doc: &TokenizedDocument) -> Vec<(TokenizedDocument, Option<String>)> {
    doc.sentence_spans()
        .into_iter()
        .map(|span| {
            let tokens = doc
                .tokens
                .iter()
                .filter(|t| !t.is_special && (span.start..span.end).contains(&t.word_index))
                .map(|t| Token {
                    word_index: t.word_index - span.start,
                    ..t.clone()
                })
                .collect();
            let piece = TokenizedDocument {
                language: doc.language.clone(),
                words: doc.words[span.start..span.end].to_vec(),
                tokens,
                sentences: Vec::new(),
            };
            (piece, span.origin)
        })
        .collect()
}
