use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::concat;
use crate::document::{mark_punctuation, LabeledPair, Side, Token, TokenizedDocument, Word};
use crate::error::{Error, Result};

/// One line of a translations file: a pre-tokenized translation of one side of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub pair_id: String,
    pub side: Side,
    pub language: String,
    pub tokens: Vec<Token>,
    pub words: Vec<Word>,
}

#[derive(Debug, Clone, Default)]
pub struct Translations {
    docs: HashMap<(String, Side), TokenizedDocument>,
}

impl Translations {
    pub fn from_records(records: impl IntoIterator<Item = TranslationRecord>) -> Self {
        let docs = records
            .into_iter()
            .map(|r| {
                let doc = TokenizedDocument {
                    language: r.language,
                    words: r.words.into_iter().map(|w| Word::new(w.surface, None)).collect(),
                    tokens: r.tokens,
                    sentences: Vec::new(),
                };
                ((r.pair_id, r.side), mark_punctuation(doc))
            })
            .collect();
        Self { docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    fn get(&self, pair_id: &str, side: Side) -> Option<&TokenizedDocument> {
        self.docs.get(&(pair_id.to_string(), side))
    }

    /// Translation of one side. Synthetic documents without a translation of
    /// their own are assembled from the translations of their sentences, in
    /// the document's current sentence order.
    fn translate(&self, pair: &LabeledPair, side: Side, lang: &str) -> Result<TokenizedDocument> {
        let doc = match self.get(&pair.pair_id, side) {
            Some(doc) => doc.clone(),
            None => {
                let spans = &pair.side(side).sentences;
                if spans.is_empty() {
                    return Err(Error::MissingTranslation(format!("{} side {side}", pair.pair_id)));
                }
                let mut parts = Vec::with_capacity(spans.len());
                for span in spans {
                    let origin = span
                        .origin
                        .as_deref()
                        .ok_or_else(|| Error::MissingTranslation(format!("{} side {side}", pair.pair_id)))?;
                    let part = self.get(origin, side).ok_or_else(|| {
                        Error::MissingTranslation(format!("{origin} side {side} (in {})", pair.pair_id))
                    })?;
                    parts.push((part, Some(origin)));
                }
                concat(lang, &parts)
            }
        };
        if doc.language != lang {
            return Err(Error::Argument(format!(
                "translation of {} side {side} is '{}', expected '{lang}'",
                pair.pair_id, doc.language
            )));
        }
        Ok(doc)
    }
}

/// Emits two cross-lingual pairs per input pair: `A` against the translation
/// of `B` (id suffix `:{lang}:b`) and the translation of `A` against `B`
/// (suffix `:{lang}:a`). Translated sides carry no labels.
pub fn make_crosslingual(pairs: &[LabeledPair], translations: &Translations, lang: &str) -> Result<Vec<LabeledPair>> {
    if lang == "en" {
        return Err(Error::Argument("target language must differ from en".into()));
    }
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs {
        let b_translated = translations.translate(pair, Side::B, lang)?;
        let a_translated = translations.translate(pair, Side::A, lang)?;
        out.push(LabeledPair {
            pair_id: format!("{}:{lang}:b", pair.pair_id),
            side_b: b_translated,
            ..pair.clone()
        });
        out.push(LabeledPair {
            pair_id: format!("{}:{lang}:a", pair.pair_id),
            side_a: a_translated,
            ..pair.clone()
        });
    }
    Ok(out)
}
