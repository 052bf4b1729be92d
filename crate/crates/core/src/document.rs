//! Tokenized documents, labeled pairs and the bookkeeping between subword
//! tokens and words.
//!
//! Every document keeps two parallel views: `words` (the unit that carries gold
//! labels and is evaluated) and `tokens` (the unit an encoder sees). Each
//! non-special token points at its word through `word_index`; special encoder
//! delimiters belong to no word.

use std::fmt;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Ists,
    Paws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub word_index: usize,
    pub is_punctuation: bool,
    pub is_special: bool,
}

/// A word with its gold label; `None` means unlabeled, which is distinct from 0.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub surface: String,
    pub gold_label: Option<f64>,
}

impl Word {
    pub fn new(surface: impl Into<String>, gold_label: Option<f64>) -> Self {
        Self {
            surface: surface.into(),
            gold_label,
        }
    }
}

/// A sentence inside a synthetic document, as a half-open range of word indices.
/// `origin` names the sentence pair the sentence was taken from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub language: String,
    pub words: Vec<Word>,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<SentenceSpan>,
}

static PUNCTUATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{P}+$").unwrap());

/// True iff the surface is non-empty and every character is in a Unicode `P*` category.
pub fn is_punctuation_word(surface: &str) -> bool {
    PUNCTUATION.is_match(surface)
}

/// Lowercase hex SHA-256 of the NUL-joined token surfaces.
pub fn content_hash<S: AsRef<str>>(surfaces: &[S]) -> String {
    let mut hasher = Sha256::new();
    for (i, s) in surfaces.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(s.as_ref().as_bytes());
    }
    hex::encode(hasher.finalize())
}

impl TokenizedDocument {
    /// One token per word, punctuation flags set from the word surfaces.
    pub fn from_words(language: impl Into<String>, words: Vec<Word>) -> Self {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                surface: w.surface.clone(),
                word_index: i,
                is_punctuation: false,
                is_special: false,
            })
            .collect();
        mark_punctuation(Self {
            language: language.into(),
            words,
            tokens,
            sentences: Vec::new(),
        })
    }

    /// Splits `text` on whitespace; every word gets the same label.
    pub fn from_text(language: impl Into<String>, text: &str, label: Option<f64>) -> Self {
        let words = text.split_whitespace().map(|w| Word::new(w, label)).collect();
        Self::from_words(language, words)
    }

    /// Wraps the token sequence in a leading and trailing special token.
    pub fn with_delimiters(mut self, bos: &str, eos: &str) -> Self {
        let last_word = self.words.len().saturating_sub(1);
        self.tokens.insert(
            0,
            Token {
                surface: bos.to_string(),
                word_index: 0,
                is_punctuation: false,
                is_special: true,
            },
        );
        self.tokens.push(Token {
            surface: eos.to_string(),
            word_index: last_word,
            is_punctuation: false,
            is_special: true,
        });
        self
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn non_special_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_special).count()
    }

    pub fn special_mask(&self) -> Vec<bool> {
        self.tokens.iter().map(|t| t.is_special).collect()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn content_hash(&self) -> String {
        content_hash(&self.surfaces())
    }

    /// Number of sentences; a document without sentence metadata is one sentence.
    pub fn sentence_count(&self) -> usize {
        self.sentences.len().max(1)
    }

    /// Token range of every word. Fails if a word's tokens are missing or not contiguous.
    pub fn word_ranges(&self) -> Result<Vec<Range<usize>>> {
        let mut ranges: Vec<Option<Range<usize>>> = vec![None; self.words.len()];
        for (t, token) in self.tokens.iter().enumerate() {
            if token.is_special {
                continue;
            }
            let slot = ranges.get_mut(token.word_index).ok_or_else(|| {
                Error::Contract(format!(
                    "token {t} points at word {} of {}",
                    token.word_index,
                    self.words.len()
                ))
            })?;
            match slot {
                None => *slot = Some(t..t + 1),
                Some(r) if r.end == t => r.end = t + 1,
                Some(_) => {
                    return Err(Error::Contract(format!(
                        "tokens of word {} are not contiguous (token {t})",
                        token.word_index
                    )))
                }
            }
        }
        ranges
            .into_iter()
            .enumerate()
            .map(|(w, r)| r.ok_or_else(|| Error::Contract(format!("word {w} has no tokens"))))
            .collect()
    }

    /// A word is punctuation when its tokens carry the flag; wordless
    /// surfaces fall back to the surface test.
    pub fn word_is_punctuation(&self, word: usize) -> bool {
        let mut flags = self
            .tokens
            .iter()
            .filter(|t| !t.is_special && t.word_index == word)
            .map(|t| t.is_punctuation)
            .peekable();
        match flags.peek() {
            Some(_) => flags.all(|f| f),
            None => self.words.get(word).is_some_and(|w| is_punctuation_word(&w.surface)),
        }
    }

    /// Sentence spans, or a single span over all words when none are recorded.
    pub fn sentence_spans(&self) -> Vec<SentenceSpan> {
        if self.sentences.is_empty() {
            vec![SentenceSpan {
                start: 0,
                end: self.words.len(),
                origin: None,
            }]
        } else {
            self.sentences.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pair_id: String,
    pub source: Source,
    pub inversions: usize,
    pub side_a: TokenizedDocument,
    pub side_b: TokenizedDocument,
}

impl LabeledPair {
    pub fn side(&self, side: Side) -> &TokenizedDocument {
        match side {
            Side::A => &self.side_a,
            Side::B => &self.side_b,
        }
    }

    pub fn is_crosslingual(&self) -> bool {
        self.side_a.language != self.side_b.language
    }

    /// Sides whose predictions count towards evaluation: both for monolingual
    /// pairs, only the English side for cross-lingual ones.
    pub fn evaluated_sides(&self) -> Vec<Side> {
        if self.is_crosslingual() {
            [Side::A, Side::B]
                .into_iter()
                .filter(|&s| self.side(s).language == "en")
                .collect()
        } else {
            vec![Side::A, Side::B]
        }
    }
}

/// Predicted scores for one side of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub pair_id: String,
    pub side: Side,
    pub token_scores: Vec<f64>,
    pub word_scores: Vec<f64>,
}

impl ScoreVector {
    pub fn from_tokens(pair_id: &str, side: Side, token_scores: Vec<f64>, doc: &TokenizedDocument) -> Result<Self> {
        let word_scores = aggregate_subword_to_word(&token_scores, doc)?;
        Ok(Self {
            pair_id: pair_id.to_string(),
            side,
            token_scores,
            word_scores,
        })
    }
}

/// Mean of each word's token scores. Special tokens are ignored.
pub fn aggregate_subword_to_word(token_scores: &[f64], doc: &TokenizedDocument) -> Result<Vec<f64>> {
    if token_scores.len() != doc.token_count() {
        return Err(Error::Contract(format!(
            "{} token scores for a document of {} tokens",
            token_scores.len(),
            doc.token_count()
        )));
    }
    let ranges = doc.word_ranges()?;
    Ok(ranges
        .into_iter()
        .map(|r| {
            let n = r.len() as f64;
            token_scores[r].iter().sum::<f64>() / n
        })
        .collect())
}

/// Sets `is_punctuation` on every token from its word's surface.
pub fn mark_punctuation(mut doc: TokenizedDocument) -> TokenizedDocument {
    let flags: Vec<bool> = doc.words.iter().map(|w| is_punctuation_word(&w.surface)).collect();
    for token in doc.tokens.iter_mut() {
        token.is_punctuation = !token.is_special && flags.get(token.word_index).copied().unwrap_or(false);
    }
    doc
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}]: {}", self.field, i, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn violation(field: impl Into<String>, index: Option<usize>, message: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        index,
        message: message.into(),
    }
}

fn validate_side(doc: &TokenizedDocument, name: &str, out: &mut Vec<Violation>) {
    let tokens = format!("{name}.tokens");
    let words = format!("{name}.words");

    let mut previous: Option<usize> = None;
    let mut seen = vec![false; doc.words.len()];
    let mut last_token_of_word: Vec<Option<usize>> = vec![None; doc.words.len()];
    for (t, token) in doc.tokens.iter().enumerate() {
        if let Some(p) = previous {
            if token.word_index < p {
                out.push(violation(
                    &tokens,
                    Some(t),
                    format!("word_index {} decreases after {p}", token.word_index),
                ));
            }
        }
        previous = Some(token.word_index);
        if token.is_special {
            continue;
        }
        if token.surface.is_empty() {
            out.push(violation(&tokens, Some(t), "empty surface"));
        }
        let Some(flag) = seen.get_mut(token.word_index) else {
            out.push(violation(
                &tokens,
                Some(t),
                format!(
                    "word_index {} out of range ({} words)",
                    token.word_index,
                    doc.words.len()
                ),
            ));
            continue;
        };
        *flag = true;
        if let Some(last) = last_token_of_word[token.word_index] {
            if last + 1 != t && doc.tokens[last + 1..t].iter().all(|x| x.is_special) {
                out.push(violation(&tokens, Some(t), "special token inside a word"));
            }
        }
        last_token_of_word[token.word_index] = Some(t);
    }
    for (w, covered) in seen.iter().enumerate() {
        if !covered {
            out.push(violation(&words, Some(w), "word has no tokens"));
        }
    }
    for (w, word) in doc.words.iter().enumerate() {
        if let Some(label) = word.gold_label {
            if !(0.0..=1.0).contains(&label) {
                out.push(violation(&words, Some(w), format!("gold label {label} outside [0, 1]")));
            }
        }
        let mut flags = doc
            .tokens
            .iter()
            .filter(|t| !t.is_special && t.word_index == w)
            .map(|t| t.is_punctuation);
        if let Some(first) = flags.next() {
            if flags.any(|f| f != first) {
                out.push(violation(&words, Some(w), "tokens disagree on punctuation flag"));
            }
        }
    }
    let mut expected_start = 0;
    for (s, span) in doc.sentences.iter().enumerate() {
        if span.start != expected_start || span.end <= span.start || span.end > doc.words.len() {
            out.push(violation(
                format!("{name}.sentences"),
                Some(s),
                format!(
                    "span {}..{} does not continue at word {expected_start}",
                    span.start, span.end
                ),
            ));
        }
        expected_start = span.end;
    }
    if !doc.sentences.is_empty() && expected_start != doc.words.len() {
        out.push(violation(
            format!("{name}.sentences"),
            None,
            format!("spans cover {expected_start} of {} words", doc.words.len()),
        ));
    }
}

/// Checks every structural invariant of a pair. An empty result means the pair is well formed.
pub fn validate_pair(pair: &LabeledPair) -> Vec<Violation> {
    let mut out = Vec::new();
    if pair.pair_id.is_empty() {
        out.push(violation("pair_id", None, "empty identifier"));
    }
    validate_side(&pair.side_a, "side_a", &mut out);
    validate_side(&pair.side_b, "side_b", &mut out);
    if pair.side_a.language != "en" && pair.side_b.language != "en" {
        out.push(violation(
            "language",
            None,
            format!("no English side ({} vs {})", pair.side_a.language, pair.side_b.language),
        ));
    }
    let k = pair.side_b.sentence_count();
    let max_inversions = k * (k - 1) / 2;
    if pair.inversions > max_inversions {
        out.push(violation(
            "inversions",
            None,
            format!("{} exceeds {max_inversions} for {k} sentences", pair.inversions),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[(&str, Option<f64>)]) -> TokenizedDocument {
        TokenizedDocument::from_words("en", words.iter().map(|(s, l)| Word::new(*s, *l)).collect())
    }

    /// "unbelievable" split into three subwords, then "!".
    fn subword_doc() -> TokenizedDocument {
        let mut d = doc(&[("Nice", Some(0.0)), ("unbelievable", Some(1.0)), ("!", None)]);
        d.tokens = ["Nice", "un", "believ", "able", "!"]
            .iter()
            .zip([0, 1, 1, 1, 2])
            .map(|(s, w)| Token {
                surface: s.to_string(),
                word_index: w,
                is_punctuation: false,
                is_special: false,
            })
            .collect();
        mark_punctuation(d).with_delimiters("<s>", "</s>")
    }

    fn pair(a: TokenizedDocument, b: TokenizedDocument) -> LabeledPair {
        LabeledPair {
            pair_id: "p0".into(),
            source: Source::Ists,
            inversions: 0,
            side_a: a,
            side_b: b,
        }
    }

    #[test]
    fn aggregation_means() {
        let d = doc(&[("a", None), ("b", None), ("c", None)]);
        let mut d = d;
        d.tokens = [(0, "a1"), (0, "a2"), (1, "b"), (2, "c1"), (2, "c2"), (2, "c3")]
            .iter()
            .map(|&(w, s)| Token {
                surface: s.into(),
                word_index: w,
                is_punctuation: false,
                is_special: false,
            })
            .collect();
        let words = aggregate_subword_to_word(&[0.2, 0.4, 0.7, 1.0, 0.0, 1.0], &d).unwrap();
        assert!((words[0] - 0.3).abs() < 1e-15);
        assert_eq!(words[1], 0.7);
        assert!((words[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn aggregation_skips_special_tokens() {
        let d = subword_doc();
        assert_eq!(d.token_count(), 7);
        let scores = [99.0, 0.1, 0.2, 0.4, 0.6, 0.5, -99.0];
        let words = aggregate_subword_to_word(&scores, &d).unwrap();
        assert_eq!(words.len(), 3);
        assert_eq!(words[0], 0.1);
        assert!((words[1] - 0.4).abs() < 1e-15);
        assert_eq!(words[2], 0.5);
    }

    #[test]
    fn aggregation_length_mismatch() {
        let d = subword_doc();
        let err = aggregate_subword_to_word(&[0.0; 3], &d).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn punctuation_rule() {
        assert!(is_punctuation_word("!"));
        assert!(is_punctuation_word("..."));
        assert!(is_punctuation_word("«"));
        assert!(!is_punctuation_word("sweater"));
        assert!(!is_punctuation_word("U.S."));
        assert!(!is_punctuation_word(""));
        assert!(!is_punctuation_word("$"));
        let d = subword_doc();
        assert!(d.word_is_punctuation(2));
        assert!(!d.word_is_punctuation(1));
        assert!(d.tokens.iter().filter(|t| t.is_punctuation).all(|t| t.surface == "!"));
    }

    #[test]
    fn well_formed_pair_has_no_violations() {
        let p = pair(
            subword_doc(),
            doc(&[("Great", Some(0.0)), ("news", Some(1.0)), ("!", None)]),
        );
        assert_eq!(validate_pair(&p), vec![]);
    }

    #[test]
    fn overlapping_word_range_is_one_violation() {
        let mut a = doc(&[("x", None), ("y", None), ("z", None)]);
        // token 2 jumps back into word 0 while word 2 is covered by token 3
        a.tokens = [(0, "x"), (1, "y"), (0, "x2"), (2, "z")]
            .iter()
            .map(|&(w, s)| Token {
                surface: s.into(),
                word_index: w,
                is_punctuation: false,
                is_special: false,
            })
            .collect();
        let p = pair(a, doc(&[("q", None)]));
        let v = validate_pair(&p);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "side_a.tokens");
        assert_eq!(v[0].index, Some(2));
    }

    #[test]
    fn two_non_english_sides_is_one_violation() {
        let mut a = doc(&[("Hallo", None)]);
        a.language = "de".into();
        let mut b = doc(&[("Bonjour", None)]);
        b.language = "fr".into();
        let v = validate_pair(&pair(a, b));
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "language");
    }

    #[test]
    fn inversion_bound_checked() {
        let mut p = pair(doc(&[("a", None)]), doc(&[("b", None), ("c", None)]));
        p.inversions = 1;
        assert_eq!(validate_pair(&p).len(), 1);
        p.side_b.sentences = vec![
            SentenceSpan {
                start: 0,
                end: 1,
                origin: None,
            },
            SentenceSpan {
                start: 1,
                end: 2,
                origin: None,
            },
        ];
        assert!(validate_pair(&p).is_empty());
    }

    #[test]
    fn content_hash_is_nul_joined() {
        assert_eq!(content_hash(&["a", "b"]), content_hash(&["a\0b"]));
        assert_ne!(content_hash(&["ab"]), content_hash(&["a", "b"]));
        assert_eq!(
            content_hash::<&str>(&[]),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn json_layout() {
        let p = pair(doc(&[("Nice", Some(0.0)), ("!", None)]), doc(&[("Great", Some(1.0))]));
        let line = serde_json::to_string(&p).unwrap();
        assert!(line.starts_with(r#"{"pair_id":"p0","source":"ISTS","inversions":0,"side_a":{"language":"en","words":[{"surface":"Nice","gold_label":0.0},{"surface":"!","gold_label":null}],"tokens":[{"surface":"Nice","word_index":0,"is_punctuation":false,"is_special":false}"#), "{line}");
        let back: LabeledPair = serde_json::from_str(&line).unwrap();
        assert_eq!(back, p);
    }
}
