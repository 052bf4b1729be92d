use rand::seq::SliceRandom;

use super::rng;
use crate::document::{LabeledPair, Source, TokenizedDocument};
use crate::error::{Error, Result};

/// A human-verified paraphrase pair (label 1 in the source TSV).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParaphrasePair {
    pub id: String,
    pub sentence1: String,
    pub sentence2: String,
}

/// Reads a TSV with header columns `id`, `sentence1`, `sentence2`, `label`
/// and keeps the rows labeled `1`.
pub fn parse_paraphrase_tsv(text: &str) -> Result<Vec<ParaphrasePair>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty paraphrase file".into(),
    })?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let column = |name: &str| {
        columns.iter().position(|c| *c == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let (id, s1, s2, label) = (
        column("id")?,
        column("sentence1")?,
        column("sentence2")?,
        column("label")?,
    );
    let needed = id.max(s1).max(s2).max(label) + 1;

    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < needed {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {} columns, found {}", columns.len(), fields.len()),
            });
        }
        if fields[label].trim() == "1" {
            out.push(ParaphrasePair {
                id: fields[id].trim().to_string(),
                sentence1: fields[s1].to_string(),
                sentence2: fields[s2].to_string(),
            });
        }
    }
    Ok(out)
}

/// A negative example: every non-punctuation word labeled 0.
pub fn paraphrase_to_pair(p: &ParaphrasePair) -> LabeledPair {
    let side = |text: &str| {
        let mut doc = TokenizedDocument::from_text("en", text, Some(0.0));
        for (w, word) in doc.words.iter_mut().enumerate() {
            if doc.tokens[w].is_punctuation {
                word.gold_label = None;
            }
        }
        doc
    };
    LabeledPair {
        pair_id: format!("paws-{}", p.id),
        source: Source::Paws,
        inversions: 0,
        side_a: side(&p.sentence1),
        side_b: side(&p.sentence2),
    }
}

/// Number of negatives to add so that they make up `ratio` of the output.
pub fn negatives_needed(existing: usize, ratio: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Argument(format!("ratio {ratio} outside [0, 1]")));
    }
    if ratio == 0.0 || existing == 0 {
        return Ok(0);
    }
    if ratio == 1.0 {
        return Err(Error::Argument(
            "ratio 1 cannot be reached with a non-empty dataset".into(),
        ));
    }
    Ok((existing as f64 * ratio / (1.0 - ratio)).round() as usize)
}

/// Appends paraphrase pairs until they make up `ratio` of the result, then
/// shuffles the whole list. Both the selection and the order follow `seed`.
pub fn add_negatives(
    pairs: Vec<LabeledPair>,
    paraphrases: &[ParaphrasePair],
    ratio: f64,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    let needed = negatives_needed(pairs.len(), ratio)?;
    if needed == 0 {
        return Ok(pairs);
    }
    if paraphrases.len() < needed {
        return Err(Error::InsufficientSupply {
            required: needed,
            available: paraphrases.len(),
        });
    }
    let mut rng = rng(seed);
    let mut chosen: Vec<&ParaphrasePair> = paraphrases.iter().collect();
    chosen.shuffle(&mut rng);
    let mut out = pairs;
    out.extend(chosen[..needed].iter().map(|p| paraphrase_to_pair(p)));
    out.shuffle(&mut rng);
    Ok(out)
}
