//! Reader for iSTS `.wa` chunk alignment files and conversion to word labels.
//!
//! A `.wa` file is a sequence of blocks:
//!
//! ```text
//! <sentence id="12" status="">
//! // 12 killed in bus accident in Pakistan
//! // 10 killed in road accident in NW Pakistan
//! <source>
//! 1 12 :
//! ...
//! </source>
//! <translation>
//! 1 10 :
//! ...
//! </translation>
//! <alignment>
//! 1 <==> 1 // SIMI // 4 // 12 <==> 10
//! 0 <==> 6 // NOALI // NIL // -not aligned- <==> NW
//! </alignment>
//! </sentence>
//! ```
//!
//! Token indices are 1-based; `0` stands for "no chunk on this side".

use serde::{Deserialize, Serialize};

use crate::document::{is_punctuation_word, LabeledPair, Source, TokenizedDocument, Word};
use crate::error::{Diagnosed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkAlignment {
    pub source_token_indices: Vec<usize>,
    pub target_token_indices: Vec<usize>,
    pub alignment_type: String,
    /// `None` is the NIL score.
    pub score: Option<u8>,
    /// Line in the `.wa` file, for error messages.
    pub line: usize,
}

impl ChunkAlignment {
    fn has_type(&self, tag: &str) -> bool {
        self.alignment_type.split('_').any(|t| t.eq_ignore_ascii_case(tag))
    }

    pub fn is_opposite(&self) -> bool {
        self.has_type("OPPO")
    }

    pub fn is_unaligned(&self) -> bool {
        self.has_type("NOALI") || self.source_token_indices.is_empty() || self.target_token_indices.is_empty()
    }

    /// Word label of every word in the chunk: `1 - score / 5`, where opposites
    /// count as score 0 and unaligned or NIL chunks as similarity 0.
    pub fn label(&self) -> f64 {
        let score = match self.score {
            _ if self.is_unaligned() => 0,
            None => 0,
            Some(_) if self.is_opposite() => 0,
            Some(s) => s,
        };
        // (5 - s) / 5 is exact for every integer score; 1 - s / 5 is not (s = 4 gives 0.19999999999999996)
        f64::from(5 - score) / 5.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IstsPair {
    pub id: String,
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub alignments: Vec<ChunkAlignment>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_indices(text: &str, line: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for field in text.split_whitespace() {
        let idx: usize = field
            .parse()
            .map_err(|_| parse_error(line, format!("token index '{field}' is not a number")))?;
        if idx > 0 {
            out.push(idx);
        }
    }
    Ok(out)
}

fn parse_alignment(text: &str, line: usize) -> Result<ChunkAlignment> {
    let parts: Vec<&str> = text.splitn(4, "//").collect();
    if parts.len() < 3 {
        return Err(parse_error(
            line,
            "expected 'indices <==> indices // TYPE // SCORE // comment'",
        ));
    }
    let (source, target) = parts[0]
        .split_once("<==>")
        .ok_or_else(|| parse_error(line, "missing '<==>'"))?;
    let alignment_type = parts[1].trim().to_string();
    if alignment_type.is_empty() {
        return Err(parse_error(line, "empty alignment type"));
    }
    let score = match parts[2].trim() {
        s if s.eq_ignore_ascii_case("NIL") => None,
        s => match s.parse::<u8>() {
            Ok(v) if v <= 5 => Some(v),
            _ => return Err(parse_error(line, format!("score '{s}' is neither NIL nor 0-5"))),
        },
    };
    Ok(ChunkAlignment {
        source_token_indices: parse_indices(source, line)?,
        target_token_indices: parse_indices(target, line)?,
        alignment_type,
        score,
        line,
    })
}

#[derive(Default)]
struct Block {
    id: Option<String>,
    start_line: usize,
    raw: Vec<String>,
    source: Vec<String>,
    target: Vec<String>,
    alignments: Vec<ChunkAlignment>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Source,
    Target,
    Alignment,
}

fn sentence_id(tag: &str) -> Option<String> {
    let rest = &tag[tag.find("id=\"")? + 4..];
    Some(rest[..rest.find('"')?].to_string())
}

fn finish(block: Block, count: usize) -> Result<IstsPair> {
    let from_raw = |i: usize| -> Vec<String> {
        block
            .raw
            .get(i)
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    };
    let source_tokens = if block.source.is_empty() {
        from_raw(0)
    } else {
        block.source
    };
    let target_tokens = if block.target.is_empty() {
        from_raw(1)
    } else {
        block.target
    };
    for al in &block.alignments {
        for (indices, len, name) in [
            (&al.source_token_indices, source_tokens.len(), "source"),
            (&al.target_token_indices, target_tokens.len(), "target"),
        ] {
            if let Some(&bad) = indices.iter().find(|&&i| i > len) {
                return Err(parse_error(
                    al.line,
                    format!("{name} token {bad} out of range for a {len}-token sentence"),
                ));
            }
        }
    }
    Ok(IstsPair {
        id: block.id.unwrap_or_else(|| count.to_string()),
        source_tokens,
        target_tokens,
        alignments: block.alignments,
    })
}

/// Parses every sentence block of a `.wa` file.
pub fn parse_ists(text: &str) -> Result<Vec<IstsPair>> {
    let mut pairs = Vec::new();
    let mut block: Option<(Block, Section)> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("<sentence") {
            if block.is_some() {
                return Err(parse_error(line_no, "nested <sentence>"));
            }
            let b = Block {
                id: sentence_id(line),
                start_line: line_no,
                ..Block::default()
            };
            block = Some((b, Section::Header));
            continue;
        }
        let Some((b, section)) = block.as_mut() else {
            return Err(parse_error(
                line_no,
                format!("content outside a sentence block: '{line}'"),
            ));
        };
        match line {
            "</sentence>" => {
                let (b, _) = block.take().unwrap();
                pairs.push(finish(b, pairs.len() + 1)?);
            }
            "<source>" => *section = Section::Source,
            "<translation>" => *section = Section::Target,
            "<alignment>" => *section = Section::Alignment,
            "</source>" | "</translation>" | "</alignment>" => *section = Section::Header,
            _ => match *section {
                Section::Header => match line.strip_prefix("//") {
                    Some(sentence) => b.raw.push(sentence.trim().to_string()),
                    None => return Err(parse_error(line_no, format!("unexpected line '{line}'"))),
                },
                Section::Source | Section::Target => {
                    let mut fields = line.split_whitespace();
                    let index = fields.next().and_then(|f| f.parse::<usize>().ok());
                    let token = fields.next();
                    let tokens = if *section == Section::Source {
                        &mut b.source
                    } else {
                        &mut b.target
                    };
                    match (index, token) {
                        (Some(idx), Some(tok)) if idx == tokens.len() + 1 => tokens.push(tok.to_string()),
                        _ => return Err(parse_error(line_no, format!("malformed token line '{line}'"))),
                    }
                }
                Section::Alignment => b.alignments.push(parse_alignment(line, line_no)?),
            },
        }
    }
    if let Some((b, _)) = block {
        return Err(parse_error(b.start_line, "unterminated <sentence> block"));
    }
    Ok(pairs)
}

fn side_labels(
    tokens: &[String],
    alignments: &[ChunkAlignment],
    indices: impl Fn(&ChunkAlignment) -> &Vec<usize>,
    pair_id: &str,
    side: &str,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<Word>> {
    let mut owner: Vec<Option<&ChunkAlignment>> = vec![None; tokens.len()];
    for al in alignments {
        for &idx in indices(al) {
            let slot = &mut owner[idx - 1];
            if let Some(previous) = slot {
                return Err(Error::Conversion(format!(
                    "{pair_id}: {side} token {idx} is covered by the alignments on lines {} and {}",
                    previous.line, al.line
                )));
            }
            *slot = Some(al);
        }
    }
    Ok(tokens
        .iter()
        .zip(owner)
        .enumerate()
        .map(|(i, (surface, owner))| {
            let label = if is_punctuation_word(surface) {
                None
            } else if let Some(al) = owner {
                Some(al.label())
            } else {
                diagnostics.push(format!("{pair_id}: {side} token {} '{surface}' is in no chunk", i + 1));
                None
            };
            Word::new(surface.clone(), label)
        })
        .collect())
}

/// Turns parsed alignments into labeled pairs with ids `{id_prefix}{id}`.
pub fn convert_ists(pairs: &[IstsPair], id_prefix: &str) -> Result<Diagnosed<Vec<LabeledPair>>> {
    let mut diagnostics = Vec::new();
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let pair_id = format!("{id_prefix}{}", p.id);
        let a = side_labels(
            &p.source_tokens,
            &p.alignments,
            |al| &al.source_token_indices,
            &pair_id,
            "source",
            &mut diagnostics,
        )?;
        let b = side_labels(
            &p.target_tokens,
            &p.alignments,
            |al| &al.target_token_indices,
            &pair_id,
            "target",
            &mut diagnostics,
        )?;
        out.push(LabeledPair {
            pair_id,
            source: Source::Ists,
            inversions: 0,
            side_a: TokenizedDocument::from_words("en", a),
            side_b: TokenizedDocument::from_words("en", b),
        });
    }
    Ok(Diagnosed::new(out, diagnostics))
}
