//! Token-level difference metrics.
//!
//! * alignability: `1 - max_j cos(h(a_i), h(b_j))`
//! * deletability: change in mean-pooled similarity when `a_i` is left out of
//!   the average, mapped through `(sim' - sim + 1) / 2`
//! * masked-LM information gain: `1 - max(0, npmi)` with
//!   `npmi = (H(a_i|A') - H(a_i|B A')) / max(H(a_i|A'), H(a_i|B A'))`
//!
//! All functions score side A against side B; swap the arguments for side B.
//! Special tokens are never alignment candidates and never enter the mean, but
//! still receive a score so that score vectors stay parallel to the tokens.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::{LabeledPair, ScoreVector, Side, TokenizedDocument};
use crate::encoders::{CrossEntropyTable, EmbeddingMatrix, Encoder};
use crate::error::{Diagnosed, Error, Result};

/// Hidden states paired with the special-token mask of their document.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    pub states: EmbeddingMatrix,
    pub special: Vec<bool>,
}

impl EncodedDoc {
    pub fn new(states: EmbeddingMatrix, doc: &TokenizedDocument) -> Result<Self> {
        Self::with_mask(states, doc.special_mask())
    }

    pub fn with_mask(states: EmbeddingMatrix, special: Vec<bool>) -> Result<Self> {
        if states.len() != special.len() {
            return Err(Error::Contract(format!(
                "{} hidden states for {} tokens",
                states.len(),
                special.len()
            )));
        }
        Ok(Self { states, special })
    }

    /// Every row is a regular token.
    pub fn plain(states: EmbeddingMatrix) -> Self {
        let special = vec![false; states.len()];
        Self { states, special }
    }

    fn content_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.states
            .rows()
            .zip(&self.special)
            .filter(|(_, s)| !**s)
            .map(|(r, _)| r)
    }

    fn content_indices(&self) -> Vec<usize> {
        (0..self.special.len()).filter(|&i| !self.special[i]).collect()
    }

    /// Mean of the non-special rows, in `f64`.
    pub fn mean(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.states.dim()];
        let mut n = 0usize;
        for row in self.content_rows() {
            add_assign(&mut sum, row);
            n += 1;
        }
        sum.iter_mut().for_each(|v| *v /= n as f64);
        sum
    }
}

fn add_assign(acc: &mut [f64], row: &[f32]) {
    for (a, &x) in acc.iter_mut().zip(row) {
        *a += x as f64;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn to_f64(row: &[f32]) -> Vec<f64> {
    row.iter().map(|&x| x as f64).collect()
}

/// Cosine similarity, or `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    (denom > 0.0).then(|| dot(a, b) / denom)
}

fn check_pair(a: &EncodedDoc, b: &EncodedDoc) -> Result<()> {
    if a.states.dim() != b.states.dim() {
        return Err(Error::Contract(format!(
            "embedding dimensions differ: {} vs {}",
            a.states.dim(),
            b.states.dim()
        )));
    }
    for (name, d) in [("A", a), ("B", b)] {
        if d.content_rows().next().is_none() {
            return Err(Error::Contract(format!("side {name} has no non-special tokens")));
        }
    }
    Ok(())
}

/// `1 - max_j cos(h(a_i), h(b_j))` over the non-special rows of `b`. Range `[0, 2]`.
pub fn diff_align(a: &EncodedDoc, b: &EncodedDoc) -> Result<Diagnosed<Vec<f64>>> {
    check_pair(a, b)?;
    let candidates: Vec<(usize, Vec<f64>, f64)> = b
        .content_indices()
        .into_iter()
        .map(|j| {
            let v = to_f64(b.states.row(j));
            let n = norm(&v);
            (j, v, n)
        })
        .collect();
    let mut diagnostics = Vec::new();
    for &(j, _, n) in &candidates {
        if n == 0.0 {
            diagnostics.push(format!("B token {j} has a zero-norm hidden state"));
        }
    }
    let scores = (0..a.states.len())
        .map(|i| {
            let h = to_f64(a.states.row(i));
            let hn = norm(&h);
            if hn == 0.0 {
                diagnostics.push(format!("A token {i} has a zero-norm hidden state"));
            }
            let best = candidates
                .iter()
                .map(|(_, v, n)| {
                    if hn == 0.0 || *n == 0.0 {
                        0.0
                    } else {
                        dot(&h, v) / (hn * n)
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            1.0 - best
        })
        .collect();
    Ok(Diagnosed::new(scores, diagnostics))
}

/// Cosine between the mean-pooled non-special hidden states of both sides.
pub fn sentence_similarity(a: &EncodedDoc, b: &EncodedDoc) -> Result<Diagnosed<f64>> {
    check_pair(a, b)?;
    Ok(match cosine(&a.mean(), &b.mean()) {
        Some(s) => Diagnosed::clean(s),
        None => Diagnosed::new(0.0, vec!["zero-norm mean hidden state".into()]),
    })
}

/// Deletability of each token of `a`: `(sim(A \ a_i, B) - sim(A, B) + 1) / 2`,
/// where `A \ a_i` is approximated by `avg(A) - h(a_i) / |A|`.
///
/// With a single content token the remaining document is empty and its similarity is taken as 0.
pub fn diff_del(a: &EncodedDoc, b: &EncodedDoc) -> Result<Diagnosed<Vec<f64>>> {
    diff_del_ngram(a, b, 1)
}

struct DeletionContext {
    mean_a: Vec<f64>,
    mean_b: Vec<f64>,
    count: usize,
    sim: f64,
}

impl DeletionContext {
    fn new(a: &EncodedDoc, b: &EncodedDoc, diagnostics: &mut Vec<String>) -> Result<Self> {
        let sim = sentence_similarity(a, b)?;
        diagnostics.extend(sim.diagnostics);
        Ok(Self {
            mean_a: a.mean(),
            mean_b: b.mean(),
            count: a.content_indices().len(),
            sim: sim.value,
        })
    }

    /// Score for removing rows whose sum is `removed`.
    fn score(&self, removed: &[f64]) -> f64 {
        let n = self.count as f64;
        let partial: Vec<f64> = self.mean_a.iter().zip(removed).map(|(m, r)| m - r / n).collect();
        let partial_sim = cosine(&partial, &self.mean_b).unwrap_or(0.0);
        (partial_sim - self.sim + 1.0) / 2.0
    }

    fn empty_score(&self) -> f64 {
        (0.0 - self.sim + 1.0) / 2.0
    }
}

/// Deletability over contiguous n-grams of content tokens, `1 <= n <= ngram_max`.
/// A token takes the maximum score of all n-grams containing it. n-grams of
/// length two or more that span the whole document are skipped.
/// `ngram_max = 1` is exactly [`diff_del`].
pub fn diff_del_ngram(a: &EncodedDoc, b: &EncodedDoc, ngram_max: usize) -> Result<Diagnosed<Vec<f64>>> {
    if !(1..=3).contains(&ngram_max) {
        return Err(Error::Config(format!("ngram_max must be 1, 2 or 3, got {ngram_max}")));
    }
    let mut diagnostics = Vec::new();
    let ctx = DeletionContext::new(a, b, &mut diagnostics)?;
    let content = a.content_indices();
    let n = content.len();

    let mut scores: Vec<f64> = (0..a.states.len())
        .map(|i| {
            if n == 1 && !a.special[i] {
                ctx.empty_score()
            } else {
                ctx.score(&to_f64(a.states.row(i)))
            }
        })
        .collect();

    for len in 2..=ngram_max {
        if len >= n {
            break;
        }
        for start in 0..=n - len {
            let members = &content[start..start + len];
            let mut removed = vec![0.0; a.states.dim()];
            for &t in members {
                add_assign(&mut removed, a.states.row(t));
            }
            let s = ctx.score(&removed);
            for &t in members {
                if s > scores[t] {
                    scores[t] = s;
                }
            }
        }
    }
    Ok(Diagnosed::new(scores, diagnostics))
}

/// Deletability with every partial document encoded from scratch instead of
/// excluding the token from the mean.
pub fn diff_del_reencode(pair: &LabeledPair, side: Side, encoder: &dyn Encoder) -> Result<Diagnosed<Vec<f64>>> {
    let doc = pair.side(side);
    let other = pair.side(side.other());
    let a = EncodedDoc::new(encoder.encode(doc)?, doc)?;
    let b = EncodedDoc::new(encoder.encode(other)?, other)?;
    let mut diagnostics = Vec::new();
    let ctx = DeletionContext::new(&a, &b, &mut diagnostics)?;
    let surfaces = doc.surfaces();

    let mut scores = Vec::with_capacity(doc.token_count());
    for i in 0..doc.token_count() {
        let score = if a.special[i] {
            ctx.score(&to_f64(a.states.row(i)))
        } else if ctx.count == 1 {
            ctx.empty_score()
        } else {
            let partial_surfaces: Vec<&str> = surfaces
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, s)| *s)
                .collect();
            let mut mask = a.special.clone();
            mask.remove(i);
            let partial = EncodedDoc::with_mask(encoder.encode_surfaces(&partial_surfaces)?, mask)?;
            let partial_sim = match cosine(&partial.mean(), &ctx.mean_b) {
                Some(s) => s,
                None => {
                    diagnostics.push(format!("partial without token {i} has a zero-norm mean"));
                    0.0
                }
            };
            (partial_sim - ctx.sim + 1.0) / 2.0
        };
        scores.push(score);
    }
    Ok(Diagnosed::new(scores, diagnostics))
}

/// Normalized pointwise mutual information between a token and the added context.
/// Defined as 0 when both entropies are 0.
pub fn npmi(h_alone: f64, h_with_context: f64) -> f64 {
    let denom = h_alone.max(h_with_context);
    if denom == 0.0 {
        0.0
    } else {
        (h_alone - h_with_context) / denom
    }
}

/// `1 - max(0, npmi)` per token. Special tokens are never masked and score 0.
pub fn diff_mask(table: &CrossEntropyTable, pair: &LabeledPair, side: Side) -> Result<Vec<f64>> {
    pair.side(side)
        .tokens
        .iter()
        .enumerate()
        .map(|(i, token)| {
            if token.is_special {
                return Ok(0.0);
            }
            let e = table
                .get(&pair.pair_id, side, i)
                .ok_or_else(|| Error::MissingFixture(format!("cross-entropy entry {}/{side}/{i}", pair.pair_id)))?;
            Ok(1.0 - npmi(e.h_alone, e.h_with_context).max(0.0))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Align,
    Del,
    DelNgram,
    DelReencode,
    Mask,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Align,
        MetricKind::Del,
        MetricKind::DelNgram,
        MetricKind::DelReencode,
        MetricKind::Mask,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Align => "align",
            MetricKind::Del => "del",
            MetricKind::DelNgram => "del-ngram",
            MetricKind::DelReencode => "del-reencode",
            MetricKind::Mask => "mask",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace('_', "-");
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == normalized)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown metric '{s}' (expected one of align, del, del-ngram, del-reencode, mask)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub metric: MetricKind,
    pub layer: u32,
    /// Only read by [`MetricKind::DelNgram`].
    pub ngram_max: usize,
    /// Clamp deletability scores into `[0, 1]`. Off by default; raw scores range over `[-0.5, 1.5]`.
    pub clamp: bool,
}

impl MetricConfig {
    pub fn new(metric: MetricKind, layer: u32) -> Self {
        Self {
            metric,
            layer,
            ngram_max: 1,
            clamp: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.ngram_max) {
            return Err(Error::Config(format!(
                "ngram_max must be 1, 2 or 3, got {}",
                self.ngram_max
            )));
        }
        Ok(())
    }
}

fn token_scores(pair: &LabeledPair, side: Side, config: &MetricConfig, encoder: &dyn Encoder) -> Result<Vec<f64>> {
    let encode = |s: Side| -> Result<EncodedDoc> {
        let doc = pair.side(s);
        EncodedDoc::new(encoder.encode(doc)?, doc)
    };
    let mut scores = match config.metric {
        MetricKind::Align => diff_align(&encode(side)?, &encode(side.other())?)?.value,
        MetricKind::Del => diff_del(&encode(side)?, &encode(side.other())?)?.value,
        MetricKind::DelNgram => diff_del_ngram(&encode(side)?, &encode(side.other())?, config.ngram_max)?.value,
        MetricKind::DelReencode => diff_del_reencode(pair, side, encoder)?.value,
        MetricKind::Mask => {
            let table = encoder.mask_cross_entropy(pair, side)?;
            diff_mask(&table, pair, side)?
        }
    };
    let is_deletion = matches!(
        config.metric,
        MetricKind::Del | MetricKind::DelNgram | MetricKind::DelReencode
    );
    if config.clamp && is_deletion {
        scores.iter_mut().for_each(|s| *s = s.clamp(0.0, 1.0));
    }
    Ok(scores)
}

/// Scores both sides of a pair with the configured metric and aggregates to words.
pub fn score_pair(
    pair: &LabeledPair,
    config: &MetricConfig,
    encoder: &dyn Encoder,
) -> Result<(ScoreVector, ScoreVector)> {
    config.validate()?;
    if encoder.layer() != config.layer {
        return Err(Error::Config(format!(
            "metric configured for layer {}, encoder serves layer {}",
            config.layer,
            encoder.layer()
        )));
    }
    let a = ScoreVector::from_tokens(
        &pair.pair_id,
        Side::A,
        token_scores(pair, Side::A, config, encoder)?,
        &pair.side_a,
    )?;
    let b = ScoreVector::from_tokens(
        &pair.pair_id,
        Side::B,
        token_scores(pair, Side::B, config, encoder)?,
        &pair.side_b,
    )?;
    Ok((a, b))
}

/// Scores every pair on `jobs` worker threads. Output order follows `pairs`.
pub fn score_dataset(
    pairs: &[LabeledPair],
    config: &MetricConfig,
    encoder: &dyn Encoder,
    jobs: usize,
) -> Result<Vec<ScoreVector>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {jobs} workers: {e}")))?;
    let scored: Vec<(ScoreVector, ScoreVector)> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| score_pair(p, config, encoder))
            .collect::<Result<_>>()
    })?;
    Ok(scored.into_iter().flat_map(|(a, b)| [a, b]).collect())
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub pair_id: String,
    pub side: Side,
    pub metric: MetricKind,
    pub layer: u32,
    pub token_scores: Vec<f64>,
    pub word_scores: Vec<f64>,
}

impl ScoreRecord {
    pub fn new(scores: ScoreVector, config: &MetricConfig) -> Self {
        Self {
            pair_id: scores.pair_id,
            side: scores.side,
            metric: config.metric,
            layer: config.layer,
            token_scores: scores.token_scores,
            word_scores: scores.word_scores,
        }
    }

    pub fn into_scores(self) -> ScoreVector {
        ScoreVector {
            pair_id: self.pair_id,
            side: self.side,
            token_scores: self.token_scores,
            word_scores: self.word_scores,
        }
    }
}
