//! Uniform sampling of permutations with a prescribed inversion number.
//!
//! A permutation of `k` elements corresponds one-to-one to an inversion table
//! `(c_1, ..., c_k)` with `0 <= c_t < t`; its inversion number is `sum c_t`.
//! `table[j][v]` counts the tables of length `j` summing to `v` (the Mahonian
//! numbers), so drawing the digits from the last one down with weights
//! `table[j - 1][v - c]` yields every table with sum `i` equally often.

use rand::Rng;

use super::{concat, pair_seed, rng, split_sentences};
use crate::document::{LabeledPair, TokenizedDocument};
use crate::error::{Error, Result};

pub fn max_inversions(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Number of pairs `p < q` with `perm[p] > perm[q]`.
pub fn inversion_count(perm: &[usize]) -> usize {
    let mut count = 0;
    for p in 0..perm.len() {
        for q in p + 1..perm.len() {
            if perm[p] > perm[q] {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone)]
pub struct InversionSampler {
    k: usize,
    table: Vec<Vec<u128>>,
}

impl InversionSampler {
    /// 34! is the largest factorial that fits in `u128`.
    pub const MAX_K: usize = 34;

    pub fn new(k: usize) -> Result<Self> {
        if k > Self::MAX_K {
            return Err(Error::Argument(format!(
                "cannot sample permutations of more than {} elements",
                Self::MAX_K
            )));
        }
        let mut table = vec![vec![1u128]];
        for j in 1..=k {
            let prev = &table[j - 1];
            let width = max_inversions(j) + 1;
            let row = (0..width)
                .map(|v| (0..j.min(v + 1)).filter_map(|c| prev.get(v - c)).sum())
                .collect();
            table.push(row);
        }
        Ok(Self { k, table })
    }

    /// Number of permutations of `k` elements with exactly `i` inversions.
    pub fn count(&self, i: usize) -> u128 {
        self.table[self.k].get(i).copied().unwrap_or(0)
    }

    /// Draws uniformly among the permutations with exactly `i` inversions.
    /// `perm[p]` is the original index placed at position `p`.
    pub fn sample<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<Vec<usize>> {
        if i > max_inversions(self.k) {
            return Err(Error::Argument(format!(
                "{i} inversions impossible for {} elements (max {})",
                self.k,
                max_inversions(self.k)
            )));
        }
        let mut digits = vec![0usize; self.k + 1];
        let mut remaining = i;
        for j in (1..=self.k).rev() {
            let prev = &self.table[j - 1];
            let mut r = rng.random_range(0..self.table[j][remaining]);
            let mut chosen = None;
            for c in 0..j.min(remaining + 1) {
                let weight = prev.get(remaining - c).copied().unwrap_or(0);
                if r < weight {
                    chosen = Some(c);
                    break;
                }
                r -= weight;
            }
            let c = chosen.expect("weights sum to the table entry");
            digits[j] = c;
            remaining -= c;
        }
        // element t - 1 is inserted in front of c_t of the smaller elements
        let mut perm = Vec::with_capacity(self.k);
        for (t, &c) in digits.iter().enumerate().skip(1) {
            perm.insert(perm.len() - c, t - 1);
        }
        Ok(perm)
    }
}

/// Reorders the sentences of side B by a uniformly drawn permutation with
/// exactly `i` inversions. Side A and the labels of every word stay as they are.
pub fn permute_document(pair: &LabeledPair, i: usize, seed: u64) -> Result<LabeledPair> {
    let sentences = split_sentences(&pair.side_b);
    let k = sentences.len();
    if i > max_inversions(k) {
        return Err(Error::Argument(format!(
            "{}: {i} inversions impossible with {k} sentences",
            pair.pair_id
        )));
    }
    let mut out = pair.clone();
    out.inversions = i;
    if k < 2 {
        return Ok(out);
    }
    let perm = InversionSampler::new(k)?.sample(i, &mut rng(seed))?;
    let parts: Vec<(&TokenizedDocument, Option<&str>)> = perm
        .iter()
        .map(|&s| (&sentences[s].0, sentences[s].1.as_deref()))
        .collect();
    out.side_b = concat(&pair.side_b.language, &parts);
    Ok(out)
}

/// Permutes every pair with its own substream of `seed`.
pub fn permute_dataset(pairs: &[LabeledPair], i: usize, seed: u64) -> Result<Vec<LabeledPair>> {
    pairs
        .iter()
        .map(|p| permute_document(p, i, pair_seed(seed, &p.pair_id)))
        .collect()
}
