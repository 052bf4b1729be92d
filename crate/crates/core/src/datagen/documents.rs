use rand::seq::SliceRandom;

use super::{concat, rng};
use crate::document::{LabeledPair, Source, TokenizedDocument};
use crate::error::{Diagnosed, Error, Result};

/// Shuffles the pairs and concatenates consecutive groups of `k` into document
/// pairs. A trailing group shorter than `k` is dropped. With `k = 1` the
/// shuffled pairs are returned as they are.
pub fn build_documents(pairs: &[LabeledPair], k: usize, seed: u64) -> Result<Diagnosed<Vec<LabeledPair>>> {
    if k == 0 {
        return Err(Error::Argument("document size must be at least 1".into()));
    }
    let mut diagnostics = Vec::new();
    if pairs.len() < k {
        diagnostics.push(format!("{} pairs cannot fill one document of {k}", pairs.len()));
        return Ok(Diagnosed::new(Vec::new(), diagnostics));
    }
    let mut order: Vec<&LabeledPair> = pairs.iter().collect();
    order.shuffle(&mut rng(seed));
    if k == 1 {
        return Ok(Diagnosed::clean(order.into_iter().cloned().collect()));
    }
    let dropped = pairs.len() % k;
    if dropped > 0 {
        diagnostics.push(format!("dropped {dropped} trailing pairs"));
    }
    let docs = order
        .chunks_exact(k)
        .enumerate()
        .map(|(g, group)| {
            let side = |pick: fn(&LabeledPair) -> &TokenizedDocument| {
                let parts: Vec<(&TokenizedDocument, Option<&str>)> =
                    group.iter().map(|p| (pick(p), Some(p.pair_id.as_str()))).collect();
                concat(&pick(group[0]).language, &parts)
            };
            let source = if group.iter().any(|p| p.source == Source::Ists) {
                Source::Ists
            } else {
                Source::Paws
            };
            LabeledPair {
                pair_id: format!("doc-{g:05}"),
                source,
                inversions: 0,
                side_a: side(|p| &p.side_a),
                side_b: side(|p| &p.side_b),
            }
        })
        .collect();
    Ok(Diagnosed::new(docs, diagnostics))
}
