//! Word-level evaluation against gold labels and latency measurement.

mod bench;
mod spearman;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::document::{LabeledPair, ScoreVector, Side};
use crate::error::{Error, Result};

pub use bench::{bench, seconds_per_thousand, BenchReport};
pub use spearman::{average_ranks, pearson, spearman};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedCounts {
    pub punctuation: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub language: String,
    /// Spearman's rho in `[-1, 1]`.
    pub spearman: f64,
    pub n_words_scored: usize,
    pub excluded_counts: ExcludedCounts,
    #[serde(default)]
    pub config: serde_json::Value,
}

/// Pools every scored word of the dataset into one Spearman correlation.
///
/// Punctuation and unlabeled words are excluded and counted. Cross-lingual
/// pairs contribute only their English side.
pub fn evaluate(dataset: &[LabeledPair], scores: &[ScoreVector], variant: &str) -> Result<EvalReport> {
    let index: HashMap<(&str, Side), &ScoreVector> = scores.iter().map(|s| ((s.pair_id.as_str(), s.side), s)).collect();
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut excluded = ExcludedCounts::default();
    let mut languages = Vec::new();
    for pair in dataset {
        if pair.is_crosslingual() {
            for doc in [&pair.side_a, &pair.side_b] {
                if doc.language != "en" && !languages.contains(&doc.language) {
                    languages.push(doc.language.clone());
                }
            }
        }
        for side in pair.evaluated_sides() {
            let doc = pair.side(side);
            let sv = index
                .get(&(pair.pair_id.as_str(), side))
                .ok_or_else(|| Error::MissingScores(format!("{} side {side}", pair.pair_id)))?;
            if sv.word_scores.len() != doc.words.len() {
                return Err(Error::Contract(format!(
                    "{} side {side}: {} word scores for {} words",
                    pair.pair_id,
                    sv.word_scores.len(),
                    doc.words.len()
                )));
            }
            for (w, word) in doc.words.iter().enumerate() {
                if doc.word_is_punctuation(w) {
                    excluded.punctuation += 1;
                } else if let Some(label) = word.gold_label {
                    gold.push(label);
                    pred.push(sv.word_scores[w]);
                } else {
                    excluded.unlabeled += 1;
                }
            }
        }
    }
    languages.sort();
    let language = if languages.is_empty() {
        "en".to_string()
    } else {
        languages.join(",")
    };
    Ok(EvalReport {
        variant: variant.to_string(),
        language,
        spearman: spearman(&gold, &pred)?,
        n_words_scored: gold.len(),
        excluded_counts: excluded,
        config: serde_json::Value::Null,
    })
}

/// One report per target language, plus an unweighted average (`language = "avg"`)
/// when more than one target language is present.
pub fn evaluate_by_language(dataset: &[LabeledPair], scores: &[ScoreVector], variant: &str) -> Result<Vec<EvalReport>> {
    let mut groups: BTreeMap<String, Vec<LabeledPair>> = BTreeMap::new();
    for pair in dataset {
        let lang = if pair.is_crosslingual() {
            [&pair.side_a, &pair.side_b]
                .into_iter()
                .find(|d| d.language != "en")
                .map(|d| d.language.clone())
                .unwrap_or_else(|| "en".into())
        } else {
            "en".to_string()
        };
        groups.entry(lang).or_default().push(pair.clone());
    }
    let mut reports = groups
        .values()
        .map(|pairs| evaluate(pairs, scores, variant))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<&EvalReport> = reports.iter().filter(|r| r.language != "en").collect();
    if targets.len() > 1 {
        let n = targets.len() as f64;
        let average = EvalReport {
            variant: variant.to_string(),
            language: "avg".to_string(),
            spearman: targets.iter().map(|r| r.spearman).sum::<f64>() / n,
            n_words_scored: targets.iter().map(|r| r.n_words_scored).sum(),
            excluded_counts: ExcludedCounts {
                punctuation: targets.iter().map(|r| r.excluded_counts.punctuation).sum(),
                unlabeled: targets.iter().map(|r| r.excluded_counts.unlabeled).sum(),
            },
            config: serde_json::Value::Null,
        };
        reports.push(average);
    }
    Ok(reports)
}

fn approach(config: &serde_json::Value) -> String {
    if let Some(name) = config.get("approach").and_then(|v| v.as_str()) {
        return name.to_string();
    }
    let metric = config.get("metric").and_then(|v| v.as_str()).unwrap_or("?");
    match config.get("layer").and_then(|v| v.as_u64()) {
        Some(layer) => format!("{metric} (layer {layer})"),
        None => metric.to_string(),
    }
}

/// Plain-text table with one row per approach and one column per variant,
/// correlations scaled by 100. Multilingual columns show the average.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut variants: Vec<&str> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut cells: HashMap<(String, &str), &EvalReport> = HashMap::new();
    for r in reports {
        if !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
        let row = approach(&r.config);
        if !rows.contains(&row) {
            rows.push(row.clone());
        }
        let key = (row, r.variant.as_str());
        let replace = match cells.get(&key) {
            None => true,
            Some(existing) => r.language == "avg" && existing.language != "avg",
        };
        if replace {
            cells.insert(key, r);
        }
    }
    let first = rows
        .iter()
        .map(String::len)
        .chain(["Approach".len()])
        .max()
        .unwrap_or(8);
    let widths: Vec<usize> = variants.iter().map(|v| v.len().max(6)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<first$}", "Approach");
    for (v, w) in variants.iter().zip(&widths) {
        let _ = write!(out, "  {v:>w$}");
    }
    out.push('\n');
    for row in &rows {
        let _ = write!(out, "{row:<first$}");
        for (v, w) in variants.iter().zip(&widths) {
            match cells.get(&(row.clone(), *v)) {
                Some(r) => {
                    let _ = write!(out, "  {:>w$.1}", r.spearman * 100.0);
                }
                None => {
                    let _ = write!(out, "  {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{Source, TokenizedDocument, Word};

    fn labeled(id: &str, a: &[(&str, Option<f64>)], b: &[(&str, Option<f64>)]) -> LabeledPair {
        let doc = |ws: &[(&str, Option<f64>)]| {
            TokenizedDocument::from_words("en", ws.iter().map(|(s, l)| Word::new(*s, *l)).collect())
        };
        LabeledPair {
            pair_id: id.into(),
            source: Source::Ists,
            inversions: 0,
            side_a: doc(a),
            side_b: doc(b),
        }
    }

    fn oracle_scores(pair: &LabeledPair) -> Vec<ScoreVector> {
        [Side::A, Side::B]
            .into_iter()
            .map(|side| ScoreVector {
                pair_id: pair.pair_id.clone(),
                side,
                token_scores: vec![],
                word_scores: pair
                    .side(side)
                    .words
                    .iter()
                    .map(|w| w.gold_label.unwrap_or(0.5))
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let p = labeled(
            "p",
            &[("a", Some(0.0)), ("b", Some(1.0)), ("!", None)],
            &[("c", Some(0.4)), ("d", None)],
        );
        let report = evaluate(std::slice::from_ref(&p), &oracle_scores(&p), "iSTS").unwrap();
        assert!((report.spearman - 1.0).abs() < 1e-12);
        assert_eq!(report.n_words_scored, 3);
        assert_eq!(
            report.excluded_counts,
            ExcludedCounts {
                punctuation: 1,
                unlabeled: 1
            }
        );
    }

    #[test]
    fn punctuation_scores_do_not_matter() {
        let p = labeled(
            "p",
            &[("a", Some(0.0)), (",", None), ("b", Some(1.0)), ("c", Some(0.2))],
            &[("d", Some(0.6)), ("?!", None)],
        );
        let mut scores = oracle_scores(&p);
        scores[0].word_scores = vec![0.3, 0.0, 0.1, 0.9];
        let base = evaluate(std::slice::from_ref(&p), &scores, "x").unwrap().spearman;
        scores[0].word_scores[1] = 123.0;
        scores[1].word_scores[1] = -7.0;
        assert_eq!(evaluate(std::slice::from_ref(&p), &scores, "x").unwrap().spearman, base);
    }

    #[test]
    fn missing_scores_named() {
        let p = labeled("lost", &[("a", Some(0.0))], &[("b", Some(1.0))]);
        match evaluate(&[p], &[], "x") {
            Err(Error::MissingScores(id)) => assert!(id.contains("lost")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crosslingual_uses_english_side_only() {
        let mut p = labeled(
            "p",
            &[("a", Some(0.0)), ("b", Some(1.0)), ("c", Some(0.5))],
            &[("x", None)],
        );
        p.side_b.language = "de".into();
        let only_a = vec![oracle_scores(&p).remove(0)];
        let report = evaluate(&[p], &only_a, "xl").unwrap();
        assert_eq!(report.language, "de");
        assert_eq!(report.n_words_scored, 3);
        assert_eq!(report.excluded_counts.unlabeled, 0);
    }

    #[test]
    fn per_language_and_average() {
        let mut pairs = Vec::new();
        let mut scores = Vec::new();
        for (lang, flip) in [("de", false), ("fr", true)] {
            let mut p = labeled(
                lang,
                &[("a", Some(0.0)), ("b", Some(1.0)), ("c", Some(0.5))],
                &[("x", None)],
            );
            p.side_b.language = lang.into();
            let mut s = oracle_scores(&p).remove(0);
            if flip {
                s.word_scores.iter_mut().for_each(|x| *x = -*x);
            }
            scores.push(s);
            pairs.push(p);
        }
        let reports = evaluate_by_language(&pairs, &scores, "xl").unwrap();
        let langs: Vec<&str> = reports.iter().map(|r| r.language.as_str()).collect();
        assert_eq!(langs, vec!["de", "fr", "avg"]);
        assert!((reports[0].spearman - 1.0).abs() < 1e-12);
        assert!((reports[1].spearman + 1.0).abs() < 1e-12);
        assert!(reports[2].spearman.abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let report = |variant: &str, metric: &str, rho: f64| EvalReport {
            variant: variant.into(),
            language: "en".into(),
            spearman: rho,
            n_words_scored: 10,
            excluded_counts: ExcludedCounts::default(),
            config: serde_json::json!({"metric": metric, "layer": 8}),
        };
        let table = render_table(&[
            report("iSTS", "align", 0.569),
            report("+ Negatives", "align", 0.51),
            report("iSTS", "mask", 0.512),
        ]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Approach"));
        assert!(lines[1].contains("56.9") && lines[1].contains("51.0"), "{table}");
        assert!(lines[2].trim_end().ends_with('-'), "{table}");
    }
}
