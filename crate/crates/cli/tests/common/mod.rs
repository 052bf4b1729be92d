//! Synthetic stand-ins for the iSTS, paraphrase and translation inputs.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semdiff_core::datagen::TranslationRecord;
use semdiff_core::document::{Side, TokenizedDocument};

pub fn semdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semdiff"))
        .args(args)
        .output()
        .expect("semdiff binary runs")
}

pub fn ok(args: &[&str]) {
    let out = semdiff(args);
    assert!(
        out.status.success(),
        "semdiff {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const TYPES: [&str; 4] = ["EQUI", "SIMI", "SPE1", "OPPO"];

fn sentence(rng: &mut ChaCha8Rng, lengths: std::ops::Range<usize>) -> Vec<String> {
    let len = rng.random_range(lengths);
    (0..len).map(|_| format!("w{}", rng.random_range(0..400))).collect()
}

/// One `.wa` block: token j of the source aligned to token j of the target,
/// leftovers and a final full stop unaligned.
fn ists_block(rng: &mut ChaCha8Rng, id: usize, out: &mut String) -> (Vec<String>, Vec<String>) {
    let mut source = sentence(rng, 3..10);
    source.push(".".into());
    let target = sentence(rng, 3..10);
    let _ = writeln!(out, "<sentence id=\"{id}\" status=\"\">");
    let _ = writeln!(out, "// {}", source.join(" "));
    let _ = writeln!(out, "// {}", target.join(" "));
    out.push_str("<alignment>\n");
    let shared = (source.len() - 1).min(target.len());
    for j in 1..=shared {
        let kind = TYPES[rng.random_range(0..TYPES.len())];
        let score = rng.random_range(0..=5);
        let _ = writeln!(out, "{j} <==> {j} // {kind} // {score} // x <==> y");
    }
    for j in shared + 1..=source.len() {
        let _ = writeln!(out, "{j} <==> 0 // NOALI // NIL // x <==> -not aligned-");
    }
    for j in shared + 1..=target.len() {
        let _ = writeln!(out, "0 <==> {j} // NOALI // NIL // -not aligned- <==> y");
    }
    out.push_str("</alignment>\n</sentence>\n");
    (source, target)
}

fn translation(pair_id: &str, side: Side, words: &[String]) -> TranslationRecord {
    let text: Vec<String> = words.iter().map(|w| format!("de_{w}")).collect();
    let doc = TokenizedDocument::from_text("de", &text.join(" "), None);
    TranslationRecord {
        pair_id: pair_id.to_string(),
        side,
        language: "de".into(),
        tokens: doc.tokens,
        words: doc.words,
    }
}

pub struct Corpus {
    pub wa: PathBuf,
    pub paraphrases: PathBuf,
    pub translations: PathBuf,
}

/// Writes `ists.wa` with `n_pairs` sentence pairs, a paraphrase TSV with
/// `n_paraphrases` label-1 rows (plus label-0 rows that must be ignored) and
/// German translations of every sentence.
pub fn write_corpus(dir: &Path, n_pairs: usize, n_paraphrases: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wa = String::new();
    let mut records = Vec::new();
    for id in 1..=n_pairs {
        let (source, target) = ists_block(&mut rng, id, &mut wa);
        let pair_id = format!("ists:{id}");
        records.push(translation(&pair_id, Side::A, &source));
        records.push(translation(&pair_id, Side::B, &target));
    }
    let mut tsv = String::from("id\tsentence1\tsentence2\tlabel\n");
    for id in 0..n_paraphrases * 2 {
        let s1 = sentence(&mut rng, 4..12);
        let mut s2 = s1.clone();
        s2.swap(0, s1.len() - 1);
        let label = id % 2;
        let _ = writeln!(tsv, "{id}\t{} ,\t{}\t{label}", s1.join(" "), s2.join(" "));
        if label == 1 {
            let mut first = s1.clone();
            first.push(",".into());
            records.push(translation(&format!("paws-{id}"), Side::A, &first));
            records.push(translation(&format!("paws-{id}"), Side::B, &s2));
        }
    }
    let corpus = Corpus {
        wa: dir.join("ists.wa"),
        paraphrases: dir.join("paws.tsv"),
        translations: dir.join("translations.de.jsonl"),
    };
    fs::write(&corpus.wa, wa).unwrap();
    fs::write(&corpus.paraphrases, tsv).unwrap();
    let lines: Vec<String> = records.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    fs::write(&corpus.translations, lines.join("\n") + "\n").unwrap();
    corpus
}

/// Runs convert → mix → docs → permute → xling and returns the five dataset paths.
pub fn run_pipeline(dir: &Path, corpus: &Corpus, seed: u64) -> [String; 5] {
    let seed = seed.to_string();
    let files = [
        "base.jsonl",
        "mixed.jsonl",
        "docs.jsonl",
        "permuted.jsonl",
        "xling.jsonl",
    ]
    .map(|f| path(dir, f));
    ok(&["convert", corpus.wa.to_str().unwrap(), "--out", &files[0]]);
    ok(&[
        "mix",
        "--dataset",
        &files[0],
        "--paraphrases",
        corpus.paraphrases.to_str().unwrap(),
        "--ratio",
        "0.5",
        "--seed",
        &seed,
        "--out",
        &files[1],
    ]);
    ok(&[
        "docs",
        "--dataset",
        &files[1],
        "--k",
        "5",
        "--seed",
        &seed,
        "--out",
        &files[2],
    ]);
    ok(&[
        "permute",
        "--dataset",
        &files[2],
        "--inversions",
        "5",
        "--seed",
        &seed,
        "--out",
        &files[3],
    ]);
    ok(&[
        "xling",
        "--dataset",
        &files[3],
        "--translations",
        corpus.translations.to_str().unwrap(),
        "--lang",
        "de",
        "--out",
        &files[4],
    ]);
    files
}
