//! The `semdiff` command line.
//!
//! Each subcommand reads and writes the JSON-lines formats of `semdiff-core`
//! and leaves a `<output>.config.json` echo of its arguments next to the file
//! it writes. Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod render;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::json;

use semdiff_core::datagen::{
    add_negatives, build_documents, convert_ists, make_crosslingual, parse_ists, parse_paraphrase_tsv, permute_dataset,
    TranslationRecord, Translations,
};
use semdiff_core::document::{validate_pair, LabeledPair, Side};
use semdiff_core::encoders::{open_encoder, EncoderSpec};
use semdiff_core::eval::{bench, evaluate_by_language, render_table, EvalReport};
use semdiff_core::io::{read_jsonl, write_jsonl};
use semdiff_core::metrics::{score_dataset, MetricConfig, MetricKind, ScoreRecord};
use semdiff_core::{Error, Result};

pub use render::{heat_alpha, render_html};

#[derive(Parser, Debug)]
#[command(
    name = "semdiff",
    version,
    about = "Word-level recognition of semantic differences between documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert iSTS .wa alignment files into a labeled dataset
    Convert(ConvertArgs),
    /// Add paraphrase pairs (all words labeled 0) as negative examples
    Mix(MixArgs),
    /// Concatenate groups of k pairs into document pairs
    Docs(DocsArgs),
    /// Reorder the sentences of side B to an exact inversion number
    Permute(PermuteArgs),
    /// Replace one side of every pair by its translation
    Xling(XlingArgs),
    /// Score every word of a dataset with one metric
    Score(ScoreArgs),
    /// Correlate word scores with gold labels
    Eval(EvalArgs),
    /// Measure scoring time per 1000 tokens
    Bench(BenchArgs),
    /// Render word scores as heat-shaded HTML
    Render(RenderArgs),
}

#[derive(Args, Debug, Serialize)]
struct ConvertArgs {
    /// iSTS alignment files; pair ids are prefixed with the file stem
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output dataset (JSON lines)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct MixArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    /// Paraphrase TSV with columns id, sentence1, sentence2, label
    #[arg(long)]
    paraphrases: PathBuf,
    /// Share of negatives in the result, in [0, 1)
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Seed of all random choices
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset (JSON lines)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DocsArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    /// Pairs per document; a trailing remainder is dropped
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed of all random choices
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset (JSON lines)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PermuteArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    /// Inversion number of every sentence permutation
    #[arg(long)]
    inversions: usize,
    /// Seed of all random choices
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset (JSON lines)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct XlingArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    /// Translations (JSON lines of {pair_id, side, language, tokens, words})
    #[arg(long)]
    translations: PathBuf,
    /// Target language code
    #[arg(long)]
    lang: String,
    /// Output dataset (JSON lines)
    #[arg(long, short)]
    out: PathBuf,
}

/// Which encoder serves hidden states: `mock` or `fixture:PATH`.
#[derive(Debug, Clone, PartialEq)]
enum EncoderArg {
    Mock,
    Fixture(PathBuf),
}

impl FromStr for EncoderArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mock" => Ok(EncoderArg::Mock),
            _ => match s.strip_prefix("fixture:") {
                Some(path) if !path.is_empty() => Ok(EncoderArg::Fixture(PathBuf::from(path))),
                _ => Err(format!("expected 'mock' or 'fixture:PATH', got '{s}'")),
            },
        }
    }
}

impl fmt::Display for EncoderArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderArg::Mock => f.write_str("mock"),
            EncoderArg::Fixture(path) => write!(f, "fixture:{}", path.display()),
        }
    }
}

impl Serialize for EncoderArg {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Args, Debug, Serialize)]
struct MetricArgs {
    /// align, del, del-ngram, del-reencode or mask
    #[arg(long)]
    metric: MetricKind,
    /// Encoder layer whose hidden states are used
    #[arg(long, default_value_t = 8)]
    layer: u32,
    /// `mock` or `fixture:PATH` (a directory written by the exporter)
    #[arg(long, default_value_t = EncoderArg::Mock)]
    encoder: EncoderArg,
    /// Seed of the mock encoder
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden size of the mock encoder
    #[arg(long, default_value_t = 768)]
    dim: usize,
    /// Longest n-gram left out by del-ngram (1-3)
    #[arg(long, default_value_t = 1)]
    ngram_max: usize,
    /// Clamp deletability scores into [0, 1]
    #[arg(long)]
    clamp: bool,
}

impl MetricArgs {
    fn config(&self) -> Result<MetricConfig> {
        let config = MetricConfig {
            metric: self.metric,
            layer: self.layer,
            ngram_max: self.ngram_max,
            clamp: self.clamp,
        };
        config.validate()?;
        Ok(config)
    }

    fn encoder_spec(&self) -> EncoderSpec {
        match &self.encoder {
            EncoderArg::Mock => EncoderSpec::mock(self.seed, self.dim, self.layer),
            EncoderArg::Fixture(path) => EncoderSpec::fixture(path, self.layer),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ScoreArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    metric: MetricArgs,
    /// Worker threads; the output does not depend on it
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    jobs: usize,
    /// Score file (JSON lines)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    /// Score files, each optionally named as NAME=PATH; one table row per file
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<String>,
    /// Column name of this dataset in the table
    #[arg(long, default_value = "iSTS")]
    variant: String,
    /// Earlier report files whose rows and columns join the printed table
    #[arg(long, num_args = 1..)]
    include: Vec<PathBuf>,
    /// Worker threads; the output does not depend on it
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    jobs: usize,
    /// Report file (JSON lines, one report per score file and language)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    metric: MetricArgs,
    /// Timed passes over the dataset (at least 3)
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Allow more than one worker thread
    #[arg(long)]
    parallel: bool,
    /// Worker threads with --parallel (default: all cores)
    #[arg(long, requires = "parallel")]
    jobs: Option<usize>,
    /// Report file (JSON); printed to standard output when absent
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RenderArgs {
    /// Input dataset (JSON lines)
    #[arg(long)]
    dataset: PathBuf,
    /// Score file written by `score`
    #[arg(long)]
    scores: PathBuf,
    /// Output HTML file
    #[arg(long)]
    html: PathBuf,
    /// Render only the first N pairs
    #[arg(long)]
    limit: Option<usize>,
}

/// Runs the command line given as `argv` (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Convert(args) => convert(&args),
        Command::Mix(args) => mix(&args),
        Command::Docs(args) => docs(&args),
        Command::Permute(args) => permute(&args),
        Command::Xling(args) => xling(&args),
        Command::Score(args) => score(&args),
        Command::Eval(args) => eval(&args),
        Command::Bench(args) => run_bench(&args),
        Command::Render(args) => render(&args),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn echo_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

fn write_echo<A: Serialize>(out: &Path, subcommand: &str, args: &A) -> Result<()> {
    let echo = json!({
        "subcommand": subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
    });
    let mut text = serde_json::to_string_pretty(&echo).expect("arguments serialize");
    text.push('\n');
    write_text(&echo_path(out), &text)
}

fn warn(diagnostics: &[String]) {
    for d in diagnostics {
        eprintln!("warning: {d}");
    }
}

/// Reads a dataset and rejects pairs that break the document invariants.
fn read_dataset(path: &Path) -> Result<Vec<LabeledPair>> {
    let pairs: Vec<LabeledPair> = read_jsonl(path)?;
    for (line, pair) in pairs.iter().enumerate() {
        if let Some(v) = validate_pair(pair).first() {
            return Err(Error::format(
                path.display().to_string(),
                format!("pair {} (record {}): {v}", pair.pair_id, line + 1),
            ));
        }
    }
    Ok(pairs)
}

fn write_dataset(out: &Path, pairs: &[LabeledPair], subcommand: &str, args: &impl Serialize) -> Result<()> {
    write_jsonl(out, pairs)?;
    write_echo(out, subcommand, args)?;
    eprintln!("{subcommand}: wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}

fn convert(args: &ConvertArgs) -> Result<()> {
    let mut pairs = Vec::new();
    for input in &args.inputs {
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parsed =
            parse_ists(&read_text(input)?).map_err(|e| Error::format(input.display().to_string(), e.to_string()))?;
        let converted = convert_ists(&parsed, &format!("{stem}:"))?;
        warn(&converted.diagnostics);
        pairs.extend(converted.value);
    }
    write_dataset(&args.out, &pairs, "convert", args)
}

fn mix(args: &MixArgs) -> Result<()> {
    let pairs = read_dataset(&args.dataset)?;
    let paraphrases = parse_paraphrase_tsv(&read_text(&args.paraphrases)?)
        .map_err(|e| Error::format(args.paraphrases.display().to_string(), e.to_string()))?;
    let mixed = add_negatives(pairs, &paraphrases, args.ratio, args.seed)?;
    write_dataset(&args.out, &mixed, "mix", args)
}

fn docs(args: &DocsArgs) -> Result<()> {
    let pairs = read_dataset(&args.dataset)?;
    let documents = build_documents(&pairs, args.k, args.seed)?;
    warn(&documents.diagnostics);
    write_dataset(&args.out, &documents.value, "docs", args)
}

fn permute(args: &PermuteArgs) -> Result<()> {
    let pairs = read_dataset(&args.dataset)?;
    let permuted = permute_dataset(&pairs, args.inversions, args.seed)?;
    write_dataset(&args.out, &permuted, "permute", args)
}

fn xling(args: &XlingArgs) -> Result<()> {
    let pairs = read_dataset(&args.dataset)?;
    let records: Vec<TranslationRecord> = read_jsonl(&args.translations)?;
    let translations = Translations::from_records(records);
    let crosslingual = make_crosslingual(&pairs, &translations, &args.lang)?;
    write_dataset(&args.out, &crosslingual, "xling", args)
}

fn score(args: &ScoreArgs) -> Result<()> {
    let config = args.metric.config()?;
    let pairs = read_dataset(&args.dataset)?;
    let encoder = open_encoder(&args.metric.encoder_spec())?;
    let scores = score_dataset(&pairs, &config, encoder.as_ref(), args.jobs)?;
    let records: Vec<ScoreRecord> = scores.into_iter().map(|s| ScoreRecord::new(s, &config)).collect();
    write_jsonl(&args.out, &records)?;
    write_echo(&args.out, "score", args)?;
    eprintln!("score: wrote {} score vectors to {}", records.len(), args.out.display());
    Ok(())
}

/// Splits `NAME=PATH`; a plain path has no name.
fn named_path(spec: &str) -> (Option<&str>, &str) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !name.contains(['/', '\\']) => (Some(name), path),
        _ => (None, spec),
    }
}

fn eval_one(dataset: &[LabeledPair], spec: &str, variant: &str) -> Result<Vec<EvalReport>> {
    let (name, path) = named_path(spec);
    let records: Vec<ScoreRecord> = read_jsonl(Path::new(path))?;
    let mut config = json!({ "scores": path });
    if let Some(first) = records.first() {
        config["metric"] = json!(first.metric);
        config["layer"] = json!(first.layer);
    }
    if let Some(name) = name {
        config["approach"] = json!(name);
    }
    let scores: Vec<_> = records.into_iter().map(ScoreRecord::into_scores).collect();
    let mut reports = evaluate_by_language(dataset, &scores, variant)?;
    for r in &mut reports {
        r.config = config.clone();
    }
    Ok(reports)
}

fn eval(args: &EvalArgs) -> Result<()> {
    let dataset = read_dataset(&args.dataset)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {} workers: {e}", args.jobs)))?;
    let per_file: Vec<Vec<EvalReport>> = pool.install(|| {
        args.scores
            .par_iter()
            .map(|spec| eval_one(&dataset, spec, &args.variant))
            .collect::<Result<_>>()
    })?;
    let reports: Vec<EvalReport> = per_file.into_iter().flatten().collect();
    write_jsonl(&args.out, &reports)?;
    write_echo(&args.out, "eval", args)?;
    let mut table = Vec::new();
    for path in &args.include {
        table.extend(read_jsonl::<EvalReport>(path)?);
    }
    table.extend(reports.iter().cloned());
    print!("{}", render_table(&table));
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let workers = match (args.parallel, args.jobs) {
        (false, _) => 1,
        (true, Some(jobs)) => jobs,
        (true, None) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let config = args.metric.config()?;
    let pairs = read_dataset(&args.dataset)?;
    let encoder = open_encoder(&args.metric.encoder_spec())?;
    let report = bench(&pairs, &config, encoder.as_ref(), args.repetitions, workers)?;
    let text = serde_json::to_string(&report).expect("report serializes");
    match &args.out {
        Some(out) => {
            write_text(out, &format!("{text}\n"))?;
            write_echo(out, "bench", args)?;
            println!(
                "{}: {:.4} s per 1000 tokens (median of {}, variance {:.3e}, {} worker(s))",
                report.metric, report.seconds_per_1000_tokens, report.repetitions, report.variance, report.workers
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn render(args: &RenderArgs) -> Result<()> {
    let pairs = read_dataset(&args.dataset)?;
    let records: Vec<ScoreRecord> = read_jsonl(&args.scores)?;
    let scores: HashMap<(String, Side), Vec<f64>> = records
        .into_iter()
        .map(|r| ((r.pair_id, r.side), r.word_scores))
        .collect();
    let shown = &pairs[..args.limit.unwrap_or(pairs.len()).min(pairs.len())];
    write_text(&args.html, &render_html(shown, &scores)?)?;
    write_echo(&args.html, "render", args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_argument() {
        assert_eq!("mock".parse::<EncoderArg>(), Ok(EncoderArg::Mock));
        assert_eq!(
            "fixture:/tmp/store".parse::<EncoderArg>(),
            Ok(EncoderArg::Fixture(PathBuf::from("/tmp/store")))
        );
        assert!("fixture:".parse::<EncoderArg>().is_err());
        assert!("bert".parse::<EncoderArg>().is_err());
        assert_eq!(EncoderArg::Fixture("a/b".into()).to_string(), "fixture:a/b");
    }

    #[test]
    fn named_score_paths() {
        assert_eq!(named_path("tuned=out/s.jsonl"), (Some("tuned"), "out/s.jsonl"));
        assert_eq!(named_path("out/s.jsonl"), (None, "out/s.jsonl"));
        assert_eq!(named_path("out/a=b.jsonl"), (None, "out/a=b.jsonl"));
    }

    #[test]
    fn echo_sits_next_to_output() {
        assert_eq!(
            echo_path(Path::new("d/x.jsonl")),
            PathBuf::from("d/x.jsonl.config.json")
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
