use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::document::LabeledPair;
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::metrics::{score_dataset, MetricConfig, MetricKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub metric: MetricKind,
    pub repetitions: usize,
    pub workers: usize,
    pub tokens: usize,
    /// Median over repetitions.
    pub seconds_per_1000_tokens: f64,
    pub variance: f64,
    pub samples: Vec<f64>,
}

pub fn seconds_per_thousand(elapsed_seconds: f64, tokens: usize) -> f64 {
    elapsed_seconds / (tokens as f64 / 1000.0)
}

/// Times `repetitions` full scoring passes over the dataset on `workers` threads.
pub fn bench(
    dataset: &[LabeledPair],
    config: &MetricConfig,
    encoder: &dyn Encoder,
    repetitions: usize,
    workers: usize,
) -> Result<BenchReport> {
    if dataset.is_empty() {
        return Err(Error::Argument("cannot benchmark an empty dataset".into()));
    }
    if repetitions < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 repetitions, got {repetitions}"
        )));
    }
    let tokens: usize = dataset
        .iter()
        .map(|p| p.side_a.non_special_count() + p.side_b.non_special_count())
        .sum();
    if tokens == 0 {
        return Err(Error::Argument("dataset has no tokens".into()));
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let scores = score_dataset(dataset, config, encoder, workers)?;
        std::hint::black_box(scores);
        samples.push(seconds_per_thousand(start.elapsed().as_secs_f64(), tokens));
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let variance = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    Ok(BenchReport {
        metric: config.metric,
        repetitions,
        workers: workers.max(1),
        tokens,
        seconds_per_1000_tokens: median,
        variance,
        samples,
    })
}
