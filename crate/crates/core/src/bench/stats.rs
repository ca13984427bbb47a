use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scoring::{normalize_value, Compliance, DocumentScore, Normalized, ScoreOptions};

use super::BenchError;

/// Linear-interpolation percentile of sorted data (`q` in [0, 1]).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean of `values`. Resample `k`
/// draws from its own ChaCha stream, so the result does not depend on
/// thread scheduling.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64), BenchError> {
    let n = values.len();
    if n == 0 {
        return Err(BenchError::NoDocuments);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 || resamples == 0 {
        return Ok((mean, mean));
    }
    let mut means: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let mut sum = 0.0;
            for _ in 0..n {
                sum += values[rng.random_range(0..n)];
            }
            sum / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = percentile(&means, alpha).min(mean);
    let hi = percentile(&means, 1.0 - alpha).max(mean);
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileDecay {
    /// Pooled EM of the fields in each position quartile.
    pub quartiles: [Option<f64>; 4],
    /// Q1 / Q4, absent when Q4 is zero or empty.
    pub ratio: Option<f64>,
}

/// Bucket each document's scored fields by position (bucket size
/// `ceil(n / 4)`) and pool EM per bucket across documents.
pub fn quartile_decay(docs: &[DocumentScore]) -> QuartileDecay {
    let mut hits = [0u64; 4];
    let mut counts = [0u64; 4];
    for d in docs.iter().filter(|d| !d.removed) {
        let fields: Vec<u8> = d.scored_fields().filter_map(|f| f.em).collect();
        let n = fields.len();
        if n == 0 {
            continue;
        }
        let size = n.div_ceil(4);
        for (i, em) in fields.iter().enumerate() {
            let q = (i / size).min(3);
            hits[q] += u64::from(*em);
            counts[q] += 1;
        }
    }
    let quartiles: [Option<f64>; 4] =
        std::array::from_fn(|q| (counts[q] > 0).then(|| hits[q] as f64 / counts[q] as f64));
    let ratio = match (quartiles[0], quartiles[3]) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    QuartileDecay { quartiles, ratio }
}

/// Share of scored ground-truth fields whose prediction is null or empty,
/// over documents whose output parsed as JSON.
pub fn empty_field_rate(docs: &[DocumentScore]) -> Option<f64> {
    let opts = ScoreOptions::default();
    let mut empty = 0u64;
    let mut total = 0u64;
    for d in docs.iter().filter(|d| !d.removed && d.compliance != Compliance::InvalidJson) {
        for f in d.scored_fields() {
            total += 1;
            if normalize_value(f.pred_value.as_ref(), &opts) == Normalized::Empty {
                empty += 1;
            }
        }
    }
    (total > 0).then(|| empty as f64 / total as f64)
}
