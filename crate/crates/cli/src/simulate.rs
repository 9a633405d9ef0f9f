//! Sampler simulation: batch assignments as JSON lines followed by a
//! summary of their empirical distribution.

use std::collections::BTreeMap;
use std::io::Write;

use ballsbins_core::num::{binomial_tail, RngStream};
use ballsbins_core::samplers::{
    balls_and_bins_batches, deterministic_batches, poisson_batches, shuffle_batches, truncate_batches,
    BatchAssignment, SamplerConfig,
};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::account::Sampler;
use crate::error::{CliError, Result};

/// Per-cell frequencies are reported only up to this many `(t, i)` cells.
pub const MAX_FREQUENCY_CELLS: usize = 100_000;

#[derive(Clone, Debug, Serialize)]
pub struct SimulateRequest {
    pub sampler: Sampler,
    pub n: usize,
    pub b: usize,
    pub steps: usize,
    pub max_batch: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    #[serde(skip)]
    pub emit_batches: bool,
}

#[derive(Serialize)]
struct BatchLine<'a> {
    trial: u64,
    t: usize,
    indices: &'a [usize],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: Option<f64>,
    pub dof: u64,
    pub p_value: Option<f64>,
    /// Set for the deterministic sampler, whose assignment has no randomness.
    pub exact_match: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Marginal {
    /// Probability that a given index lands in a given batch.
    pub expected: f64,
    /// `frequencies[t][i]`: fraction of trials with index `i + 1` in batch
    /// `t + 1`; omitted for large `n * T`.
    pub frequencies: Option<Vec<Vec<f64>>>,
    pub max_abs_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Truncation {
    pub max_batch: usize,
    pub truncated_batches: u64,
    pub rate: f64,
    /// `Pr[size > max_batch]` for a single batch.
    pub expected_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub trials: u64,
    /// Batch sizes before truncation, keyed by size.
    pub size_histogram: BTreeMap<usize, u64>,
    pub mean_batch_size: f64,
    /// Computed on the untruncated assignments.
    pub marginal: Marginal,
    pub chi_square: ChiSquare,
    pub truncation: Option<Truncation>,
}

fn draw(req: &SimulateRequest, cfg: &SamplerConfig, rng: &mut RngStream) -> Result<BatchAssignment> {
    Ok(match req.sampler {
        Sampler::Deterministic => deterministic_batches(cfg)?,
        Sampler::Shuffle => shuffle_batches(cfg, rng)?,
        Sampler::Poisson => poisson_batches(cfg, rng)?,
        Sampler::Bnb => balls_and_bins_batches(cfg, rng)?,
    })
}

/// Runs the simulation, writing batch lines (if requested) to `out`, and
/// returns the summary.
pub fn simulate(req: &SimulateRequest, out: &mut dyn Write) -> Result<Summary> {
    if req.trials == 0 {
        return Err(CliError::config("trials must be at least 1"));
    }
    if req.n == 0 {
        return Err(CliError::config("dataset size n must be at least 1"));
    }
    let mut cfg = SamplerConfig::new(req.n, req.b, req.steps);
    cfg.max_batch = req.max_batch;
    let cells = req.n.saturating_mul(req.steps);
    let mut counts = vec![0u64; cells];
    let mut histogram = BTreeMap::new();
    let mut size_total = 0u64;
    let mut truncated = 0u64;
    let reference = match req.sampler {
        Sampler::Deterministic => Some(deterministic_batches(&cfg)?),
        _ => None,
    };
    let mut exact = true;

    for trial in 0..req.trials {
        let mut rng = RngStream::new(req.seed, trial);
        let raw = draw(req, &cfg, &mut rng)?;
        if let Some(r) = &reference {
            exact &= *r == raw;
        }
        for (t, batch) in raw.batches.iter().enumerate() {
            *histogram.entry(batch.len()).or_insert(0) += 1;
            size_total += batch.len() as u64;
            for &i in batch {
                counts[t * req.n + (i - 1)] += 1;
            }
        }
        let kept = match req.max_batch {
            Some(cap) => {
                truncated += raw.batches.iter().filter(|b| b.len() > cap).count() as u64;
                truncate_batches(&raw, cap, &mut rng)?
            }
            None => raw,
        };
        if req.emit_batches {
            for (t, batch) in kept.batches.iter().enumerate() {
                serde_json::to_writer(&mut *out, &BatchLine { trial, t: t + 1, indices: batch })?;
                out.write_all(b"\n")?;
            }
        }
    }

    let trials = req.trials as f64;
    let expected = match req.sampler {
        Sampler::Poisson => req.b as f64 / req.n as f64,
        _ => 1.0 / req.steps as f64,
    };
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / trials).collect();
    let max_abs_deviation = freqs.iter().map(|f| (f - expected).abs()).fold(0.0, f64::max);
    let chi_square = match req.sampler {
        Sampler::Deterministic => ChiSquare {
            statistic: None,
            dof: 0,
            p_value: None,
            exact_match: Some(exact),
        },
        Sampler::Poisson => {
            // Independent Bernoulli cells.
            let var = trials * expected * (1.0 - expected);
            let stat = if var > 0.0 {
                counts.iter().map(|&c| (c as f64 - trials * expected).powi(2) / var).sum()
            } else {
                0.0
            };
            chi_square(stat, cells as u64)
        }
        Sampler::Bnb | Sampler::Shuffle => {
            // One multinomial over batches per index.
            let e = trials * expected;
            let stat = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
            chi_square(stat, (req.n * (req.steps - 1)) as u64)
        }
    };
    let total_batches = req.trials * req.steps as u64;
    let truncation = req.max_batch.map(|cap| {
        let p = match req.sampler {
            Sampler::Poisson => req.b as f64 / req.n as f64,
            Sampler::Bnb => 1.0 / req.steps as f64,
            _ => 0.0,
        };
        Truncation {
            max_batch: cap,
            truncated_batches: truncated,
            rate: truncated as f64 / total_batches as f64,
            expected_rate: if p > 0.0 {
                binomial_tail(req.n as u64, p, cap as i64)
            } else {
                0.0
            },
        }
    });
    Ok(Summary {
        trials: req.trials,
        size_histogram: histogram,
        mean_batch_size: size_total as f64 / total_batches as f64,
        marginal: Marginal {
            expected,
            frequencies: (cells <= MAX_FREQUENCY_CELLS).then(|| freqs.chunks(req.n).map(<[f64]>::to_vec).collect()),
            max_abs_deviation,
        },
        chi_square,
        truncation,
    })
}

fn chi_square(statistic: f64, dof: u64) -> ChiSquare {
    let p_value = (dof > 0)
        .then(|| ChiSquared::new(dof as f64).ok())
        .flatten()
        .map(|d| d.sf(statistic));
    ChiSquare {
        statistic: Some(statistic),
        dof,
        p_value,
        exact_match: None,
    }
}
