//! Batch generators for DP-SGD and the penalty for capping batch sizes.
//!
//! Indices are 1-based (`1..=n`) and every batch is stored sorted.

use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand_distr::{Binomial, Distribution};

use crate::num::{binomial_tail, math, RngStream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Deterministic,
    Shuffle,
    Poisson,
    BallsAndBins,
}

impl SamplerKind {
    /// Whether every index lands in exactly one batch.
    pub fn partitions(self) -> bool {
        !matches!(self, SamplerKind::Poisson)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Dataset size.
    pub n: usize,
    /// Exact (Deterministic, Shuffle) or expected (Poisson, Balls-and-Bins) batch size.
    pub b: usize,
    /// Number of batches.
    pub steps: usize,
    /// Physical batch cap.
    pub max_batch: Option<usize>,
}

impl SamplerConfig {
    pub fn new(n: usize, b: usize, steps: usize) -> Self {
        Self {
            n,
            b,
            steps,
            max_batch: None,
        }
    }

    fn require_steps(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("number of batches must be at least 1"));
        }
        if self.max_batch == Some(0) {
            return Err(Error::config("maximum batch size must be at least 1"));
        }
        Ok(())
    }

    fn require_exact_split(&self) -> Result<()> {
        self.require_steps()?;
        if self.b == 0 || self.n != self.b * self.steps {
            return Err(Error::config(alloc::format!(
                "n = {} must equal b * T = {} * {}",
                self.n,
                self.b,
                self.steps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchAssignment {
    pub batches: Vec<Vec<usize>>,
    pub sampler_kind: SamplerKind,
}

impl BatchAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        self.batches.iter().map(Vec::len).collect()
    }

    /// True when the batches partition `1..=n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = alloc::vec![false; n + 1];
        let mut count = 0;
        for &i in self.batches.iter().flatten() {
            if i == 0 || i > n || seen[i] {
                return false;
            }
            seen[i] = true;
            count += 1;
        }
        count == n
    }
}

/// Batch `t` holds `t*b + 1 ..= t*b + b`.
pub fn deterministic_batches(cfg: &SamplerConfig) -> Result<BatchAssignment> {
    cfg.require_exact_split()?;
    let batches = (0..cfg.steps)
        .map(|t| (t * cfg.b + 1..=t * cfg.b + cfg.b).collect())
        .collect();
    Ok(BatchAssignment {
        batches,
        sampler_kind: SamplerKind::Deterministic,
    })
}

/// Consecutive blocks of a uniformly random permutation.
pub fn shuffle_batches(cfg: &SamplerConfig, rng: &mut RngStream) -> Result<BatchAssignment> {
    cfg.require_exact_split()?;
    let mut perm: Vec<usize> = (1..=cfg.n).collect();
    perm.shuffle(rng);
    let batches = perm
        .chunks(cfg.b)
        .map(|c| {
            let mut v = c.to_vec();
            v.sort_unstable();
            v
        })
        .collect();
    Ok(BatchAssignment {
        batches,
        sampler_kind: SamplerKind::Shuffle,
    })
}

/// Every `(t, i)` included independently with probability `b / n`.
pub fn poisson_batches(cfg: &SamplerConfig, rng: &mut RngStream) -> Result<BatchAssignment> {
    cfg.require_steps()?;
    if cfg.b > cfg.n || cfg.n == 0 {
        return Err(Error::config("Poisson sampling requires 0 < n and b <= n"));
    }
    let p = cfg.b as f64 / cfg.n as f64;
    let batches = (0..cfg.steps)
        .map(|_| (1..=cfg.n).filter(|_| rng.bernoulli(p)).collect())
        .collect();
    Ok(BatchAssignment {
        batches,
        sampler_kind: SamplerKind::Poisson,
    })
}

/// Every index thrown into one uniformly random batch.
pub fn balls_and_bins_batches(cfg: &SamplerConfig, rng: &mut RngStream) -> Result<BatchAssignment> {
    cfg.require_steps()?;
    let mut batches = alloc::vec![Vec::new(); cfg.steps];
    for i in 1..=cfg.n {
        batches[rng.below(cfg.steps)].push(i);
    }
    Ok(BatchAssignment {
        batches,
        sampler_kind: SamplerKind::BallsAndBins,
    })
}

/// Balls-and-Bins batch sizes drawn one at a time:
/// `b_t ~ Bin(n - sum_{i<t} b_i, 1 / (T - t + 1))`.
pub fn balls_and_bins_sizes_sequential(cfg: &SamplerConfig, rng: &mut RngStream) -> Result<Vec<usize>> {
    cfg.require_steps()?;
    let mut remaining = cfg.n as u64;
    let mut sizes = Vec::with_capacity(cfg.steps);
    for t in 0..cfg.steps {
        let bins_left = (cfg.steps - t) as f64;
        let size = if t + 1 == cfg.steps || remaining == 0 {
            if t + 1 == cfg.steps {
                remaining
            } else {
                0
            }
        } else {
            Binomial::new(remaining, 1.0 / bins_left)
                .map_err(|_| Error::Domain("invalid binomial parameters"))?
                .sample(rng)
        };
        remaining -= size;
        sizes.push(size as usize);
    }
    Ok(sizes)
}

/// Replaces every batch larger than `cap` by a uniform size-`cap` subset.
pub fn truncate_batches(a: &BatchAssignment, cap: usize, rng: &mut RngStream) -> Result<BatchAssignment> {
    if cap == 0 {
        return Err(Error::config("maximum batch size must be at least 1"));
    }
    let batches = a
        .batches
        .iter()
        .map(|batch| {
            if batch.len() <= cap {
                batch.clone()
            } else {
                let mut kept: Vec<usize> = index::sample(rng, batch.len(), cap)
                    .into_iter()
                    .map(|j| batch[j])
                    .collect();
                kept.sort_unstable();
                kept
            }
        })
        .collect();
    Ok(BatchAssignment {
        batches,
        sampler_kind: a.sampler_kind,
    })
}

/// Additive `delta'` for capping batches at `cap`:
/// `(1 + e^eps) * T * Pr[Bin(n, b/n) > cap]`.
pub fn truncation_delta_penalty(n: u64, b: u64, steps: u64, cap: u64, epsilon: f64) -> Result<f64> {
    if b > n || n == 0 {
        return Err(Error::config("truncation penalty requires 0 < n and b <= n"));
    }
    let tail = binomial_tail(n, b as f64 / n as f64, cap.min(i64::MAX as u64) as i64);
    if tail == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + math::exp(epsilon)) * steps as f64 * tail)
}

/// Smallest cap `B` in `0..=n` with penalty at most `target`, by binary search
/// over the nonincreasing penalty.
pub fn smallest_cap_for_target(n: u64, b: u64, steps: u64, epsilon: f64, target: f64) -> Result<u64> {
    let (mut lo, mut hi) = (0u64, n);
    if truncation_delta_penalty(n, b, steps, 0, epsilon)? <= target {
        return Ok(0);
    }
    // Invariant: penalty(lo) > target, penalty(hi) <= target.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if truncation_delta_penalty(n, b, steps, mid, epsilon)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
