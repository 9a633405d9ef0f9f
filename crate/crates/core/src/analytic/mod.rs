//! Accountants that need no sampling, plus the Shuffle lower bound.

mod fft;
mod pld;

pub use pld::{
    poisson_pld_build, poisson_pld_compose_and_delta, PldDiscretization, PoissonAccountant, RoundingMode, MAX_CELLS,
    TAIL_MASS,
};

use crate::mc::{self, DeltaEstimate, EstimateDirection, McConfig, Strategy};
use crate::num::{log_std_cdf, math};
use crate::pairs::{AccountingParams, PairKind};
use crate::{Error, Result};

/// `delta(eps)` of the Gaussian pair `N(1, s^2)` vs `N(0, s^2)`:
/// `Phi(1/(2s) - eps s) - e^eps Phi(-1/(2s) - eps s)`. Both directions agree.
pub fn delta_deterministic(params: &AccountingParams, epsilon: f64) -> Result<f64> {
    if params.epochs > 1 {
        return Err(Error::Unsupported("deterministic accounting covers a single epoch"));
    }
    Ok(gaussian_pair_delta(params.sigma, epsilon))
}

pub(crate) fn gaussian_pair_delta(sigma: f64, epsilon: f64) -> f64 {
    let a = 0.5 / sigma;
    let first = math::exp(log_std_cdf(a - epsilon * sigma));
    let second = math::exp(epsilon + log_std_cdf(-a - epsilon * sigma));
    (first - second).clamp(0.0, 1.0)
}

/// Certified lower bound `P_B(S_C) - e^eps Q_B(S_C)` with
/// `S_C = {x : max_t x_t >= C}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundCertificate {
    pub epsilon: f64,
    /// `+inf` when no threshold gives a positive value.
    pub threshold: f64,
    pub value: f64,
    pub p_tail: f64,
    pub q_tail: f64,
}

impl LowerBoundCertificate {
    /// Re-evaluates the bound at the stored threshold.
    pub fn recompute(&self, params: &AccountingParams) -> f64 {
        if self.threshold == f64::INFINITY {
            return 0.0;
        }
        lower_bound_at(params, self.epsilon, self.threshold).2
    }
}

/// `(P_B(S_C), Q_B(S_C), P_B(S_C) - e^eps Q_B(S_C))`.
pub fn lower_bound_at(params: &AccountingParams, epsilon: f64, threshold: f64) -> (f64, f64, f64) {
    let (log_p, log_q) = log_tails(params, threshold);
    let log_w = epsilon + log_q;
    let value = if log_p > log_w {
        math::exp(log_p) * -math::exp_m1(log_w - log_p)
    } else if log_w == f64::NEG_INFINITY {
        0.0
    } else {
        -math::exp(log_w) * -math::exp_m1(log_p - log_w)
    };
    (math::exp(log_p), math::exp(log_q), value)
}

/// `(log P_B(S_C), log Q_B(S_C))`. Tails too small for `1 - Phi^T` to
/// resolve are summed as a union bound, which is then exact to `T * tail`.
fn log_tails(params: &AccountingParams, threshold: f64) -> (f64, f64) {
    let s = params.sigma;
    let t = params.steps as f64;
    let z = threshold / s;
    let z1 = (threshold - 1.0) / s;
    let log_sf = log_std_cdf(-z);
    let log_sf1 = log_std_cdf(-z1);
    let small = -40.0;
    let log_q = if log_sf + math::ln(t) < small {
        math::ln(t) + log_sf
    } else {
        math::ln(-math::exp_m1(t * log_std_cdf(z)))
    };
    let log_p = if log_sf1.max(log_sf + math::ln(t)) < small {
        let rest = if params.steps > 1 {
            math::ln(t - 1.0) + log_sf
        } else {
            f64::NEG_INFINITY
        };
        math::log_add_exp(log_sf1, rest)
    } else {
        math::ln(-math::exp_m1(log_std_cdf(z1) + (t - 1.0) * log_std_cdf(z)))
    };
    (log_p, log_q)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizes the lower bound over `C`: a global grid scan, golden-section
/// refinement to `1e-6`, then a sweep at step `1e-7` around the optimum.
pub fn bnb_lower_bound(params: &AccountingParams, epsilon: f64) -> Result<LowerBoundCertificate> {
    if params.epochs > 1 {
        return Err(Error::Unsupported("the lower bound covers a single epoch"));
    }
    let s = params.sigma;
    let s2 = s * s;
    let f = |c: f64| lower_bound_at(params, epsilon, c).2;
    // The scalar optimum 1/2 + eps s^2 can sit past 1 + 10 s for large eps.
    let lo = -10.0 * s;
    let hi = (1.0 + 10.0 * s).max(0.5 + epsilon * s2 + 10.0 * s);

    let n = 4000;
    let h = (hi - lo) / n as f64;
    let (mut best_c, mut best_v) = (lo, f(lo));
    for i in 1..=n {
        let c = lo + i as f64 * h;
        let v = f(c);
        if v > best_v {
            best_c = c;
            best_v = v;
        }
    }

    let (mut a, mut b) = ((best_c - h).max(lo), (best_c + h).min(hi));
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-6 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        }
    }
    for (c, v) in [(x1, f1), (x2, f2)] {
        if v > best_v {
            best_c = c;
            best_v = v;
        }
    }
    let centre = best_c;
    for i in -100..=100 {
        let c = centre + i as f64 * 1e-7;
        let v = f(c);
        if v > best_v {
            best_c = c;
            best_v = v;
        }
    }

    if !(best_v > 0.0) {
        return Ok(LowerBoundCertificate {
            epsilon,
            threshold: f64::INFINITY,
            value: 0.0,
            p_tail: 0.0,
            q_tail: 0.0,
        });
    }
    let (p_tail, q_tail, value) = lower_bound_at(params, epsilon, best_c);
    Ok(LowerBoundCertificate {
        epsilon,
        threshold: best_c,
        value,
        p_tail,
        q_tail,
    })
}

/// Monte Carlo lower confidence bound on `delta` of the Shuffle sampler,
/// from its dominating pair; only `lower` carries a guarantee.
pub fn shuffle_lower_bound(
    params: &AccountingParams,
    epsilon: f64,
    direction: EstimateDirection,
    cfg: &McConfig,
) -> Result<DeltaEstimate> {
    if cfg.strategy != Strategy::Plain {
        return Err(Error::Unsupported("the Shuffle pair supports plain sampling only"));
    }
    mc::estimate(PairKind::ShuffleDominated, direction, params, epsilon, cfg)
}
