//! Importance-sampling events for the Balls-and-Bins pair and the samplers
//! for the Gaussian conditioned on them.

use alloc::vec::Vec;

use crate::num::{log_std_cdf, math, std_quantile_from_log_cdf, RngStream};
use crate::pairs::{AccountingParams, Direction};
use crate::{Error, Result};

/// Region outside which the loss stays below `epsilon`.
///
/// QP: every coordinate is at most `threshold`. PQ: with `x_1` shifted down
/// by one, some coordinate is at least `threshold`.
///
/// For QP, a point outside the event has `max_t x_t > C`, so
/// `sum_t e^{x_t/s^2} > e^{C/s^2}` and the loss is below
/// `log T + 1/(2 s^2) - C/s^2`. Hence `C = 1/2 + s^2 (log T - eps)`; the
/// `log T` term cannot be dropped without losing part of the integrand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImportanceEvent {
    pub direction: Direction,
    pub threshold: f64,
    pub event_probability: f64,
    /// `log Phi(threshold / sigma)`.
    pub log_cdf_threshold: f64,
}

impl ImportanceEvent {
    pub fn new(direction: Direction, params: &AccountingParams, epsilon: f64) -> Self {
        let s2 = params.sigma * params.sigma;
        let steps = params.steps;
        let threshold = match direction {
            Direction::Qp => 0.5 + s2 * (math::ln(steps as f64) - epsilon),
            Direction::Pq => {
                // log(1 + (e^{1/s2} - 1)/T) = log((1 - 1/T) + e^{1/s2}/T).
                let keep = if steps == 1 {
                    f64::NEG_INFINITY
                } else {
                    math::ln_1p(-1.0 / steps as f64)
                };
                let shift = math::log_add_exp(keep, 1.0 / s2 - math::ln(steps as f64));
                0.5 + s2 * (epsilon - shift)
            }
        };
        let log_cdf_threshold = log_std_cdf(threshold / params.sigma);
        let all_below = steps as f64 * log_cdf_threshold;
        let event_probability = match direction {
            Direction::Qp => math::exp(all_below),
            Direction::Pq => -math::exp_m1(all_below),
        };
        Self {
            direction,
            threshold,
            event_probability,
            log_cdf_threshold,
        }
    }

    /// The event has zero probability in floating point.
    pub fn tail_underflow(&self) -> bool {
        !(self.event_probability > 0.0)
    }

    /// Whether a point of the unshifted space lies in the event.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self.direction {
            Direction::Qp => x.iter().all(|&v| v <= self.threshold),
            Direction::Pq => {
                let rest = x[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (x[0] - 1.0).max(rest) >= self.threshold
            }
        }
    }
}

/// The maximum coordinate of a conditioned draw.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConditionedMax {
    pub index: usize,
    pub value: f64,
    /// `log Phi(value / sigma)`.
    pub log_cdf: f64,
}

/// Draws the position and value of the maximum of `T` i.i.d. `N(0, sigma^2)`
/// given that the maximum is at least `C`, where
/// `log_cdf_c = log Phi(C / sigma)` and `p_event = 1 - Phi(C / sigma)^T`.
///
/// The maximum's CDF value is `Beta(T, 1)`, so conditioning on it exceeding
/// `Phi(C/sigma)` means `y^T` is uniform on `[Phi(C/sigma)^T, 1]`.
#[inline]
pub(crate) fn draw_conditioned_max(
    steps: usize,
    threshold: f64,
    p_event: f64,
    sigma: f64,
    rng: &mut RngStream,
) -> ConditionedMax {
    let v = rng.uniform();
    let log_cdf = math::ln_1p(-v * p_event) / steps as f64;
    let value = (sigma * std_quantile_from_log_cdf(log_cdf)).max(threshold);
    let index = if steps == 1 { 0 } else { rng.below(steps) };
    ConditionedMax { index, value, log_cdf }
}

/// One `N(0, sigma^2)` draw conditioned to lie below the point whose
/// log-CDF is `log_cdf_cap`.
#[inline]
pub(crate) fn draw_below(log_cdf_cap: f64, sigma: f64, rng: &mut RngStream) -> f64 {
    sigma * std_quantile_from_log_cdf(math::ln(rng.uniform_pos()) + log_cdf_cap)
}

/// Fills `out` with `N(0, sigma^2 I_T)` conditioned on `max_t x_t >= C`.
pub(crate) fn conditional_max_into(
    steps: usize,
    threshold: f64,
    log_cdf_c: f64,
    sigma: f64,
    rng: &mut RngStream,
    out: &mut Vec<f64>,
) -> Result<ConditionedMax> {
    let p_event = -math::exp_m1(steps as f64 * log_cdf_c);
    if !(p_event > 0.0) {
        return Err(Error::TailUnderflow);
    }
    let top = draw_conditioned_max(steps, threshold, p_event, sigma, rng);
    out.clear();
    for t in 0..steps {
        if t == top.index {
            out.push(top.value);
        } else {
            out.push(draw_below(top.log_cdf, sigma, rng).min(top.value));
        }
    }
    Ok(top)
}

/// A draw of `N(0, sigma^2 I_T)` conditioned on its maximum being at least `C`.
pub fn sample_conditional_max(steps: usize, threshold: f64, sigma: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::config("steps must be at least 1"));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain("sigma must be positive"));
    }
    let log_cdf_c = log_std_cdf(threshold / sigma);
    let mut out = Vec::with_capacity(steps);
    conditional_max_into(steps, threshold, log_cdf_c, sigma, rng, &mut out)?;
    Ok(out)
}

/// Fills `out` with i.i.d. `N(0, sigma^2)` draws each conditioned to be at
/// most the point with log-CDF `log_cdf_c`.
#[inline]
pub(crate) fn all_below_into(steps: usize, log_cdf_c: f64, sigma: f64, rng: &mut RngStream, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..steps).map(|_| draw_below(log_cdf_c, sigma, rng)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::std_cdf;

    fn params(sigma: f64, steps: usize) -> AccountingParams {
        AccountingParams::new(sigma, steps, 1).unwrap()
    }

    #[test]
    fn event_probabilities() {
        // Closed forms evaluated with an independent formula.
        let p = params(0.5, 10);
        let e = ImportanceEvent::new(Direction::Qp, &p, 1.0);
        let c = 0.5 + 0.25 * (10f64.ln() - 1.0);
        assert!((e.threshold - c).abs() < 1e-15);
        let want = std_cdf(c / 0.5).powi(10);
        assert!((e.event_probability - want).abs() < 1e-14);

        let e = ImportanceEvent::new(Direction::Pq, &p, 1.0);
        let c = 0.5 + 0.25 * (1.0 - (1.0 + (4f64.exp() - 1.0) / 10.0).ln());
        assert!((e.threshold - c).abs() < 1e-14);
        let want = 1.0 - std_cdf(c / 0.5).powi(10);
        assert!((e.event_probability - want).abs() < 1e-14);
    }

    #[test]
    fn loss_above_epsilon_implies_event() {
        use crate::pairs::{loss_bnb_pq, loss_bnb_qp};
        let mut rng = RngStream::new(4, 0);
        for &(sigma, steps, eps) in &[(0.5, 10usize, 0.3), (1.0, 3, 0.3), (0.3, 50, 2.0), (0.8, 1, 0.5)] {
            let p = params(sigma, steps);
            let qp = ImportanceEvent::new(Direction::Qp, &p, eps);
            let pq = ImportanceEvent::new(Direction::Pq, &p, eps);
            for _ in 0..20_000 {
                let mut x: Vec<f64> = (0..steps).map(|_| sigma * rng.standard_normal()).collect();
                if loss_bnb_qp(&x, &p).unwrap() >= eps {
                    assert!(qp.contains(&x));
                }
                x[0] += 1.0;
                if loss_bnb_pq(&x, &p).unwrap() >= eps {
                    assert!(pq.contains(&x));
                }
            }
        }
    }

    #[test]
    fn quoted_pq_event_probability() {
        let e = ImportanceEvent::new(Direction::Pq, &params(0.35, 10_000), 12.0);
        assert!((e.event_probability - 1.6632e-4).abs() < 1e-8, "{}", e.event_probability);
    }

    #[test]
    fn single_step_pq_threshold() {
        // With T = 1 the loss is (2x - 1)/(2 s^2) and exceeds eps above 1/2 + eps s^2,
        // i.e. x - 1 >= eps s^2 - 1/2.
        let e = ImportanceEvent::new(Direction::Pq, &params(0.7, 1), 2.0);
        assert!((e.threshold - (2.0 * 0.49 - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn huge_threshold_underflows() {
        let e = ImportanceEvent::new(Direction::Pq, &params(0.1, 10), 1e4);
        assert!(e.tail_underflow());
        let mut rng = RngStream::new(1, 1);
        assert_eq!(sample_conditional_max(3, 1e3, 1.0, &mut rng), Err(Error::TailUnderflow));
    }

    #[test]
    fn conditional_draws_satisfy_event() {
        let mut rng = RngStream::new(2, 0);
        for _ in 0..20_000 {
            let x = sample_conditional_max(10, 2.0, 1.0, &mut rng).unwrap();
            assert!(x.iter().copied().fold(f64::NEG_INFINITY, f64::max) >= 2.0);
        }
        let mut out = Vec::new();
        for _ in 0..20_000 {
            all_below_into(5, log_std_cdf(-1.5), 1.0, &mut rng, &mut out);
            assert!(out.iter().all(|&v| v <= -1.5));
        }
    }

    #[test]
    fn both_above_matches_elementary_oracle() {
        // Pr[both >= C | max >= C] for T = 2, C = sigma.
        let sigma = 1.3;
        let sf = 1.0 - std_cdf(1.0);
        let want = sf * sf / (1.0 - std_cdf(1.0) * std_cdf(1.0));
        let mut rng = RngStream::new(3, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let x = sample_conditional_max(2, sigma, sigma, &mut rng).unwrap();
                x[0] >= sigma && x[1] >= sigma
            })
            .count();
        let freq = hits as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((freq - want).abs() < 4.0 * se, "{freq} vs {want}");
    }
}
