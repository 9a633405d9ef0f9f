//! Dominating pairs and their privacy loss functions.
//!
//! Every loss here is `log(P(x) / Q(x))` for the pair selected by
//! [`PairKind`], evaluated in the direction given by [`Direction`]. Sums of
//! exponentials always go through a max-shifted log-sum-exp, since the plain
//! form overflows for small `sigma`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use crate::num::{logsumexp_iter, math};
use crate::{Error, Result};

/// The mechanism being accounted: noise scale, steps per epoch, epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccountingParams {
    pub sigma: f64,
    pub steps: usize,
    pub epochs: usize,
}

impl AccountingParams {
    pub fn new(sigma: f64, steps: usize, epochs: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("sigma must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::config("steps must be at least 1"));
        }
        if epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        Ok(Self { sigma, steps, epochs })
    }

    /// Same mechanism, one epoch.
    pub fn single_epoch(&self) -> Self {
        Self { epochs: 1, ..*self }
    }

    #[inline]
    pub(crate) fn inv_var(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    BallsBins,
    Deterministic,
    Poisson,
    ShuffleDominated,
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairKind::BallsBins => "bnb",
            PairKind::Deterministic => "deterministic",
            PairKind::Poisson => "poisson",
            PairKind::ShuffleDominated => "shuffle",
        })
    }
}

/// `Pq` evaluates `D(P || Q)` (samples from `P`), `Qp` the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Pq,
    Qp,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Pq, Direction::Qp];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Pq => "pq",
            Direction::Qp => "qp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairId {
    pub kind: PairKind,
    pub direction: Direction,
}

impl PairId {
    pub fn new(kind: PairKind, direction: Direction) -> Self {
        Self { kind, direction }
    }

    /// Loss of this pair at `x`. Deterministic takes a single coordinate;
    /// the others take `params.steps`.
    pub fn loss(&self, x: &[f64], params: &AccountingParams) -> Result<f64> {
        match self.kind {
            PairKind::Deterministic => {
                if x.len() != 1 {
                    return Err(Error::Dimension { expected: 1, got: x.len() });
                }
                Ok(loss_deterministic(x[0], params, self.direction))
            }
            PairKind::BallsBins => match self.direction {
                Direction::Pq => loss_bnb_pq(x, params),
                Direction::Qp => loss_bnb_qp(x, params),
            },
            PairKind::Poisson => loss_poisson(x, params, self.direction),
            PairKind::ShuffleDominated => loss_shuffle(x, params, self.direction),
        }
    }
}

/// A draw of the loss, or of a certified upper bound on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSample {
    pub value: f64,
    pub is_surrogate: bool,
}

/// Ranks `k_1 < ... < k_r` (1 = largest) selected among `R` draws.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderSpec {
    orders: Vec<usize>,
    r_total: usize,
    // ln(k_i - k_{i-1}) with k_0 = 0.
    ln_w_lower: Vec<f64>,
    // ln(k_{i+1} - k_i) with k_{r+1} = R + 1.
    ln_w_upper: Vec<f64>,
}

impl OrderSpec {
    pub fn new(orders: Vec<usize>, r_total: usize) -> Result<Self> {
        if r_total == 0 {
            return Err(Error::OrderSpec("R must be at least 1".to_string()));
        }
        if orders.is_empty() {
            return Err(Error::OrderSpec("order list is empty".to_string()));
        }
        if orders[0] == 0 {
            return Err(Error::OrderSpec("orders are 1-based".to_string()));
        }
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::OrderSpec("orders must be strictly increasing".to_string()));
        }
        let last = *orders.last().unwrap_or(&0);
        if last > r_total {
            return Err(Error::OrderSpec(alloc::format!(
                "order {last} exceeds R = {r_total}"
            )));
        }
        Ok(Self::build(orders, r_total))
    }

    /// All ranks `1..=R`; surrogates built from it are exact.
    pub fn full(r_total: usize) -> Self {
        Self::build((1..=r_total).collect(), r_total)
    }

    fn build(orders: Vec<usize>, r_total: usize) -> Self {
        let mut ln_w_lower = Vec::with_capacity(orders.len());
        let mut ln_w_upper = Vec::with_capacity(orders.len());
        let mut prev = 0;
        for (i, &k) in orders.iter().enumerate() {
            ln_w_lower.push(math::ln((k - prev) as f64));
            let next = orders.get(i + 1).copied().unwrap_or(r_total + 1);
            ln_w_upper.push(math::ln((next - k) as f64));
            prev = k;
        }
        Self {
            orders,
            r_total,
            ln_w_lower,
            ln_w_upper,
        }
    }

    /// The same ranks applied to `r_total` draws, dropping ranks above it.
    /// May be empty (including `r_total = 0`).
    pub fn restrict(&self, r_total: usize) -> Self {
        let orders = self.orders.iter().copied().filter(|&k| k <= r_total).collect();
        Self::build(orders, r_total)
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn r_total(&self) -> usize {
        self.r_total
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.orders.len() == self.r_total
    }

    fn require_first_is_max(&self) -> Result<()> {
        if self.r_total > 0 && self.orders.first() != Some(&1) {
            return Err(Error::OrderSpec(
                "upper-bound surrogate requires the first order to be 1".to_string(),
            ));
        }
        Ok(())
    }
}

fn check_len(x: &[f64], params: &AccountingParams) -> Result<()> {
    if x.len() != params.steps {
        return Err(Error::Dimension {
            expected: params.steps,
            got: x.len(),
        });
    }
    Ok(())
}

fn check_nonincreasing(values: &[f64]) -> Result<()> {
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::OrderSpec("order values must be nonincreasing".to_string()));
    }
    Ok(())
}

/// `log(sum_t e^{x_t / sigma^2}) - log T - 1/(2 sigma^2)`.
pub fn loss_bnb_pq(x: &[f64], params: &AccountingParams) -> Result<f64> {
    check_len(x, params)?;
    Ok(bnb_pq_unchecked(x, params))
}

#[inline]
pub(crate) fn bnb_pq_unchecked(x: &[f64], params: &AccountingParams) -> f64 {
    let iv = params.inv_var();
    logsumexp_iter(x.iter().map(|&v| v * iv)) - math::ln(params.steps as f64) - 0.5 * iv
}

pub fn loss_bnb_qp(x: &[f64], params: &AccountingParams) -> Result<f64> {
    Ok(-loss_bnb_pq(x, params)?)
}

/// Loss of `N(1, sigma^2)` against `N(0, sigma^2)` at `x`.
pub fn loss_deterministic(x: f64, params: &AccountingParams, direction: Direction) -> f64 {
    let pq = (2.0 * x - 1.0) * 0.5 * params.inv_var();
    match direction {
        Direction::Pq => pq,
        Direction::Qp => -pq,
    }
}

/// Loss of the shuffle-dominating mixtures centred at `2 e_t` (P) and `e_t` (Q).
pub fn loss_shuffle(x: &[f64], params: &AccountingParams, direction: Direction) -> Result<f64> {
    check_len(x, params)?;
    let pq = shuffle_pq_unchecked(x, params);
    Ok(match direction {
        Direction::Pq => pq,
        Direction::Qp => -pq,
    })
}

#[inline]
pub(crate) fn shuffle_pq_unchecked(x: &[f64], params: &AccountingParams) -> f64 {
    let iv = params.inv_var();
    // |x - 2e_t|^2 - |x|^2 = 4 - 4 x_t and |x - e_t|^2 - |x|^2 = 1 - 2 x_t.
    let num = logsumexp_iter(x.iter().map(|&v| (2.0 * v - 2.0) * iv));
    let den = logsumexp_iter(x.iter().map(|&v| (v - 0.5) * iv));
    num - den
}

/// Loss of the Poisson pair: product over steps of
/// `(1 - q) N(0, sigma^2) + q N(1, sigma^2)` against `N(0, sigma^2)`, `q = 1/T`.
pub fn loss_poisson(x: &[f64], params: &AccountingParams, direction: Direction) -> Result<f64> {
    check_len(x, params)?;
    let q = 1.0 / params.steps as f64;
    let pq = poisson_pq_unchecked(x, q, params.sigma);
    Ok(match direction {
        Direction::Pq => pq,
        Direction::Qp => -pq,
    })
}

pub(crate) fn poisson_pq_unchecked(x: &[f64], q: f64, sigma: f64) -> f64 {
    x.iter().map(|&v| poisson_step_loss(v, q, sigma)).sum()
}

/// One-step loss `log(1 - q + q e^{(2x - 1)/(2 sigma^2)})`.
#[inline]
pub(crate) fn poisson_step_loss(x: f64, q: f64, sigma: f64) -> f64 {
    let ln_keep = if q >= 1.0 { f64::NEG_INFINITY } else { math::ln_1p(-q) };
    math::log_add_exp(ln_keep, math::ln(q) + (2.0 * x - 1.0) / (2.0 * sigma * sigma))
}

/// Upper bound on the QP loss from order statistics of all `T` coordinates,
/// using `sum_t e^{x_t/s^2} >= sum_i (k_i - k_{i-1}) e^{y_(k_i)/s^2}`.
pub fn loss_surrogate_upper_qp(
    order_values: &[f64],
    spec: &OrderSpec,
    params: &AccountingParams,
) -> Result<LossSample> {
    if spec.r_total != params.steps {
        return Err(Error::OrderSpec(alloc::format!(
            "QP surrogate needs R = T = {}, got {}",
            params.steps,
            spec.r_total
        )));
    }
    check_values(order_values, spec)?;
    Ok(LossSample {
        value: surrogate_qp_unchecked(order_values, spec, params),
        is_surrogate: true,
    })
}

fn check_values(order_values: &[f64], spec: &OrderSpec) -> Result<()> {
    if order_values.len() != spec.len() {
        return Err(Error::Dimension {
            expected: spec.len(),
            got: order_values.len(),
        });
    }
    check_nonincreasing(order_values)
}

#[inline]
pub(crate) fn surrogate_qp_unchecked(order_values: &[f64], spec: &OrderSpec, params: &AccountingParams) -> f64 {
    let iv = params.inv_var();
    let lower = logsumexp_iter(
        order_values
            .iter()
            .zip(&spec.ln_w_lower)
            .map(|(&y, &lw)| lw + y * iv),
    );
    math::ln(params.steps as f64) + 0.5 * iv - lower
}

/// Upper bound on the PQ loss given `x_1` and order statistics of the other
/// `T - 1` coordinates, using
/// `sum_t e^{x_t/s^2} <= sum_i (k_{i+1} - k_i) e^{y_(k_i)/s^2}` with `k_1 = 1`.
pub fn loss_surrogate_upper_pq(
    x1: f64,
    order_values: &[f64],
    spec: &OrderSpec,
    params: &AccountingParams,
) -> Result<LossSample> {
    loss_surrogate_upper_pq_fixed(&[x1], order_values, spec, params)
}

/// As [`loss_surrogate_upper_pq`] with several exactly known coordinates;
/// `spec` covers the remaining `T - fixed.len()`.
pub fn loss_surrogate_upper_pq_fixed(
    fixed: &[f64],
    order_values: &[f64],
    spec: &OrderSpec,
    params: &AccountingParams,
) -> Result<LossSample> {
    if fixed.len() + spec.r_total != params.steps {
        return Err(Error::OrderSpec(alloc::format!(
            "PQ surrogate needs {} fixed coordinates plus R = {} to equal T = {}",
            fixed.len(),
            spec.r_total,
            params.steps
        )));
    }
    spec.require_first_is_max()?;
    check_values(order_values, spec)?;
    Ok(LossSample {
        value: surrogate_pq_unchecked(fixed, order_values, spec, params),
        is_surrogate: true,
    })
}

#[inline]
pub(crate) fn surrogate_pq_unchecked(
    fixed: &[f64],
    order_values: &[f64],
    spec: &OrderSpec,
    params: &AccountingParams,
) -> f64 {
    let iv = params.inv_var();
    let terms = fixed.iter().map(|&v| v * iv).chain(
        order_values
            .iter()
            .zip(&spec.ln_w_upper)
            .map(|(&y, &lw)| lw + y * iv),
    );
    logsumexp_iter(terms) - math::ln(params.steps as f64) - 0.5 * iv
}

/// Loss of the `k`-fold product pair: the sum of the per-epoch losses.
pub fn loss_multi_epoch(per_epoch_losses: &[f64]) -> Result<f64> {
    if per_epoch_losses.is_empty() {
        return Err(Error::Domain("multi-epoch loss of zero epochs"));
    }
    Ok(per_epoch_losses.iter().sum())
}
