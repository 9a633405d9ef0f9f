//! Monte Carlo estimation of hockey-stick divergences.
//!
//! Every estimate averages `max(0, 1 - e^{eps - L})` over draws of the privacy
//! loss `L` and converts the mean into a confidence bound by inverting the
//! Bernoulli KL divergence. Four strategies are available:
//!
//! - [`Strategy::Plain`]: draws from the numerator distribution directly.
//! - [`Strategy::Importance`]: draws conditioned on an event outside which
//!   the integrand vanishes, then rescales by the event probability.
//! - [`Strategy::OrderStats`]: draws only selected order statistics and
//!   evaluates an upper bound on the loss.
//! - [`Strategy::Combined`]: both of the above.
//!
//! Samples are produced in fixed-size chunks with one random stream per
//! chunk and summed exactly, so a run split over any number of workers is
//! bit-identical to a single-threaded one.

mod engine;
mod event;
mod order_stats;

use alloc::vec::Vec;
use core::fmt;

pub use engine::{merge_partials, Estimator, Partial, CHUNK_SIZE};
pub use event::{sample_conditional_max, ImportanceEvent};
pub use order_stats::{sample_order_stats, BaseDistribution, OrderStatSampler};

use crate::pairs::{AccountingParams, Direction, OrderSpec, PairId, PairKind};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Plain,
    Importance,
    OrderStats,
    Combined,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Plain => "plain",
            Strategy::Importance => "importance",
            Strategy::OrderStats => "order-stats",
            Strategy::Combined => "combined",
        }
    }

    pub fn uses_importance(self) -> bool {
        matches!(self, Strategy::Importance | Strategy::Combined)
    }

    pub fn uses_order_stats(self) -> bool {
        matches!(self, Strategy::OrderStats | Strategy::Combined)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    /// Samples per direction and query.
    pub m: u64,
    /// Error probability of each reported bound.
    pub beta: f64,
    pub strategy: Strategy,
    pub order_spec: Option<OrderSpec>,
    /// Advisory; results never depend on it.
    pub workers: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(m: u64, beta: f64, strategy: Strategy) -> Self {
        Self {
            m,
            beta,
            strategy,
            order_spec: None,
            workers: 1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_order_spec(mut self, spec: OrderSpec) -> Self {
        self.order_spec = Some(spec);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("sample size m must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("beta must lie strictly between 0 and 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        if self.strategy.uses_order_stats() && self.order_spec.is_none() {
            return Err(Error::config("order-statistics sampling needs an order spec"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimateDirection {
    Pq,
    Qp,
    /// Maximum over both directions.
    Both,
}

impl EstimateDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateDirection::Pq => "pq",
            EstimateDirection::Qp => "qp",
            EstimateDirection::Both => "both",
        }
    }

    pub fn directions(self) -> &'static [Direction] {
        match self {
            EstimateDirection::Pq => &[Direction::Pq],
            EstimateDirection::Qp => &[Direction::Qp],
            EstimateDirection::Both => &Direction::BOTH,
        }
    }
}

/// Which of the reported bounds carry a confidence guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    TwoSided,
    /// The loss was replaced by an upper bound; no valid lower bound.
    UpperOnly,
    /// The pair only dominates in one direction; `upper_p` is the trivial 1.
    LowerOnly,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::TwoSided => "two_sided",
            BoundKind::UpperOnly => "upper_only",
            BoundKind::LowerOnly => "lower_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaEstimate {
    pub epsilon: f64,
    pub direction: EstimateDirection,
    pub mean_q: f64,
    /// Holds with probability at least `1 - beta_used`.
    pub upper_p: f64,
    pub lower: Option<f64>,
    pub std_error: f64,
    pub m_used: u64,
    pub beta_used: f64,
    pub strategy_used: Strategy,
    pub seed: u64,
    pub event_probability: Option<f64>,
    /// The conditioning event has probability zero in floating point;
    /// `upper_p` is the event probability itself.
    pub tail_underflow: bool,
    pub bound_kind: BoundKind,
}

impl DeltaEstimate {
    /// Maximum of two single-direction estimates at the same epsilon.
    pub fn max_of(a: &DeltaEstimate, b: &DeltaEstimate) -> DeltaEstimate {
        let hi = if a.mean_q >= b.mean_q { a } else { b };
        DeltaEstimate {
            epsilon: a.epsilon,
            direction: EstimateDirection::Both,
            mean_q: a.mean_q.max(b.mean_q),
            upper_p: a.upper_p.max(b.upper_p),
            lower: match (a.lower, b.lower) {
                (Some(x), Some(y)) => Some(x.max(y)),
                _ => None,
            },
            std_error: hi.std_error,
            m_used: a.m_used,
            beta_used: a.beta_used,
            strategy_used: a.strategy_used,
            seed: a.seed,
            event_probability: None,
            tail_underflow: a.tail_underflow || b.tail_underflow,
            bound_kind: a.bound_kind,
        }
    }
}

/// Builds the estimators answering a query. Plain and order-statistics
/// queries share one estimator per direction across all `epsilons`;
/// importance-based ones need one per `(direction, epsilon)`.
pub fn plan(
    pair: PairKind,
    direction: EstimateDirection,
    params: &AccountingParams,
    epsilons: &[f64],
    cfg: &McConfig,
) -> Result<Vec<Estimator>> {
    let mut out = Vec::new();
    for &d in direction.directions() {
        if cfg.strategy.uses_importance() {
            for &e in epsilons {
                out.push(Estimator::new(pair, d, params, &[e], cfg)?);
            }
        } else {
            out.push(Estimator::new(pair, d, params, epsilons, cfg)?);
        }
    }
    Ok(out)
}

/// Runs a query, delegating the sampling of each estimator to `run`, and
/// returns one estimate per epsilon in input order.
pub fn estimate_with<F>(
    pair: PairKind,
    direction: EstimateDirection,
    params: &AccountingParams,
    epsilons: &[f64],
    cfg: &McConfig,
    mut run: F,
) -> Result<Vec<DeltaEstimate>>
where
    F: FnMut(&Estimator) -> Result<Partial>,
{
    let estimators = plan(pair, direction, params, epsilons, cfg)?;
    let mut per_direction: Vec<Vec<DeltaEstimate>> = Vec::new();
    let mut current: Vec<DeltaEstimate> = Vec::new();
    let mut current_dir = None;
    for est in &estimators {
        if current_dir.is_some_and(|d| d != est.direction()) {
            per_direction.push(core::mem::take(&mut current));
        }
        current_dir = Some(est.direction());
        let partial = run(est)?;
        current.extend(est.finish(&partial)?);
    }
    per_direction.push(current);
    Ok(match per_direction.as_slice() {
        [single] => single.clone(),
        [a, b] => a.iter().zip(b).map(|(x, y)| DeltaEstimate::max_of(x, y)).collect(),
        _ => unreachable!("at most two directions"),
    })
}

/// Single-threaded [`estimate_with`].
pub fn estimate_curve(
    pair: PairKind,
    direction: EstimateDirection,
    params: &AccountingParams,
    epsilons: &[f64],
    cfg: &McConfig,
) -> Result<Vec<DeltaEstimate>> {
    estimate_with(pair, direction, params, epsilons, cfg, |e| Ok(e.run()))
}

pub fn estimate(
    pair: PairKind,
    direction: EstimateDirection,
    params: &AccountingParams,
    epsilon: f64,
    cfg: &McConfig,
) -> Result<DeltaEstimate> {
    Ok(estimate_curve(pair, direction, params, &[epsilon], cfg)?.remove(0))
}

fn require(cfg: &McConfig, strategy: Strategy) -> Result<()> {
    if cfg.strategy != strategy {
        return Err(Error::config(alloc::format!(
            "expected strategy {strategy}, got {}",
            cfg.strategy
        )));
    }
    Ok(())
}

fn single(pair: PairId, params: &AccountingParams, epsilon: f64, cfg: &McConfig) -> Result<DeltaEstimate> {
    estimate(pair.kind, pair.direction.into(), params, epsilon, cfg)
}

/// Plain Monte Carlo for any pair and any number of epochs.
pub fn estimate_plain(pair: PairId, params: &AccountingParams, epsilon: f64, cfg: &McConfig) -> Result<DeltaEstimate> {
    require(cfg, Strategy::Plain)?;
    single(pair, params, epsilon, cfg)
}

pub fn estimate_importance(
    direction: Direction,
    params: &AccountingParams,
    epsilon: f64,
    cfg: &McConfig,
) -> Result<DeltaEstimate> {
    require(cfg, Strategy::Importance)?;
    single(PairId::new(PairKind::BallsBins, direction), params, epsilon, cfg)
}

pub fn estimate_order_stats(
    direction: Direction,
    params: &AccountingParams,
    epsilon: f64,
    cfg: &McConfig,
) -> Result<DeltaEstimate> {
    require(cfg, Strategy::OrderStats)?;
    single(PairId::new(PairKind::BallsBins, direction), params, epsilon, cfg)
}

pub fn estimate_combined(
    direction: Direction,
    params: &AccountingParams,
    epsilon: f64,
    cfg: &McConfig,
) -> Result<DeltaEstimate> {
    require(cfg, Strategy::Combined)?;
    single(PairId::new(PairKind::BallsBins, direction), params, epsilon, cfg)
}

/// Sums `params.epochs` independent per-epoch losses per sample.
pub fn estimate_multi_epoch(
    pair: PairId,
    params: &AccountingParams,
    epsilon: f64,
    cfg: &McConfig,
) -> Result<DeltaEstimate> {
    if cfg.strategy.uses_importance() {
        return Err(Error::Unsupported("importance sampling supports a single epoch only"));
    }
    single(pair, params, epsilon, cfg)
}
