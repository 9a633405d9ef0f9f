//! Method resolution and evaluation of accounting queries.

use ballsbins_core::analytic::{bnb_lower_bound, delta_deterministic, PoissonAccountant, RoundingMode};
use ballsbins_core::mc::{self, DeltaEstimate, EstimateDirection, McConfig, Strategy};
use ballsbins_core::pairs::{AccountingParams, OrderSpec, PairKind};
use clap::ValueEnum;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::parallel::run_parallel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Bnb,
    Poisson,
    Shuffle,
    Deterministic,
}

impl Sampler {
    fn pair(self) -> PairKind {
        match self {
            Sampler::Bnb => PairKind::BallsBins,
            Sampler::Poisson => PairKind::Poisson,
            Sampler::Shuffle => PairKind::ShuffleDominated,
            Sampler::Deterministic => PairKind::Deterministic,
        }
    }
}

/// Requested method. `upper` and `lower` pick the best method of that kind
/// for the sampler; `auto` prefers an upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    Upper,
    Lower,
    Analytic,
    Pld,
    Plain,
    Importance,
    OrderStats,
    Combined,
    LowerBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Closed form (Deterministic).
    Analytic,
    /// Pessimistic and optimistic privacy-loss distributions (Poisson).
    Pld,
    MonteCarlo(Strategy),
    /// Certified threshold-set lower bound (Balls-and-Bins).
    LowerBound,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Pld => "pld",
            Method::MonteCarlo(s) => s.as_str(),
            Method::LowerBound => "lower-bound",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    Both,
    Pq,
    Qp,
}

impl From<DirectionArg> for EstimateDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Both => EstimateDirection::Both,
            DirectionArg::Pq => EstimateDirection::Pq,
            DirectionArg::Qp => EstimateDirection::Qp,
        }
    }
}

/// Everything but the epsilons.
#[derive(Clone, Debug, Serialize)]
pub struct Request {
    pub sampler: Sampler,
    pub sigma: f64,
    pub steps: usize,
    pub epochs: usize,
    pub method: MethodArg,
    pub direction: DirectionArg,
    pub m: u64,
    pub beta: f64,
    pub orders: Option<Vec<usize>>,
    pub workers: usize,
    pub seed: u64,
    pub grid_step: f64,
    #[serde(skip)]
    pub verbose: bool,
}

impl Request {
    pub fn params(&self) -> Result<AccountingParams> {
        Ok(AccountingParams::new(self.sigma, self.steps, self.epochs)?)
    }

    pub fn resolve_method(&self) -> Result<Method> {
        use MethodArg as A;
        let single = self.epochs == 1;
        let bad = |what: &str| {
            Err(CliError::config(format!(
                "method {} is not available for the {} sampler{what}",
                self.method.to_possible_value().unwrap().get_name(),
                self.sampler.to_possible_value().unwrap().get_name(),
            )))
        };
        let m = match (self.sampler, self.method) {
            (Sampler::Shuffle, A::Auto | A::Lower | A::Plain) => Method::MonteCarlo(Strategy::Plain),
            (Sampler::Shuffle, _) => {
                return Err(CliError::config(
                    "shuffle supports lower bounds only (use --method lower or plain)",
                ))
            }
            (Sampler::Deterministic, A::Plain) => Method::MonteCarlo(Strategy::Plain),
            (Sampler::Deterministic, A::Auto | A::Upper | A::Lower | A::Analytic) if single => Method::Analytic,
            (Sampler::Deterministic, A::Auto | A::Upper | A::Lower | A::Analytic) => {
                return bad(" with more than one epoch (use --method plain)")
            }
            (Sampler::Poisson, A::Auto | A::Upper | A::Lower | A::Pld) => Method::Pld,
            (Sampler::Poisson, A::Plain) => Method::MonteCarlo(Strategy::Plain),
            (Sampler::Bnb, A::Auto | A::Upper) => Method::MonteCarlo(match (single, self.orders.is_some()) {
                (true, true) => Strategy::Combined,
                (true, false) => Strategy::Importance,
                (false, true) => Strategy::OrderStats,
                (false, false) => Strategy::Plain,
            }),
            (Sampler::Bnb, A::Lower | A::LowerBound) if single => Method::LowerBound,
            (Sampler::Bnb, A::Plain) => Method::MonteCarlo(Strategy::Plain),
            (Sampler::Bnb, A::Importance) => Method::MonteCarlo(Strategy::Importance),
            (Sampler::Bnb, A::OrderStats) => Method::MonteCarlo(Strategy::OrderStats),
            (Sampler::Bnb, A::Combined) => Method::MonteCarlo(Strategy::Combined),
            (Sampler::Bnb, A::Lower | A::LowerBound) => return bad(" with more than one epoch"),
            _ => return bad(""),
        };
        if let Method::MonteCarlo(s) = m {
            if s.uses_order_stats() && self.orders.is_none() {
                return Err(CliError::config(format!("method {} needs --orders", s.as_str())));
            }
            if s.uses_importance() && !single {
                return Err(CliError::config(format!("method {} supports a single epoch only", s.as_str())));
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// `null` when no threshold gives a positive bound.
    pub threshold: Option<f64>,
    pub value: f64,
    pub p_tail: f64,
    pub q_tail: f64,
}

/// One evaluated epsilon. Field names follow the library's estimate type;
/// fields that a method does not produce are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub epsilon: f64,
    /// Headline value: the upper bound when one exists, else the lower bound.
    pub delta: f64,
    pub method: &'static str,
    pub direction: &'static str,
    pub mean_q: Option<f64>,
    pub upper_p: Option<f64>,
    pub lower: Option<f64>,
    pub std_error: Option<f64>,
    pub m_used: Option<u64>,
    pub beta_used: Option<f64>,
    pub strategy_used: Option<&'static str>,
    pub seed: Option<u64>,
    pub event_probability: Option<f64>,
    pub tail_underflow: bool,
    pub bound_kind: &'static str,
    pub certificate: Option<Certificate>,
}

impl Evaluation {
    fn analytic(epsilon: f64, method: Method, direction: &'static str, bound_kind: &'static str) -> Self {
        Self {
            epsilon,
            delta: 0.0,
            method: method.as_str(),
            direction,
            mean_q: None,
            upper_p: None,
            lower: None,
            std_error: None,
            m_used: None,
            beta_used: None,
            strategy_used: None,
            seed: None,
            event_probability: None,
            tail_underflow: false,
            bound_kind,
            certificate: None,
        }
    }

    fn from_estimate(e: &DeltaEstimate) -> Self {
        let lower_only = e.bound_kind == mc::BoundKind::LowerOnly;
        Self {
            epsilon: e.epsilon,
            delta: if lower_only { e.lower.unwrap_or(0.0) } else { e.upper_p },
            method: e.strategy_used.as_str(),
            direction: e.direction.as_str(),
            mean_q: Some(e.mean_q),
            upper_p: Some(e.upper_p),
            lower: e.lower,
            std_error: Some(e.std_error),
            m_used: Some(e.m_used),
            beta_used: Some(e.beta_used),
            strategy_used: Some(e.strategy_used.as_str()),
            seed: Some(e.seed),
            event_probability: e.event_probability,
            tail_underflow: e.tail_underflow,
            bound_kind: e.bound_kind.as_str(),
            certificate: None,
        }
    }
}

fn certificate(params: &AccountingParams, epsilon: f64) -> Result<Certificate> {
    let c = bnb_lower_bound(params, epsilon)?;
    Ok(Certificate {
        threshold: c.threshold.is_finite().then_some(c.threshold),
        value: c.value,
        p_tail: c.p_tail,
        q_tail: c.q_tail,
    })
}

/// Evaluates `epsilons` in the given order.
pub fn evaluate(req: &Request, epsilons: &[f64]) -> Result<Vec<Evaluation>> {
    if epsilons.is_empty() {
        return Err(CliError::config("at least one epsilon is required"));
    }
    if let Some(e) = epsilons.iter().find(|e| !e.is_finite()) {
        return Err(CliError::config(format!("epsilon must be finite, got {e}")));
    }
    let params = req.params()?;
    let method = req.resolve_method()?;
    let direction = EstimateDirection::from(req.direction);
    match method {
        Method::Analytic => epsilons
            .iter()
            .map(|&e| {
                let d = delta_deterministic(&params, e)?;
                let mut row = Evaluation::analytic(e, method, "both", "exact");
                row.delta = d;
                row.mean_q = Some(d);
                row.upper_p = Some(d);
                row.lower = Some(d);
                Ok(row)
            })
            .collect(),
        Method::Pld => {
            if !(req.grid_step > 0.0 && req.grid_step.is_finite()) {
                return Err(CliError::config("grid step must be positive"));
            }
            log(req, format_args!("building Poisson PLDs, grid step {}", req.grid_step));
            let hi = PoissonAccountant::new(&params, req.grid_step, RoundingMode::Pessimistic)?;
            let lo = PoissonAccountant::new(&params, req.grid_step, RoundingMode::Optimistic)?;
            let pick = |a: &PoissonAccountant, e: f64| match direction {
                EstimateDirection::Both => a.delta(e),
                EstimateDirection::Pq => a.add.delta(e),
                EstimateDirection::Qp => a.remove.delta(e),
            };
            Ok(epsilons
                .iter()
                .map(|&e| {
                    let upper = pick(&hi, e);
                    let mut row = Evaluation::analytic(e, method, direction.as_str(), "two_sided");
                    row.delta = upper;
                    row.upper_p = Some(upper);
                    row.lower = Some(pick(&lo, e).min(upper));
                    row
                })
                .collect())
        }
        Method::LowerBound => epsilons
            .iter()
            .map(|&e| {
                let cert = certificate(&params, e)?;
                let mut row = Evaluation::analytic(e, method, "both", "lower_only");
                row.delta = cert.value;
                row.lower = Some(cert.value);
                row.certificate = Some(cert);
                Ok(row)
            })
            .collect(),
        Method::MonteCarlo(strategy) => {
            let mut cfg = McConfig::new(req.m, req.beta, strategy).with_seed(req.seed);
            cfg.workers = req.workers.max(1);
            if let (true, Some(orders)) = (strategy.uses_order_stats(), &req.orders) {
                cfg = cfg.with_order_spec(OrderSpec::new(orders.clone(), params.steps)?);
            }
            let estimates = mc::estimate_with(req.sampler.pair(), direction, &params, epsilons, &cfg, |est| {
                log(
                    req,
                    format_args!(
                        "sampling {} {} m={} eps={:?} on {} workers",
                        strategy.as_str(),
                        est.direction().as_str(),
                        req.m,
                        est.epsilons(),
                        cfg.workers
                    ),
                );
                run_parallel(est, cfg.workers)
            })?;
            let certify = req.sampler == Sampler::Bnb && params.epochs == 1;
            estimates
                .iter()
                .map(|est| {
                    let mut row = Evaluation::from_estimate(est);
                    if certify {
                        let cert = certificate(&params, est.epsilon)?;
                        // Surrogate-based estimates carry no lower confidence
                        // bound of their own; the certificate is one.
                        if row.lower.is_none() {
                            row.lower = Some(cert.value);
                        }
                        row.certificate = Some(cert);
                    }
                    Ok(row)
                })
                .collect()
        }
    }
}

fn log(req: &Request, msg: std::fmt::Arguments<'_>) {
    if req.verbose {
        eprintln!("ballsbins: {msg}");
    }
}
