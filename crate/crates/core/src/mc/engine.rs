use alloc::vec::Vec;

use super::event::{all_below_into, conditional_max_into, draw_below, draw_conditioned_max, ImportanceEvent};
use super::order_stats::OrderStatSampler;
use super::{BoundKind, DeltaEstimate, EstimateDirection, McConfig, Strategy};
use crate::num::{kl_lcb, kl_ucb, math, streams, ExactSum, RngStream};
use crate::pairs::{
    bnb_pq_unchecked, loss_deterministic, poisson_pq_unchecked, shuffle_pq_unchecked, surrogate_pq_unchecked,
    surrogate_qp_unchecked, AccountingParams, Direction, OrderSpec, PairKind,
};
use crate::{Error, Result};

/// Samples per chunk. Chunk `c` always draws from the same random stream,
/// so results do not depend on how chunks are spread over workers.
pub const CHUNK_SIZE: u64 = 4096;

#[derive(Clone, Debug)]
enum Kernel {
    Plain,
    OrderStatsQp(OrderStatSampler),
    OrderStatsPq(OrderStatSampler),
    ImportanceQp {
        log_cdf_c: f64,
    },
    ImportancePq {
        threshold: f64,
        log_cdf_c: f64,
    },
    CombinedQp {
        sampler: OrderStatSampler,
        log_cdf_c: f64,
    },
    CombinedPq {
        // Order statistics of the T - 1 others when x_1 holds the maximum.
        first: OrderStatSampler,
        // Order statistics of the T - 2 others otherwise.
        other: Option<OrderStatSampler>,
        threshold: f64,
        p_event: f64,
    },
}

/// Sums of the clipped integrand over a set of chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partial {
    pub sums: Vec<ExactSum>,
    pub sums_sq: Vec<ExactSum>,
    pub count: u64,
    pub fingerprint: u64,
}

impl Partial {
    fn empty(len: usize, fingerprint: u64) -> Self {
        Self {
            sums: alloc::vec![ExactSum::ZERO; len],
            sums_sq: alloc::vec![ExactSum::ZERO; len],
            count: 0,
            fingerprint,
        }
    }

    fn absorb(&mut self, other: &Partial) -> Result<()> {
        if self.fingerprint != other.fingerprint || self.sums.len() != other.sums.len() {
            return Err(Error::FingerprintMismatch);
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
        for (a, b) in self.sums_sq.iter_mut().zip(&other.sums_sq) {
            a.merge(b);
        }
        self.count += other.count;
        Ok(())
    }
}

/// Pools partial results computed for the same estimator.
pub fn merge_partials(parts: &[Partial]) -> Result<Partial> {
    let first = parts
        .first()
        .ok_or_else(|| Error::config("no partial results to merge"))?;
    let mut acc = Partial::empty(first.sums.len(), first.fingerprint);
    for p in parts {
        acc.absorb(p)?;
    }
    Ok(acc)
}

struct Scratch {
    x: Vec<f64>,
    y: Vec<f64>,
}

/// A fully validated Monte Carlo query for one direction of one pair.
///
/// Plain and order-statistics estimators evaluate a whole list of `epsilon`
/// values on common random numbers; importance-based ones take a single
/// `epsilon` because the conditioning event depends on it.
#[derive(Clone, Debug)]
pub struct Estimator {
    pair: PairKind,
    direction: Direction,
    params: AccountingParams,
    epsilons: Vec<f64>,
    strategy: Strategy,
    m: u64,
    beta: f64,
    seed: u64,
    kernel: Kernel,
    event: Option<ImportanceEvent>,
    fingerprint: u64,
}

impl Estimator {
    pub fn new(
        pair: PairKind,
        direction: Direction,
        params: &AccountingParams,
        epsilons: &[f64],
        cfg: &McConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if epsilons.is_empty() {
            return Err(Error::config("at least one epsilon is required"));
        }
        if epsilons.iter().any(|e| e.is_nan()) {
            return Err(Error::config("epsilon must not be NaN"));
        }
        let strategy = cfg.strategy;
        if strategy != Strategy::Plain && pair != PairKind::BallsBins {
            return Err(Error::Unsupported(
                "importance and order-statistics sampling are defined for the Balls-and-Bins pair only",
            ));
        }
        if strategy.uses_importance() {
            if params.epochs > 1 {
                return Err(Error::Unsupported("importance sampling supports a single epoch only"));
            }
            if epsilons.len() != 1 {
                return Err(Error::config("importance sampling takes one epsilon per estimator"));
            }
        }
        let spec = if strategy.uses_order_stats() {
            let spec = cfg
                .order_spec
                .as_ref()
                .ok_or_else(|| Error::config("order-statistics sampling needs an order spec"))?;
            if spec.orders().last().copied().unwrap_or(0) > params.steps {
                return Err(Error::OrderSpec(alloc::format!(
                    "largest order exceeds T = {}",
                    params.steps
                )));
            }
            Some(spec)
        } else {
            None
        };

        let sigma = params.sigma;
        let steps = params.steps;
        let event = strategy
            .uses_importance()
            .then(|| ImportanceEvent::new(direction, params, epsilons[0]));
        let kernel = match (strategy, direction) {
            (Strategy::Plain, _) => Kernel::Plain,
            (Strategy::OrderStats, Direction::Qp) => {
                Kernel::OrderStatsQp(OrderStatSampler::new(&qp_spec(spec.unwrap(), steps)?, sigma)?)
            }
            (Strategy::OrderStats, Direction::Pq) => {
                Kernel::OrderStatsPq(OrderStatSampler::new(&pq_spec(spec.unwrap(), steps - 1)?, sigma)?)
            }
            (Strategy::Importance, Direction::Qp) => Kernel::ImportanceQp {
                log_cdf_c: event.unwrap().log_cdf_threshold,
            },
            (Strategy::Importance, Direction::Pq) => Kernel::ImportancePq {
                threshold: event.unwrap().threshold,
                log_cdf_c: event.unwrap().log_cdf_threshold,
            },
            (Strategy::Combined, Direction::Qp) => Kernel::CombinedQp {
                sampler: OrderStatSampler::new(&qp_spec(spec.unwrap(), steps)?, sigma)?,
                log_cdf_c: event.unwrap().log_cdf_threshold,
            },
            (Strategy::Combined, Direction::Pq) => {
                let spec = spec.unwrap();
                let other = if steps >= 2 {
                    Some(OrderStatSampler::new(&pq_spec(spec, steps - 2)?, sigma)?)
                } else {
                    None
                };
                Kernel::CombinedPq {
                    first: OrderStatSampler::new(&pq_spec(spec, steps - 1)?, sigma)?,
                    other,
                    threshold: event.unwrap().threshold,
                    p_event: event.unwrap().event_probability,
                }
            }
        };
        let fingerprint = fingerprint(pair, direction, params, epsilons, cfg);
        Ok(Self {
            pair,
            direction,
            params: *params,
            epsilons: epsilons.to_vec(),
            strategy,
            m: cfg.m,
            beta: cfg.beta,
            seed: cfg.seed,
            kernel,
            event,
            fingerprint,
        })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn event(&self) -> Option<&ImportanceEvent> {
        self.event.as_ref()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn num_chunks(&self) -> u64 {
        self.m.div_ceil(CHUNK_SIZE)
    }

    fn stream_tag(&self) -> u64 {
        let kind = match self.pair {
            PairKind::BallsBins => 0,
            PairKind::Deterministic => 1,
            PairKind::Poisson => 2,
            PairKind::ShuffleDominated => 3,
        };
        let dir = match self.direction {
            Direction::Pq => 0,
            Direction::Qp => 1,
        };
        2 * kind + dir
    }

    fn tail_underflow(&self) -> bool {
        self.event.is_some_and(|e| e.tail_underflow())
    }

    /// Draws the samples of chunk `c`.
    pub fn run_chunk(&self, c: u64) -> Partial {
        let mut part = Partial::empty(self.epsilons.len(), self.fingerprint);
        let start = c * CHUNK_SIZE;
        if start >= self.m {
            return part;
        }
        let n = CHUNK_SIZE.min(self.m - start);
        part.count = n;
        if self.tail_underflow() {
            return part;
        }
        let mut rng = RngStream::new(self.seed, streams::chunk(self.stream_tag(), c));
        let mut scratch = Scratch {
            x: Vec::with_capacity(self.params.steps),
            y: Vec::new(),
        };
        for _ in 0..n {
            let loss = self.draw_loss(&mut rng, &mut scratch);
            for (i, &eps) in self.epsilons.iter().enumerate() {
                let f = if loss > eps { -math::exp_m1(eps - loss) } else { 0.0 };
                part.sums[i].add(f);
                part.sums_sq[i].add(f * f);
            }
        }
        part
    }

    /// Runs the given chunks one after another.
    pub fn run_chunks<I: IntoIterator<Item = u64>>(&self, chunks: I) -> Partial {
        let mut acc = Partial::empty(self.epsilons.len(), self.fingerprint);
        for c in chunks {
            // Same fingerprint by construction.
            let _ = acc.absorb(&self.run_chunk(c));
        }
        acc
    }

    /// Single-threaded run over every chunk.
    pub fn run(&self) -> Partial {
        self.run_chunks(0..self.num_chunks())
    }

    /// Runs as if on `workers` workers, worker `w` taking chunks
    /// `w, w + workers, ...`, and merges their partials.
    pub fn run_split(&self, workers: usize) -> Result<Partial> {
        let w = workers.max(1) as u64;
        let parts: Vec<Partial> = (0..w)
            .map(|k| self.run_chunks((k..self.num_chunks()).step_by(w as usize)))
            .collect();
        merge_partials(&parts)
    }

    fn draw_loss(&self, rng: &mut RngStream, s: &mut Scratch) -> f64 {
        match self.kernel {
            Kernel::Plain | Kernel::OrderStatsPq(_) | Kernel::OrderStatsQp(_) => {
                let mut total = 0.0;
                for _ in 0..self.params.epochs {
                    total += self.draw_epoch_loss(rng, s);
                }
                total
            }
            _ => self.draw_epoch_loss(rng, s),
        }
    }

    #[inline]
    fn draw_epoch_loss(&self, rng: &mut RngStream, s: &mut Scratch) -> f64 {
        let p = &self.params;
        let sigma = p.sigma;
        let steps = p.steps;
        match &self.kernel {
            Kernel::Plain => self.draw_plain(rng, s),
            Kernel::OrderStatsQp(sampler) => {
                sampler.sample_into(0.0, rng, &mut s.y);
                surrogate_qp_unchecked(&s.y, sampler.spec(), p)
            }
            Kernel::OrderStatsPq(sampler) => {
                let x1 = 1.0 + sigma * rng.standard_normal();
                sampler.sample_into(0.0, rng, &mut s.y);
                surrogate_pq_unchecked(&[x1], &s.y, sampler.spec(), p)
            }
            Kernel::ImportanceQp { log_cdf_c } => {
                all_below_into(steps, *log_cdf_c, sigma, rng, &mut s.x);
                -bnb_pq_unchecked(&s.x, p)
            }
            Kernel::ImportancePq { threshold, log_cdf_c } => {
                // Nonzero event probability is checked before sampling starts.
                let _ = conditional_max_into(steps, *threshold, *log_cdf_c, sigma, rng, &mut s.x);
                s.x[0] += 1.0;
                bnb_pq_unchecked(&s.x, p)
            }
            Kernel::CombinedQp { sampler, log_cdf_c } => {
                sampler.sample_into(*log_cdf_c, rng, &mut s.y);
                surrogate_qp_unchecked(&s.y, sampler.spec(), p)
            }
            Kernel::CombinedPq {
                first,
                other,
                threshold,
                p_event,
            } => {
                let top = draw_conditioned_max(steps, *threshold, *p_event, sigma, rng);
                match other {
                    Some(other) if top.index != 0 => {
                        let x1 = 1.0 + draw_below(top.log_cdf, sigma, rng).min(top.value);
                        other.sample_into(top.log_cdf, rng, &mut s.y);
                        surrogate_pq_unchecked(&[x1, top.value], &s.y, other.spec(), p)
                    }
                    _ => {
                        first.sample_into(top.log_cdf, rng, &mut s.y);
                        surrogate_pq_unchecked(&[1.0 + top.value], &s.y, first.spec(), p)
                    }
                }
            }
        }
    }

    fn draw_plain(&self, rng: &mut RngStream, s: &mut Scratch) -> f64 {
        let p = &self.params;
        let sigma = p.sigma;
        let pq = self.direction == Direction::Pq;
        let fill = |rng: &mut RngStream, x: &mut Vec<f64>, n: usize| {
            x.clear();
            x.extend((0..n).map(|_| sigma * rng.standard_normal()));
        };
        match self.pair {
            PairKind::Deterministic => {
                let x = sigma * rng.standard_normal() + if pq { 1.0 } else { 0.0 };
                loss_deterministic(x, p, self.direction)
            }
            PairKind::BallsBins => {
                fill(rng, &mut s.x, p.steps);
                if pq {
                    s.x[0] += 1.0;
                    bnb_pq_unchecked(&s.x, p)
                } else {
                    -bnb_pq_unchecked(&s.x, p)
                }
            }
            PairKind::Poisson => {
                let q = 1.0 / p.steps as f64;
                fill(rng, &mut s.x, p.steps);
                if pq {
                    for v in s.x.iter_mut() {
                        if rng.bernoulli(q) {
                            *v += 1.0;
                        }
                    }
                    poisson_pq_unchecked(&s.x, q, sigma)
                } else {
                    -poisson_pq_unchecked(&s.x, q, sigma)
                }
            }
            PairKind::ShuffleDominated => {
                fill(rng, &mut s.x, p.steps);
                if pq {
                    s.x[0] += 2.0;
                    shuffle_pq_unchecked(&s.x, p)
                } else {
                    s.x[0] += 1.0;
                    -shuffle_pq_unchecked(&s.x, p)
                }
            }
        }
    }

    /// Turns pooled sums into one estimate per epsilon.
    pub fn finish(&self, partial: &Partial) -> Result<Vec<DeltaEstimate>> {
        if partial.fingerprint != self.fingerprint || partial.sums.len() != self.epsilons.len() {
            return Err(Error::FingerprintMismatch);
        }
        if partial.count != self.m {
            return Err(Error::config(alloc::format!(
                "partial covers {} samples, expected {}",
                partial.count,
                self.m
            )));
        }
        let bound_kind = if self.pair == PairKind::ShuffleDominated {
            BoundKind::LowerOnly
        } else if self.strategy.uses_order_stats() {
            BoundKind::UpperOnly
        } else {
            BoundKind::TwoSided
        };
        let scale = self.event.map_or(1.0, |e| e.event_probability);
        let underflow = self.tail_underflow();
        let m = self.m;
        let out = self
            .epsilons
            .iter()
            .enumerate()
            .map(|(i, &epsilon)| {
                let q = partial.sums[i].mean(m);
                let q2 = partial.sums_sq[i].mean(m);
                let std_error = scale * math::sqrt((q2 - q * q).max(0.0) / m as f64);
                let (upper, lower) = if underflow {
                    (scale, Some(0.0))
                } else {
                    (scale * kl_ucb(q, m, self.beta), Some(scale * kl_lcb(q, m, self.beta)))
                };
                let (upper_p, lower) = match bound_kind {
                    BoundKind::TwoSided => (upper, lower),
                    BoundKind::UpperOnly => (upper, None),
                    BoundKind::LowerOnly => (1.0, lower),
                };
                DeltaEstimate {
                    epsilon,
                    direction: self.direction.into(),
                    mean_q: scale * q,
                    upper_p,
                    lower,
                    std_error,
                    m_used: m,
                    beta_used: self.beta,
                    strategy_used: self.strategy,
                    seed: self.seed,
                    event_probability: self.event.map(|e| e.event_probability),
                    tail_underflow: underflow,
                    bound_kind,
                }
            })
            .collect();
        Ok(out)
    }
}

impl From<Direction> for EstimateDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Pq => EstimateDirection::Pq,
            Direction::Qp => EstimateDirection::Qp,
        }
    }
}

fn qp_spec(spec: &OrderSpec, r_total: usize) -> Result<OrderSpec> {
    let s = spec.restrict(r_total);
    if s.is_empty() {
        return Err(Error::OrderSpec(alloc::format!("no orders at most R = {r_total}")));
    }
    Ok(s)
}

fn pq_spec(spec: &OrderSpec, r_total: usize) -> Result<OrderSpec> {
    let s = spec.restrict(r_total);
    if r_total > 0 && s.orders().first() != Some(&1) {
        return Err(Error::OrderSpec(
            "upper-bound surrogate requires the first order to be 1".into(),
        ));
    }
    Ok(s)
}

fn fingerprint(pair: PairKind, direction: Direction, params: &AccountingParams, epsilons: &[f64], cfg: &McConfig) -> u64 {
    // FNV-1a.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(pair as u64);
    eat(direction as u64);
    eat(params.sigma.to_bits());
    eat(params.steps as u64);
    eat(params.epochs as u64);
    eat(cfg.strategy as u64);
    eat(cfg.m);
    eat(cfg.beta.to_bits());
    eat(cfg.seed);
    for e in epsilons {
        eat(e.to_bits());
    }
    if let Some(spec) = &cfg.order_spec {
        eat(spec.r_total() as u64);
        for &k in spec.orders() {
            eat(k as u64);
        }
    }
    h
}
