//! Discretized privacy loss distributions for the Poisson subsampled
//! Gaussian, composed by FFT.
//!
//! A PLD stores the law of the loss `L` under the numerator distribution
//! on the grid `{i * h}`. Pessimistic discretizations round losses up and
//! send the truncated upper tail to `+inf`; optimistic ones round down and
//! send the truncated lower tail to `-inf`. Both roundings commute with
//! composition, so the composed pessimistic (optimistic) `delta` bounds the
//! true one from above (below).

use alloc::vec::Vec;

use super::fft::convolve;
use crate::num::{gaussian_cdf, gaussian_sf, math, std_quantile};
use crate::pairs::{poisson_step_loss, AccountingParams, Direction};
use crate::{Error, Result};

/// Mass below which a tail is cut after every build or convolution.
pub const TAIL_MASS: f64 = 1e-15;
/// Largest support, in cells, a PLD may reach.
pub const MAX_CELLS: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoundingMode {
    Pessimistic,
    Optimistic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PldDiscretization {
    pub grid_step: f64,
    /// Grid index of `masses[0]`; cell `j` holds loss `(offset + j) * grid_step`.
    pub offset: i64,
    pub masses: Vec<f64>,
    /// Mass at loss `+inf` (pessimistic truncation).
    pub inf_mass: f64,
    /// Mass at loss `-inf` (optimistic truncation).
    pub neg_inf_mass: f64,
    pub rounding_mode: RoundingMode,
}

/// Law of the one-step Poisson loss in one direction.
struct StepLaw {
    sigma: f64,
    q: f64,
    direction: Direction,
}

impl StepLaw {
    /// The `x` at which `log(1 - q + q e^{(2x-1)/(2 s^2)}) = l`, or `-inf`
    /// when `l` is at or below the infimum `log(1 - q)`.
    fn inverse_loss(&self, l: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        if self.q >= 1.0 {
            return s2 * l + 0.5;
        }
        let inner = math::exp_m1(l) + self.q;
        if !(inner > 0.0) {
            return f64::NEG_INFINITY;
        }
        s2 * (math::ln(inner) - math::ln(self.q)) + 0.5
    }

    fn x_cdf(&self, x: f64) -> f64 {
        match self.direction {
            Direction::Pq => (1.0 - self.q) * gaussian_cdf(x, self.sigma) + self.q * gaussian_cdf(x - 1.0, self.sigma),
            Direction::Qp => gaussian_cdf(x, self.sigma),
        }
    }

    fn x_sf(&self, x: f64) -> f64 {
        match self.direction {
            Direction::Pq => (1.0 - self.q) * gaussian_sf(x, self.sigma) + self.q * gaussian_sf(x - 1.0, self.sigma),
            Direction::Qp => gaussian_sf(x, self.sigma),
        }
    }

    /// `(Pr[L <= l], Pr[L > l])`, each computed directly.
    fn cdf_sf(&self, l: f64) -> (f64, f64) {
        match self.direction {
            Direction::Pq => {
                let x = self.inverse_loss(l);
                (self.x_cdf(x), self.x_sf(x))
            }
            // L = -loss(x) with x ~ N(0, s^2): L <= l iff x >= inverse(-l).
            Direction::Qp => {
                let x = self.inverse_loss(-l);
                (self.x_sf(x), self.x_cdf(x))
            }
        }
    }

    /// Losses beyond which each tail has mass at most `TAIL_MASS`.
    fn support(&self) -> (f64, f64) {
        let z = -std_quantile(TAIL_MASS);
        let x_lo = -z * self.sigma;
        let x_hi = z * self.sigma + if self.direction == Direction::Pq { 1.0 } else { 0.0 };
        let loss = |x: f64| poisson_step_loss(x, self.q, self.sigma);
        match self.direction {
            Direction::Pq => (loss(x_lo), loss(x_hi)),
            Direction::Qp => (-loss(x_hi), -loss(x_lo)),
        }
    }
}

/// One-step PLD of `((1 - q) N(0, s^2) + q N(1, s^2), N(0, s^2))`, for
/// `direction = Pq` the add direction and `Qp` the remove direction.
pub fn poisson_pld_build(
    params: &AccountingParams,
    sampling_prob: f64,
    grid_step: f64,
    rounding_mode: RoundingMode,
    direction: Direction,
) -> Result<PldDiscretization> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::config("grid step must be positive"));
    }
    if !(sampling_prob > 0.0 && sampling_prob <= 1.0) {
        return Err(Error::config("sampling probability must lie in (0, 1]"));
    }
    let law = StepLaw {
        sigma: params.sigma,
        q: sampling_prob,
        direction,
    };
    let (lo, hi) = law.support();
    let i_lo = math::floor(lo / grid_step) as i64;
    let i_hi = math::ceil(hi / grid_step) as i64;
    let cells = (i_hi - i_lo + 1) as usize;
    if cells > MAX_CELLS {
        return Err(Error::SupportOverflow {
            cells,
            limit: MAX_CELLS,
        });
    }
    // Boundaries b_j = (i_lo + j) h for j = 0..cells.
    let bounds: Vec<(f64, f64)> = (0..cells).map(|j| law.cdf_sf((i_lo + j as i64) as f64 * grid_step)).collect();
    let between = |a: (f64, f64), b: (f64, f64)| -> f64 {
        // Mass in (a, b], from whichever side avoids cancellation.
        if b.0 <= 0.5 {
            (b.0 - a.0).max(0.0)
        } else {
            (a.1 - b.1).max(0.0)
        }
    };
    let mut masses = alloc::vec![0.0; cells];
    let (mut inf_mass, mut neg_inf_mass) = (0.0, 0.0);
    match rounding_mode {
        RoundingMode::Pessimistic => {
            // (b_{j-1}, b_j] -> b_j; everything at or below b_0 -> b_0.
            masses[0] = bounds[0].0;
            for j in 1..cells {
                masses[j] = between(bounds[j - 1], bounds[j]);
            }
            inf_mass = bounds[cells - 1].1;
        }
        RoundingMode::Optimistic => {
            // (b_j, b_{j+1}] -> b_j; everything above b_last -> b_last.
            for j in 0..cells - 1 {
                masses[j] = between(bounds[j], bounds[j + 1]);
            }
            masses[cells - 1] = bounds[cells - 1].1;
            neg_inf_mass = bounds[0].0;
        }
    }
    let mut pld = PldDiscretization {
        grid_step,
        offset: i_lo,
        masses,
        inf_mass,
        neg_inf_mass,
        rounding_mode,
    };
    pld.trim();
    Ok(pld)
}

impl PldDiscretization {
    pub fn loss_at(&self, j: usize) -> f64 {
        (self.offset + j as i64) as f64 * self.grid_step
    }

    /// Finite mass plus both infinite atoms.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.inf_mass + self.neg_inf_mass
    }

    /// `sum mass * max(0, 1 - e^{eps - loss}) + inf_mass`.
    pub fn delta(&self, epsilon: f64) -> f64 {
        let finite: f64 = self
            .masses
            .iter()
            .enumerate()
            .filter_map(|(j, &m)| {
                let l = self.loss_at(j);
                (l > epsilon).then(|| m * -math::exp_m1(epsilon - l))
            })
            .sum();
        (finite + self.inf_mass).clamp(0.0, 1.0)
    }

    /// Cuts both tails down to `TAIL_MASS`, moving the cut mass in the
    /// direction allowed by the rounding mode.
    fn trim(&mut self) {
        let n = self.masses.len();
        let mut lo = 0;
        let mut acc = 0.0;
        while lo + 1 < n && acc + self.masses[lo] <= TAIL_MASS {
            acc += self.masses[lo];
            lo += 1;
        }
        let lower_cut = acc;
        let mut hi = n;
        acc = 0.0;
        while hi > lo + 1 && acc + self.masses[hi - 1] <= TAIL_MASS {
            acc += self.masses[hi - 1];
            hi -= 1;
        }
        let upper_cut = acc;
        self.masses.truncate(hi);
        self.masses.drain(..lo);
        self.offset += lo as i64;
        match self.rounding_mode {
            RoundingMode::Pessimistic => {
                self.masses[0] += lower_cut;
                self.inf_mass += upper_cut;
            }
            RoundingMode::Optimistic => {
                self.neg_inf_mass += lower_cut;
                let last = self.masses.len() - 1;
                self.masses[last] += upper_cut;
            }
        }
    }

    /// PLD of the composition of two mechanisms (sum of independent losses).
    pub fn compose(&self, other: &PldDiscretization) -> Result<PldDiscretization> {
        if self.rounding_mode != other.rounding_mode || self.grid_step != other.grid_step {
            return Err(Error::config("can only compose PLDs with equal grid and rounding mode"));
        }
        let cells = self.masses.len() + other.masses.len() - 1;
        if cells > MAX_CELLS {
            return Err(Error::SupportOverflow {
                cells,
                limit: MAX_CELLS,
            });
        }
        let fa = 1.0 - self.inf_mass - self.neg_inf_mass;
        let fb = 1.0 - other.inf_mass - other.neg_inf_mass;
        let (masses, dropped) = convolve(&self.masses, &other.masses);
        // Only one kind of infinite atom is ever present for a given mode;
        // mass cleared as round-off goes to it too.
        let (inf_mass, neg_inf_mass) = match self.rounding_mode {
            RoundingMode::Pessimistic => (1.0 - fa * fb + dropped, 0.0),
            RoundingMode::Optimistic => (0.0, 1.0 - fa * fb + dropped),
        };
        let mut out = PldDiscretization {
            grid_step: self.grid_step,
            offset: self.offset + other.offset,
            masses,
            inf_mass,
            neg_inf_mass,
            rounding_mode: self.rounding_mode,
        };
        out.trim();
        Ok(out)
    }

    /// `n`-fold composition with itself, by repeated squaring.
    pub fn self_compose(&self, n: u64) -> Result<PldDiscretization> {
        if n == 0 {
            return Err(Error::config("composition count must be at least 1"));
        }
        let mut result: Option<PldDiscretization> = None;
        let mut base = self.clone();
        let mut k = n;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.compose(&base)?,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.compose(&base)?;
        }
        Ok(result.unwrap_or(base))
    }
}

/// `delta(eps)` of the `t_steps`-fold composition of `pld`.
pub fn poisson_pld_compose_and_delta(pld: &PldDiscretization, t_steps: u64, epsilon: f64) -> Result<f64> {
    Ok(pld.self_compose(t_steps)?.delta(epsilon))
}

/// Composed PLDs for both directions of the Poisson pair with sampling
/// probability `1/T`, over `T * epochs` steps.
#[derive(Clone, Debug)]
pub struct PoissonAccountant {
    pub add: PldDiscretization,
    pub remove: PldDiscretization,
}

impl PoissonAccountant {
    pub fn new(params: &AccountingParams, grid_step: f64, rounding_mode: RoundingMode) -> Result<Self> {
        let q = 1.0 / params.steps as f64;
        let n = (params.steps * params.epochs) as u64;
        let build = |d| -> Result<PldDiscretization> {
            poisson_pld_build(params, q, grid_step, rounding_mode, d)?.self_compose(n)
        };
        Ok(Self {
            add: build(Direction::Pq)?,
            remove: build(Direction::Qp)?,
        })
    }

    /// Maximum over the two directions.
    pub fn delta(&self, epsilon: f64) -> f64 {
        self.add.delta(epsilon).max(self.remove.delta(epsilon))
    }
}
