//! Selected order statistics of `R` i.i.d. Gaussians without drawing all `R`.
//!
//! If `z_i ~ Beta(R - k_i + 1, k_i - k_{i-1})` independently, then
//! `F^{-1}(prod_{j<=i} z_j)` for `i = 1..r` are jointly the `k_1, ..., k_r`
//! largest of `R` draws from `F`. Products are kept in log space, and a
//! truncated base just starts the product at `F(c)`.

use alloc::vec::Vec;

use crate::num::{log_std_cdf, math, std_quantile_from_log_cdf, BetaSampler, RngStream};
use crate::pairs::OrderSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseDistribution {
    Gaussian { sigma: f64 },
    /// `N(0, sigma^2)` conditioned to be at most `upper`.
    TruncatedGaussian { sigma: f64, upper: f64 },
}

#[derive(Clone, Debug)]
enum Factor {
    // Beta(a, 1): log z = log(U) / a.
    Power { inv_a: f64 },
    General(BetaSampler),
}

/// Precomputed Beta factors for one [`OrderSpec`].
#[derive(Clone, Debug)]
pub struct OrderStatSampler {
    sigma: f64,
    spec: OrderSpec,
    factors: Vec<Factor>,
}

impl OrderStatSampler {
    pub fn new(spec: &OrderSpec, sigma: f64) -> Result<Self> {
        let r_total = spec.r_total();
        let mut prev = 0;
        let mut factors = Vec::with_capacity(spec.len());
        for &k in spec.orders() {
            let a = (r_total - k + 1) as f64;
            let gap = k - prev;
            factors.push(if gap == 1 {
                Factor::Power { inv_a: 1.0 / a }
            } else {
                Factor::General(BetaSampler::new(a, gap as f64)?)
            });
            prev = k;
        }
        Ok(Self {
            sigma,
            spec: spec.clone(),
            factors,
        })
    }

    pub fn spec(&self) -> &OrderSpec {
        &self.spec
    }

    /// Fills `out` with the selected order statistics, largest first. The
    /// base is `N(0, sigma^2)` restricted to CDF values below
    /// `exp(log_cdf_cap)` (pass `0.0` for no restriction).
    #[inline]
    pub fn sample_into(&self, log_cdf_cap: f64, rng: &mut RngStream, out: &mut Vec<f64>) {
        out.clear();
        let mut log_prod = log_cdf_cap;
        let mut prev = f64::INFINITY;
        for f in &self.factors {
            log_prod += match f {
                Factor::Power { inv_a } => math::ln(rng.uniform_pos()) * inv_a,
                Factor::General(b) => b.sample_logs(rng).0,
            };
            // Clamp away last-ulp disagreements between quantile branches.
            let y = (self.sigma * std_quantile_from_log_cdf(log_prod)).min(prev);
            out.push(y);
            prev = y;
        }
    }
}

/// Draws the order statistics `spec.orders()` of `R` i.i.d. draws from `base`.
pub fn sample_order_stats(
    r_total: usize,
    spec: &OrderSpec,
    base: BaseDistribution,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if spec.r_total() != r_total {
        return Err(Error::OrderSpec(alloc::format!(
            "order spec is for R = {}, requested R = {r_total}",
            spec.r_total()
        )));
    }
    let (sigma, cap) = match base {
        BaseDistribution::Gaussian { sigma } => (sigma, 0.0),
        BaseDistribution::TruncatedGaussian { sigma, upper } => (sigma, log_std_cdf(upper / sigma)),
    };
    if !(sigma > 0.0) {
        return Err(Error::Domain("sigma must be positive"));
    }
    if cap == f64::NEG_INFINITY {
        return Err(Error::TailUnderflow);
    }
    let sampler = OrderStatSampler::new(spec, sigma)?;
    let mut out = Vec::with_capacity(spec.len());
    sampler.sample_into(cap, rng, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn single_draw_is_the_base() {
        let spec = OrderSpec::new(vec![1], 1).unwrap();
        let mut rng = RngStream::new(1, 0);
        let n = 20_000;
        let ours: Vec<f64> = (0..n)
            .map(|_| sample_order_stats(1, &spec, BaseDistribution::Gaussian { sigma: 2.0 }, &mut rng).unwrap()[0])
            .collect();
        let naive: Vec<f64> = (0..n).map(|_| 2.0 * rng.standard_normal()).collect();
        // 1% critical value for equal sample sizes: 1.628 * sqrt(2/n).
        assert!(ks_two_sample(ours, naive) < 1.628 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn marginals_match_sorting_oracle() {
        let spec = OrderSpec::new(vec![1, 3, 8], 12).unwrap();
        let sampler = OrderStatSampler::new(&spec, 1.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let n = 20_000;
        let mut out = Vec::new();
        let mut ours = vec![Vec::new(); 3];
        let mut naive = vec![Vec::new(); 3];
        for _ in 0..n {
            sampler.sample_into(0.0, &mut rng, &mut out);
            assert!(out.windows(2).all(|w| w[0] >= w[1]));
            for i in 0..3 {
                ours[i].push(out[i]);
            }
            let mut x: Vec<f64> = (0..12).map(|_| rng.standard_normal()).collect();
            x.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (i, &k) in [1usize, 3, 8].iter().enumerate() {
                naive[i].push(x[k - 1]);
            }
        }
        for i in 0..3 {
            let d = ks_two_sample(ours[i].clone(), naive[i].clone());
            assert!(d < 1.628 * (2.0 / n as f64).sqrt(), "order {i}: D = {d}");
        }
    }

    #[test]
    fn truncated_draws_stay_below_cap() {
        let spec = OrderSpec::full(6);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..5_000 {
            let y = sample_order_stats(6, &spec, BaseDistribution::TruncatedGaussian { sigma: 0.5, upper: -0.4 }, &mut rng)
                .unwrap();
            assert!(y.iter().all(|&v| v <= -0.4));
            assert!(y.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_mismatched_r() {
        let spec = OrderSpec::full(6);
        let mut rng = RngStream::new(3, 0);
        assert!(sample_order_stats(7, &spec, BaseDistribution::Gaussian { sigma: 1.0 }, &mut rng).is_err());
    }
}
