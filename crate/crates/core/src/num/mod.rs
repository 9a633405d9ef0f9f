//! Numerical kernel: special functions, confidence bounds and random streams.

mod accum;
mod beta;
mod binomial;
mod gaussian;
mod kl;
pub(crate) mod math;
mod rng;

pub use accum::ExactSum;
pub use beta::{beta_cdf, beta_inv_cdf, beta_sample, BetaSampler};
pub use binomial::{binomial_tail, log_binomial_pmf};
pub use gaussian::{
    gaussian_cdf, gaussian_inv_cdf, gaussian_sf, log_std_cdf, std_cdf, std_pdf, std_quantile,
    std_quantile_from_log_cdf,
};
pub use kl::{bernoulli_kl, kl_lcb, kl_ucb};
pub(crate) use rng::streams;
pub use rng::RngStream;

use crate::{Error, Result};

/// A probability in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct UnitInterval(f64);

impl UnitInterval {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain("value outside [0, 1]"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `log sum_i exp(v_i)`, shifted by the maximum.
pub fn logsumexp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("logsumexp of an empty sequence"));
    }
    Ok(logsumexp_iter(values.iter().copied()))
}

/// [`logsumexp`] over an iterator that can be walked twice; returns `-inf`
/// when empty.
pub(crate) fn logsumexp_iter<I>(values: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let s: f64 = values.map(|v| math::exp(v - max)).sum();
    max + math::ln(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn logsumexp_cases() {
        assert!((logsumexp(&[0.0, 0.0]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(logsumexp(&[3.25]).unwrap(), 3.25);
        assert!((logsumexp(&[1000.0, 1000.0]).unwrap() - (1000.0 + LN_2)).abs() < 1e-12);
        assert!((logsumexp(&[-1e4, 1e4]).unwrap() - 1e4).abs() < 1e-12);
        assert!(logsumexp(&[]).is_err());
    }

    #[test]
    fn unit_interval_bounds() {
        assert!(UnitInterval::new(0.0).is_ok());
        assert!(UnitInterval::new(1.0).is_ok());
        assert!(UnitInterval::new(1.0 + 1e-12).is_err());
        assert!(UnitInterval::new(f64::NAN).is_err());
    }
}
