//! Beta distribution: sampling, regularized incomplete beta and its inverse.

use rand_distr::{Distribution, Gamma};

use super::math::{exp, exp_m1, ln, ln_1p, ln_gamma, powf};
use super::rng::RngStream;
use crate::{Error, Result};

/// Draws from `Beta(alpha, beta_param)` built from two Gamma variates, which
/// also yields `log z` and `log(1 - z)` to full precision when `z` sits near
/// an endpoint.
#[derive(Clone, Debug)]
pub struct BetaSampler {
    a: Gamma<f64>,
    b: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(alpha: f64, beta_param: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta_param > 0.0) || !alpha.is_finite() || !beta_param.is_finite() {
            return Err(Error::Domain("beta parameters must be positive and finite"));
        }
        let a = Gamma::new(alpha, 1.0).map_err(|_| Error::Domain("invalid gamma shape"))?;
        let b = Gamma::new(beta_param, 1.0).map_err(|_| Error::Domain("invalid gamma shape"))?;
        Ok(Self { a, b })
    }

    /// Returns `(log z, log(1 - z))`.
    #[inline]
    pub fn sample_logs(&self, rng: &mut RngStream) -> (f64, f64) {
        loop {
            let x = self.a.sample(rng);
            let y = self.b.sample(rng);
            if x > 0.0 && y > 0.0 {
                return (-ln_1p(y / x), -ln_1p(x / y));
            }
            // Both shapes tiny enough to underflow; redraw.
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let (lz, _) = self.sample_logs(rng);
        exp(lz)
    }
}

/// One draw from `Beta(alpha, beta_param)`.
pub fn beta_sample(alpha: f64, beta_param: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(BetaSampler::new(alpha, beta_param)?.sample(rng))
}

/// Regularized incomplete beta function `I_x(alpha, beta_param)`.
pub fn beta_cdf(x: f64, alpha: f64, beta_param: f64) -> Result<f64> {
    check_params(alpha, beta_param)?;
    if x.is_nan() {
        return Err(Error::Domain("beta_cdf of NaN"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(alpha + beta_param) - ln_gamma(alpha) - ln_gamma(beta_param)
        + alpha * ln(x)
        + beta_param * ln_1p(-x);
    let front = exp(ln_front);
    let v = if x < (alpha + 1.0) / (alpha + beta_param + 2.0) {
        front * continued_fraction(alpha, beta_param, x) / alpha
    } else {
        1.0 - front * continued_fraction(beta_param, alpha, 1.0 - x) / beta_param
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Inverse of [`beta_cdf`] in `x`; `u = 0` and `u = 1` map to the endpoints.
pub fn beta_inv_cdf(u: f64, alpha: f64, beta_param: f64) -> Result<f64> {
    check_params(alpha, beta_param)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain("beta_inv_cdf requires 0 <= u <= 1"));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(1.0);
    }
    if beta_param == 1.0 {
        return Ok(powf(u, 1.0 / alpha));
    }
    if alpha == 1.0 {
        return Ok(-exp_m1(ln_1p(-u) / beta_param));
    }

    let ln_norm = ln_gamma(alpha + beta_param) - ln_gamma(alpha) - ln_gamma(beta_param);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = alpha / (alpha + beta_param);
    for _ in 0..200 {
        let f = beta_cdf(x, alpha, beta_param)? - u;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let ln_pdf = ln_norm + (alpha - 1.0) * ln(x) + (beta_param - 1.0) * ln_1p(-x);
        let step = f / exp(ln_pdf);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.max(1e-300) || hi - lo <= 1e-16 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn check_params(alpha: f64, beta_param: f64) -> Result<()> {
    if alpha > 0.0 && beta_param > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain("beta parameters must be positive"))
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn cdf_edge_values() {
        for &x in &[0.0, 0.1, 0.37, 0.9, 1.0] {
            assert!((beta_cdf(x, 1.0, 1.0).unwrap() - x).abs() < 1e-15);
        }
        assert_eq!(beta_cdf(1.0, 3.5, 0.2).unwrap(), 1.0);
        assert!((beta_inv_cdf(0.5, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(beta_inv_cdf(0.0, 2.0, 5.0).unwrap(), 0.0);
        assert_eq!(beta_inv_cdf(1.0, 2.0, 5.0).unwrap(), 1.0);
        // I_x(2, 3) = 6x^2 - 8x^3 + 3x^4
        let x: f64 = 0.3;
        let want = 6.0 * x * x - 8.0 * x * x * x + 3.0 * x.powi(4);
        assert!((beta_cdf(x, 2.0, 3.0).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn inverse_round_trip() {
        for &(a, b) in &[(2.0, 2.0), (0.5, 0.7), (10.0, 3.0), (1000.0, 1.0), (1.0, 40.0), (250.0, 17.0)] {
            for i in 1..50 {
                let u = i as f64 / 50.0;
                let x = beta_inv_cdf(u, a, b).unwrap();
                let back = beta_cdf(x, a, b).unwrap();
                assert!((back - u).abs() < 1e-10, "a={a} b={b} u={u}: {back}");
            }
        }
    }

    #[test]
    fn sampler_mean_matches() {
        let t = 20.0;
        let s = BetaSampler::new(t, 1.0).unwrap();
        let mut rng = RngStream::new(11, 0);
        let m = 100_000;
        let xs: Vec<f64> = (0..m).map(|_| s.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = t / ((t + 1.0) * (t + 1.0) * (t + 2.0));
        let se = libm::sqrt(var / m as f64);
        assert!((mean - t / (t + 1.0)).abs() < 3.0 * se);
    }

    #[test]
    fn logs_are_consistent() {
        let s = BetaSampler::new(5000.0, 2.0).unwrap();
        let mut rng = RngStream::new(2, 9);
        for _ in 0..1000 {
            let (lz, l1z) = s.sample_logs(&mut rng);
            assert!(lz < 0.0 && l1z < 0.0);
            assert!((exp(lz) + exp(l1z) - 1.0).abs() < 1e-12);
        }
    }
}
