//! Gaussian CDF, log-CDF and quantile function.

use core::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use super::math::{erfc, exp, exp_m1, ln, ln_1p, sqrt};
use crate::{Error, Result};

/// `Pr[z <= x]` for `z ~ N(0, sigma^2)`.
pub fn gaussian_cdf(x: f64, sigma: f64) -> f64 {
    std_cdf(x / sigma)
}

/// `Pr[z > x]` for `z ~ N(0, sigma^2)`.
pub fn gaussian_sf(x: f64, sigma: f64) -> f64 {
    std_cdf(-x / sigma)
}

/// Inverse of [`gaussian_cdf`]. The endpoints are rejected rather than mapped
/// to infinities so callers handle the tails explicitly.
pub fn gaussian_inv_cdf(u: f64, sigma: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain("gaussian_inv_cdf requires 0 < u < 1"));
    }
    Ok(sigma * std_quantile(u))
}

/// Standard normal CDF.
#[inline]
pub fn std_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn std_pdf(z: f64) -> f64 {
    exp(-0.5 * z * z) / sqrt(2.0 * PI)
}

/// `log Phi(z)`, accurate in both tails.
pub fn log_std_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if z > 0.0 {
        ln_1p(-0.5 * erfc(z * FRAC_1_SQRT_2))
    } else if z > -37.0 {
        ln(0.5 * erfc(-z * FRAC_1_SQRT_2))
    } else {
        // Mills-ratio asymptotic series; the truncation error is below 1e-18 here.
        let w = 1.0 / (z * z);
        let series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w * (1.0 - 9.0 * w))));
        -0.5 * z * z - ln(-z) - 0.5 * ln(2.0 * PI) + ln(series)
    }
}

/// Standard normal quantile (Wichura's AS241, relative accuracy about 1e-16).
pub fn std_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let x = tail_quantile(tail);
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Quantile at `u = exp(log_u)`, resolving values of `u` close to one through
/// the complement so that deep upper tails keep full precision.
pub fn std_quantile_from_log_cdf(log_u: f64) -> f64 {
    if log_u < DEEP_LOG_CDF {
        deep_lower_quantile(log_u)
    } else if log_u < -LN_2 {
        std_quantile(exp(log_u))
    } else {
        let upper = -exp_m1(log_u);
        if upper <= 0.0 {
            return tail_quantile(f64::MIN_POSITIVE);
        }
        -std_quantile(upper)
    }
}

// Below this, exp(log_u) loses precision to subnormals.
const DEEP_LOG_CDF: f64 = -700.0;

/// Newton's method on `log Phi(z) = log_u`, for `log_u` too small for `exp`.
fn deep_lower_quantile(log_u: f64) -> f64 {
    if log_u == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let t = -2.0 * log_u;
    let mut z = -sqrt(t - ln(2.0 * PI * t));
    for _ in 0..50 {
        let lc = log_std_cdf(z);
        // d/dz log Phi(z) = phi(z) / Phi(z).
        let slope = exp(-0.5 * z * z - 0.5 * ln(2.0 * PI) - lc);
        let step = (lc - log_u) / slope;
        z -= step;
        if step.abs() <= 1e-15 * z.abs() {
            break;
        }
    }
    z
}

/// `-Phi^{-1}(p)` for `p < 0.075`, i.e. the magnitude of a deep-tail quantile.
fn tail_quantile(p: f64) -> f64 {
    let r = sqrt(-ln(p));
    if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    }
}

#[inline]
fn poly(coef: &[f64; 8], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent erf oracle: Maclaurin series for small arguments,
    /// Lentz continued fraction for erfc otherwise.
    fn oracle_cdf(z: f64) -> f64 {
        let x = z / core::f64::consts::SQRT_2;
        if x.abs() < 1.0 {
            let mut term = x;
            let mut sum = x;
            let mut n = 0.0;
            while term.abs() > 1e-18 * sum.abs().max(1e-300) {
                n += 1.0;
                term *= -x * x / n;
                sum += term / (2.0 * n + 1.0);
            }
            let erf = 2.0 / sqrt(PI) * sum;
            0.5 * (1.0 + erf)
        } else {
            let a = x.abs();
            // erfc(a) = exp(-a^2)/sqrt(pi) * 1/(a + 1/2/(a + 1/(a + 3/2/(a + ...))))
            let mut f = a;
            let tiny = 1e-300;
            let mut c = a;
            let mut d = 0.0;
            for k in 1..20_000 {
                let an = k as f64 / 2.0;
                d = a + an * d;
                d = if d.abs() < tiny { tiny } else { d };
                c = a + an / c;
                c = if c.abs() < tiny { tiny } else { c };
                d = 1.0 / d;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-17 {
                    break;
                }
            }
            let erfc = exp(-a * a) / sqrt(PI) / f;
            if x > 0.0 {
                1.0 - 0.5 * erfc
            } else {
                0.5 * erfc
            }
        }
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for i in -80..=80 {
            let z = i as f64 * 0.1;
            let got = std_cdf(z);
            let want = oracle_cdf(z);
            assert!((got - want).abs() <= 1e-14, "z={z}: {got} vs {want}");
        }
        assert!((gaussian_cdf(1.0, 1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert_eq!(gaussian_cdf(0.0, 1.0), 0.5);
        assert_eq!(gaussian_cdf(f64::INFINITY, 2.0), 1.0);
    }

    #[test]
    fn inverse_round_trips() {
        for &x in &[-3.0, -1.0, 0.0, 2.0] {
            let u = gaussian_cdf(x, 1.5);
            let back = gaussian_inv_cdf(u, 1.5).unwrap();
            assert!((back - x).abs() < 1e-12, "{x} -> {back}");
        }
        assert_eq!(gaussian_inv_cdf(0.5, 3.0).unwrap(), 0.0);
        assert!((gaussian_inv_cdf(0.841_345, 1.0).unwrap() - 1.0).abs() < 1e-5);
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            let back = gaussian_cdf(gaussian_inv_cdf(u, 1.0).unwrap(), 1.0);
            assert!((back - u).abs() < 1e-12);
        }
        assert!(gaussian_inv_cdf(0.0, 1.0).is_err());
        assert!(gaussian_inv_cdf(1.0, 1.0).is_err());
    }

    #[test]
    fn deep_tail_quantiles() {
        for &p in &[1e-20, 1e-50, 1e-100, 1e-300] {
            let z = std_quantile(p);
            let back = exp(log_std_cdf(z));
            assert!(((back - p) / p).abs() < 1e-12, "p={p}: {back}");
        }
        // Upper tail through the log-CDF path.
        let z = std_quantile_from_log_cdf(ln_1p(-1e-40));
        assert!((z + std_quantile(1e-40)).abs() < 1e-12);
        assert!(std_quantile_from_log_cdf(0.0) > 37.0);
    }

    #[test]
    fn quantile_below_exp_range() {
        for &log_u in &[-650.0, -699.9, -700.1, -800.0, -5000.0, -1e6] {
            let z = std_quantile_from_log_cdf(log_u);
            assert!((log_std_cdf(z) - log_u).abs() < 1e-12 * log_u.abs(), "{log_u}: {z}");
        }
        let a = std_quantile_from_log_cdf(-700.0 + 1e-9);
        let b = std_quantile_from_log_cdf(-700.0 - 1e-9);
        assert!(a >= b && a - b < 1e-9);
        assert_eq!(std_quantile_from_log_cdf(f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn log_cdf_is_continuous_across_branches() {
        let a = log_std_cdf(-36.999_999);
        let b = log_std_cdf(-37.000_001);
        assert!((a - b).abs() < 1e-4);
        assert!(((a - b) - 37.0 * 2e-6).abs() < 1e-6);
        assert!((log_std_cdf(10.0) + 7.619_853_024_160_527e-24).abs() < 1e-36);
    }
}
