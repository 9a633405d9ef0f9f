//! Binomial upper tails evaluated term by term in log space.
//!
//! The point masses use Loader's saddle-point expansion (Stirling error plus
//! the deviance `bd0`), which stays accurate for `n` in the hundreds of
//! millions where `lgamma` differences lose most of their digits.

use core::f64::consts::PI;

use super::math::{exp, floor, ln, ln_1p, ln_gamma};

/// `Pr[r > threshold]` for `r ~ Bin(n, prob)`.
pub fn binomial_tail(n: u64, prob: f64, threshold: i64) -> f64 {
    if threshold < 0 {
        return 1.0;
    }
    let t = threshold as u64;
    if t >= n {
        return 0.0;
    }
    let p = prob.clamp(0.0, 1.0);
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let mode = floor(((n + 1) as f64) * p) as u64;

    if t >= mode {
        // Terms decrease away from the mode: sum upward from t + 1.
        let mut k = t + 1;
        let mut term = exp(log_binomial_pmf(k, n, p, q));
        let mut sum = 0.0;
        while term > 0.0 {
            sum += term;
            if k == n || term < sum * 1e-18 {
                break;
            }
            if (k - t).is_multiple_of(4096) {
                term = exp(log_binomial_pmf(k + 1, n, p, q));
            } else {
                term *= (n - k) as f64 / (k + 1) as f64 * odds;
            }
            k += 1;
        }
        sum.min(1.0)
    } else {
        // Lower tail Pr[r <= t], summed downward from t.
        let mut k = t;
        let mut term = exp(log_binomial_pmf(k, n, p, q));
        let mut sum = 0.0;
        loop {
            sum += term;
            if k == 0 || term < sum * 1e-18 {
                break;
            }
            if (t - k + 1).is_multiple_of(4096) {
                term = exp(log_binomial_pmf(k - 1, n, p, q));
            } else {
                term *= k as f64 / (n - k + 1) as f64 / odds;
            }
            k -= 1;
        }
        (1.0 - sum).clamp(0.0, 1.0)
    }
}

/// `log Pr[r = k]` for `r ~ Bin(n, p)`, `q = 1 - p`.
pub fn log_binomial_pmf(k: u64, n: u64, p: f64, q: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    if k == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * ln(q) };
    }
    if k == n {
        return if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * ln(p) };
    }
    let kf = k as f64;
    let rest = nf - kf;
    let lc = stirling_error(nf) - stirling_error(kf) - stirling_error(rest) - bd0(kf, nf * p) - bd0(rest, nf * q);
    let lf = ln(2.0 * PI) + ln(kf) + ln_1p(-kf / nf);
    lc - 0.5 * lf
}

/// `log(n!) - log(sqrt(2 pi n) (n/e)^n)`.
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * ln(n) + n - 0.5 * ln(2.0 * PI);
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x log(x / np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * ln(x / np) + np - x
    }
}
