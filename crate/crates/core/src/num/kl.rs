//! Bernoulli KL divergence and the Chernoff-Hoeffding confidence bounds
//! obtained by inverting it.

use super::math::{ln, ln_1p};

/// `KL(Ber(q) || Ber(p))` with the usual `0 log 0 = 0` convention; `+inf`
/// when `p` sits on a boundary that `q` does not.
pub fn bernoulli_kl(q: f64, p: f64) -> f64 {
    let head = if q <= 0.0 {
        0.0
    } else if p <= 0.0 {
        return f64::INFINITY;
    } else {
        q * (ln(q) - ln(p))
    };
    let tail = if q >= 1.0 {
        0.0
    } else if p >= 1.0 {
        return f64::INFINITY;
    } else {
        (1.0 - q) * (ln_1p(-q) - ln_1p(-p))
    };
    (head + tail).max(0.0)
}

/// Smallest `p` in `[q, 1]` with `KL(q || p) >= log(1/beta) / m`, or 1.
pub fn kl_ucb(q: f64, m: u64, beta: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    if q >= 1.0 {
        return 1.0;
    }
    let target = confidence_radius(m, beta);
    let (mut lo, mut hi) = (q, 1.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if bernoulli_kl(q, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest `p` in `[0, q]` with `KL(q || p) >= log(1/beta) / m`, or 0.
pub fn kl_lcb(q: f64, m: u64, beta: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    if q <= 0.0 {
        return 0.0;
    }
    let target = confidence_radius(m, beta);
    let (mut lo, mut hi) = (0.0, q);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if bernoulli_kl(q, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[inline]
fn confidence_radius(m: u64, beta: f64) -> f64 {
    -ln(beta) / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::{log, pow};

    #[test]
    fn kl_values() {
        assert_eq!(bernoulli_kl(0.3, 0.3), 0.0);
        assert!((bernoulli_kl(0.0, 0.25) + log(0.75)).abs() < 1e-15);
        assert!((bernoulli_kl(0.1, 0.2) - 0.036_690_014_034_750_584).abs() < 1e-15);
        assert_eq!(bernoulli_kl(0.5, 0.0), f64::INFINITY);
        assert_eq!(bernoulli_kl(0.5, 1.0), f64::INFINITY);
        assert_eq!(bernoulli_kl(1.0, 1.0), 0.0);
        assert_eq!(bernoulli_kl(0.0, 0.0), 0.0);
    }

    #[test]
    fn ucb_closed_form_at_zero() {
        let p = kl_ucb(0.0, 1000, 1e-3);
        let want = 1.0 - pow(1e-3, 1.0 / 1000.0);
        assert!((p - want).abs() < 1e-12);
        assert!((p - 0.006_883_951_579_066_183).abs() < 1e-12);
        assert_eq!(kl_ucb(1.0, 10, 0.1), 1.0);
        assert!(kl_ucb(0.3, 1_000_000_000, 0.5) - 0.3 < 1e-4);
    }

    #[test]
    fn lcb_mirrors_ucb() {
        let p = kl_lcb(1.0, 1000, 1e-3);
        assert!((p - pow(1e-3, 1.0 / 1000.0)).abs() < 1e-12);
        assert_eq!(kl_lcb(0.0, 50, 0.1), 0.0);
        let v = kl_lcb(0.5, 100, 0.05);
        assert!(v < 0.5);
        assert!((bernoulli_kl(0.5, v) - log(20.0) / 100.0).abs() < 1e-9);
    }
}
