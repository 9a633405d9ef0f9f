//! Iterative radix-2 FFT and the linear convolution built on it.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::num::math;

fn twiddles(n: usize) -> Vec<Complex64> {
    // Each factor computed directly rather than by recurrence, to keep the
    // rounding error independent of n.
    (0..n / 2)
        .map(|k| {
            let a = -2.0 * PI * k as f64 / n as f64;
            Complex64::new(math::cos(a), math::sin(a))
        })
        .collect()
}

/// In-place forward transform (or inverse without the `1/n` factor when
/// `inverse`). `buf.len()` must be a power of two.
pub(crate) fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let w = twiddles(n);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let mut tw = w[k * stride];
                if inverse {
                    tw = tw.conj();
                }
                let a = buf[start + k];
                let b = buf[start + k + half] * tw;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

/// Linear convolution of two nonnegative sequences.
///
/// Entries within the transform's round-off bound are set to zero, so the
/// support does not fill up with noise; the second value bounds the total
/// mass removed this way.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    if a.is_empty() || b.is_empty() {
        return (Vec::new(), 0.0);
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    // Pack both inputs into one complex transform: z = a + i b.
    let mut z = alloc::vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in a.iter().enumerate() {
        z[i].re = v;
    }
    for (i, &v) in b.iter().enumerate() {
        z[i].im = v;
    }
    fft_in_place(&mut z, false);
    // A[k] = (Z[k] + conj Z[-k]) / 2, B[k] = (Z[k] - conj Z[-k]) / 2i, and
    // A[k] B[k] = (Z[k]^2 - conj(Z[-k])^2) / 4i.
    let mut prod = alloc::vec![Complex64::new(0.0, 0.0); n];
    let quarter_i = Complex64::new(0.0, -0.25);
    for k in 0..n {
        let zk = z[k];
        let zm = z[(n - k) % n].conj();
        prod[k] = (zk * zk - zm * zm) * quarter_i;
    }
    fft_in_place(&mut prod, true);
    let scale = 1.0 / n as f64;
    let norm = |v: &[f64]| math::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let floor = 8.0 * f64::EPSILON * (n.trailing_zeros() as f64 + 1.0) * norm(a) * norm(b);
    let mut dropped = 0.0;
    let out = prod
        .iter()
        .take(out_len)
        .map(|c| {
            let v = c.re * scale;
            if v > floor {
                v
            } else {
                dropped += floor + v.max(0.0);
                0.0
            }
        })
        .collect();
    (out, dropped)
}
