/// Exact fixed-point accumulator for values in `[0, 1]`.
///
/// Each value is truncated to a multiple of `2^-128` and summed in 192-bit
/// integer arithmetic. Addition is associative, so sums are bit-identical no
/// matter how samples are split across workers or in which order partial
/// sums are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExactSum {
    whole: u64,
    frac: u128,
}

const TWO_POW_128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

impl ExactSum {
    pub const ZERO: ExactSum = ExactSum { whole: 0, frac: 0 };

    /// Adds `v`, clamped to `[0, 1]`.
    #[inline]
    pub fn add(&mut self, v: f64) {
        if !(v > 0.0) {
            return;
        }
        if v >= 1.0 {
            self.whole += 1;
            return;
        }
        let scaled = (v * TWO_POW_128) as u128;
        self.add_parts(0, scaled);
    }

    #[inline]
    fn add_parts(&mut self, whole: u64, frac: u128) {
        let (f, carry) = self.frac.overflowing_add(frac);
        self.frac = f;
        self.whole += whole + carry as u64;
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.add_parts(other.whole, other.frac);
    }

    pub fn to_f64(&self) -> f64 {
        self.whole as f64 + self.frac as f64 / TWO_POW_128
    }

    /// `self / count` as a float.
    pub fn mean(&self, count: u64) -> f64 {
        if count == 0 {
            return 0.0;
        }
        // Divide the integer part first so large sums keep their low bits.
        let c = count as u128;
        let q_whole = self.whole as u128 / c;
        let r_whole = self.whole as u128 % c;
        let frac_part = (r_whole as f64 + self.frac as f64 / TWO_POW_128) / count as f64;
        q_whole as f64 + frac_part
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rng::RngStream;
    use alloc::vec::Vec;

    #[test]
    fn order_independent() {
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..5000).map(|_| rng.uniform() * rng.uniform()).collect();
        let mut fwd = ExactSum::ZERO;
        xs.iter().for_each(|&x| fwd.add(x));
        let mut rev = ExactSum::ZERO;
        xs.iter().rev().for_each(|&x| rev.add(x));
        assert_eq!(fwd, rev);
        let mut parts = ExactSum::ZERO;
        for chunk in xs.chunks(37) {
            let mut p = ExactSum::ZERO;
            chunk.iter().for_each(|&x| p.add(x));
            parts.merge(&p);
        }
        assert_eq!(fwd, parts);
        let naive: f64 = xs.iter().sum();
        assert!((fwd.to_f64() - naive).abs() < 1e-9);
    }

    #[test]
    fn whole_values_and_mean() {
        let mut s = ExactSum::ZERO;
        for _ in 0..3 {
            s.add(1.0);
        }
        s.add(0.5);
        s.add(0.0);
        s.add(-1.0);
        assert_eq!(s.to_f64(), 3.5);
        assert_eq!(s.mean(7), 0.5);
    }
}
