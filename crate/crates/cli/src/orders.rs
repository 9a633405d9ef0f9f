//! Compact order lists: comma-separated terms, each a single order `k`,
//! a range `a..b` (inclusive) or a strided range `a..b:s`.
//!
//! `1..400,410..1000:10` expands to 1, 2, ..., 400, 410, 420, ..., 1000.

use crate::error::{CliError, Result};

pub fn parse_orders(text: &str) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for term in text.split(',').map(str::trim) {
        if term.is_empty() {
            return Err(CliError::config(format!("empty term in order list {text:?}")));
        }
        let (range, step) = match term.split_once(':') {
            Some((r, s)) => (r, parse_num(s, term)?),
            None => (term, 1),
        };
        if step == 0 {
            return Err(CliError::config(format!("zero stride in {term:?}")));
        }
        let (lo, hi) = match range.split_once("..") {
            Some((a, b)) => (parse_num(a, term)?, parse_num(b, term)?),
            None if step == 1 => {
                let k = parse_num(range, term)?;
                (k, k)
            }
            None => return Err(CliError::config(format!("stride without a range in {term:?}"))),
        };
        if lo == 0 || lo > hi {
            return Err(CliError::config(format!("bad range {term:?}: orders start at 1 and ranges must ascend")));
        }
        for k in (lo..=hi).step_by(step) {
            if out.last().is_some_and(|&last| k <= last) {
                return Err(CliError::config(format!("orders must be strictly increasing, {k} follows {}", out.last().unwrap())));
            }
            out.push(k);
        }
    }
    Ok(out)
}

fn parse_num(s: &str, term: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| CliError::config(format!("invalid number {s:?} in order term {term:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_strides() {
        let v = parse_orders("1..400,410..1000:10,1100..10000:100").unwrap();
        assert_eq!(v.len(), 400 + 60 + 90);
        assert_eq!(&v[..3], &[1, 2, 3]);
        assert_eq!(v[400], 410);
        assert_eq!(*v.last().unwrap(), 10_000);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn singles() {
        assert_eq!(parse_orders("1, 10 ,50").unwrap(), vec![1, 10, 50]);
        assert_eq!(parse_orders("3..3").unwrap(), vec![3]);
        assert_eq!(parse_orders("1..10:4").unwrap(), vec![1, 5, 9]);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "0..3", "5..2", "1..4,3", "1..x", "1..5:0", "4:2", "1,,2"] {
            assert!(parse_orders(bad).is_err(), "{bad}");
        }
    }
}
