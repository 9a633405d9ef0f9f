//! Serialized forms of command results.

use std::io::Write;

use serde::Serialize;

use crate::account::Evaluation;
use crate::error::Result;

/// Version of every JSON document this tool writes; bumped on any
/// incompatible change to a schema under `schemas/`.
pub const SCHEMA_VERSION: u32 = 1;

/// Frozen column order of curve output.
pub const CURVE_COLUMNS: [&str; 9] = ["epsilon", "lower", "mean", "upper", "method", "direction", "m", "beta", "seed"];

#[derive(Serialize)]
pub struct Envelope<C, R> {
    pub schema: String,
    pub schema_version: u32,
    pub version: &'static str,
    pub config: C,
    #[serde(flatten)]
    pub body: R,
}

impl<C, R> Envelope<C, R> {
    pub fn new(command: &str, config: C, body: R) -> Self {
        Self {
            schema: format!("ballsbins.{command}"),
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION"),
            config,
            body,
        }
    }
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// One curve row; empty CSV cells are `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub epsilon: f64,
    pub lower: Option<f64>,
    pub mean: Option<f64>,
    pub upper: Option<f64>,
    pub method: &'static str,
    pub direction: &'static str,
    pub m: Option<u64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
}

impl From<&Evaluation> for CurveRow {
    fn from(e: &Evaluation) -> Self {
        // The trivial upper bound of a one-sided estimate is left out.
        let upper = if e.bound_kind == "lower_only" { None } else { e.upper_p };
        Self {
            epsilon: e.epsilon,
            lower: e.lower,
            mean: e.mean_q,
            upper,
            method: e.method,
            direction: e.direction,
            m: e.m_used,
            beta: e.beta_used,
            seed: e.seed,
        }
    }
}

pub fn write_csv(out: &mut dyn Write, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CURVE_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `%.6g`-style formatting: six significant digits, trailing zeros dropped.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
