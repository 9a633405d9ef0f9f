//! Command-line definitions and dispatch.

use std::io::Write;

use ballsbins_core::samplers::{smallest_cap_for_target, truncation_delta_penalty};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::account::{evaluate, DirectionArg, MethodArg, Request, Sampler};
use crate::error::{CliError, Result};
use crate::orders::parse_orders;
use crate::output::{format_sig6, write_csv, write_json, CurveRow, Envelope};
use crate::parallel::{default_workers, WORKERS_ENV};
use crate::simulate::{simulate, SimulateRequest};

#[derive(Debug, Parser)]
#[command(name = "ballsbins", version, about = "Privacy accounting for DP-SGD batch samplers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bound delta at a single epsilon; prints one JSON object.
    Account(AccountArgs),
    /// Bound delta over a grid of epsilons; prints CSV or JSON.
    Curve(CurveArgs),
    /// Draw batch assignments and summarize their distribution.
    SimulateSampler(SimulateArgs),
    /// Additive delta penalty of capping batch sizes.
    TruncationDelta(TruncationArgs),
}

/// Parses counts such as `1000000` or `1e6`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("{s:?} is not a nonnegative integer")),
    }
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    parse_count(s).and_then(|v| usize::try_from(v).map_err(|e| e.to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[arg(long, value_enum)]
    pub sampler: Sampler,
    /// Noise multiplier.
    #[arg(long)]
    pub sigma: f64,
    /// Steps per epoch.
    #[arg(long, value_parser = parse_size)]
    pub steps: usize,
    #[arg(long, default_value_t = 1, value_parser = parse_size)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    /// Monte Carlo samples per direction.
    #[arg(long, default_value = "1000000", value_parser = parse_count)]
    pub m: u64,
    /// Failure probability of each confidence bound.
    #[arg(long, default_value_t = 1e-3)]
    pub beta: f64,
    /// Order statistics to sample, e.g. `1..400,410..1000:10`.
    #[arg(long)]
    pub orders: Option<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Loss grid step of the Poisson privacy-loss distributions.
    #[arg(long, default_value_t = 1e-4)]
    pub grid_step: f64,
    /// Progress messages on standard error.
    #[arg(short, long)]
    pub verbose: bool,
}

impl QueryArgs {
    pub fn request(&self) -> Result<Request> {
        let orders = self.orders.as_deref().map(parse_orders).transpose()?;
        let workers = self.workers.unwrap_or_else(default_workers);
        if workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        Ok(Request {
            sampler: self.sampler,
            sigma: self.sigma,
            steps: self.steps,
            epochs: self.epochs,
            method: self.method,
            direction: self.direction,
            m: self.m,
            beta: self.beta,
            orders,
            workers,
            seed: self.seed,
            grid_step: self.grid_step,
            verbose: self.verbose,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct AccountArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    Linear,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Explicit comma-separated epsilons.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with_all = ["eps_min", "eps_max", "eps_count"])]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true, requires_all = ["eps_max", "eps_count"])]
    pub eps_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_max: Option<f64>,
    #[arg(long)]
    pub eps_count: Option<usize>,
    #[arg(long, value_enum, default_value_t = Grid::Linear)]
    pub grid: Grid,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl CurveArgs {
    /// Ascending, deduplicated epsilons.
    pub fn epsilons(&self) -> Result<Vec<f64>> {
        let mut eps = match (&self.epsilons, self.eps_min, self.eps_max, self.eps_count) {
            (Some(list), ..) => list.clone(),
            (None, Some(lo), Some(hi), Some(n)) => grid(lo, hi, n, self.grid)?,
            _ => return Err(CliError::config("give --epsilons or all of --eps-min, --eps-max, --eps-count")),
        };
        if eps.is_empty() {
            return Err(CliError::config("at least one epsilon is required"));
        }
        if let Some(e) = eps.iter().find(|e| !e.is_finite()) {
            return Err(CliError::config(format!("epsilon must be finite, got {e}")));
        }
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        Ok(eps)
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
fn grid(lo: f64, hi: f64, n: usize, kind: Grid) -> Result<Vec<f64>> {
    if n == 0 || !(lo <= hi) {
        return Err(CliError::config("epsilon grid needs count >= 1 and min <= max"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let at = |i: usize| i as f64 / (n - 1) as f64;
    match kind {
        Grid::Linear => Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * at(i) }).collect()),
        Grid::Geometric => {
            if !(lo > 0.0) {
                return Err(CliError::config("a geometric epsilon grid needs a positive minimum"));
            }
            let (a, b) = (lo.ln(), hi.ln());
            Ok((0..n).map(|i| if i + 1 == n { hi } else { (a + (b - a) * at(i)).exp() }).collect())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub sampler: Sampler,
    /// Dataset size.
    #[arg(short, long, value_parser = parse_size)]
    pub n: usize,
    /// Exact or expected batch size.
    #[arg(short, long, value_parser = parse_size)]
    pub b: usize,
    /// Number of batches.
    #[arg(long, value_parser = parse_size)]
    pub steps: usize,
    /// Cap batches at this size.
    #[arg(long, value_parser = parse_size)]
    pub max_batch: Option<usize>,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print only the summary.
    #[arg(long)]
    pub summary_only: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TruncationArgs {
    #[arg(short, long, value_parser = parse_count)]
    pub n: u64,
    #[arg(short, long, value_parser = parse_count)]
    pub b: u64,
    #[arg(long, value_parser = parse_count)]
    pub steps: u64,
    /// Batch cap B.
    #[arg(long, value_parser = parse_count)]
    pub max_batch: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Also report the smallest cap with penalty at most this value.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    pub format: TextFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextFormat {
    Text,
    Json,
}

#[derive(Serialize)]
struct AccountConfig<'a> {
    #[serde(flatten)]
    request: &'a Request,
    epsilon: f64,
    method_resolved: &'static str,
}

#[derive(Serialize)]
struct CurveConfig<'a> {
    #[serde(flatten)]
    request: &'a Request,
    epsilons: &'a [f64],
    method_resolved: &'static str,
}

#[derive(Serialize)]
struct ResultBody<T> {
    result: T,
}

#[derive(Serialize)]
struct RowsBody<T> {
    rows: T,
}

#[derive(Serialize)]
struct SummaryBody<T> {
    summary: T,
}

#[derive(Serialize)]
struct TruncationConfig {
    n: u64,
    b: u64,
    steps: u64,
    max_batch: Option<u64>,
    epsilon: f64,
    target: Option<f64>,
}

#[derive(Serialize)]
struct TruncationBody {
    delta_prime: Option<f64>,
    smallest_max_batch: Option<u64>,
}

/// Runs a parsed command, writing its data to `out`.
///
/// `account`, `curve` and `truncation-delta` write nothing unless they
/// succeed; `simulate-sampler` streams its batches.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Account(a) => {
            let req = a.query.request()?;
            let method = req.resolve_method()?;
            let row = evaluate(&req, &[a.epsilon])?.remove(0);
            let config = AccountConfig {
                request: &req,
                epsilon: a.epsilon,
                method_resolved: method.as_str(),
            };
            write_json(out, &Envelope::new("account", config, ResultBody { result: row }))
        }
        Command::Curve(c) => {
            let req = c.query.request()?;
            let method = req.resolve_method()?;
            let eps = c.epsilons()?;
            let rows: Vec<CurveRow> = evaluate(&req, &eps)?.iter().map(CurveRow::from).collect();
            match c.format {
                Format::Csv => write_csv(out, &rows),
                Format::Json => {
                    let config = CurveConfig {
                        request: &req,
                        epsilons: &eps,
                        method_resolved: method.as_str(),
                    };
                    write_json(out, &Envelope::new("curve", config, RowsBody { rows }))
                }
            }
        }
        Command::SimulateSampler(s) => {
            let req = SimulateRequest {
                sampler: s.sampler,
                n: s.n,
                b: s.b,
                steps: s.steps,
                max_batch: s.max_batch,
                trials: s.trials,
                seed: s.seed,
                emit_batches: !s.summary_only,
            };
            let summary = simulate(&req, out)?;
            write_json(out, &Envelope::new("simulate-sampler", &req, SummaryBody { summary }))
        }
        Command::TruncationDelta(t) => {
            if t.max_batch.is_none() && t.target.is_none() {
                return Err(CliError::config("give --max-batch, --target, or both"));
            }
            if t.b > t.n {
                return Err(CliError::config("batch size b must not exceed n"));
            }
            let delta = t
                .max_batch
                .map(|cap| truncation_delta_penalty(t.n, t.b, t.steps, cap, t.epsilon))
                .transpose()?;
            let smallest = t
                .target
                .map(|target| smallest_cap_for_target(t.n, t.b, t.steps, t.epsilon, target))
                .transpose()?;
            match t.format {
                TextFormat::Text => {
                    if let Some(d) = delta {
                        writeln!(out, "{}", format_sig6(d))?;
                    }
                    if let Some(cap) = smallest {
                        writeln!(out, "{cap}")?;
                    }
                    Ok(())
                }
                TextFormat::Json => {
                    let config = TruncationConfig {
                        n: t.n,
                        b: t.b,
                        steps: t.steps,
                        max_batch: t.max_batch,
                        epsilon: t.epsilon,
                        target: t.target,
                    };
                    let body = TruncationBody {
                        delta_prime: delta.map(|d| format_sig6(d).parse().expect("formatted float")),
                        smallest_max_batch: smallest,
                    };
                    write_json(out, &Envelope::new("truncation-delta", config, body))
                }
            }
        }
    }
}
