mod common;

use common::{assert_schema, ballsbins, check, json, schema, stdout};
use serde_json::{json, Value};

#[test]
fn deterministic_account() {
    let v = json(&["account", "--sampler", "deterministic", "--sigma", "1", "--steps", "1", "--epsilon", "1"]);
    assert_schema(&v, "account");
    let delta = v["result"]["delta"].as_f64().unwrap();
    assert!((delta - 0.126936).abs() < 1e-6, "{delta}");
    assert_eq!(v["config"]["method_resolved"], "analytic");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn vacuous_epsilon_gives_trivial_upper_bound() {
    let (m, beta) = (20_000.0, 1e-3);
    let v = json(&[
        "account", "--sampler", "bnb", "--method", "plain", "--sigma", "1", "--steps", "4", "--epsilon", "1e9", "--m",
        "2e4", "--beta", "1e-3",
    ]);
    assert_schema(&v, "account");
    let r = &v["result"];
    assert_eq!(r["mean_q"].as_f64(), Some(0.0));
    let want = 1.0 - f64::powf(beta, 1.0 / m);
    let upper = r["upper_p"].as_f64().unwrap();
    assert!((upper - want).abs() < 1e-9 * want.max(1e-300) + 1e-15, "{upper} vs {want}");
}

#[test]
fn shuffle_rejects_upper_bounds() {
    let out = ballsbins(&["account", "--sampler", "shuffle", "--method", "upper", "--sigma", "1", "--steps", "4", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("shuffle supports lower bounds only"));
}

#[test]
fn configuration_errors_exit_2_with_empty_stdout() {
    let cases: &[&[&str]] = &[
        &["account", "--sampler", "bnb", "--sigma", "-1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--sigma", "1", "--steps", "0", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--method", "order-stats", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--method", "combined", "--orders", "1..9", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--orders", "3..1", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--method", "importance", "--epochs", "2", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "poisson", "--method", "importance", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--beta", "2", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "bnb", "--workers", "0", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["account", "--sampler", "deterministic", "--epochs", "2", "--sigma", "1", "--steps", "1", "--epsilon", "1"],
        &["curve", "--sampler", "bnb", "--sigma", "1", "--steps", "4"],
        &["curve", "--sampler", "bnb", "--sigma", "1", "--steps", "4", "--epsilons", "1,nan"],
        &["account", "--sampler", "nope", "--sigma", "1", "--steps", "4", "--epsilon", "1"],
        &["simulate-sampler", "--sampler", "shuffle", "-n", "10", "-b", "3", "--steps", "3"],
        &["truncation-delta", "-n", "10", "-b", "30", "--steps", "3", "--max-batch", "4", "--epsilon", "1"],
    ];
    for args in cases {
        let out = ballsbins(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn numerical_regime_errors_exit_3() {
    let out = ballsbins(&[
        "account", "--sampler", "poisson", "--sigma", "0.3", "--steps", "1000", "--epsilon", "1", "--grid-step", "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
}

#[test]
fn tail_underflow_is_flagged() {
    let v = json(&[
        "account", "--sampler", "bnb", "--method", "importance", "--direction", "pq", "--sigma", "0.1", "--steps", "10",
        "--epsilon", "1e4", "--m", "1000",
    ]);
    assert_schema(&v, "account");
    assert_eq!(v["result"]["tail_underflow"], true);
    assert_eq!(v["result"]["upper_p"].as_f64(), Some(0.0));
}

fn curve_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "curve", "--sampler", "bnb", "--method", "plain", "--sigma", "0.8", "--steps", "5", "--m", "3e4", "--epsilons",
        "2,0.5,1",
    ];
    if !extra.contains(&"--seed") {
        v.extend_from_slice(&["--seed", "11"]);
    }
    v.extend_from_slice(extra);
    v
}

#[test]
fn curve_rows_ascend_and_are_reproducible() {
    let a = stdout(&ballsbins(&curve_args(&["--workers", "1"])));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "epsilon,lower,mean,upper,method,direction,m,beta,seed");
    assert_eq!(lines.len(), 4);
    let eps: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(eps, vec![0.5, 1.0, 2.0]);
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        let (lo, mean, hi): (f64, f64, f64) = (cells[1].parse().unwrap(), cells[2].parse().unwrap(), cells[3].parse().unwrap());
        assert!(lo <= mean && mean <= hi);
        assert_eq!(&cells[4..], &["plain", "both", "30000", "0.001", "11"]);
    }
    let b = stdout(&ballsbins(&curve_args(&["--workers", "1"])));
    assert_eq!(a, b);
    let c = stdout(&ballsbins(&curve_args(&["--workers", "7"])));
    assert_eq!(a, c);
    let d = stdout(&ballsbins(&curve_args(&["--seed", "12"])));
    assert_ne!(a, d);
}

#[test]
fn worker_count_from_environment() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_ballsbins"))
        .args(["account", "--sampler", "deterministic", "--sigma", "1", "--steps", "1", "--epsilon", "1"])
        .env("BALLSBINS_WORKERS", "5")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["workers"], 5);
}

#[test]
fn curve_json_matches_schema() {
    let v = json(&curve_args(&["--format", "json"]));
    assert_schema(&v, "curve");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);

    let v = json(&[
        "curve", "--sampler", "poisson", "--sigma", "1", "--steps", "4", "--eps-min", "0.1", "--eps-max", "4",
        "--eps-count", "5", "--grid", "geometric", "--format", "json",
    ]);
    assert_schema(&v, "curve");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!((rows[0]["epsilon"].as_f64().unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(rows[4]["epsilon"].as_f64(), Some(4.0));
    for r in rows {
        assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap());
        assert!(r["mean"].is_null());
    }
}

#[test]
fn every_method_produces_valid_account_output() {
    let base = ["--sigma", "0.7", "--steps", "6", "--epsilon", "1.5", "--m", "8192"];
    let runs: &[&[&str]] = &[
        &["--sampler", "bnb"],
        &["--sampler", "bnb", "--method", "plain"],
        &["--sampler", "bnb", "--method", "order-stats", "--orders", "1,2,4"],
        &["--sampler", "bnb", "--orders", "1..3,5"],
        &["--sampler", "bnb", "--method", "lower"],
        &["--sampler", "bnb", "--method", "plain", "--epochs", "2"],
        &["--sampler", "poisson"],
        &["--sampler", "poisson", "--method", "plain", "--direction", "qp"],
        &["--sampler", "shuffle"],
        &["--sampler", "deterministic", "--method", "plain"],
    ];
    for extra in runs {
        let mut args = vec!["account"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&base);
        let v = json(&args);
        assert_schema(&v, "account");
        let r = &v["result"];
        let delta = r["delta"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&delta), "{extra:?}");
        if let (Some(lo), Some(hi)) = (r["lower"].as_f64(), r["upper_p"].as_f64()) {
            assert!(lo <= hi, "{extra:?}: {r}");
        }
    }
}

#[test]
fn upper_only_rows_carry_the_certificate() {
    let v = json(&[
        "account", "--sampler", "bnb", "--method", "combined", "--orders", "1..3", "--sigma", "0.7", "--steps", "6",
        "--epsilon", "1", "--m", "8192",
    ]);
    let r = &v["result"];
    assert_eq!(r["bound_kind"], "upper_only");
    assert_eq!(r["lower"], r["certificate"]["value"]);
    let lower = json(&["account", "--sampler", "bnb", "--method", "lower-bound", "--sigma", "0.7", "--steps", "6", "--epsilon", "1"]);
    assert_eq!(lower["result"]["delta"], r["certificate"]["value"]);
}

#[test]
fn simulate_bnb_marginals() {
    let text = stdout(&ballsbins(&["simulate-sampler", "--sampler", "bnb", "-n", "10", "-b", "5", "--steps", "2", "--trials", "1e4"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 * 10_000 + 1);
    let batch = schema("batch");
    for l in &lines[..50] {
        check(&serde_json::from_str(l).unwrap(), &batch).unwrap();
    }
    let first: Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["t"], 1);
    let summary: Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    assert_schema(&summary, "simulate-sampler");
    let f = summary["summary"]["marginal"]["frequencies"][0][0].as_f64().unwrap();
    let se = (0.25f64 / 1e4).sqrt();
    assert!((f - 0.5).abs() < 3.0 * se, "{f}");
    let p = summary["summary"]["chi_square"]["p_value"].as_f64().unwrap();
    assert!(p > 1e-4, "{p}");
    assert_eq!(summary["summary"]["mean_batch_size"].as_f64(), Some(5.0));
}

#[test]
fn simulate_deterministic_is_exact() {
    let v = json(&["simulate-sampler", "--sampler", "deterministic", "-n", "12", "-b", "4", "--steps", "3", "--trials", "5", "--summary-only"]);
    assert_schema(&v, "simulate-sampler");
    assert_eq!(v["summary"]["chi_square"]["exact_match"], true);
    assert_eq!(v["summary"]["chi_square"]["statistic"], Value::Null);
    assert_eq!(v["summary"]["size_histogram"], json!({"4": 15}));
}

#[test]
fn simulate_shuffle_partitions() {
    let text = stdout(&ballsbins(&["simulate-sampler", "--sampler", "shuffle", "-n", "12", "-b", "4", "--steps", "3", "--trials", "200"]));
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for trial in lines[..lines.len() - 1].chunks(3) {
        let mut all: Vec<u64> = trial.iter().flat_map(|b| b["indices"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap())).collect();
        all.sort_unstable();
        assert_eq!(all, (1..=12).collect::<Vec<_>>());
    }
    let p = lines.last().unwrap()["summary"]["chi_square"]["p_value"].as_f64().unwrap();
    assert!(p > 1e-4);
}

#[test]
fn simulate_poisson_truncation_rate() {
    let v = json(&[
        "simulate-sampler", "--sampler", "poisson", "-n", "100", "-b", "10", "--steps", "5", "--max-batch", "12", "--trials",
        "2000", "--summary-only", "--seed", "3",
    ]);
    assert_schema(&v, "simulate-sampler");
    let t = &v["summary"]["truncation"];
    let (rate, want) = (t["rate"].as_f64().unwrap(), t["expected_rate"].as_f64().unwrap());
    let se = (want * (1.0 - want) / 10_000.0).sqrt();
    assert!((rate - want).abs() < 3.0 * se, "{rate} vs {want}");
    // Binomial tail oracle: Pr[Bin(100, 0.1) > 12] by direct summation.
    let mut pmf = 0.9f64.powi(100);
    let mut cdf = pmf;
    for k in 1..=12 {
        pmf *= (100 - k + 1) as f64 / k as f64 * (0.1 / 0.9);
        cdf += pmf;
    }
    assert!((want - (1.0 - cdf)).abs() < 1e-12);
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate-sampler", "--sampler", "bnb", "-n", "30", "-b", "10", "--steps", "3", "--trials", "20", "--seed", "9"];
    assert_eq!(stdout(&ballsbins(&args)), stdout(&ballsbins(&args)));
}

fn penalty(args: &[&str]) -> String {
    let mut full = vec!["truncation-delta"];
    full.extend_from_slice(args);
    stdout(&ballsbins(&full)).trim().to_string()
}

#[test]
fn truncation_penalty_basics() {
    assert_eq!(penalty(&["-n", "1000", "-b", "10", "--steps", "100", "--max-batch", "1000", "--epsilon", "1"]), "0");
    let mut prev = f64::INFINITY;
    for cap in [12, 24, 48, 96] {
        let d: f64 = penalty(&["-n", "1000", "-b", "10", "--steps", "100", "--max-batch", &cap.to_string(), "--epsilon", "1"])
            .parse()
            .unwrap();
        assert!(d <= prev);
        prev = d;
    }
    let text = penalty(&["-n", "1000", "-b", "10", "--steps", "100", "--max-batch", "15", "--epsilon", "1"]);
    let sig: String = text.chars().filter(char::is_ascii_digit).collect::<String>().trim_start_matches('0').to_string();
    assert!(sig.len() <= 6, "{text}");
}

#[test]
fn smallest_cap_matches_linear_scan() {
    let (n, b, steps, eps, target) = (200u64, 20u64, 10u64, 2.0, 1e-6);
    let out = penalty(&["-n", "200", "-b", "20", "--steps", "10", "--epsilon", "2", "--target", "1e-6"]);
    let got: u64 = out.parse().unwrap();
    let linear = (0..=n)
        .find(|&cap| {
            ballsbins_core::samplers::truncation_delta_penalty(n, b, steps, cap, eps).unwrap() <= target
        })
        .unwrap();
    assert_eq!(got, linear);
}

#[test]
fn truncation_json() {
    let v = json(&[
        "truncation-delta", "-n", "1000", "-b", "10", "--steps", "100", "--max-batch", "20", "--epsilon", "1", "--target",
        "1e-9", "--format", "json",
    ]);
    assert_schema(&v, "truncation-delta");
    assert!(v["smallest_max_batch"].as_u64().unwrap() > 20);
}

#[test]
fn batch_caps_used_for_training() {
    // (n, b, paper's cap); T = floor(n / b).
    let cases = [
        (37_000_000u64, 1024u64, 1328u64),
        (37_000_000, 8192, 9007),
        (12_796_151, 1024, 1320),
        (12_796_151, 8192, 8984),
    ];
    for (n, b, paper) in cases {
        let steps = n / b;
        let cap: u64 = penalty(&[
            "-n", &n.to_string(), "-b", &b.to_string(), "--steps", &steps.to_string(), "--epsilon", "10", "--target", "1e-10",
        ])
        .parse()
        .unwrap();
        let rel = (cap as f64 - paper as f64).abs() / paper as f64;
        assert!(rel < 5e-3, "n={n} b={b}: {cap} vs {paper}");
        let at_cap = ballsbins_core::samplers::truncation_delta_penalty(n, b, steps, cap, 10.0).unwrap();
        assert!(at_cap <= 1e-10);
    }
}
