//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the lines come out in order:
//!
//! ```text
//! cargo test -p rotalg --test acceptance
//! ```
//!
//! The process fails when any criterion outside `UNATTAINABLE` fails. The
//! two π−3 criteria are evaluated exactly as stated and reported; their
//! failure is expected (see README) and does not abort the run.

use std::time::{Duration, Instant};

use rotalg::bounds::inverse_beta_sq;
use rotalg::cli::selftest::{
    suite_algebra, suite_closed_form, suite_gaussian_moment_sum, suite_omega, suite_orthogonality,
    suite_psi_window, suite_sqrt_lipschitz, suite_theta_growth, suite_theta_special_value, SuiteOutcome,
};
use rotalg::cli::{record_target, run_verify, strictly_decreasing, ReportRow, VerificationReport, VerifyConfig};
use rotalg::diophantine::{square_convergents, validate_record, SquareSearch};
use rotalg::frame::make_frame;
use rotalg::numkit::parse_unit_interval;
use rotalg::theta::theta_eval_scaled;

const UNATTAINABLE: [u32; 2] = [9, 10];

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn timed<F: FnOnce() -> (bool, String)>(id: u32, title: &'static str, f: F) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    Outcome {
        id,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn from_suite(s: SuiteOutcome) -> (bool, String) {
    let mut d = format!("{} checks, {} violations", s.checked, s.violations);
    if let Some(e) = s.examples.first() {
        d.push_str(&format!("; first: {e}"));
    }
    (s.passed(), d)
}

fn limited<F: FnOnce() -> (bool, String)>(limit: Duration, f: F) -> (bool, String) {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    (ok && elapsed < limit, format!("{detail}; limit {}s", limit.as_secs()))
}

fn pi_minus_3_search() -> Result<SquareSearch, String> {
    let theta = parse_unit_interval("pi-3", 256).map_err(|e| e.to_string())?;
    square_convergents(&theta, 4, 3.0).map_err(|e| e.to_string())
}

fn criterion_9() -> (bool, String) {
    let theta = match parse_unit_interval("pi-3", 256) {
        Ok(t) => t,
        Err(e) => return (false, e.to_string()),
    };
    let (first, second) = match (pi_minus_3_search(), pi_minus_3_search()) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (false, e),
    };
    let same = serde_json::to_string(&first).ok() == serde_json::to_string(&second).ok();
    let mut problems = Vec::new();
    for rec in &first.records {
        let target = record_target(&theta, rec);
        if let Err(e) = validate_record(rec, &target) {
            problems.push(format!("q={}: {e}", rec.q));
        }
        if rec.achieved_exponent <= 3.0 {
            problems.push(format!("q={}: exponent {}", rec.q, rec.achieved_exponent));
        }
    }
    let ok = first.records.len() >= 4 && problems.is_empty() && same;
    (
        ok,
        format!(
            "{} records after {} convergents (stop {:?}), deterministic {same}{}",
            first.records.len(),
            first.examined,
            first.stop,
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

/// The end-to-end checks on a finished report.
fn decay_checks(report: &VerificationReport, min_rows: usize) -> Vec<String> {
    let rows = &report.rows;
    let mut problems = Vec::new();
    if rows.len() < min_rows {
        problems.push(format!("{} rows, need {min_rows}", rows.len()));
    }
    for r in rows {
        if !(r.trace_e > 0.0 && r.trace_e < 1.0) {
            problems.push(format!("q={}: trace {}", r.q, r.trace_e));
        }
        let q: f64 = r.q.parse().unwrap_or(0.0);
        if q >= 25.0 && !(r.C_q < 1e-6) {
            problems.push(format!("q={}: C_q {}", r.q, r.C_q));
        }
        if r.eps1_numeric > r.eps1_analytic || r.eps2_numeric > r.eps2_analytic {
            problems.push(format!("q={}: numeric ε above analytic", r.q));
        }
        if !r.all_finite() {
            problems.push(format!("q={}: non-finite column", r.q));
        }
    }
    let col = |f: fn(&ReportRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let series: [(&str, Vec<f64>); 4] = [
        ("cutdown_U1_total", col(|r| r.cutdown_U1_total)),
        ("cutdown_U2_total", col(|r| r.cutdown_U2_total)),
        ("eps1_numeric", col(|r| r.eps1_numeric)),
        ("eps2_numeric", col(|r| r.eps2_numeric)),
    ];
    for (name, v) in series {
        let ratio = v.last().zip(v.first()).map(|(l, f)| l / f).unwrap_or(f64::NAN);
        if !strictly_decreasing(&v) || !(ratio < 0.1) {
            problems.push(format!("{name} not decaying (last/first {ratio:e})"));
        }
    }
    problems
}

/// `trace_e = 1/β²` to 1e−20 relative, recomputed at full precision.
fn trace_checks(theta_expr: &str, exponent: f64, count: usize) -> Vec<String> {
    let (theta, _) = match rotalg::cli::resolve_theta(theta_expr, 256) {
        Ok(t) => t,
        Err(e) => return vec![e.to_string()],
    };
    let recs = match square_convergents(&theta, count, exponent) {
        Ok(s) => s.records,
        Err(e) => return vec![e.to_string()],
    };
    let mut problems = Vec::new();
    for rec in recs.iter().take(count) {
        match make_frame(&record_target(&theta, rec), rec) {
            Ok(f) => {
                let inv = inverse_beta_sq(&f);
                let rel = f.trace.sub(&inv).abs().div(&inv).map(|x| x.to_f64()).unwrap_or(f64::NAN);
                if !(rel < 1e-20) {
                    problems.push(format!("q={}: trace vs 1/β² relative {rel:e}", rec.q));
                }
            }
            Err(e) => problems.push(format!("q={}: {e}", rec.q)),
        }
    }
    problems
}

fn criterion_10() -> (bool, String) {
    let start = Instant::now();
    let cfg = VerifyConfig {
        parallel: true,
        ..VerifyConfig::default()
    };
    let report = match run_verify(&cfg) {
        Ok(r) => r,
        Err(e) => return (false, format!("no frames: {e} (exit code {})", e.exit_code())),
    };
    let mut problems = decay_checks(&report, 4);
    problems.extend(trace_checks(&cfg.theta_expr, cfg.exponent, cfg.count));
    let secs = start.elapsed().as_secs_f64();
    if secs >= 300.0 {
        problems.push(format!("took {secs:.0}s"));
    }
    (problems.is_empty(), format!("{} rows; {}", report.rows.len(), problems.join("; ")))
}

/// The criterion-10 checks on a constructed θ whose square convergents are
/// known; reported for information only.
fn supplementary_decay() -> String {
    let cfg = VerifyConfig {
        theta_expr: "engineered:3.5,6,10".into(),
        exponent: 2.0,
        count: 3,
        ..VerifyConfig::default()
    };
    match run_verify(&cfg) {
        Ok(report) => {
            let mut problems = decay_checks(&report, 3);
            problems.extend(trace_checks(&cfg.theta_expr, cfg.exponent, cfg.count));
            let qs: Vec<String> = report.rows.iter().map(|r| format!("{:.3e}", r.q.parse::<f64>().unwrap_or(0.0))).collect();
            if problems.is_empty() {
                format!("PASS on q = {}", qs.join(", "))
            } else {
                format!("FAIL on q = {}: {}", qs.join(", "), problems.join("; "))
            }
        }
        Err(e) => format!("FAIL: {e}"),
    }
}

fn main() {
    let backend = &theta_eval_scaled;
    let mut outcomes = Vec::new();

    outcomes.push(timed(1, "theta special value", || {
        limited(Duration::from_secs(1), || from_suite(suite_theta_special_value(backend)))
    }));
    outcomes.push(timed(2, "theta growth bound grid", || from_suite(suite_theta_growth(backend))));
    outcomes.push(timed(3, "Gaussian moment sum grid", || from_suite(suite_gaussian_moment_sum())));
    outcomes.push(timed(4, "square-root Lipschitz, 200 pairs", || from_suite(suite_sqrt_lipschitz(2024, 200))));
    outcomes.push(timed(5, "closed form of H vs quadrature", || {
        limited(Duration::from_secs(30), || from_suite(suite_closed_form()))
    }));
    outcomes.push(timed(6, "frame orthogonality and control", || from_suite(suite_orthogonality())));
    outcomes.push(timed(7, "ψ window", || from_suite(suite_psi_window())));
    outcomes.push(timed(8, "Ω brute force vs formula", || from_suite(suite_omega(2024, 500))));
    outcomes.push(timed(9, "square convergents of π−3", criterion_9));
    outcomes.push(timed(10, "end-to-end decay for π−3", criterion_10));
    outcomes.push(timed(11, "twisted algebra", || from_suite(suite_algebra(2024))));

    println!();
    for o in &outcomes {
        println!(
            "{} [{:>2}] {:<34} {:>7.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }
    println!("INFO      end-to-end decay, engineered θ         {}", supplementary_decay());

    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.passed && !UNATTAINABLE.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("\n{passed}/{} criteria pass", outcomes.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
