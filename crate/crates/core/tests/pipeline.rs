//! The bound pipeline on a constructed θ whose square convergents are known,
//! and the command-line binary end to end.

use std::process::{Command, Output};

use rotalg::bounds::{c_q, perturbation_envelope, perturbed_minus_b, Perturbation};
use rotalg::cli::{evaluate_frame, record_target, resolve_theta, strictly_decreasing, COLUMNS};
use rotalg::diophantine::square_convergents;
use rotalg::frame::{make_frame, FrameParams};
use rotalg::nctorus::tp_l1;

const ENGINEERED: &str = "engineered:3.5,6,10";

fn engineered_frames() -> Vec<FrameParams> {
    let (theta, _) = resolve_theta(ENGINEERED, 256).unwrap();
    let recs = square_convergents(&theta, 3, 2.0).unwrap().require(3).unwrap();
    recs.iter().map(|r| make_frame(&record_target(&theta, r), r).unwrap()).collect()
}

#[test]
fn perturbations_shrink_and_respect_envelope() {
    let frames = engineered_frames();
    for which in [Perturbation::X, Perturbation::Y] {
        let mut norms = Vec::new();
        for f in &frames {
            let d = perturbed_minus_b(f, which, 1e-12).unwrap();
            let env = perturbation_envelope(f, which).unwrap();
            // kept coefficients only; tp_l1 inflates the pruned mass for rounding
            let l1: f64 = d.poly.coeffs().values().map(|c| c.norm()).sum();
            let certified = tp_l1(&d.poly);
            assert!(certified >= l1 + d.poly.discarded());
            assert!(l1 <= env.total, "{which:?} q={}: {l1} > {}", f.sc.q, env.total);
            norms.push(certified);
        }
        assert!(strictly_decreasing(&norms), "{which:?}: {norms:?}");
    }
}

#[test]
fn summaries_are_consistent() {
    let frames = engineered_frames();
    let summaries: Vec<_> = frames.iter().map(|f| evaluate_frame(f, 1e-10).unwrap()).collect();
    for s in &summaries {
        assert!(s.window.lo > 0.0 && s.window.lo < s.window.hi);
        assert!(s.cutdown_u1.accounting_holds() && s.cutdown_u2.accounting_holds());
        assert!(s.centrality.eps1_numeric <= s.centrality.eps1_analytic);
        assert!(s.centrality.eps2_numeric <= s.centrality.eps2_analytic);
        assert!(s.row().all_finite());
    }
    let cq: Vec<f64> = frames.iter().map(|f| c_q(f).unwrap().ln_value).collect();
    assert!(strictly_decreasing(&cq), "{cq:?}");
}

fn rotalg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotalg")).args(args).output().expect("binary runs")
}

#[test]
fn exit_codes() {
    assert_eq!(rotalg(&["verify", "--count", "0"]).status.code(), Some(1));
    assert_eq!(rotalg(&["verify", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(rotalg(&["verify", "--theta", "1.5"]).status.code(), Some(1));
    // π − 3 has no exponent-3 square convergents reachable at 256 bits
    let out = rotalg(&["verify"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rotalg(&["selftest", "--inject-fault", "theta2-sign"]).status.code(), Some(4));
    assert_eq!(rotalg(&["theta", "--t", "1"]).status.code(), Some(0));
}

fn without_wall_time(json: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(json).unwrap();
    v["meta"].as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn verify_json_is_deterministic() {
    let args = ["verify", "--theta", ENGINEERED, "--exponent", "2", "--count", "3"];
    let a = rotalg(&args);
    let b = rotalg(&[&args[..], &["--parallel"]].concat());
    assert!(a.status.success() && b.status.success());
    let (a, b) = (without_wall_time(&a.stdout), without_wall_time(&b.stdout));
    assert_eq!(a["rows"], b["rows"]);
    assert_eq!(a["rows"].as_array().unwrap().len(), 3);
    assert_eq!(a["meta"]["schema_version"], 1);
    assert_eq!(a["meta"]["records_found"], 3);
}

#[test]
fn verify_csv_layout() {
    let out = rotalg(&["verify", "--theta", ENGINEERED, "--exponent", "2", "--count", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), COLUMNS.len());
    assert_eq!(&first[..4], ["25", "9", "3", "17"]);
    assert_eq!(lines.count(), 1);
}

#[test]
fn verify_writes_both_formats() {
    let dir = std::env::temp_dir().join(format!("rotalg-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("report.json");
    let status = rotalg(&[
        "verify", "--theta", ENGINEERED, "--exponent", "2", "--count", "1", "--format", "json,csv",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(dir.join("report.json").exists() && dir.join("report.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}
