//! Experiment orchestration: search, frames, every bound column, and the
//! JSON/CSV report.

pub mod selftest;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    build_b, c_q, centrality_from, cutdown_bound, dd_inner_coeffs, spectral_window, CentralityReport, CqValue,
    CutdownReport, Generator, SpectralWindow, WindowError,
};
use crate::diophantine::{engineered_theta, square_convergents, DiophantineError, SearchStop, SquareConvergent};
use crate::frame::{make_frame, orthogonality_residual, FrameError, FrameParams};
use crate::numkit::{parse_unit_interval, BigReal, NumError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the report layout; bumped whenever a column changes.
pub const SCHEMA_VERSION: u32 = 1;
/// Prefix selecting a constructed θ, e.g. `engineered:3.5,6,10`.
pub const ENGINEERED_PREFIX: &str = "engineered:";
/// Orthogonality residuals are sampled over `|m|, |n| ≤` this.
pub const ORTHO_RANGE: i64 = 3;

/// CSV header; `window` is split into its two endpoints.
pub const COLUMNS: [&str; 21] = [
    "q",
    "p",
    "p_prime",
    "p0",
    "a",
    "beta",
    "alpha",
    "trace_e",
    "C_q",
    "b_minus_psi0_bound",
    "b_minus_2_bound",
    "window_lo",
    "window_hi",
    "cutdown_U1_total",
    "cutdown_U2_total",
    "eps1_numeric",
    "eps1_analytic",
    "eps2_numeric",
    "eps2_analytic",
    "max_orthogonality_residual",
    "e_approx_error_bound",
];

/// Columns expected to decrease along the frames of one θ.
pub const DECREASING: [&str; 7] = [
    "C_q",
    "b_minus_psi0_bound",
    "cutdown_U1_total",
    "cutdown_U2_total",
    "eps1_numeric",
    "eps2_numeric",
    "e_approx_error_bound",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("search failed: {0}")]
    Search(String),
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("self-test failed: {0}")]
    Selftest(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Search(_) => 2,
            CliError::Precision(_) => 3,
            CliError::Selftest(_) => 4,
        }
    }
}

impl From<DiophantineError> for CliError {
    fn from(e: DiophantineError) -> Self {
        match e {
            DiophantineError::PrecisionExhausted { .. } | DiophantineError::SearchPrecisionExhausted { .. } => {
                CliError::Precision(e.to_string())
            }
            DiophantineError::OutsideUnitInterval(_)
            | DiophantineError::ExponentTooSmall(_)
            | DiophantineError::InvalidDesign(_)
            | DiophantineError::Numeric(_) => CliError::Config(e.to_string()),
            _ => CliError::Search(e.to_string()),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub theta_expr: String,
    pub precision_bits: u32,
    pub count: usize,
    pub exponent: f64,
    pub tol: f64,
    pub formats: Vec<Format>,
    pub output_path: Option<String>,
    pub parallel: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            theta_expr: "pi-3".into(),
            precision_bits: 256,
            count: 4,
            exponent: 3.0,
            tol: 1e-10,
            formats: vec![Format::Json],
            output_path: None,
            parallel: false,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.count < 1 {
            return Err(CliError::Config("count must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.exponent >= 2.0 && self.exponent.is_finite()) {
            return Err(CliError::Config(format!("exponent must be at least 2, got {}", self.exponent)));
        }
        if self.precision_bits < 64 {
            return Err(CliError::Config("precision must be at least 64 bits".into()));
        }
        if self.formats.is_empty() {
            return Err(CliError::Config("at least one output format is required".into()));
        }
        Ok(())
    }
}

/// θ from an expression, with the precision actually used.
pub fn resolve_theta(expr: &str, precision_bits: u32) -> Result<(BigReal, u32), CliError> {
    if let Some(list) = expr.trim().strip_prefix(ENGINEERED_PREFIX) {
        let betas = list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad β {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let eng = engineered_theta(&betas, precision_bits)?;
        let prec = eng.theta.precision_bits();
        return Ok((eng.theta, prec));
    }
    Ok((parse_unit_interval(expr, precision_bits)?, precision_bits))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ReportRow {
    pub q: String,
    pub p: String,
    pub p_prime: String,
    pub p0: String,
    pub a: f64,
    pub beta: f64,
    pub alpha: f64,
    pub trace_e: f64,
    pub C_q: f64,
    pub b_minus_psi0_bound: f64,
    pub b_minus_2_bound: f64,
    pub window: [f64; 2],
    pub cutdown_U1_total: f64,
    pub cutdown_U2_total: f64,
    pub eps1_numeric: f64,
    pub eps1_analytic: f64,
    pub eps2_numeric: f64,
    pub eps2_analytic: f64,
    pub max_orthogonality_residual: f64,
    pub e_approx_error_bound: f64,
}

impl ReportRow {
    fn numeric(&self) -> [(&'static str, f64); 17] {
        [
            ("a", self.a),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("trace_e", self.trace_e),
            ("C_q", self.C_q),
            ("b_minus_psi0_bound", self.b_minus_psi0_bound),
            ("b_minus_2_bound", self.b_minus_2_bound),
            ("window_lo", self.window[0]),
            ("window_hi", self.window[1]),
            ("cutdown_U1_total", self.cutdown_U1_total),
            ("cutdown_U2_total", self.cutdown_U2_total),
            ("eps1_numeric", self.eps1_numeric),
            ("eps1_analytic", self.eps1_analytic),
            ("eps2_numeric", self.eps2_numeric),
            ("eps2_analytic", self.eps2_analytic),
            ("max_orthogonality_residual", self.max_orthogonality_residual),
            ("e_approx_error_bound", self.e_approx_error_bound),
        ]
    }

    pub fn column(&self, name: &str) -> Option<f64> {
        self.numeric().iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn all_finite(&self) -> bool {
        self.numeric().iter().all(|(_, v)| v.is_finite())
    }

    fn cells(&self) -> Vec<String> {
        let mut out = vec![self.q.clone(), self.p.clone(), self.p_prime.clone(), self.p0.clone()];
        out.extend(self.numeric().iter().map(|(_, v)| fmt_number(*v)));
        out
    }
}

/// Shortest round-trip decimal.
pub fn fmt_number(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

/// Everything computed for one frame; the report row is a projection.
#[derive(Clone, Debug, Serialize)]
pub struct FrameSummary {
    pub frame: FrameParams,
    pub c_q: CqValue,
    pub window: SpectralWindow,
    pub cutdown_u1: CutdownReport,
    pub cutdown_u2: CutdownReport,
    pub centrality: CentralityReport,
    pub dd_l1_mass: f64,
    pub max_orthogonality_residual: f64,
}

#[derive(Debug, Error)]
pub enum FrameEvalError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Window(#[from] WindowError),
}

pub fn evaluate_frame(frame: &FrameParams, tol: f64) -> Result<FrameSummary, FrameEvalError> {
    let b = build_b(frame, tol)?;
    let window = spectral_window(frame, &b)?;
    let cutdown_u1 = cutdown_bound(frame, Generator::U1, &window, tol)?;
    let cutdown_u2 = cutdown_bound(frame, Generator::U2, &window, tol)?;
    let dd = dd_inner_coeffs(frame, tol)?;
    let centrality = centrality_from(&frame.gp, frame.q_f64(), dd.eps1_numeric, dd.eps2_numeric)?;
    let mut ortho = 0.0f64;
    for m in -ORTHO_RANGE..=ORTHO_RANGE {
        for n in -ORTHO_RANGE..=ORTHO_RANGE {
            ortho = ortho.max(orthogonality_residual(m, n, &frame.gp, tol)?.abs_upper());
        }
    }
    Ok(FrameSummary {
        c_q: c_q(frame)?,
        frame: frame.clone(),
        window,
        cutdown_u1,
        cutdown_u2,
        centrality,
        dd_l1_mass: dd.l1_mass,
        max_orthogonality_residual: ortho,
    })
}

impl FrameSummary {
    pub fn row(&self) -> ReportRow {
        let f = &self.frame;
        ReportRow {
            q: f.sc.q.to_string(),
            p: f.sc.p.to_string(),
            p_prime: f.sc.p_root.to_string(),
            p0: f.p0.to_string(),
            a: f.a_f64,
            beta: f.gp.beta,
            alpha: f.gp.alpha,
            trace_e: f.trace.to_f64(),
            C_q: self.c_q.value,
            b_minus_psi0_bound: self.window.delta,
            b_minus_2_bound: self.window.b_minus_2(),
            window: [self.window.lo, self.window.hi],
            cutdown_U1_total: self.cutdown_u1.total,
            cutdown_U2_total: self.cutdown_u2.total,
            eps1_numeric: self.centrality.eps1_numeric,
            eps1_analytic: self.centrality.eps1_analytic,
            eps2_numeric: self.centrality.eps2_numeric,
            eps2_analytic: self.centrality.eps2_analytic,
            max_orthogonality_residual: self.max_orthogonality_residual,
            e_approx_error_bound: self.window.e_approx_error(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub q: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub schema_version: u32,
    pub config: VerifyConfig,
    /// Precision used for θ (engineered values raise it as needed).
    pub effective_precision_bits: u32,
    pub search_stop: String,
    pub records_found: usize,
    pub skipped: Vec<Skipped>,
    /// Per column, whether it strictly decreases along the rows.
    pub decreasing: BTreeMap<String, bool>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub rows: Vec<ReportRow>,
    pub meta: ReportMeta,
}

impl VerificationReport {
    pub fn empty(cfg: &VerifyConfig) -> Self {
        Self {
            rows: Vec::new(),
            meta: ReportMeta {
                version: VERSION.into(),
                schema_version: SCHEMA_VERSION,
                config: cfg.clone(),
                effective_precision_bits: cfg.precision_bits,
                search_stop: String::new(),
                records_found: 0,
                skipped: Vec::new(),
                decreasing: BTreeMap::new(),
                wall_time_s: 0.0,
            },
        }
    }
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn decreasing_flags(rows: &[ReportRow]) -> BTreeMap<String, bool> {
    DECREASING
        .iter()
        .map(|&c| {
            let v: Vec<f64> = rows.iter().filter_map(|r| r.column(c)).collect();
            (c.to_string(), strictly_decreasing(&v))
        })
        .collect()
}

fn stop_name(s: SearchStop) -> &'static str {
    match s {
        SearchStop::CountReached => "count_reached",
        SearchStop::PrecisionExhausted => "precision_exhausted",
        SearchStop::DepthExhausted => "depth_exhausted",
    }
}

/// The value a record approximates: θ, or `1 − θ` for complement records.
pub fn record_target(theta: &BigReal, rec: &SquareConvergent) -> BigReal {
    if rec.complement {
        BigReal::from_i64(1, theta.precision_bits()).sub(theta)
    } else {
        theta.clone()
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerificationReport, CliError> {
    let start = Instant::now();
    cfg.validate()?;
    let (theta, prec) = resolve_theta(&cfg.theta_expr, cfg.precision_bits)?;
    let search = square_convergents(&theta, cfg.count, cfg.exponent)?;
    let stop = search.stop;
    let mut records = search.require(cfg.count)?;
    records.truncate(cfg.count);

    let eval = |rec: &SquareConvergent| -> Result<FrameSummary, String> {
        let frame = make_frame(&record_target(&theta, rec), rec).map_err(|e| e.to_string())?;
        evaluate_frame(&frame, cfg.tol).map_err(|e| e.to_string())
    };
    let results: Vec<Result<FrameSummary, String>> = if cfg.parallel {
        records.par_iter().map(eval).collect()
    } else {
        records.iter().map(eval).collect()
    };

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (rec, res) in records.iter().zip(results) {
        match res {
            Ok(summary) => rows.push((rec.q.clone(), summary.row())),
            Err(reason) => skipped.push(Skipped {
                q: rec.q.to_string(),
                reason,
            }),
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let rows: Vec<ReportRow> = rows.into_iter().map(|(_, r)| r).collect();
    let mut report = VerificationReport::empty(cfg);
    report.meta.effective_precision_bits = prec;
    report.meta.search_stop = stop_name(stop).into();
    report.meta.records_found = records.len();
    report.meta.skipped = skipped;
    report.meta.decreasing = decreasing_flags(&rows);
    report.rows = rows;
    report.meta.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn render(report: &VerificationReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for row in &report.rows {
                w.write_record(row.cells()).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
    }
}

/// Rows back from CSV text produced by [`render`].
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != COLUMNS {
        return Err(CliError::Config("unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec[i].parse::<f64>().map_err(|_| CliError::Config(format!("bad number {:?}", &rec[i])))
        };
        rows.push(ReportRow {
            q: rec[0].to_string(),
            p: rec[1].to_string(),
            p_prime: rec[2].to_string(),
            p0: rec[3].to_string(),
            a: num(4)?,
            beta: num(5)?,
            alpha: num(6)?,
            trace_e: num(7)?,
            C_q: num(8)?,
            b_minus_psi0_bound: num(9)?,
            b_minus_2_bound: num(10)?,
            window: [num(11)?, num(12)?],
            cutdown_U1_total: num(13)?,
            cutdown_U2_total: num(14)?,
            eps1_numeric: num(15)?,
            eps1_analytic: num(16)?,
            eps2_numeric: num(17)?,
            eps2_analytic: num(18)?,
            max_orthogonality_residual: num(19)?,
            e_approx_error_bound: num(20)?,
        });
    }
    Ok(rows)
}

/// Where a format is written: `out` itself for a single format, otherwise
/// `out` with the format's extension. Relative paths resolve against
/// `ROTALG_OUT_DIR` when it is set.
pub fn output_path(out: &str, format: Format, several: bool) -> std::path::PathBuf {
    let mut path = std::path::PathBuf::from(out);
    if path.is_relative() {
        if let Ok(dir) = std::env::var("ROTALG_OUT_DIR") {
            path = std::path::Path::new(&dir).join(path);
        }
    }
    if several {
        path.set_extension(format.extension());
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(q: &str, x: f64) -> ReportRow {
        ReportRow {
            q: q.into(),
            p: "9".into(),
            p_prime: "3".into(),
            p0: "17".into(),
            a: 1e-150 * x,
            beta: 3.5,
            alpha: 1.4361406616345072,
            trace_e: 0.08163265306122448,
            C_q: 6.1e-12 * x,
            b_minus_psi0_bound: 0.1 + x,
            b_minus_2_bound: 0.3,
            window: [1.7, 2.3],
            cutdown_U1_total: x,
            cutdown_U2_total: 2.0 * x,
            eps1_numeric: 1.0 / 3.0,
            eps1_analytic: 1e300,
            eps2_numeric: 5e-324,
            eps2_analytic: 0.0,
            max_orthogonality_residual: 1e-13,
            e_approx_error_bound: std::f64::consts::PI,
        }
    }

    #[test]
    fn config_validation() {
        assert!(VerifyConfig::default().validate().is_ok());
        let bad = VerifyConfig {
            count: 0,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 1);
        let bad = VerifyConfig {
            exponent: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = VerifyConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_csv_is_header_only() {
        let r = VerificationReport::empty(&VerifyConfig::default());
        let csv = render(&r, Format::Csv);
        assert_eq!(csv, COLUMNS.join(",") + "\n");
        assert!(parse_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn json_csv_round_trip() {
        let mut r = VerificationReport::empty(&VerifyConfig::default());
        r.rows = vec![sample_row("25", 1.0), sample_row("29929", 0.25)];
        let json = render(&r, Format::Json);
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        let csv = render(&back, Format::Csv);
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows, r.rows);
    }

    #[test]
    fn decreasing_flags_follow_rows() {
        let rows = vec![sample_row("25", 1.0), sample_row("29929", 0.25)];
        let flags = decreasing_flags(&rows);
        assert!(flags["cutdown_U1_total"]);
        assert!(!flags["e_approx_error_bound"]);
        assert!(strictly_decreasing(&[]));
    }

    #[test]
    fn number_format_is_shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 2.5, 6.02214076e23] {
            assert_eq!(fmt_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_number(0.1), "0.1");
    }

    #[test]
    fn exit_codes() {
        let e: CliError = DiophantineError::NoneFound { examined: 3 }.into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = DiophantineError::SearchPrecisionExhausted { found: 0, requested: 4 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = DiophantineError::ExponentTooSmall(1.0).into();
        assert_eq!(e.exit_code(), 1);
        assert_eq!(CliError::Selftest("x".into()).exit_code(), 4);
    }

    #[test]
    fn engineered_expression_resolves() {
        let (theta, prec) = resolve_theta("engineered:3.5", 128).unwrap();
        assert!(prec >= 128 && theta.is_positive());
        assert!(resolve_theta("engineered:1.5", 128).is_err());
        assert!(resolve_theta("1.5", 128).is_err());
    }
}
