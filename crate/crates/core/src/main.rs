use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use rotalg::cli::selftest::{faulty_backend, selftest, selftest_with, Fault};
use rotalg::cli::{output_path, record_target, render, resolve_theta, run_verify, CliError, Format, VerifyConfig};
use rotalg::diophantine::{convergents, square_convergents, xi_transform};
use rotalg::frame::make_frame;
use rotalg::nctorus::commutation_report;
use rotalg::theta::{theta_eval, ThetaKind, ThetaQuery};

#[derive(Parser)]
#[command(name = "rotalg", version, about = "Certified bounds for theta-frame projections in the rotation algebra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// θ in (0, 1): a decimal, a named constant (pi-3, 1/pi, e-2, sqrt2-1, ln2)
    /// or `engineered:β₁,β₂,...`
    #[arg(long, default_value = "pi-3")]
    theta: String,
    #[arg(long, default_value_t = 256)]
    precision_bits: u32,
    /// Number of square convergents
    #[arg(long, default_value_t = 4)]
    count: usize,
    /// Require |θ − p/q| < q^−exponent
    #[arg(long, default_value_t = 3.0)]
    exponent: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Square convergents of θ (and the plain convergents of ξ they come from)
    Convergents {
        #[command(flatten)]
        search: SearchArgs,
        /// How many plain convergents of ξ to list
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Frame parameters and lattice commutation phases for each square convergent
    Frame {
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Evaluate ϑ₂ or ϑ₃ at z with nome parameter τ = i·t
    Theta {
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
        kind: u8,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z_im: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-15)]
        tol: f64,
    },
    /// Full bound table across square convergents
    Verify {
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Comma-separated subset of json, csv
        #[arg(long, default_value = "json")]
        format: String,
        /// Output file; with several formats the extension is replaced per format
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        parallel: bool,
    },
    /// Run every property suite
    Selftest {
        /// Plant a known fault to confirm the suites catch it
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convergents { search, depth } => {
            let (theta, _) = resolve_theta(&search.theta, search.precision_bits)?;
            let xi = xi_transform(&theta)?;
            let plain: Vec<_> = convergents(&xi, depth)?
                .iter()
                .map(|c| json!([c.numerator.to_string(), c.denominator.to_string()]))
                .collect();
            let found = square_convergents(&theta, search.count, search.exponent)?;
            print_json(&json!({ "xi_convergents": plain, "search": found }));
            found.require(search.count)?;
        }
        Command::Frame { search } => {
            let (theta, _) = resolve_theta(&search.theta, search.precision_bits)?;
            let recs = square_convergents(&theta, search.count, search.exponent)?.require(search.count)?;
            let mut out = Vec::new();
            for rec in &recs {
                match make_frame(&record_target(&theta, rec), rec) {
                    Ok(f) => out.push(json!({ "frame": f, "commutation": commutation_report(&f) })),
                    Err(e) => out.push(json!({ "q": rec.q.to_string(), "error": e.to_string() })),
                }
            }
            print_json(&json!(out));
        }
        Command::Theta { kind, z_re, z_im, t, tol } => {
            let kind = if kind == 2 { ThetaKind::Theta2 } else { ThetaKind::Theta3 };
            let q = ThetaQuery::new(kind, Complex64::new(z_re, z_im), Complex64::new(0.0, t), tol);
            let v = theta_eval(&q).map_err(|e| CliError::Config(e.to_string()))?;
            print_json(&json!(v));
        }
        Command::Verify {
            search,
            tol,
            format,
            out,
            parallel,
        } => {
            let formats = format.split(',').map(str::parse).collect::<Result<Vec<Format>, _>>()?;
            let cfg = VerifyConfig {
                theta_expr: search.theta,
                precision_bits: search.precision_bits,
                count: search.count,
                exponent: search.exponent,
                tol,
                formats,
                output_path: out,
                parallel,
            };
            let report = run_verify(&cfg)?;
            let several = cfg.formats.len() > 1;
            for &f in &cfg.formats {
                let text = render(&report, f);
                match &cfg.output_path {
                    Some(p) => {
                        let path = output_path(p, f, several);
                        std::fs::write(&path, text)?;
                        eprintln!("wrote {}", path.display());
                    }
                    None => print!("{text}"),
                }
            }
        }
        Command::Selftest { inject_fault } => {
            let summary = match inject_fault {
                Some(f) => selftest_with(faulty_backend(f).as_ref()),
                None => selftest(),
            };
            print!("{}", summary.render());
            if !summary.passed() {
                return Err(CliError::Selftest(summary.failed_names().join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
