mod checks;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use checks::{RegimeArg, Settings};
use report::{Check, Report};

#[derive(Parser)]
#[command(name = "segal", version, about = "Gaussian field sewing and gluing checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Equivalence or disjointness of mass-shifted Gaussian measures.
    Kakutani,
    /// Boundary operator semigroup, finite-difference and jump-block checks.
    DtnVerify,
    /// Determinant gluing on the doubled and composite cylinders.
    DetGlue,
    /// Multiplicative anomaly of the boundary operators.
    Anomaly,
    /// Exact Wick reordering and the covariance split.
    WickTest,
    /// Sewing of free cylinder amplitudes.
    SewFree,
    /// Trace of a cylinder amplitude against the torus partition function.
    TraceCheck,
    /// Conditional law and Fourier-side gluing of the lattice field.
    Disintegrate,
    /// Wick-ordered quartic Monte Carlo on the torus.
    McTorus,
    /// Every check above.
    Suite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Kakutani => "kakutani",
            Command::DtnVerify => "dtn-verify",
            Command::DetGlue => "det-glue",
            Command::Anomaly => "anomaly",
            Command::WickTest => "wick-test",
            Command::SewFree => "sew-free",
            Command::TraceCheck => "trace-check",
            Command::Disintegrate => "disintegrate",
            Command::McTorus => "mc-torus",
            Command::Suite => "suite",
        }
    }

    fn run(self, s: &Settings) -> segal_core::Result<Vec<Check>> {
        let mut out = Vec::new();
        if s.regime == RegimeArg::Zeta && !matches!(self, Command::Suite) {
            out.extend(checks::zeta_oracle(s)?);
        }
        out.extend(match self {
            Command::Kakutani => checks::kakutani(s),
            Command::DtnVerify => checks::dtn_verify(s),
            Command::DetGlue => checks::det_glue(s),
            Command::Anomaly => checks::anomaly_check(s),
            Command::WickTest => checks::wick_test(s),
            Command::SewFree => checks::sew_free(s),
            Command::TraceCheck => checks::trace_check(s),
            Command::Disintegrate => checks::disintegrate(s),
            Command::McTorus => checks::mc_torus(s),
            Command::Suite => checks::suite(s),
        }?);
        Ok(out)
    }
}

#[derive(Args, Default)]
struct Opts {
    /// Highest retained angular mode.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Mass.
    #[arg(long, global = true, allow_negative_numbers = true)]
    m: Option<f64>,
    /// Comparison mass for the Kakutani check.
    #[arg(long, global = true, allow_negative_numbers = true)]
    big_m: Option<f64>,
    /// Circle radius.
    #[arg(long = "R", global = true, allow_negative_numbers = true)]
    radius: Option<f64>,
    /// Cylinder or torus length.
    #[arg(long = "L", global = true, allow_negative_numbers = true)]
    length: Option<f64>,
    #[arg(long = "L1", global = true, allow_negative_numbers = true)]
    l1: Option<f64>,
    #[arg(long = "L2", global = true, allow_negative_numbers = true)]
    l2: Option<f64>,
    /// Lattice spacing in the cylinder direction.
    #[arg(long, global = true, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    regime: Option<RegimeArg>,
    /// Monte Carlo samples per chain-set.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Quartic coupling.
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Square spectral cutoff of the Monte Carlo sampler.
    #[arg(long, global = true)]
    mc_cutoff: Option<usize>,
    /// JSON report path.
    #[arg(long, global = true, default_value = "segal_report.json")]
    out: PathBuf,
    /// Also write a CSV summary here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// JSON config file; explicit flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n_max: Option<usize>,
    m: Option<f64>,
    big_m: Option<f64>,
    #[serde(rename = "R")]
    radius: Option<f64>,
    #[serde(rename = "L")]
    length: Option<f64>,
    #[serde(rename = "L1")]
    l1: Option<f64>,
    #[serde(rename = "L2")]
    l2: Option<f64>,
    h: Option<f64>,
    seed: Option<u64>,
    regime: Option<RegimeArg>,
    samples: Option<usize>,
    lambda: Option<f64>,
    mc_cutoff: Option<usize>,
}

fn read_config(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Flag, then config file, then `SEGAL_SEED` (seed only), then default.
fn resolve(o: &Opts) -> Result<Settings, String> {
    let f = match &o.config {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    let env_seed = match std::env::var("SEGAL_SEED") {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|e| format!("SEGAL_SEED: {e}"))?),
        Err(_) => None,
    };
    Ok(Settings {
        n_max: o.n_max.or(f.n_max).unwrap_or(16),
        m: o.m.or(f.m).unwrap_or(1.0),
        big_m: o.big_m.or(f.big_m).unwrap_or(2.0),
        radius: o.radius.or(f.radius).unwrap_or(1.0),
        length: o.length.or(f.length).unwrap_or(1.0),
        l1: o.l1.or(f.l1).unwrap_or(1.0),
        l2: o.l2.or(f.l2).unwrap_or(1.0),
        h: o.h.or(f.h).unwrap_or(1.0 / 32.0),
        seed: o.seed.or(f.seed).or(env_seed).unwrap_or(0),
        regime: o.regime.or(f.regime).unwrap_or(RegimeArg::Truncated),
        samples: o.samples.or(f.samples).unwrap_or(20_000),
        lambda: o.lambda.or(f.lambda).unwrap_or(0.1),
        mc_cutoff: o.mc_cutoff.or(f.mc_cutoff).unwrap_or(8),
    })
}

/// Variant name of a core error, used as the diagnostic kind.
fn error_kind(e: &segal_core::Error) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

fn write_outputs(r: &Report, o: &Opts) -> Result<(), String> {
    std::fs::write(&o.out, r.to_json()).map_err(|e| format!("{}: {e}", o.out.display()))?;
    if let Some(p) = &o.csv {
        std::fs::write(p, r.to_csv()).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn fail(r: &Report, o: &Opts) -> ExitCode {
    if let Some(d) = &r.error {
        eprintln!("{}", serde_json::json!({ "error": d.kind, "message": d.message }));
    }
    if let Err(e) = write_outputs(r, o) {
        eprintln!("{}", serde_json::json!({ "error": "Io", "message": e }));
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let settings = match resolve(&cli.opts) {
        Ok(s) => s,
        Err(msg) => return fail(&Report::failed(name, serde_json::Value::Null, "Config", msg), &cli.opts),
    };
    let config = serde_json::to_value(&settings).expect("settings serialize");
    let report = match cli.command.run(&settings) {
        Ok(checks) => Report::new(name, config, checks),
        Err(e) => return fail(&Report::failed(name, config, &error_kind(&e), e.to_string()), &cli.opts),
    };
    for c in &report.checks {
        println!(
            "{} {} residual={:.3e} tol={:.1e} [{}]",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.residual,
            c.tolerance,
            c.regime
        );
    }
    if let Err(e) = write_outputs(&report, &cli.opts) {
        eprintln!("{}", serde_json::json!({ "error": "Io", "message": e }));
        return ExitCode::from(2);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
