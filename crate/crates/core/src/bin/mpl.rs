//! Command-line front end. Exit codes: 0 all checks passed, 1 a statistical
//! check failed, 2 an exact identity was breached, 3 usage error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use minor_process_lab::ensembles::EntryLaw;
use minor_process_lab::error::Result;
use minor_process_lab::harness::{self, ExperimentConfig, Regime, RunArtifact};
use minor_process_lab::limit_laws::{self, FNKernelParams, QuadratureConfig};

#[derive(Parser)]
#[command(name = "mpl", version, about = "Numerical laboratory for the Wigner minor process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write a JSON artifact plus a rows CSV.
    Simulate(SimulateArgs),
    /// Tabulate the critical-regime joint edge intensity on an (X, Y) grid.
    FnKernel(FnKernelArgs),
    /// Tabulate the Tracy-Widom beta CDF on a grid.
    Tw(TwArgs),
    /// Render a previously written artifact as text plus a plot-ready CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Sub,
    Crit,
    Super,
    Identities,
    Dbm,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Sub => Regime::Subcritical,
            RegimeArg::Crit => Regime::Critical,
            RegimeArg::Super => Regime::Supercritical,
            RegimeArg::Identities => Regime::Identities,
            RegimeArg::Dbm => Regime::Dbm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Gaussian,
    Rademacher,
    Uniform,
}

impl From<LawArg> for EntryLaw {
    fn from(l: LawArg) -> EntryLaw {
        match l {
            LawArg::Gaussian => EntryLaw::Gaussian,
            LawArg::Rademacher => EntryLaw::Rademacher,
            LawArg::Uniform => EntryLaw::Uniform,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    #[arg(long = "N")]
    n: usize,
    /// Minor depth (sub/super/dbm regimes).
    #[arg(long)]
    k: Option<usize>,
    /// Critical depth parameter, k = floor(alpha N^(2/3)).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 2)]
    beta: u8,
    #[arg(long, value_enum, default_value_t = LawArg::Gaussian)]
    law: LawArg,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path for the JSON artifact; rows go to the same stem with .csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FnKernelArgs {
    #[arg(long)]
    alpha: f64,
    /// Grid spec a:b:n (n points from a to b inclusive).
    #[arg(long, allow_hyphen_values = true)]
    xgrid: String,
    #[arg(long, allow_hyphen_values = true)]
    ygrid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TwArgs {
    #[arg(long, default_value_t = 2)]
    beta: u8,
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON artifact written by `mpl simulate`.
    artifact: PathBuf,
}

fn parse_grid(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be a:b:n, got '{spec}'"));
    }
    let a: f64 = parts[0].parse().map_err(|e| format!("bad grid start: {e}"))?;
    let b: f64 = parts[1].parse().map_err(|e| format!("bad grid end: {e}"))?;
    let n: usize = parts[2].parse().map_err(|e| format!("bad grid count: {e}"))?;
    if n < 2 || !a.is_finite() || !b.is_finite() || b <= a {
        return Err(format!("grid needs b > a and n >= 2, got '{spec}'"));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn run_simulate(args: &SimulateArgs) -> Result<i32> {
    let config = ExperimentConfig {
        regime: args.regime.into(),
        n: args.n,
        k: args.k,
        alpha: args.alpha,
        beta: args.beta,
        entry_law: args.law.into(),
        replicas: args.replicas,
        master_seed: args.seed,
        m: 5,
        delta: 0.05,
    };
    let artifact = harness::run(&config)?;
    let json = std::fs::File::create(&args.out)?;
    artifact.write_json(std::io::BufWriter::new(json))?;
    let csv_path = args.out.with_extension("csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(csv, "# schema_version={} {}", artifact.schema_version, artifact.fingerprint)?;
    artifact.write_rows_csv(&mut csv)?;
    print!("{}", artifact.render_text());
    println!("artifact: {}", args.out.display());
    println!("rows: {}", csv_path.display());
    Ok(artifact.exit_code())
}

fn run_fn_kernel(args: &FnKernelArgs) -> Result<i32> {
    let xs = parse_grid(&args.xgrid).map_err(minor_process_lab::error::Error::InvalidArgument)?;
    let ys = parse_grid(&args.ygrid).map_err(minor_process_lab::error::Error::InvalidArgument)?;
    let qcfg = QuadratureConfig::default();
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    writeln!(out, "# schema_version=1 fn-kernel alpha={}", args.alpha)?;
    writeln!(out, "x,y,intensity")?;
    for &x in &xs {
        for &y in &ys {
            let p = limit_laws::fn_joint_intensity(
                &FNKernelParams { alpha: args.alpha, x, y },
                &qcfg,
            )?;
            writeln!(out, "{x:.17e},{y:.17e},{p:.17e}")?;
        }
    }
    println!("wrote {} rows to {}", xs.len() * ys.len(), args.out.display());
    Ok(0)
}

fn run_tw(args: &TwArgs) -> Result<i32> {
    let grid = parse_grid(&args.grid).map_err(minor_process_lab::error::Error::InvalidArgument)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    writeln!(out, "# schema_version=1 tracy-widom beta={}", args.beta)?;
    writeln!(out, "s,cdf")?;
    for &s in &grid {
        let f = limit_laws::tracy_widom_cdf(args.beta, s)?;
        writeln!(out, "{s:.17e},{f:.17e}")?;
    }
    println!("wrote {} rows to {}", grid.len(), args.out.display());
    Ok(0)
}

fn run_report(args: &ReportArgs) -> Result<i32> {
    let artifact = RunArtifact::read_json(&args.artifact)?;
    print!("{}", artifact.render_text());
    let csv_path = args.artifact.with_extension("report.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(csv, "# schema_version={} {}", artifact.schema_version, artifact.fingerprint)?;
    artifact.write_rows_csv(&mut csv)?;
    println!("rows: {}", csv_path.display());
    Ok(artifact.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 for usage errors; we reserve 2 for
            // identity breaches, so remap.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::FnKernel(a) => run_fn_kernel(a),
        Command::Tw(a) => run_tw(a),
        Command::Report(a) => run_report(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
