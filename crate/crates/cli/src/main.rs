//! `hypknn`: experiment runner for kNN-ball exceedances in the hyperbolic half-space.
//!
//! Exit codes: 0 pass, 1 acceptance failure, 2 usage, 3 IO or malformed artifacts.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod checks;
mod compare;
mod config;
mod simulate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use compare::Variant;
use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn from_core(path: &Path, e: hypknn::Error) -> Self {
        match e {
            hypknn::Error::Io(source) => Self::io(path, source),
            other => CliError::Format(format!("{}: {other}", path.display())),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Format(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "hypknn", version, about = "Hyperbolic kNN-ball exceedance experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue an interrupted or shorter run with the same config hash.
    #[arg(long)]
    resume: bool,
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if let Some(r) = self.replicates {
            c.replicates = r;
        }
        if let Some(p) = self.parallel {
            c.parallel = Some(p);
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Hyperbolic geometry identity suite.
    GeometryCheck {
        /// Offset added to every computed distance (sensitivity check).
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        #[arg(long)]
        json: bool,
    },
    /// Simulate every grid point and write per-replicate artifacts.
    Simulate(Common),
    /// Analyse a run directory and write report.json and trend.csv.
    Compare {
        /// Run directory (a grid output directory or one regime directory).
        dir: PathBuf,
        /// Reading of the separated process that gates the verdict.
        #[arg(long, value_enum, default_value_t = Variant::Verbatim)]
        variant: Variant,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Rate-function and entropy tables for each regime (JSON).
    Rates(Common),
    /// Regime table over the grid (CSV). Fails when a regime is inadmissible;
    /// trends are reported on stderr.
    Sweep(Common),
}

fn with_pool<T>(parallel: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match parallel {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--parallel must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|p| p.install(f))
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::GeometryCheck { perturb, json } => {
            let ids = checks::geometry_suite(perturb);
            if json {
                println!("{}", serde_json::to_string_pretty(&ids).expect("plain data"));
            } else {
                for i in &ids {
                    let tag = if i.pass { "pass" } else { "FAIL" };
                    println!("{tag:<5} {:<48} max deviation {:.3e} (tol {:.0e})", i.name, i.max_deviation, i.tolerance);
                }
            }
            Ok(ids.iter().all(|i| i.pass))
        }
        Command::Simulate(common) => {
            let cfg = common.load()?;
            with_pool(cfg.parallel, || simulate::simulate(&cfg, common.resume, common.quiet))??;
            Ok(true)
        }
        Command::Compare { dir, variant, quiet } => compare::compare(&dir, variant, quiet),
        Command::Rates(common) => {
            let cfg = common.load()?;
            let json = serde_json::to_string_pretty(&checks::rates(&cfg)?).expect("plain data") + "\n";
            if common.out.is_some() {
                write_out(&cfg.out, "rates.json", &json)?;
            }
            if !common.quiet {
                print!("{json}");
            }
            Ok(true)
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let (rows, trend) = checks::sweep(&cfg)?;
            let mut csv = format!("{}\n", checks::SWEEP_HEADER);
            for r in &rows {
                csv.push_str(&r.csv());
                csv.push('\n');
            }
            if common.out.is_some() {
                write_out(&cfg.out, "sweep.csv", &csv)?;
            }
            if !common.quiet {
                print!("{csv}");
            }
            if rows.len() > 1 {
                eprintln!(
                    "sweep: margin decreasing {}, internal ratio decreasing {}",
                    trend.margin_decreasing, trend.ratio_decreasing
                );
            }
            if !trend.all_admissible {
                eprintln!("sweep: some regimes violate the divergence inequality");
            }
            Ok(trend.all_admissible)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
