use clap::{Parser, Subcommand};
use fklab::config::{echo_json, parse_config, validate, ExperimentConfig, ValidatedConfig};
use fklab::error::Error;
use fklab::runner::{limit_cov_report, ml_eval_report, run_scaling, simulate};
use fklab::scaling::ScalingMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fklab", about = "Fractional kinetic scaling laboratory")]
struct Cli {
    /// experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override the configured RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// rayon worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the configuration and echo derived quantities
    Validate,
    /// Sample one initial condition, solve, and dump the fields
    Simulate,
    /// Run the macroscale sweep and compare against the limit covariance
    VerifyMacro,
    /// Run the microscale sweep and compare against the limit covariance
    VerifyMicro,
    /// Evaluate the limit covariance for the configured probes
    LimitCov,
    /// Tabulate the Mittag-Leffler function with evaluation diagnostics
    MlEval {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = -20.0)]
        z_min: f64,
        #[arg(long, default_value_t = 2.0)]
        z_max: f64,
        #[arg(long, default_value_t = 101)]
        count: usize,
    },
}

fn load(cli: &Cli) -> Result<ValidatedConfig, Error> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::Config(vec!["--config PATH is required for this subcommand".to_string()])
    })?;
    let text = std::fs::read_to_string(path)?;
    let mut cfg: ExperimentConfig = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    validate(&cfg)
}

fn expect_mode(v: &ValidatedConfig, mode: ScalingMode) -> Result<(), Error> {
    if v.scaling.mode != mode {
        return Err(Error::Config(vec![format!(
            "configured scaling mode does not match the subcommand (expected {mode:?})"
        )]));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, Error> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(vec![format!("worker pool: {e}")]))?;
    }
    match &cli.cmd {
        Cmd::Validate => {
            let v = load(cli)?;
            println!("{}", serde_json::to_string_pretty(&echo_json(&v)).unwrap());
            Ok(true)
        }
        Cmd::Simulate => {
            let v = load(cli)?;
            simulate(&v, &cli.out)?;
            println!("fields written to {}", cli.out.display());
            Ok(true)
        }
        Cmd::VerifyMacro | Cmd::VerifyMicro => {
            let v = load(cli)?;
            let want = if matches!(cli.cmd, Cmd::VerifyMacro) {
                ScalingMode::Macro
            } else {
                ScalingMode::Micro
            };
            expect_mode(&v, want)?;
            let summary = run_scaling(&v, &cli.out)?;
            for c in &summary.criteria {
                println!(
                    "[{}] {}: value {:.6e} target {:.6e} tol {:.3e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.target,
                    c.tol
                );
            }
            println!(
                "report: {} ; summary: {}",
                cli.out.join("sweep.csv").display(),
                cli.out.join("summary.json").display()
            );
            Ok(summary.pass)
        }
        Cmd::LimitCov => {
            let v = load(cli)?;
            print!("{}", limit_cov_report(&v)?);
            Ok(true)
        }
        Cmd::MlEval {
            beta,
            z_min,
            z_max,
            count,
        } => {
            print!("{}", ml_eval_report(*beta, *z_min, *z_max, *count)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::FAILURE
        }
        Err(Error::Config(violations)) => {
            eprintln!("configuration invalid:");
            for v in violations {
                eprintln!("  - {v}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
