//! `csit-sim`: batch driver for the CSIT feedback sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csit_core::downlink::Strategy;
use csit_core::harness::{self, SweepResult, SystemConfig};

#[derive(Parser)]
#[command(name = "csit-sim", version, about = "CSIT estimation error and sum-rate sweeps for FDD massive MIMO feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average CSIT error against SNR; writes mse.csv.
    MseSweep(RunArgs),
    /// Ergodic sum-rate against the training dimension; writes sumrate.csv.
    SumrateSweep(RunArgs),
    /// MSE sweep plus fitted quality scaling exponents; writes exponent.csv.
    Exponent {
        #[command(flatten)]
        run: RunArgs,
        /// Fit window in SNR decades, counted down from the top of the grid.
        #[arg(long, default_value_t = 1.0)]
        window: f64,
    },
    /// Parse and check a configuration file.
    ValidateConfig {
        #[arg(value_name = "PATH", required_unless_present = "config")]
        path: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Reduced solvers against dense and bisection oracles.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory for selftest.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Comma-separated subset of rd,ecsq,af,perfect.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

fn load(args: &RunArgs) -> Result<SystemConfig, Failure> {
    let mut cfg = SystemConfig::from_path(&args.config)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &args.strategies {
        cfg.strategies = list
            .iter()
            .map(|s| s.parse::<Strategy>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

fn persist(out: &Path, csv_name: &str, result: &SweepResult) -> Result<(), Failure> {
    std::fs::create_dir_all(out)?;
    harness::write_csv(&out.join(csv_name), &result.rows)?;
    harness::write_json(&out.join("meta.json"), &result.meta)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::MseSweep(args) => {
            let cfg = load(&args)?;
            let res = in_pool(args.threads, || harness::run_mse_sweep(&cfg))??;
            persist(&args.out, "mse.csv", &res)?;
            println!(
                "mse-sweep: {} rows over {} SNR points in {:.1}s -> {}",
                res.rows.len(),
                cfg.snr_db_grid.len(),
                res.meta.wall_time_s,
                args.out.join("mse.csv").display()
            );
        }
        Command::SumrateSweep(args) => {
            let cfg = load(&args)?;
            let res = in_pool(args.threads, || harness::run_sumrate_sweep(&cfg))??;
            persist(&args.out, "sumrate.csv", &res)?;
            let discarded: usize = res.meta.discarded_trials.values().sum();
            println!(
                "sumrate-sweep: {} rows, {} discarded trials, {:.1}s -> {}",
                res.rows.len(),
                discarded,
                res.meta.wall_time_s,
                args.out.join("sumrate.csv").display()
            );
        }
        Command::Exponent { run, window } => {
            let cfg = load(&run)?;
            let res = in_pool(run.threads, || harness::run_exponent(&cfg, window))??;
            persist(&run.out, "exponent.csv", &res)?;
            let fits: Vec<String> = res
                .rows
                .iter()
                .filter(|r| r.metric.starts_with("alpha_hat"))
                .map(|r| format!("{} {}={:.3}", r.strategy, r.metric.trim_start_matches("alpha_hat_"), r.value))
                .collect();
            println!("exponent: {} -> {}", fits.join(", "), run.out.join("exponent.csv").display());
        }
        Command::ValidateConfig { path, config } => {
            let path = path.or(config).expect("clap enforces a path");
            match SystemConfig::from_path(&path) {
                Ok(cfg) => println!("{}: ok (hash {})", path.display(), &cfg.hash()[..12]),
                Err(e) => return Err(Failure::Usage(format!("{}: {e}", path.display()))),
            }
        }
        Command::Selftest { seed, out } => {
            let report = harness::run_selftest(seed);
            for c in &report.checks {
                println!(
                    "{} {} (worst {:.2e}, tol {:.0e}, {} cases)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance,
                    c.cases
                );
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                harness::write_json(&dir.join("selftest.json"), &report)?;
            }
            if !report.passed() {
                return Err(Failure::Run("selftest failed".into()));
            }
            println!("selftest: all {} checks passed", report.checks.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
