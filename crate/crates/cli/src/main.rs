//! `svperturb`: run experiments, verification suites and two-sample
//! debiasing from the command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
//! 3 a verification check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use svperturb::estimator::debias_two_sample;
use svperturb::experiments::{
    read_records, run_suite, simulate, simulate_sweep, summarize, write_json, ExperimentConfig,
    Suite, VerifyConfig,
};
use svperturb::linalg::io::{read_matrix_csv, write_matrix_csv};
use svperturb::linalg::DenseMatrix;
use svperturb::perturbation::Solver;

const THREADS_ENV: &str = "SVPERTURB_THREADS";

#[derive(Parser)]
#[command(
    name = "svperturb",
    version,
    about = "Singular-vector perturbation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; SVPERTURB_THREADS takes precedence.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run verification suites and report one line per check.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Debias one singular direction from two independent observations.
    Debias {
        #[arg(long)]
        matrix_a: PathBuf,
        #[arg(long)]
        matrix_b: PathBuf,
        /// 1-based singular value position.
        #[arg(long)]
        k: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Algebra,
    Bounds,
    Scaling,
    Debias,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Algebra => Suite::Algebra,
            SuiteArg::Bounds => Suite::Bounds,
            SuiteArg::Scaling => Suite::Scaling,
            SuiteArg::Debias => Suite::Debias,
            SuiteArg::All => Suite::All,
        }
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
    Checks,
}

impl From<svperturb::Error> for Failure {
    fn from(e: svperturb::Error) -> Self {
        if e.is_input_error() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn with_context(path: &Path) -> impl FnOnce(svperturb::Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Usage(msg) => Failure::Usage(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => match flag {
            Some(0) => Err(Failure::Usage("--threads must be positive".into())),
            other => Ok(other),
        },
    }
}

fn run_simulate(config: &Path, out_dir: &Path, threads: Option<usize>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config).map_err(with_context(config))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads)? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| {
        if cfg.size_sweep.is_some() {
            let report = simulate_sweep(&cfg, Some(out_dir))?;
            for s in &report.sizes {
                println!("{}x{}: {} replicates", s.m, s.n, s.replicates);
            }
            for (name, fit) in &report.fits {
                println!("slope {name}: {:.4} ± {:.4}", fit.slope, fit.slope_std_error);
            }
        } else {
            let sim = simulate(&cfg)?;
            for path in sim.write(out_dir)? {
                println!("wrote {}", path.display());
            }
            if !sim.regime.satisfied {
                eprintln!(
                    "note: estimated E‖X‖ = {:.4} exceeds (1−γ)ḡ/2 = {:.4}; bounds are vacuous for this run",
                    sim.regime.mean_norm_estimate, sim.regime.threshold
                );
            }
        }
        Ok::<_, svperturb::Error>(())
    })?;
    Ok(())
}

fn run_verify(suite: Suite, config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
    let cfg = VerifyConfig::from_json(&text).map_err(with_context(config))?;
    let report = run_suite(suite, &cfg)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn run_debias(a: &Path, b: &Path, k: usize, gamma: f64, out: &Path) -> Result<(), Failure> {
    let a1 = read_matrix_csv(a).map_err(with_context(a))?;
    let a2 = read_matrix_csv(b).map_err(with_context(b))?;
    let d = debias_two_sample(&a1, &a2, k, gamma, Solver::Auto)?;
    let columns = [
        d.theta_tilde.clone(),
        d.theta_second.clone(),
        d.theta_hat.clone(),
    ];
    write_matrix_csv(
        out,
        &DenseMatrix::from_columns(d.theta_tilde.len(), &columns),
    )?;
    let summary = serde_json::json!({
        "position": d.position,
        "singular_value": d.singular_value,
        "b_tilde": d.bias.b_tilde,
        "gamma": d.bias.gamma,
        "floor_active": d.bias.floor_active,
        "divisor": d.bias.divisor(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("plain json")
    );
    Ok(())
}

fn run_report(records: &Path, out: &Path) -> Result<(), Failure> {
    let file = read_records(records).map_err(with_context(records))?;
    let summary = summarize(&file.records, &file.schema, &file.config)?;
    write_json(out, &summary)?;
    println!(
        "summarized {} records into {}",
        summary.replicates,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out_dir,
            threads,
        } => run_simulate(&config, &out_dir, threads),
        Command::Verify { suite, config, out } => run_verify(suite.into(), &config, out.as_deref()),
        Command::Debias {
            matrix_a,
            matrix_b,
            k,
            gamma,
            out,
        } => run_debias(&matrix_a, &matrix_b, k, gamma, &out),
        Command::Report { records, out } => run_report(&records, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Checks) => {
            eprintln!("verification failed");
            ExitCode::from(3)
        }
    }
}
