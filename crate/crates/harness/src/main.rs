use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invspec::commands::{cmd_forward, cmd_reconstruct, cmd_sweep};
use invspec::verify::verify;
use invspec::{HarnessError, Problem, RunConfig, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "invspec", version, about = "Boundary spectral data and potential reconstruction on boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for perturbations and random forcings; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Allow probe parameters above the resolution ceiling.
    #[arg(long, global = true)]
    force_tau: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and write both boundary spectral datasets.
    Forward,
    /// Reconstruct q1 - q2 on the configured frequency grid.
    Reconstruct,
    /// Tabulate S1 - S2 against the Fourier oracle over tau.
    Sweep,
    /// Run one verification check, or `all`.
    Verify { check: String },
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    let path = cli
        .config
        .ok_or_else(|| HarnessError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let force = cli.force_tau;
    pool.install(move || {
        let problem = Problem::new(cfg, force)?;
        match cli.command {
            Command::Forward => {
                let summary = cmd_forward(&problem, &out)?;
                print!("{}", summary.text);
                Ok(EXIT_PASS)
            }
            Command::Reconstruct => {
                let (_, text) = cmd_reconstruct(&problem, &out)?;
                println!("{text}");
                Ok(EXIT_PASS)
            }
            Command::Sweep => {
                for f in cmd_sweep(&problem, &out)? {
                    println!("{}", f.display());
                }
                Ok(EXIT_PASS)
            }
            Command::Verify { check } => {
                let report = verify(&problem, &check)?;
                std::fs::create_dir_all(&out)
                    .and_then(|_| std::fs::write(out.join("report.tsv"), report.to_tsv()))
                    .map_err(|source| HarnessError::Output {
                        path: out.join("report.tsv"),
                        source,
                    })?;
                print!("{}", report.summary());
                Ok(if report.all_passed() { EXIT_PASS } else { EXIT_FAIL })
            }
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("invspec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
