//! Thin command-line front end over [`drsr::runner`]. All logic lives in the
//! library; this binary only parses flags, loads the config, and prints.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drsr::config::ExperimentConfig;
use drsr::runner::{self, Method, GRADCHECK_TOL};

#[derive(Parser)]
#[command(name = "drsr", about = "Deep recurrent survival ranking experiments", version)]
struct Cli {
    /// Experiment config file (`key = value` lines); defaults apply if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed for simulation, training, and the initial ranker.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output directory for logs, checkpoints, and CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Training method: point, pair, or click-only.
    #[arg(long, global = true)]
    mode: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate biased click sessions over the training split.
    Simulate,
    /// Train a hazard model on the simulated click log.
    Train,
    /// Evaluate a trained checkpoint on the test split.
    Eval,
    /// Run the configured grid sweep end to end.
    Sweep,
    /// Emit average-position curves for all trained checkpoints.
    Curve,
    /// Audit analytic gradients against finite differences.
    Gradcheck,
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let method = match &cli.mode {
        Some(mode) => Method::from_mode(mode)?,
        None => runner::default_method(&cfg),
    };
    match cli.command {
        Command::Simulate => {
            runner::cmd_simulate(&cfg, cli.seed, &cli.out)?;
        }
        Command::Train => {
            let (_, history) = runner::cmd_train(&cfg, cli.seed, method, &cli.out)?;
            println!(
                "trained {} for {} epochs: first loss {:.6}, final loss {:.6}",
                method.label(),
                history.len(),
                history.first().copied().unwrap_or(f64::NAN),
                history.last().copied().unwrap_or(f64::NAN),
            );
        }
        Command::Eval => {
            let report = runner::cmd_eval(&cfg, cli.seed, method, &cli.out)?;
            println!("run,metric,k,value");
            println!("{},map,,{}", cfg.run_label, report.map);
            for (k, v) in &report.ndcg_at {
                println!("{},ndcg,{k},{v}", cfg.run_label);
            }
        }
        Command::Sweep => {
            let path = runner::cmd_sweep(&cfg, &cli.out)?;
            println!("sweep results written to {}", path.display());
        }
        Command::Curve => {
            for (name, _, dist) in runner::cmd_curve(&cfg, cli.seed, &cli.out)? {
                println!("series {name}: L1 distance to labels {dist:.4}");
            }
        }
        Command::Gradcheck => {
            let report = runner::cmd_gradcheck(cli.seed, 20)?;
            for (kind, err) in &report.rows {
                let verdict = if *err < GRADCHECK_TOL { "ok" } else { "FAIL" };
                println!("{kind}: max rel error {err:.3e} [{verdict}]");
            }
            return Ok(report.pass());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
