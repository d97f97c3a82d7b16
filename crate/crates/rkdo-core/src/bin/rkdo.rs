//! Command-line harness for response-field training experiments.
//!
//! Exit codes: 0 on success, 1 when a verification run reports a violation
//! (theorem bounds or gradient checks), 2 on usage, config, or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rkdo_core::harness::{
    cmd_compare, cmd_gradcheck, cmd_metrics, cmd_theorem, cmd_train, resolve_out_dir,
    ExperimentConfig, Fault, RunOptions,
};

#[derive(Parser, Debug)]
#[command(name = "rkdo", version, about = "Recursive response-field training harness")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Path to a key=value experiment config file. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory root (overrides config and the RKDO_OUT env var).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated seed list overriding the config's seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Worker slots for seed cells. Each cell stays internally deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify the contraction guarantees: ideal recursion, mixture slack
    /// sweep, capacity-limited relaxation, and inexact inner solves.
    Theorem {
        /// Skip the supervisor update in the slack sweep (negative control;
        /// the run must then fail).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Train the recursive and fixed-target methods from identical
    /// initializations across (dataset, budget, seed) cells and aggregate.
    Compare,
    /// Run a single method per seed, writing full traces, final embeddings,
    /// and metric checkpoints at each budget.
    Train,
    /// Check analytic gradients against central finite differences.
    Gradcheck {
        /// Corrupt one analytic entry first (negative control).
        #[arg(long, hide = true)]
        perturb: bool,
    },
    /// Evaluate the metrics suite on raw coordinates and untrained
    /// embeddings as baselines.
    Metrics,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            ExperimentConfig::parse(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    let config = load_config(&cli.common)?;
    if cli.common.jobs == 0 {
        return Err("--jobs must be at least 1".into());
    }
    let opts = RunOptions {
        out_dir: resolve_out_dir(cli.common.out.clone(), &config),
        jobs: cli.common.jobs,
    };

    match &cli.command {
        Command::Theorem { inject_fault } => {
            let fault = inject_fault.then_some(Fault::SkipEma);
            let pass = cmd_theorem(&config, &opts, fault).map_err(|e| e.to_string())?;
            let verdict = opts.out_dir.join("theorem").join("verdict.json");
            if pass {
                println!("theorem: all checks passed ({})", verdict.display());
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("theorem: bound violation, see {}", verdict.display());
                Ok(ExitCode::from(1))
            }
        }
        Command::Compare => {
            let summary = cmd_compare(&config, &opts).map_err(|e| e.to_string())?;
            for (dataset, budget, improvement) in &summary.improvements {
                println!(
                    "compare: {dataset} budget {budget} loss improvement {:.2}%",
                    improvement * 100.0
                );
            }
            if !summary.failed_cells.is_empty() {
                eprintln!("compare: {} cell(s) failed, see manifest", summary.failed_cells.len());
            }
            println!("compare: wrote {}", opts.out_dir.join("compare").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train => {
            cmd_train(&config, &opts).map_err(|e| e.to_string())?;
            println!("train: wrote {}", opts.out_dir.join("train").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { perturb } => {
            let pass = cmd_gradcheck(&config, &opts, *perturb).map_err(|e| e.to_string())?;
            let report = opts.out_dir.join("gradcheck").join("report.csv");
            if pass {
                println!("gradcheck: all instances passed ({})", report.display());
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("gradcheck: relative error too large, see {}", report.display());
                Ok(ExitCode::from(1))
            }
        }
        Command::Metrics => {
            cmd_metrics(&config, &opts).map_err(|e| e.to_string())?;
            println!("metrics: wrote {}", opts.out_dir.join("metrics").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("rkdo: {msg}");
            ExitCode::from(2)
        }
    }
}
