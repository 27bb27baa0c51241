//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blobot::config::{presets, ExperimentConfig};
use blobot::experiments::{
    run_convergence, run_experiment, run_gradcheck, run_landscape, RunOptions,
};
use blobot::par::{self, Execution};
use blobot::BlobError;

#[derive(Parser)]
#[command(
    name = "blobot",
    version,
    about = "Blob particle solver for mean-field control and optimal transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    overwrite: bool,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one experiment and write trajectories, loss and report.
    Run { config: PathBuf },
    /// Evaluate the two-particle objective on a grid.
    Landscape { config: PathBuf },
    /// Error against the exact solution for several particle counts.
    Convergence { config: PathBuf },
    /// Compare analytic and finite-difference gradients.
    Gradcheck { config: Option<PathBuf> },
    /// Print a built-in config as JSON (no name: list them).
    Preset { name: Option<String> },
}

fn options(cli: &Cli, cfg: Option<&ExperimentConfig>) -> RunOptions {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let exec = if cli.threads > 1 {
        Execution::Auto
    } else {
        Execution::Sequential
    };
    RunOptions {
        out_dir: dir,
        overwrite: cli.overwrite,
        exec,
    }
}

fn load(path: &Path) -> blobot::Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> blobot::Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config)?;
            let opts = options(cli, Some(&cfg));
            let r = run_experiment(&cfg, &opts)?;
            println!(
                "total {:.6e} (control {:.6e}, potential {:.6e}, nonlocal {:.6e}) after {} steps -> {}",
                r.final_energies.total,
                r.final_energies.control,
                r.final_energies.potential,
                r.final_energies.nonlocal,
                r.steps_run,
                opts.out_dir.display()
            );
        }
        Command::Landscape { config } => {
            let cfg = load(config)?;
            let opts = options(cli, Some(&cfg));
            let r = run_landscape(&cfg, &opts)?;
            println!(
                "{}x{} grid, values in [{:.6e}, {:.6e}] -> {}",
                r.grid_size,
                r.grid_size,
                r.min_value,
                r.max_value,
                opts.out_dir.display()
            );
        }
        Command::Convergence { config } => {
            let cfg = load(config)?;
            let opts = options(cli, Some(&cfg));
            let r = run_convergence(&cfg, &opts)?;
            for row in &r.rows {
                println!("N={:<5} error_terminal {:.6e}", row.n, row.error_terminal);
            }
            match (r.slope, &r.degenerate) {
                (Some(s), _) => println!("slope {s:.4}"),
                (None, Some(why)) => println!("slope undefined: {why}"),
                _ => {}
            }
        }
        Command::Gradcheck { config } => {
            let cfg = config.as_deref().map(load).transpose()?;
            let opts = options(cli, cfg.as_ref());
            let r = run_gradcheck(cfg.as_ref(), &opts)?;
            for m in &r.modes {
                println!(
                    "{:<24} {:>4} instances  max rel err {:.3e}  {}",
                    m.mode,
                    m.instances,
                    m.max_relative_error,
                    if m.passed { "ok" } else { "FAIL" }
                );
            }
            if !r.passed {
                return Err(BlobError::Numerical(format!(
                    "gradient check exceeded tolerance {:e}",
                    r.tolerance
                )));
            }
        }
        Command::Preset { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
        }
        Command::Preset { name: Some(n) } => {
            let cfg = presets::by_name(n)
                .ok_or_else(|| BlobError::Argument(format!("unknown preset `{n}`")))?;
            println!("{}", cfg.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    match par::with_threads(cli.threads, || dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                BlobError::Numerical(_) => 3,
                BlobError::Io(_) => 1,
                _ => 2,
            })
        }
    }
}
