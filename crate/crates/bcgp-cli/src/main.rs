use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bcgp_cli::config::ExperimentConfig;
use bcgp_cli::error::CliError;
use bcgp_cli::run::{self, OutputFormat};

/// Warped Gaussian-process regression: analytic Box-Cox warpings,
/// derivative-free training, and ensemble-MCMC posteriors.
#[derive(Parser)]
#[command(name = "bcgp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured model and write the fitted hyperparameters,
    /// the optimization trajectory, and a fit report.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict from a fitted model file over a grid or explicit inputs.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Evenly spaced inputs `start:stop:count`.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated explicit inputs.
        #[arg(long)]
        times: Option<String>,
        #[arg(long, default_value_t = 0.95)]
        percentile: f64,
        #[arg(long, default_value_t = 20)]
        gh_points: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the split -> fit -> predict -> score pipeline for the baseline
    /// GP and the configured warped model; write the score report.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the hyperparameter posterior with ensemble MCMC; write the
    /// chain, summary, scatter data, and the selected model.
    Mcmc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw posterior paths from a fitted model file.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        times: Option<String>,
        #[arg(long, default_value_t = 10)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(ExperimentConfig, PathBuf, String), CliError> {
    let (mut cfg, hash) = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let config_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, config_dir, hash))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { config, seed, out } => {
            let (cfg, dir, hash) = load_config(&config, seed, out)?;
            run::cmd_fit(&cfg, &dir, &hash)?;
        }
        Command::Predict {
            model,
            grid,
            times,
            percentile,
            gh_points,
            format,
            out,
        } => {
            let inputs = run::parse_inputs(grid.as_deref(), times.as_deref())?;
            run::cmd_predict(&model, &inputs, percentile, gh_points, format, &out)?;
        }
        Command::Evaluate { config, seed, out } => {
            let (cfg, dir, hash) = load_config(&config, seed, out)?;
            run::cmd_evaluate(&cfg, &dir, &hash)?;
        }
        Command::Mcmc { config, seed, out } => {
            let (cfg, dir, hash) = load_config(&config, seed, out)?;
            run::cmd_mcmc(&cfg, &dir, &hash)?;
        }
        Command::Sample {
            model,
            grid,
            times,
            paths,
            seed,
            format,
            out,
        } => {
            let inputs = run::parse_inputs(grid.as_deref(), times.as_deref())?;
            run::cmd_sample(&model, &inputs, paths, seed, format, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
