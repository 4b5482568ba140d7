use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ringmix_cli::{cmd_evaluate, cmd_landscape, cmd_mix, cmd_optimize, CliError, ExperimentConfig, RunReport};

#[derive(Parser)]
#[command(name = "ringmix", version, about = "Ring-mixing loss laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and Monte-Carlo loss landscapes over λ.
    Landscape(Common),
    /// Gradient-descent α sweep of the toy separator.
    Optimize(Common),
    /// Build a batch and write mixtures, references and a manifest.
    Mix(Common),
    /// Score separated estimates against a batch manifest.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directory holding mix_NNN_est0.wav / mix_NNN_est1.wav files.
        #[arg(long, value_name = "DIR")]
        estimates: PathBuf,
        /// Manifest written by `mix`.
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
    },
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<RunReport, CliError> {
    match cli.command {
        Command::Landscape(c) => cmd_landscape(&resolve(&c)?),
        Command::Optimize(c) => cmd_optimize(&resolve(&c)?),
        Command::Mix(c) => cmd_mix(&resolve(&c)?),
        Command::Evaluate {
            common,
            estimates,
            manifest,
        } => {
            let cfg = resolve(&common)?;
            cmd_evaluate(&estimates, &manifest, &cfg.out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ringmix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
