//! `sosunmix`: simulate mixture cubes, unmix them with AMUSE plus peak-direction
//! sign correction, and score the result against ground truth.

mod artifacts;
mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sosunmix::amuse::{AmuseConfig, RotationMode, SourceCount};
use sosunmix::sign_correction::DEFAULT_BINS;

#[derive(Parser)]
#[command(name = "sosunmix", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR", env = "SOSUNMIX_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mixture cube and its ground truth from a scenario.
    Simulate {
        /// Scenario JSON file or built-in fixture name (paper2, paper3).
        scenario: String,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Unmix a cube CSV with AMUSE and correct source signs.
    Unmix {
        /// Cube CSV with header `wavelength,pixel_0,...`.
        cube: PathBuf,
        /// Number of sources, or `auto` to count them from the covariance spectrum.
        #[arg(long, default_value = "auto", value_parser = parse_count)]
        n: SourceCount,
        /// Delay in wavelength samples (at least 1).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        tau: u64,
        /// Rotation extraction: `sym-evd` or `plain-svd`.
        #[arg(long, default_value = "sym-evd", value_parser = parse_mode)]
        mode: RotationMode,
        /// Histogram bins for baseline estimation (at least 2).
        #[arg(long, default_value_t = DEFAULT_BINS as u64, value_parser = clap::value_parser!(u64).range(2..))]
        bins: u64,
        /// Keep the raw AMUSE signs.
        #[arg(long)]
        no_sign_correction: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Score a model against true sources and mixing matrix.
    Evaluate {
        /// Model JSON written by `unmix`.
        model: PathBuf,
        /// True spectra CSV (as written by `simulate`).
        #[arg(long)]
        truth_sources: PathBuf,
        /// True mixing matrix CSV (as written by `simulate`).
        #[arg(long)]
        truth_mixing: PathBuf,
        /// The mixing CSV has no header row.
        #[arg(long)]
        mixing_no_header: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulate, unmix with and without sign correction, and evaluate.
    Demo {
        /// Built-in fixture name (paper2, paper3) or scenario JSON file.
        scenario: String,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn parse_count(s: &str) -> Result<SourceCount, String> {
    if s == "auto" {
        return Ok(SourceCount::default());
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(SourceCount::Fixed(n)),
        _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
    }
}

fn parse_mode(s: &str) -> Result<RotationMode, String> {
    s.parse().map_err(|e: sosunmix::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out,
        } => commands::simulate(&scenario, seed, out.out),
        Command::Unmix {
            cube,
            n,
            tau,
            mode,
            bins,
            no_sign_correction,
            out,
        } => {
            let opts = commands::UnmixOptions {
                config: AmuseConfig {
                    sources: n,
                    delay: tau as usize,
                    mode,
                },
                bins: bins as usize,
                sign_correction: !no_sign_correction,
            };
            commands::unmix(&cube, &opts, out.out)
        }
        Command::Evaluate {
            model,
            truth_sources,
            truth_mixing,
            mixing_no_header,
            out,
        } => {
            let inputs = commands::EvaluateInputs {
                model: &model,
                truth_sources: &truth_sources,
                truth_mixing: &truth_mixing,
                mixing_header: !mixing_no_header,
            };
            commands::evaluate_cmd(&inputs, out.out)
        }
        Command::Demo {
            scenario,
            seed,
            out,
        } => commands::demo(&scenario, seed, out.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
