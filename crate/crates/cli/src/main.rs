use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use latsim_core::{
    generate, parse_config, read_bundle, rerank_bundle, write_bundle, Bundle, Execution,
    RegimeShiftResult,
};

#[derive(Parser)]
#[command(
    name = "latsim",
    version,
    about = "Synthetic recommender outputs by latent factor simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a bundle from a JSON config document.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 1 runs sequentially. Output does not depend on it.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Print the metrics report of a bundle.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Fail unless the bundle was generated with this seed.
        #[arg(long)]
        expect_seed: Option<u64>,
    },
    /// Greedily re-rank a candidate-pool bundle toward a sensitive feature.
    Rerank {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        feature: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        expect_seed: Option<u64>,
    },
    /// Per-regime protected exposure and the first-to-last shift.
    RegimeReport {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        expect_seed: Option<u64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            config,
            out,
            threads,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = parse_config(&text)?;
            let generation = if threads <= 1 {
                generate(&cfg, Execution::Sequential)?
            } else {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()?
                    .install(|| generate(&cfg, Execution::Parallel))?
            };
            write_bundle(&Bundle::from_generation(&generation), &out)?;
            eprintln!(
                "wrote {} lists for {} users to {}",
                generation.lists.len(),
                cfg.n_users(),
                out.display()
            );
        }
        Command::Metrics {
            input,
            json,
            expect_seed,
        } => {
            let report = read_bundle(&input, expect_seed)?.report()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
        }
        Command::Rerank {
            input,
            lambda,
            feature,
            out,
            expect_seed,
        } => {
            let bundle = read_bundle(&input, expect_seed)?;
            if !bundle.config.emit_candidates {
                bail!(
                    "{} holds top-l lists only; rerank needs a bundle generated with emit_candidates = true",
                    input.display()
                );
            }
            let reranked = rerank_bundle(&bundle, lambda, feature)?;
            write_bundle(&reranked, &out)?;
        }
        Command::RegimeReport {
            input,
            json,
            expect_seed,
        } => {
            let report = read_bundle(&input, expect_seed)?.report()?;
            let result = RegimeShiftResult::from_report(&report)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&result)?);
            } else {
                println!("{result}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
