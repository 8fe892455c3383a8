use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcg_core::config::{parse_seeds, RunConfig};
use mcg_core::runner::{eval_checkpoint, exit_code, run};
use mcg_core::verify::{run_suite, SUITES};
use mcg_core::McgError;

#[derive(Parser)]
#[command(name = "mcg", version, about = "Train and check meta coordination graph agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Dotted-key override, e.g. `train.total_steps=1000`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Comma-separated seeds; takes precedence over MCG_SEED and the config.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite: grads, oracles, envs or reduction.
    Verify { suite: String },
    /// Evaluate a saved checkpoint greedily and print one metrics row.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(config: &PathBuf, overrides: &[String], seeds: Option<&str>, out: Option<PathBuf>) -> Result<RunConfig, McgError> {
    let mut cfg = RunConfig::load(config, overrides)?;
    if let Some(s) = seeds {
        cfg.seeds = parse_seeds(s)?;
    } else if let Ok(s) = std::env::var("MCG_SEED") {
        cfg.seeds = parse_seeds(&s)?;
    }
    if let Some(out) = out {
        cfg.out = out;
    }
    Ok(cfg)
}

fn fail(err: &McgError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            overrides,
            seeds,
            out,
        } => {
            let cfg = match load(&config, &overrides, seeds.as_deref(), out) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match run(&cfg, |line| eprintln!("{line}")) {
                Ok(dirs) => {
                    for d in dirs {
                        println!("{}", d.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { suite } => {
            if !SUITES.contains(&suite.as_str()) {
                eprintln!("error: unknown suite `{suite}` (expected one of {})", SUITES.join(", "));
                return ExitCode::from(2);
            }
            let report = match run_suite(&suite) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            for check in &report {
                println!("{check}");
            }
            if report.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Eval {
            checkpoint,
            config,
            overrides,
            episodes,
            seed,
        } => {
            let cfg = match load(&config, &overrides, None, None) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let episodes = episodes.unwrap_or(cfg.train.eval_episodes);
            match eval_checkpoint(&cfg, &checkpoint, episodes, seed) {
                Ok(row) => {
                    println!("{}", row.to_csv());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
