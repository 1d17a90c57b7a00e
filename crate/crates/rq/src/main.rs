use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rq::commands;
use rq::config::{self, SEED_ENV};
use rq::{CliError, Result};
use rq_core::agent::{Algorithm, Phase};

#[derive(Parser)]
#[command(
    name = "rq",
    version,
    about = "Train, sweep and compare action-robust quadcopter controllers",
    after_help = "Any configuration key can be overridden as `--section.key value`, e.g. \
                  `--hp.alpha 0.2 --hp.total_iterations 1000`. RQ_SEED overrides the configured seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    ArDdpg,
    Ddpg,
}

#[derive(Subcommand)]
enum Command {
    /// Train a controller and write checkpoint, log and resolved config.
    Train {
        /// TOML configuration file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `ddpg` drops the adversary (α = 0).
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint over the mass-ratio × perturbation grid.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Cellwise difference of two heatmap CSVs and the robust win fraction.
    Compare {
        robust: PathBuf,
        baseline: PathBuf,
        /// Difference CSV path.
        #[arg(long, default_value = "difference.csv")]
        out: PathBuf,
    },
    /// Print the networks stored in a checkpoint.
    InspectCheckpoint { path: PathBuf },
}

fn resolve(
    file: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    mut overrides: Vec<(String, String)>,
) -> Result<config::RunConfig> {
    if let Some(seed) = seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut cfg = config::resolve(file.as_deref(), env_seed.as_deref(), &overrides)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn no_overrides(overrides: &[(String, String)]) -> Result<()> {
    match overrides.first() {
        Some((k, _)) => Err(CliError::Config(format!(
            "--{k}: this command takes no configuration"
        ))),
        None => Ok(()),
    }
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            algorithm,
            seed,
            out,
        } => {
            let mut overrides = overrides;
            if let Some(a) = algorithm {
                let name = match a {
                    AlgorithmArg::ArDdpg => "ar-ddpg",
                    AlgorithmArg::Ddpg => "ddpg",
                };
                overrides.push(("hp.algorithm".into(), name.into()));
            }
            let cfg = resolve(config, seed, out, overrides)?;
            let algo = match cfg.hp.algorithm {
                Algorithm::ArDdpg => format!("ar-ddpg (alpha {})", cfg.hp.alpha),
                Algorithm::Ddpg => "ddpg".into(),
            };
            eprintln!(
                "training {algo} for {} steps, seed {}, into {}",
                cfg.hp.total_iterations,
                cfg.seed,
                cfg.output_dir.display()
            );
            let art = commands::train(&cfg, &mut |row| {
                if row.phase == Phase::Eval {
                    eprintln!(
                        "step {:>9}  episode {:>6}  eval return {:.2}",
                        row.step, row.episode, row.ret
                    );
                }
            })?;
            println!("checkpoint {}", art.checkpoint.display());
            println!("log        {}", art.log.display());
            println!("config     {}", art.config.display());
            Ok(())
        }
        Command::Sweep {
            checkpoint,
            config,
            seed,
            out,
            threads,
        } => {
            let cfg = resolve(config, seed, out, overrides)?;
            let threads = threads.unwrap_or_else(rq::sweep::default_threads);
            let art = commands::sweep(&cfg, &checkpoint, threads)?;
            println!("heatmap  {}", art.heatmap.display());
            println!("returns  {}", art.returns.display());
            println!("config   {}", art.config.display());
            Ok(())
        }
        Command::Compare {
            robust,
            baseline,
            out,
        } => {
            no_overrides(&overrides)?;
            let c = commands::compare_files(&robust, &baseline, &out)?;
            println!("difference {}", out.display());
            println!(
                "robust wins {}/{} cells, win fraction {}",
                c.wins,
                c.difference.values.len(),
                c.win_fraction
            );
            Ok(())
        }
        Command::InspectCheckpoint { path } => {
            no_overrides(&overrides)?;
            print!("{}", commands::inspect(&path)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let (args, overrides) = match config::split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
