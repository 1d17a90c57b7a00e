use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rq_core::agent::{LogRow, Networks, Phase, Trainer};
use rq_core::eval::{compare, Comparison, Heatmap};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::{checkpoint, report, sweep};

pub const CHECKPOINT_FILE: &str = "checkpoint.rqck";
pub const LOG_FILE: &str = "training_log.csv";
pub const TRAIN_CONFIG_FILE: &str = "train_config.toml";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const RETURNS_FILE: &str = "episode_returns.csv";
pub const SWEEP_CONFIG_FILE: &str = "sweep_config.toml";

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_snapshot(path: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::write(path, cfg.to_toml()).map_err(CliError::io(path))
}

#[derive(Debug)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub config: PathBuf,
    pub networks: Networks,
    pub rows: Vec<LogRow>,
}

/// Trains from `cfg` and writes checkpoint, log and resolved configuration
/// into `cfg.output_dir`. `progress` sees every new log row.
pub fn train(cfg: &RunConfig, progress: &mut dyn FnMut(&LogRow)) -> Result<TrainArtifacts> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let config = dir.join(TRAIN_CONFIG_FILE);
    let log = dir.join(LOG_FILE);
    write_snapshot(&config, cfg)?;

    let mut trainer = Trainer::new(cfg.hp.clone(), &cfg.net, cfg.env(), cfg.seed)?;
    let mut seen = 0;
    while !trainer.is_done() {
        let stepped = trainer.step_once();
        for row in &trainer.log()[seen..] {
            progress(row);
        }
        seen = trainer.log().len();
        if let Err(e) = stepped {
            report::write_log(&log, trainer.log())?;
            return Err(match e {
                rq_core::Error::Divergence { context, step } => {
                    CliError::Divergence { context, step, log }
                }
                other => other.into(),
            });
        }
    }
    let out = trainer.finish();
    let ckpt = dir.join(CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &out.networks)?;
    report::write_log(&log, &out.log)?;
    Ok(TrainArtifacts {
        checkpoint: ckpt,
        log,
        config,
        networks: out.networks,
        rows: out.log,
    })
}

#[derive(Debug)]
pub struct SweepArtifacts {
    pub heatmap: PathBuf,
    pub returns: PathBuf,
    pub config: PathBuf,
    pub result: Heatmap,
}

/// Sweeps the actor stored in `checkpoint_path` over `cfg.grid`.
pub fn sweep(cfg: &RunConfig, checkpoint_path: &Path, threads: usize) -> Result<SweepArtifacts> {
    cfg.validate()?;
    let nets = checkpoint::load(checkpoint_path)?;
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let config = dir.join(SWEEP_CONFIG_FILE);
    write_snapshot(&config, cfg)?;
    let result = sweep::parallel_sweep(&nets.actor, &cfg.grid, &cfg.env(), cfg.seed, threads)?;
    let heatmap = dir.join(HEATMAP_FILE);
    let returns = dir.join(RETURNS_FILE);
    report::write_matrix(&heatmap, &result.matrix())?;
    report::write_returns(&returns, &result)?;
    Ok(SweepArtifacts {
        heatmap,
        returns,
        config,
        result,
    })
}

/// Compares two heatmap CSVs and writes `robust − baseline` to `out`.
pub fn compare_files(robust: &Path, baseline: &Path, out: &Path) -> Result<Comparison> {
    let a = report::read_matrix(robust)?;
    let b = report::read_matrix(baseline)?;
    let c = compare(&a, &b).map_err(|e| {
        CliError::Config(format!(
            "{} vs {}: {e}",
            robust.display(),
            baseline.display()
        ))
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_dir(parent)?;
    }
    report::write_matrix(out, &c.difference)?;
    Ok(c)
}

/// Human-readable summary of a checkpoint.
pub fn inspect(path: &Path) -> Result<String> {
    let nets = checkpoint::load(path)?;
    let mut s = String::new();
    writeln!(
        s,
        "{}: format version {}",
        path.display(),
        checkpoint::VERSION
    )
    .unwrap();
    for (role, net) in nets.entries() {
        let shape = net.shape();
        let aux = shape
            .aux
            .map(|a| format!(", action enters layer {} (width {})", a.layer, a.width))
            .unwrap_or_default();
        let norm = net.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        writeln!(
            s,
            "  {:<17} dims {:?}, {:?}/{:?}{aux}, {} parameters, L2 norm {norm:.6}",
            role.name(),
            shape.layer_dims,
            shape.hidden_activation,
            shape.output_activation,
            net.values().len(),
        )
        .unwrap();
    }
    Ok(s)
}

/// Mean return of evaluation rows logged at or after `from_step`.
pub fn late_eval_mean(rows: &[LogRow], from_step: u64) -> Option<f64> {
    let late: Vec<f64> = rows
        .iter()
        .filter(|r| r.phase == Phase::Eval && r.step >= from_step)
        .map(|r| r.ret)
        .collect();
    (!late.is_empty()).then(|| late.iter().sum::<f64>() / late.len() as f64)
}

/// Mean return of the babbling episodes.
pub fn babble_mean(rows: &[LogRow]) -> Option<f64> {
    let b: Vec<f64> = rows
        .iter()
        .filter(|r| r.phase == Phase::Babble)
        .map(|r| r.ret)
        .collect();
    (!b.is_empty()).then(|| b.iter().sum::<f64>() / b.len() as f64)
}
