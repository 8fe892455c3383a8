//! Per-seed training runs, their output files, and checkpoint evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::coordination::QNetwork;
use crate::envs::make_env;
use crate::error::{McgError, Result};
use crate::numerics::{checkpoint, HasParams};
use crate::training::{append_row, evaluate_seeded, MetricsRow, Trainer};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const EVAL_FILE: &str = "eval.csv";

pub fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.out.join(&cfg.run_id).join(format!("seed{seed}"))
}

/// Trains every configured seed in turn; returns the seed directories.
pub fn run(cfg: &RunConfig, mut log: impl FnMut(&str)) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut dirs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        dirs.push(run_seed(cfg, seed, &mut log)?);
    }
    Ok(dirs)
}

/// One seed: writes the resolved single-seed config, then appends a metrics
/// row and refreshes the checkpoint at every evaluation.
pub fn run_seed(cfg: &RunConfig, seed: u64, log: &mut impl FnMut(&str)) -> Result<PathBuf> {
    let dir = seed_dir(cfg, seed);
    fs::create_dir_all(&dir)?;
    let resolved = RunConfig {
        seeds: vec![seed],
        ..cfg.clone()
    };
    fs::write(dir.join(CONFIG_FILE), resolved.to_toml()?)?;
    let metrics = dir.join(METRICS_FILE);
    if metrics.exists() {
        fs::remove_file(&metrics)?;
    }
    let ckpt = dir.join(CHECKPOINT_FILE);

    let mut trainer = Trainer::new(cfg.network_config(), cfg.train.clone(), cfg.env.clone(), seed)?;
    let metric_name = make_env(&cfg.env, 0)?.spec().metric.name();
    trainer.run(|p, learner| {
        let row = MetricsRow {
            run_id: cfg.run_id.clone(),
            seed,
            env: cfg.env_name().to_string(),
            algo: cfg.algo().name().to_string(),
            env_steps: p.env_steps,
            episodes: p.episodes,
            loss: p.loss,
            return_mean: p.eval.return_mean,
            return_std: p.eval.return_std,
            metric_name: metric_name.to_string(),
            metric_value: p.eval.metric,
        };
        append_row(&metrics, &row)?;
        checkpoint::save(&ckpt, learner.online.params())?;
        log(&row.to_csv());
        Ok(())
    })?;
    Ok(dir)
}

/// Network with the layout `cfg` implies for its environment.
pub fn build_network(cfg: &RunConfig, seed: u64) -> Result<QNetwork> {
    let env = make_env(&cfg.env, 0)?;
    let spec = env.spec();
    let mut net_cfg = cfg.network_config();
    net_cfg.n_agents = spec.n_agents;
    net_cfg.n_actions = spec.n_actions;
    net_cfg.obs_dim = spec.obs_dim;
    net_cfg.dynamic_layers = spec.graph_layers;
    QNetwork::new(net_cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Loads parameters from `path` and runs the seeded greedy evaluation. The
/// row is appended to `eval.csv` next to the checkpoint.
pub fn eval_checkpoint(cfg: &RunConfig, path: &Path, episodes: usize, seed: u64) -> Result<MetricsRow> {
    cfg.validate()?;
    let loaded = checkpoint::load(path)?;
    let mut net = build_network(cfg, seed)?;
    {
        let mut params = net.params_mut();
        checkpoint::restore(&mut params, &loaded)?;
    }
    let summary = evaluate_seeded(&cfg.env, seed, &mut net, episodes, cfg.train.maxsum_iterations)?;
    let row = MetricsRow {
        run_id: cfg.run_id.clone(),
        seed,
        env: cfg.env_name().to_string(),
        algo: cfg.algo().name().to_string(),
        env_steps: 0,
        episodes: episodes as u64,
        loss: None,
        return_mean: summary.return_mean,
        return_std: summary.return_std,
        metric_name: make_env(&cfg.env, 0)?.spec().metric.name().to_string(),
        metric_value: summary.metric,
    };
    if let Some(dir) = path.parent() {
        append_row(&dir.join(EVAL_FILE), &row)?;
    }
    Ok(row)
}

/// Process exit code for an error.
pub fn exit_code(err: &McgError) -> i32 {
    match err {
        McgError::Config(_) => 2,
        McgError::Divergence(_) => 3,
        McgError::Checkpoint(_) => 4,
        _ => 1,
    }
}
