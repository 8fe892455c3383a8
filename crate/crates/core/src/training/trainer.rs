//! Training loop, exploration schedule and greedy evaluation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::{NetworkConfig, QNetwork};
use crate::envs::{make_env, Env, EnvConfig};
use crate::error::{McgError, Result};
use crate::numerics::AdamConfig;

use super::episode::{collect_episode, ReplayBuffer};
use super::learner::Learner;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_episodes: usize,
    pub buffer_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which epsilon decays linearly.
    pub epsilon_anneal_steps: u64,
    /// Optimizer updates between target synchronizations.
    pub target_update_interval: usize,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Episodes collected between optimizer updates.
    pub update_every_episodes: usize,
    pub maxsum_iterations: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            lr: 5e-4,
            batch_episodes: 16,
            buffer_capacity: 2000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_steps: 50_000,
            target_update_interval: 200,
            total_steps: 100_000,
            eval_interval: 5_000,
            eval_episodes: 20,
            update_every_episodes: 1,
            maxsum_iterations: 8,
            grad_clip: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(McgError::Config(format!("`train.{key}` {why}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        for (key, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, "must lie in [0, 1]");
            }
        }
        for (key, v) in [
            ("batch_episodes", self.batch_episodes),
            ("buffer_capacity", self.buffer_capacity),
            ("target_update_interval", self.target_update_interval),
            ("eval_episodes", self.eval_episodes),
            ("update_every_episodes", self.update_every_episodes),
            ("maxsum_iterations", self.maxsum_iterations),
        ] {
            if v == 0 {
                return bad(key, "must be positive");
            }
        }
        if self.eval_interval == 0 {
            return bad("eval_interval", "must be positive");
        }
        if !(self.grad_clip >= 0.0) {
            return bad("grad_clip", "must be nonnegative");
        }
        Ok(())
    }

    pub fn epsilon(&self, env_steps: u64) -> f64 {
        if self.epsilon_anneal_steps == 0 || env_steps >= self.epsilon_anneal_steps {
            return self.epsilon_end;
        }
        let frac = env_steps as f64 / self.epsilon_anneal_steps as f64;
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// Independent 64-bit seed for a named purpose.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub const STREAM_INIT: u64 = 1;
pub const STREAM_EXPLORE: u64 = 2;
pub const STREAM_REPLAY: u64 = 3;
pub const STREAM_ENV: u64 = 4;
pub const STREAM_EVAL_ENV: u64 = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub return_mean: f64,
    pub return_std: f64,
    pub metric: f64,
    pub returns: Vec<f64>,
}

/// Greedy episodes (epsilon 0) on `env`; population standard deviation.
pub fn evaluate(env: &mut dyn Env, net: &mut QNetwork, episodes: usize, iterations: usize) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(McgError::arg("evaluation needs at least one episode"));
    }
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let mut returns = Vec::with_capacity(episodes);
    let mut metric = 0.0;
    for _ in 0..episodes {
        let rec = collect_episode(env, net, 0.0, iterations, &mut unused)?;
        returns.push(rec.total_return());
        metric += rec.metric;
    }
    let n = episodes as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(EvalSummary {
        return_mean: mean,
        return_std: var.sqrt(),
        metric: metric / n,
        returns,
    })
}

/// Evaluation on a fresh environment seeded from the run seed, so every
/// evaluation of a given parameter set sees the same episodes.
pub fn evaluate_seeded(
    env_cfg: &EnvConfig,
    seed: u64,
    net: &mut QNetwork,
    episodes: usize,
    iterations: usize,
) -> Result<EvalSummary> {
    let mut env = make_env(env_cfg, derive_seed(seed, STREAM_EVAL_ENV))?;
    evaluate(env.as_mut(), net, episodes, iterations)
}

/// Progress snapshot handed to the evaluation callback.
#[derive(Clone, Debug, PartialEq)]
pub struct Progress {
    pub env_steps: u64,
    pub episodes: u64,
    pub loss: Option<f64>,
    pub eval: EvalSummary,
}

pub struct Trainer {
    cfg: TrainConfig,
    env_cfg: EnvConfig,
    seed: u64,
    pub learner: Learner,
    env: Box<dyn Env>,
    buffer: ReplayBuffer,
    explore: ChaCha8Rng,
    replay: ChaCha8Rng,
    env_steps: u64,
    episodes: u64,
    loss: Option<f64>,
}

impl Trainer {
    /// Builds the environment and networks for one seed. `net_cfg` sizes are
    /// overwritten from the environment.
    pub fn new(mut net_cfg: NetworkConfig, cfg: TrainConfig, env_cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let env = make_env(&env_cfg, derive_seed(seed, STREAM_ENV))?;
        let spec = env.spec();
        net_cfg.n_agents = spec.n_agents;
        net_cfg.n_actions = spec.n_actions;
        net_cfg.obs_dim = spec.obs_dim;
        net_cfg.dynamic_layers = spec.graph_layers;
        let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT));
        let online = QNetwork::new(net_cfg, &mut init)?;
        let adam = AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        };
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.buffer_capacity)?,
            learner: Learner::new(online, adam),
            explore: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_EXPLORE)),
            replay: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_REPLAY)),
            env,
            cfg,
            env_cfg,
            seed,
            env_steps: 0,
            episodes: 0,
            loss: None,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn evaluate_now(&mut self) -> Result<EvalSummary> {
        evaluate_seeded(
            &self.env_cfg,
            self.seed,
            &mut self.learner.online,
            self.cfg.eval_episodes,
            self.cfg.maxsum_iterations,
        )
    }

    /// Trains for `total_steps` environment steps. `on_eval` runs at step 0,
    /// whenever another `eval_interval` steps have elapsed, and at the end.
    pub fn run(&mut self, mut on_eval: impl FnMut(&Progress, &Learner) -> Result<()>) -> Result<()> {
        let mut next_eval = 0;
        let mut last_eval = None;
        loop {
            if self.env_steps >= next_eval {
                self.report(&mut on_eval)?;
                last_eval = Some(self.env_steps);
                while next_eval <= self.env_steps {
                    next_eval += self.cfg.eval_interval;
                }
            }
            if self.env_steps >= self.cfg.total_steps {
                break;
            }
            let eps = self.cfg.epsilon(self.env_steps);
            let rec = collect_episode(
                self.env.as_mut(),
                &mut self.learner.online,
                eps,
                self.cfg.maxsum_iterations,
                &mut self.explore,
            )?;
            self.env_steps += rec.len() as u64;
            self.episodes += 1;
            self.buffer.push(rec);
            if self.episodes % self.cfg.update_every_episodes as u64 == 0 && self.buffer.len() >= self.cfg.batch_episodes {
                let batch = self.buffer.sample(self.cfg.batch_episodes, &mut self.replay);
                let clip = (self.cfg.grad_clip > 0.0).then_some(self.cfg.grad_clip);
                let loss = self
                    .learner
                    .td_update(&batch, self.cfg.gamma, self.cfg.maxsum_iterations, clip)?;
                self.loss = Some(loss);
                if self.learner.updates() % self.cfg.target_update_interval == 0 {
                    self.learner.sync_target()?;
                }
            }
        }
        if last_eval != Some(self.env_steps) {
            self.report(&mut on_eval)?;
        }
        Ok(())
    }

    fn report(&mut self, on_eval: &mut impl FnMut(&Progress, &Learner) -> Result<()>) -> Result<()> {
        let eval = self.evaluate_now()?;
        let progress = Progress {
            env_steps: self.env_steps,
            episodes: self.episodes,
            loss: self.loss,
            eval,
        };
        on_eval(&progress, &self.learner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::Algo;
    use crate::envs::CLIMB_PAYOFF;
    use crate::graph::TopologyKind;
    use crate::mcg::MetaPathConfig;
    use crate::numerics::Activation;

    pub(crate) fn net_cfg(algo: Algo) -> NetworkConfig {
        NetworkConfig {
            algo,
            n_agents: 0,
            n_actions: 0,
            obs_dim: 0,
            embed_dim: 8,
            hidden: 8,
            mcg: MetaPathConfig::default(),
            mcg_bypass: false,
            activation: Activation::Relu,
            topologies: vec![TopologyKind::Full],
            dynamic_layers: None,
            dcg_topology: TopologyKind::Full,
        }
    }

    fn climb() -> EnvConfig {
        EnvConfig {
            name: Some("climb".into()),
            ..EnvConfig::default()
        }
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(25_000) - 0.525).abs() < 1e-12);
        assert_eq!(cfg.epsilon(50_000), 0.05);
        assert_eq!(cfg.epsilon(1_000_000), 0.05);
    }

    #[test]
    fn rejects_bad_gamma() {
        let cfg = TrainConfig {
            gamma: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(McgError::Config(_))));
    }

    #[test]
    fn deterministic_env_gives_zero_std() {
        let mut t = Trainer::new(net_cfg(Algo::Dcg), TrainConfig::default(), climb(), 0).unwrap();
        let s = t.evaluate_now().unwrap();
        assert_eq!(s.return_std, 0.0);
        assert_eq!(s.returns.len(), 20);
    }

    #[test]
    fn random_policy_on_climb_matches_table_mean() {
        let table_mean = CLIMB_PAYOFF.iter().flatten().sum::<f64>() / 9.0;
        let var = CLIMB_PAYOFF.iter().flatten().map(|r| (r - table_mean).powi(2)).sum::<f64>() / 9.0;
        let mut env = make_env(&climb(), 1).unwrap();
        let mut t = Trainer::new(net_cfg(Algo::Vdn), TrainConfig::default(), climb(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4000;
        let mut total = 0.0;
        for _ in 0..n {
            total += collect_episode(env.as_mut(), &mut t.learner.online, 1.0, 1, &mut rng)
                .unwrap()
                .total_return();
        }
        let mean = total / n as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - table_mean).abs() < 3.0 * se, "{mean} vs {table_mean}");
    }

    #[test]
    fn short_run_reports_start_and_end() {
        let cfg = TrainConfig {
            total_steps: 300,
            eval_interval: 100,
            batch_episodes: 4,
            eval_episodes: 2,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(net_cfg(Algo::Dmcg), cfg, climb(), 3).unwrap();
        let mut steps = Vec::new();
        t.run(|p, _| {
            steps.push(p.env_steps);
            Ok(())
        })
        .unwrap();
        assert_eq!(steps, vec![0, 100, 200, 300]);
    }
}
