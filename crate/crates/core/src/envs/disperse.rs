//! Disperse: staff the hospital in need each step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, positive, Clock, Env, EnvSpec, StepResult, TaskMetric};
use crate::coordination::JointAction;
use crate::error::Result;
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisperseConfig {
    pub agents: usize,
    pub hospitals: usize,
    pub episode_limit: usize,
}

impl Default for DisperseConfig {
    fn default() -> Self {
        DisperseConfig {
            agents: 12,
            hospitals: 4,
            episode_limit: 10,
        }
    }
}

/// Shortfall penalty `min(arrivals − demand, 0)`.
pub fn disperse_reward(demand: usize, arrivals: usize) -> f64 {
    (arrivals as f64 - demand as f64).min(0.0)
}

#[derive(Clone, Debug)]
pub struct Disperse {
    cfg: DisperseConfig,
    spec: EnvSpec,
    rng: ChaCha8Rng,
    clock: Clock,
    needy: usize,
    demand: usize,
    last: Option<Vec<usize>>,
}

impl Disperse {
    pub fn new(cfg: DisperseConfig, rng: ChaCha8Rng) -> Result<Self> {
        positive("env.disperse.agents", cfg.agents)?;
        positive("env.disperse.hospitals", cfg.hospitals)?;
        positive("env.disperse.episode_limit", cfg.episode_limit)?;
        Ok(Disperse {
            spec: EnvSpec {
                name: "disperse",
                n_agents: cfg.agents,
                n_actions: cfg.hospitals,
                obs_dim: 2 * cfg.hospitals + 1,
                episode_limit: cfg.episode_limit,
                metric: TaskMetric::MeanReturn,
                graph_layers: None,
            },
            cfg,
            rng,
            clock: Clock::new(),
            needy: 0,
            demand: 1,
            last: None,
        })
    }

    /// Current needy hospital and its demand.
    pub fn request(&self) -> (usize, usize) {
        (self.needy, self.demand)
    }

    pub fn set_request(&mut self, needy: usize, demand: usize) {
        self.needy = needy;
        self.demand = demand;
    }

    fn draw(&mut self) {
        self.needy = self.rng.gen_range(0..self.cfg.hospitals);
        self.demand = self.rng.gen_range(1..=self.cfg.agents);
    }

    fn observations(&self) -> Matrix {
        let h = self.cfg.hospitals;
        let mut obs = Matrix::zeros(self.cfg.agents, 2 * h + 1);
        for i in 0..self.cfg.agents {
            let row = obs.row_mut(i);
            row[self.needy] = 1.0;
            row[h] = self.demand as f64 / self.cfg.agents as f64;
            if let Some(last) = &self.last {
                row[h + 1 + last[i]] = 1.0;
            }
        }
        obs
    }
}

impl Env for Disperse {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Matrix {
        self.clock.reset();
        self.last = None;
        self.draw();
        self.observations()
    }

    fn step(&mut self, actions: &JointAction) -> Result<StepResult> {
        check_actions(&self.spec, actions)?;
        self.clock.begin_step("disperse")?;
        let arrivals = actions.0.iter().filter(|&&a| a == self.needy).count();
        let reward = disperse_reward(self.demand, arrivals);
        self.last = Some(actions.0.clone());
        let terminated = self.clock.t >= self.cfg.episode_limit;
        self.clock.done = terminated;
        self.draw();
        Ok(StepResult {
            observations: self.observations(),
            reward,
            terminated,
            metric: reward,
        })
    }
}
