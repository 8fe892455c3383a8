//! Gather: agents must all meet at the goal designated optimal this episode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, positive, Clock, Env, EnvSpec, StepResult, TaskMetric, MOVES};
use crate::coordination::JointAction;
use crate::error::{McgError, Result};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatherConfig {
    pub agents: usize,
    pub size: usize,
    pub episode_limit: usize,
    /// Chebyshev distance within which the optimal goal's identity is visible.
    pub radius: usize,
}

impl Default for GatherConfig {
    fn default() -> Self {
        GatherConfig {
            agents: 3,
            size: 7,
            episode_limit: 20,
            radius: 2,
        }
    }
}

pub const GATHER_ALL_OPTIMAL: f64 = 10.0;
pub const GATHER_ALL_SUBOPTIMAL: f64 = 5.0;
pub const GATHER_PARTIAL: f64 = -5.0;

#[derive(Clone, Debug)]
pub struct Gather {
    cfg: GatherConfig,
    spec: EnvSpec,
    rng: ChaCha8Rng,
    clock: Clock,
    goals: [(usize, usize); 3],
    optimal: usize,
    pos: Vec<(usize, usize)>,
}

impl Gather {
    pub fn new(cfg: GatherConfig, rng: ChaCha8Rng) -> Result<Self> {
        positive("env.gather.agents", cfg.agents)?;
        positive("env.gather.episode_limit", cfg.episode_limit)?;
        if cfg.size < 3 {
            return Err(McgError::Config("`env.gather.size` must be at least 3".into()));
        }
        let g = cfg.size - 1;
        Ok(Gather {
            spec: EnvSpec {
                name: "gather",
                n_agents: cfg.agents,
                n_actions: 5,
                obs_dim: 8,
                episode_limit: cfg.episode_limit,
                metric: TaskMetric::WinRate,
                graph_layers: None,
            },
            goals: [(0, 0), (g, 0), (0, g)],
            cfg,
            rng,
            clock: Clock::new(),
            optimal: 0,
            pos: Vec::new(),
        })
    }

    pub fn goals(&self) -> [(usize, usize); 3] {
        self.goals
    }

    pub fn optimal_goal(&self) -> usize {
        self.optimal
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.pos
    }

    /// Places agents directly (for tests and scripted scenarios).
    pub fn set_state(&mut self, optimal: usize, pos: Vec<(usize, usize)>) -> Result<Matrix> {
        if optimal >= 3 || pos.len() != self.cfg.agents || pos.iter().any(|&(x, y)| x >= self.cfg.size || y >= self.cfg.size)
        {
            return Err(McgError::arg("invalid gather state"));
        }
        self.clock.reset();
        self.optimal = optimal;
        self.pos = pos;
        Ok(self.observations())
    }

    fn goal_at(&self, p: (usize, usize)) -> Option<usize> {
        self.goals.iter().position(|&g| g == p)
    }

    fn observations(&self) -> Matrix {
        let scale = (self.cfg.size - 1) as f64;
        let opt = self.goals[self.optimal];
        let mut obs = Matrix::zeros(self.cfg.agents, 8);
        for (i, &(x, y)) in self.pos.iter().enumerate() {
            let row = obs.row_mut(i);
            row[0] = x as f64 / scale;
            row[1] = y as f64 / scale;
            if let Some(k) = self.goal_at((x, y)) {
                row[2 + k] = 1.0;
            }
            let cheb = x.abs_diff(opt.0).max(y.abs_diff(opt.1));
            if cheb <= self.cfg.radius {
                row[5 + self.optimal] = 1.0;
            }
        }
        obs
    }

    /// Terminal reward for the current placement.
    fn outcome(&self) -> f64 {
        let on: Vec<Option<usize>> = self.pos.iter().map(|&p| self.goal_at(p)).collect();
        let on_opt = on.iter().filter(|g| **g == Some(self.optimal)).count();
        if on_opt == on.len() {
            GATHER_ALL_OPTIMAL
        } else if on_opt > 0 {
            GATHER_PARTIAL
        } else if on.iter().all(Option::is_some) {
            GATHER_ALL_SUBOPTIMAL
        } else {
            0.0
        }
    }
}

impl Env for Gather {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Matrix {
        self.clock.reset();
        self.optimal = self.rng.gen_range(0..3);
        let size = self.cfg.size;
        self.pos = (0..self.cfg.agents)
            .map(|_| loop {
                let p = (self.rng.gen_range(0..size), self.rng.gen_range(0..size));
                if !self.goals.contains(&p) {
                    break p;
                }
            })
            .collect();
        self.observations()
    }

    fn step(&mut self, actions: &JointAction) -> Result<StepResult> {
        check_actions(&self.spec, actions)?;
        self.clock.begin_step("gather")?;
        let max = self.cfg.size as i64 - 1;
        for (p, &a) in self.pos.iter_mut().zip(&actions.0) {
            let (dx, dy) = MOVES[a];
            p.0 = (p.0 as i64 + dx).clamp(0, max) as usize;
            p.1 = (p.1 as i64 + dy).clamp(0, max) as usize;
        }
        let all_on_goals = self.pos.iter().all(|&p| self.goal_at(p).is_some());
        let terminated = all_on_goals || self.clock.t >= self.cfg.episode_limit;
        let reward = if terminated { self.outcome() } else { 0.0 };
        self.clock.done = terminated;
        Ok(StepResult {
            observations: self.observations(),
            reward,
            terminated,
            metric: if reward == GATHER_ALL_OPTIMAL { 1.0 } else { 0.0 },
        })
    }
}
