//! Multi-group hallway: each group must enter the shared goal in lockstep.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, positive, Clock, Env, EnvSpec, StepResult, TaskMetric};
use crate::coordination::JointAction;
use crate::error::Result;
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HallwayConfig {
    pub groups: usize,
    pub group_size: usize,
    /// Chain cells before the goal.
    pub length: usize,
    pub episode_limit: usize,
}

impl Default for HallwayConfig {
    fn default() -> Self {
        HallwayConfig {
            groups: 2,
            group_size: 2,
            length: 6,
            episode_limit: 16,
        }
    }
}

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const STAY: usize = 2;

pub const HALLWAY_SCORE: f64 = 1.0;
pub const HALLWAY_CLASH_PER_GROUP: f64 = -0.5;

/// Agent `i` belongs to group `i / group_size`. Positions `0..length` are
/// chain cells; position `length` is the goal. An agent that enters the goal
/// without its whole group stays there, so that group cannot score again
/// this episode.
#[derive(Clone, Debug)]
pub struct Hallway {
    cfg: HallwayConfig,
    spec: EnvSpec,
    rng: ChaCha8Rng,
    clock: Clock,
    pos: Vec<usize>,
    scored: Vec<bool>,
}

impl Hallway {
    pub fn new(cfg: HallwayConfig, rng: ChaCha8Rng) -> Result<Self> {
        positive("env.hallway.groups", cfg.groups)?;
        positive("env.hallway.group_size", cfg.group_size)?;
        positive("env.hallway.length", cfg.length)?;
        positive("env.hallway.episode_limit", cfg.episode_limit)?;
        Ok(Hallway {
            spec: EnvSpec {
                name: "hallway",
                n_agents: cfg.groups * cfg.group_size,
                n_actions: 3,
                obs_dim: cfg.length + 1 + cfg.groups,
                episode_limit: cfg.episode_limit,
                metric: TaskMetric::WinRate,
                graph_layers: None,
            },
            cfg,
            rng,
            clock: Clock::new(),
            pos: Vec::new(),
            scored: Vec::new(),
        })
    }

    pub fn group_of(&self, agent: usize) -> usize {
        agent / self.cfg.group_size
    }

    pub fn positions(&self) -> &[usize] {
        &self.pos
    }

    pub fn scored(&self) -> &[bool] {
        &self.scored
    }

    pub fn set_positions(&mut self, pos: Vec<usize>) -> Matrix {
        assert_eq!(pos.len(), self.spec.n_agents);
        assert!(pos.iter().all(|&p| p <= self.cfg.length));
        self.clock.reset();
        self.pos = pos;
        self.scored = vec![false; self.cfg.groups];
        self.observations()
    }

    fn observations(&self) -> Matrix {
        let l = self.cfg.length;
        let mut obs = Matrix::zeros(self.spec.n_agents, self.spec.obs_dim);
        for (i, &p) in self.pos.iter().enumerate() {
            let row = obs.row_mut(i);
            row[p] = 1.0;
            row[l + 1 + self.group_of(i)] = 1.0;
        }
        obs
    }
}

impl Env for Hallway {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Matrix {
        self.clock.reset();
        let l = self.cfg.length;
        self.pos = (0..self.spec.n_agents).map(|_| self.rng.gen_range(0..l)).collect();
        self.scored = vec![false; self.cfg.groups];
        self.observations()
    }

    fn step(&mut self, actions: &JointAction) -> Result<StepResult> {
        check_actions(&self.spec, actions)?;
        self.clock.begin_step("hallway")?;
        let l = self.cfg.length;
        let mut entered = vec![false; self.spec.n_agents];
        for i in 0..self.spec.n_agents {
            if self.scored[self.group_of(i)] {
                continue;
            }
            let p = self.pos[i];
            // an agent that reached the goal waits there
            let next = match actions.0[i] {
                _ if p == l => l,
                LEFT => p.saturating_sub(1),
                RIGHT => p + 1,
                _ => p,
            };
            entered[i] = p < l && next == l;
            self.pos[i] = next;
        }
        let mut groups_entering: Vec<usize> = (0..self.spec.n_agents)
            .filter(|&i| entered[i])
            .map(|i| self.group_of(i))
            .collect();
        groups_entering.dedup();

        let mut reward = 0.0;
        let mut metric = 0.0;
        if groups_entering.len() > 1 {
            reward = HALLWAY_CLASH_PER_GROUP * groups_entering.len() as f64;
            for i in 0..self.spec.n_agents {
                if entered[i] {
                    self.pos[i] = 0;
                }
            }
        } else if let Some(&g) = groups_entering.first() {
            let members = g * self.cfg.group_size..(g + 1) * self.cfg.group_size;
            if members.clone().all(|i| entered[i]) {
                reward = HALLWAY_SCORE;
                if !self.scored.iter().any(|&s| s) {
                    metric = 1.0;
                }
                self.scored[g] = true;
            }
        }
        let terminated = self.scored.iter().all(|&s| s) || self.clock.t >= self.cfg.episode_limit;
        self.clock.done = terminated;
        Ok(StepResult {
            observations: self.observations(),
            reward,
            terminated,
            metric,
        })
    }
}
