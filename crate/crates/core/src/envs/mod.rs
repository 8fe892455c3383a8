//! Cooperative multi-agent environments behind one stepping interface.

pub mod climb;
pub mod disperse;
pub mod gather;
pub mod hallway;
pub mod pursuit;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::JointAction;
use crate::error::{McgError, Result};
use crate::graph::AdjacencyTensor;
use crate::numerics::Matrix;

pub use climb::{Climb, CLIMB_PAYOFF};
pub use disperse::{Disperse, DisperseConfig};
pub use gather::{Gather, GatherConfig};
pub use hallway::{Hallway, HallwayConfig};
pub use pursuit::{Pursuit, PursuitConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMetric {
    WinRate,
    MeanReturn,
    PreyCaught,
}

impl TaskMetric {
    pub fn name(self) -> &'static str {
        match self {
            TaskMetric::WinRate => "win_rate",
            TaskMetric::MeanReturn => "mean_return",
            TaskMetric::PreyCaught => "prey_caught",
        }
    }
}

impl fmt::Display for TaskMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub episode_limit: usize,
    pub metric: TaskMetric,
    /// Layer count of [`Env::interaction_graphs`], if the environment has one.
    pub graph_layers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// `n_agents × obs_dim`.
    pub observations: Matrix,
    pub reward: f64,
    pub terminated: bool,
    /// Increment of the task metric caused by this step.
    pub metric: f64,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode using the instance's own random stream.
    fn reset(&mut self) -> Matrix;

    fn step(&mut self, actions: &JointAction) -> Result<StepResult>;

    /// Per-step typed interaction graphs, or `None` when the configured static
    /// topologies should be used.
    fn interaction_graphs(&self) -> Option<AdjacencyTensor> {
        None
    }
}

/// Shared bookkeeping: episode clock and the terminated latch.
#[derive(Clone, Debug)]
pub(crate) struct Clock {
    pub t: usize,
    pub done: bool,
    pub started: bool,
}

impl Clock {
    pub fn new() -> Self {
        Clock {
            t: 0,
            done: false,
            started: false,
        }
    }

    pub fn reset(&mut self) {
        self.t = 0;
        self.done = false;
        self.started = true;
    }

    pub fn begin_step(&mut self, name: &str) -> Result<()> {
        if !self.started {
            return Err(McgError::state(format!("{name}: step before reset")));
        }
        if self.done {
            return Err(McgError::state(format!("{name}: step after termination")));
        }
        self.t += 1;
        Ok(())
    }
}

pub(crate) fn check_actions(spec: &EnvSpec, actions: &JointAction) -> Result<()> {
    if actions.len() != spec.n_agents {
        return Err(McgError::arg(format!(
            "{}: expected {} actions, got {}",
            spec.name,
            spec.n_agents,
            actions.len()
        )));
    }
    if let Some(&a) = actions.0.iter().find(|&&a| a >= spec.n_actions) {
        return Err(McgError::arg(format!("{}: invalid action {a}", spec.name)));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub gather: GatherConfig,
    #[serde(default)]
    pub disperse: DisperseConfig,
    #[serde(default)]
    pub pursuit: PursuitConfig,
    #[serde(default)]
    pub hallway: HallwayConfig,
}

pub const ENV_NAMES: [&str; 5] = ["gather", "disperse", "pursuit", "hallway", "climb"];

/// Builds the configured environment with its own random stream.
pub fn make_env(cfg: &EnvConfig, seed: u64) -> Result<Box<dyn Env>> {
    let name = cfg
        .name
        .as_deref()
        .ok_or_else(|| McgError::Config("missing key `env.name`".into()))?;
    let rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match name {
        "gather" => Box::new(Gather::new(cfg.gather.clone(), rng)?),
        "disperse" => Box::new(Disperse::new(cfg.disperse.clone(), rng)?),
        "pursuit" => Box::new(Pursuit::new(cfg.pursuit.clone(), rng)?),
        "hallway" => Box::new(Hallway::new(cfg.hallway.clone(), rng)?),
        "climb" => Box::new(Climb::new()),
        other => {
            return Err(McgError::Config(format!(
                "unknown value `{other}` for key `env.name` (expected one of {})",
                ENV_NAMES.join(", ")
            )))
        }
    })
}

pub(crate) fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(McgError::Config(format!("`{name}` must be positive")))
    } else {
        Ok(())
    }
}

/// Grid moves shared by the grid worlds: up, down, left, right, stay.
pub(crate) const MOVES: [(i64, i64); 5] = [(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)];
