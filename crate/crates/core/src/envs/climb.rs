//! Single-step two-agent climb matrix game.

use super::{check_actions, Clock, Env, EnvSpec, StepResult, TaskMetric};
use crate::coordination::JointAction;
use crate::error::Result;
use crate::numerics::Matrix;

/// `CLIMB_PAYOFF[a0][a1]`.
pub const CLIMB_PAYOFF: [[f64; 3]; 3] = [[11.0, -30.0, 0.0], [-30.0, 7.0, 6.0], [0.0, 0.0, 5.0]];

#[derive(Clone, Debug)]
pub struct Climb {
    spec: EnvSpec,
    clock: Clock,
}

impl Climb {
    pub fn new() -> Self {
        Climb {
            spec: EnvSpec {
                name: "climb",
                n_agents: 2,
                n_actions: 3,
                obs_dim: 1,
                episode_limit: 1,
                metric: TaskMetric::MeanReturn,
                graph_layers: None,
            },
            clock: Clock::new(),
        }
    }

    fn observations() -> Matrix {
        Matrix::filled(2, 1, 1.0)
    }
}

impl Default for Climb {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Climb {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Matrix {
        self.clock.reset();
        Self::observations()
    }

    fn step(&mut self, actions: &JointAction) -> Result<StepResult> {
        check_actions(&self.spec, actions)?;
        self.clock.begin_step("climb")?;
        self.clock.done = true;
        let reward = CLIMB_PAYOFF[actions.0[0]][actions.0[1]];
        Ok(StepResult {
            observations: Self::observations(),
            reward,
            terminated: true,
            metric: reward,
        })
    }
}
