//! Shared recurrent encoder of per-agent action-observation histories.

use rand::Rng;

use super::factored::JointAction;
use crate::error::{McgError, Result};
use crate::numerics::{Activation, Gru, HasParams, Linear, Matrix, Parameter};

/// Embedding + GRU shared by all agents. Each agent's input is
/// `[obs_i ‖ one-hot(previous action) ‖ one-hot(agent id)]`; row `i` of the
/// hidden state is agent `i`'s history summary.
#[derive(Clone, Debug)]
pub struct AgentEncoder {
    pub embed: Linear,
    pub gru: Gru,
    n_agents: usize,
    n_actions: usize,
    obs_dim: usize,
    embed_pre: Vec<Matrix>,
}

impl AgentEncoder {
    pub fn new(
        n_agents: usize,
        n_actions: usize,
        obs_dim: usize,
        embed_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let input = obs_dim + n_actions + n_agents;
        AgentEncoder {
            embed: Linear::new("encoder.embed", input, embed_dim, rng),
            gru: Gru::new("encoder.gru", embed_dim, hidden, rng),
            n_agents,
            n_actions,
            obs_dim,
            embed_pre: Vec::new(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.gru.hidden()
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn input_dim(&self) -> usize {
        self.obs_dim + self.n_actions + self.n_agents
    }

    /// Zero hidden state for a fresh episode.
    pub fn initial_state(&self) -> Matrix {
        Matrix::zeros(self.n_agents, self.hidden())
    }

    pub fn build_inputs(&self, obs: &Matrix, prev: Option<&JointAction>) -> Result<Matrix> {
        if obs.rows() != self.n_agents {
            return Err(McgError::arg(format!(
                "expected observations for {} agents, got {}",
                self.n_agents,
                obs.rows()
            )));
        }
        if obs.cols() != self.obs_dim {
            return Err(McgError::Dimension {
                op: "encoder observations",
                left: (self.n_agents, self.obs_dim),
                right: obs.shape(),
            });
        }
        let mut x = Matrix::zeros(self.n_agents, self.input_dim());
        for i in 0..self.n_agents {
            let row = x.row_mut(i);
            row[..self.obs_dim].copy_from_slice(obs.row(i));
            if let Some(prev) = prev {
                let a = *prev
                    .0
                    .get(i)
                    .ok_or_else(|| McgError::arg("previous joint action too short"))?;
                if a >= self.n_actions {
                    return Err(McgError::arg(format!("previous action {a} out of range")));
                }
                row[self.obs_dim + a] = 1.0;
            }
            row[self.obs_dim + self.n_actions + i] = 1.0;
        }
        Ok(x)
    }

    /// One recurrent step; returns the new hidden state (the feature matrix X).
    pub fn encode_step(
        &mut self,
        h: &Matrix,
        obs: &Matrix,
        prev: Option<&JointAction>,
        record: bool,
    ) -> Result<Matrix> {
        let inputs = self.build_inputs(obs, prev)?;
        let pre = self.embed.run(&inputs, record)?;
        let e = Activation::Relu.apply(&pre);
        if record {
            self.embed_pre.push(pre);
        }
        self.gru.run(&e, h, record)
    }

    /// Back-propagates `∂L/∂h_t`; returns `∂L/∂h_{t-1}`.
    pub fn backward(&mut self, dh: &Matrix) -> Result<Matrix> {
        let (de, dh_prev) = self.gru.backward(dh)?;
        let pre = self
            .embed_pre
            .pop()
            .ok_or_else(|| McgError::state("encoder backward without forward"))?;
        let dpre = Activation::Relu.backward(&pre, &pre, &de)?;
        self.embed.backward(&dpre)?;
        Ok(dh_prev)
    }

    pub fn clear_cache(&mut self) {
        self.embed.clear_cache();
        self.gru.clear_cache();
        self.embed_pre.clear();
    }
}

impl HasParams for AgentEncoder {
    fn params(&self) -> Vec<&Parameter> {
        let mut v = self.embed.params();
        v.extend(self.gru.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.embed.params_mut();
        v.extend(self.gru.params_mut());
        v
    }
}
