//! Episode collection and episode-granularity replay.

use rand::seq::index::sample;
use rand::Rng;

use crate::coordination::{greedy_action, JointAction, QNetwork};
use crate::envs::Env;
use crate::error::{McgError, Result};
use crate::graph::AdjacencyTensor;
use crate::numerics::Matrix;

/// One full episode. `observations` and `graphs` have one more entry than the
/// per-step arrays (the post-terminal observation).
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub observations: Vec<Matrix>,
    pub graphs: Vec<Option<AdjacencyTensor>>,
    pub actions: Vec<JointAction>,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    /// Task metric accumulated over the episode.
    pub metric: f64,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Checks parallel-array lengths and the single trailing terminal flag.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0
            || self.rewards.len() != n
            || self.terminated.len() != n
            || self.observations.len() != n + 1
            || self.graphs.len() != n + 1
        {
            return Err(McgError::state("episode arrays have inconsistent lengths"));
        }
        if self.terminated[..n - 1].iter().any(|&t| t) || !self.terminated[n - 1] {
            return Err(McgError::state("episode must have exactly one terminal step, at the end"));
        }
        Ok(())
    }
}

/// Runs one episode. Each agent independently takes a uniform random action
/// with probability `epsilon`, otherwise its component of the greedy joint
/// action. With `epsilon >= 1` the network is never evaluated.
pub fn collect_episode(
    env: &mut dyn Env,
    net: &mut QNetwork,
    epsilon: f64,
    maxsum_iterations: usize,
    rng: &mut impl Rng,
) -> Result<EpisodeRecord> {
    let spec = env.spec().clone();
    let mut obs = env.reset();
    let mut rec = EpisodeRecord {
        observations: Vec::with_capacity(spec.episode_limit + 1),
        graphs: Vec::with_capacity(spec.episode_limit + 1),
        actions: Vec::with_capacity(spec.episode_limit),
        rewards: Vec::with_capacity(spec.episode_limit),
        terminated: Vec::with_capacity(spec.episode_limit),
        metric: 0.0,
    };
    let mut h = net.initial_state();
    loop {
        let graphs = env.interaction_graphs();
        let greedy = if epsilon < 1.0 {
            let (next, fq) = net.step(&h, &obs, rec.actions.last(), graphs.as_ref(), false)?;
            h = next;
            Some(greedy_action(&fq, maxsum_iterations))
        } else {
            None
        };
        let action = JointAction(
            (0..spec.n_agents)
                .map(|i| {
                    let explore = rng.gen::<f64>() < epsilon;
                    let random = rng.gen_range(0..spec.n_actions);
                    match &greedy {
                        Some(g) if !explore => g.0[i],
                        _ => random,
                    }
                })
                .collect(),
        );
        let out = env.step(&action)?;
        rec.observations.push(obs);
        rec.graphs.push(graphs);
        rec.actions.push(action);
        rec.rewards.push(out.reward);
        rec.terminated.push(out.terminated);
        rec.metric += out.metric;
        obs = out.observations;
        if out.terminated {
            break;
        }
        if rec.len() > spec.episode_limit {
            return Err(McgError::state(format!("{} exceeded its episode limit", spec.name)));
        }
    }
    rec.graphs.push(env.interaction_graphs());
    rec.observations.push(obs);
    Ok(rec)
}

/// Ring buffer of whole episodes with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<(u64, EpisodeRecord)>,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(McgError::Config("`train.buffer_capacity` must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(4096)),
            next: 0,
            pushed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts an episode, evicting the oldest when full. Returns its id.
    pub fn push(&mut self, ep: EpisodeRecord) -> u64 {
        let id = self.pushed;
        self.pushed += 1;
        if self.items.len() < self.capacity {
            self.items.push((id, ep));
        } else {
            self.items[self.next] = (id, ep);
        }
        self.next = (self.next + 1) % self.capacity;
        id
    }

    /// Up to `batch` distinct episodes, uniformly at random, with their ids.
    pub fn sample_with_ids(&self, batch: usize, rng: &mut impl Rng) -> Vec<(u64, &EpisodeRecord)> {
        let k = batch.min(self.items.len());
        sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| (self.items[i].0, &self.items[i].1))
            .collect()
    }

    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Vec<&EpisodeRecord> {
        self.sample_with_ids(batch, rng).into_iter().map(|(_, e)| e).collect()
    }
}
