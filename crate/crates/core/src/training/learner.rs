//! Double-Q temporal-difference updates on the factored joint value.

use crate::coordination::{greedy_action, Aggregation, FactoredQ, QGrad, QNetwork};
use crate::error::{McgError, Result};
use crate::numerics::{adam_step, AdamConfig, AdamState, HasParams, Matrix};

use super::episode::EpisodeRecord;

/// Losses above this magnitude abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct Learner {
    pub online: QNetwork,
    pub target: QNetwork,
    adam: AdamConfig,
    states: Vec<AdamState>,
    updates: usize,
}

/// Copies every parameter value of `online` into `target`.
pub fn sync_target(online: &QNetwork, target: &mut QNetwork) -> Result<()> {
    target.copy_params_from(online)
}

impl Learner {
    /// The target starts as an exact copy of `online`.
    pub fn new(online: QNetwork, adam: AdamConfig) -> Self {
        let target = online.clone();
        let states = online.params().iter().map(|p| AdamState::for_param(p)).collect();
        Learner {
            online,
            target,
            adam,
            states,
            updates: 0,
        }
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn sync_target(&mut self) -> Result<()> {
        sync_target(&self.online, &mut self.target)
    }

    /// Mean squared TD error over every step of `batch`; accumulates gradients
    /// into the online network when `backprop` is set.
    pub fn td_loss(&mut self, batch: &[&EpisodeRecord], gamma: f64, iterations: usize, backprop: bool) -> Result<f64> {
        if batch.is_empty() {
            return Err(McgError::arg("td update needs a nonempty batch"));
        }
        let independent = self.online.algo().aggregation() == Aggregation::Independent;
        let per_step = if independent { self.online.config().n_agents } else { 1 };
        let count = (batch.iter().map(|e| e.len()).sum::<usize>() * per_step) as f64;
        let mut total = 0.0;
        for ep in batch {
            ep.validate()?;
            let len = ep.len();
            let target_q = unroll(&mut self.target, ep, false)?;
            let online_q = unroll(&mut self.online, ep, backprop)?;
            let mut grads = Vec::with_capacity(len);
            for t in 0..len {
                let q = &online_q[t];
                let a = &ep.actions[t];
                let mut g = QGrad::zeros(q);
                let bootstrap = !ep.terminated[t];
                if independent {
                    let next = bootstrap.then(|| greedy_action(&online_q[t + 1], 1));
                    for i in 0..q.n() {
                        let mut y = ep.rewards[t];
                        if let Some(next) = &next {
                            y += gamma * target_q[t + 1].utilities()[i][next.0[i]];
                        }
                        let d = q.utilities()[i][a.0[i]] - y;
                        total += d * d;
                        g.utilities.row_mut(i)[a.0[i]] += 2.0 * d / count;
                    }
                } else {
                    let mut y = ep.rewards[t];
                    if bootstrap {
                        let next = greedy_action(&online_q[t + 1], iterations);
                        y += gamma * target_q[t + 1].evaluate_q(&next)?;
                    }
                    let d = q.evaluate_q(a)? - y;
                    total += d * d;
                    g.add_joint(q, a, 2.0 * d / count);
                }
                grads.push(g);
            }
            if backprop {
                let mut dh = Matrix::zeros(self.online.config().n_agents, self.online.config().hidden);
                for g in grads.iter().rev() {
                    dh = self.online.step_backward(g, &dh)?;
                }
            }
        }
        let loss = total / count;
        if !loss.is_finite() || loss.abs() > DIVERGENCE_LIMIT {
            self.online.clear_cache();
            return Err(McgError::Divergence(format!(
                "loss {loss} after {} updates",
                self.updates
            )));
        }
        Ok(loss)
    }

    /// One optimizer step on the batch; returns the loss before the step.
    pub fn td_update(
        &mut self,
        batch: &[&EpisodeRecord],
        gamma: f64,
        iterations: usize,
        grad_clip: Option<f64>,
    ) -> Result<f64> {
        self.online.zero_grads();
        let loss = self.td_loss(batch, gamma, iterations, true)?;
        if let Some(clip) = grad_clip {
            let norm = self
                .online
                .params()
                .iter()
                .map(|p| p.grad.data().iter().map(|g| g * g).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > clip {
                let s = clip / norm;
                for p in self.online.params_mut() {
                    p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
                }
            }
        }
        let mut params = self.online.params_mut();
        adam_step(&mut params, &mut self.states, self.adam)?;
        self.updates += 1;
        Ok(loss)
    }
}

/// Replays `ep` through `net`, returning the factored value at every
/// observation that precedes an action (plus the final one for bootstrapping).
fn unroll(net: &mut QNetwork, ep: &EpisodeRecord, record: bool) -> Result<Vec<FactoredQ>> {
    let len = ep.len();
    let mut h = net.initial_state();
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let prev = if t == 0 { None } else { Some(&ep.actions[t - 1]) };
        let (next, fq) = net.step(&h, &ep.observations[t], prev, ep.graphs[t].as_ref(), record)?;
        h = next;
        out.push(fq);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::{Algo, JointAction, NetworkConfig};
    use crate::graph::TopologyKind;
    use crate::mcg::MetaPathConfig;
    use crate::numerics::{finite_diff_check, Activation, Parameter};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(algo: Algo, n_agents: usize, n_actions: usize) -> NetworkConfig {
        NetworkConfig {
            algo,
            n_agents,
            n_actions,
            obs_dim: 2,
            embed_dim: 4,
            hidden: 4,
            mcg: MetaPathConfig::default(),
            mcg_bypass: false,
            activation: Activation::Relu,
            topologies: vec![TopologyKind::Full],
            dynamic_layers: None,
            dcg_topology: TopologyKind::Full,
        }
    }

    /// All weights zero; utilities equal the utility bias for every agent.
    fn constant_net(algo: Algo, n_agents: usize, bias: &[f64]) -> QNetwork {
        let mut net = QNetwork::new(config(algo, n_agents, bias.len()), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for p in net.params_mut() {
            p.value.fill(0.0);
        }
        net.heads.utility.bias.value = Matrix::row_vector(bias);
        net
    }

    fn episode(actions: Vec<Vec<usize>>, rewards: Vec<f64>, n_agents: usize) -> EpisodeRecord {
        let len = actions.len();
        let mut terminated = vec![false; len];
        terminated[len - 1] = true;
        EpisodeRecord {
            observations: vec![Matrix::zeros(n_agents, 2); len + 1],
            graphs: vec![None; len + 1],
            actions: actions.into_iter().map(JointAction).collect(),
            rewards,
            terminated,
            metric: 0.0,
        }
    }

    #[test]
    fn terminal_only_episode_with_exact_value_has_zero_loss() {
        let net = constant_net(Algo::Vdn, 1, &[5.0, 0.0]);
        let mut l = Learner::new(net, AdamConfig::default());
        let ep = episode(vec![vec![0]], vec![5.0], 1);
        assert_eq!(l.td_loss(&[&ep], 0.99, 4, false).unwrap(), 0.0);
    }

    #[test]
    fn two_step_hand_computed_loss() {
        // Q(a) = b[a0] + b[a1], b = [1, 2]; step 0: Q = 3, y = 1 + 0.5 * 4 = 3;
        // step 1 (terminal): Q = 4, y = 3. Loss = (0 + 1) / 2.
        let net = constant_net(Algo::Vdn, 2, &[1.0, 2.0]);
        let mut l = Learner::new(net, AdamConfig::default());
        let ep = episode(vec![vec![0, 1], vec![1, 1]], vec![1.0, 3.0], 2);
        let loss = l.td_loss(&[&ep], 0.5, 4, false).unwrap();
        assert!((loss - 0.5).abs() < 1e-10, "{loss}");
    }

    #[test]
    fn myopic_targets_are_rewards() {
        let net = constant_net(Algo::Dcg, 2, &[1.0, 2.0]);
        let mut l = Learner::new(net, AdamConfig::default());
        let ep = episode(vec![vec![0, 0], vec![1, 0], vec![1, 1]], vec![1.0, 0.0, 2.0], 2);
        // Mean aggregation with zero payoffs: Q = (b[a0] + b[a1]) / 2
        let qs = [1.0, 1.5, 2.0];
        let want = qs.iter().zip(&ep.rewards).map(|(q, r)| (q - r) * (q - r)).sum::<f64>() / 3.0;
        let loss = l.td_loss(&[&ep], 0.0, 4, false).unwrap();
        assert!((loss - want).abs() < 1e-12);
    }

    #[test]
    fn sync_makes_networks_agree_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let online = QNetwork::new(config(Algo::Dcg, 3, 3), &mut rng).unwrap();
        let mut l = Learner::new(online, AdamConfig::default());
        let ep = episode(vec![vec![0, 1, 2], vec![2, 1, 0]], vec![1.0, -1.0], 3);
        for _ in 0..3 {
            l.td_update(&[&ep], 0.9, 4, None).unwrap();
        }
        assert_ne!(l.online.params()[0].value, l.target.params()[0].value);
        l.sync_target().unwrap();
        l.sync_target().unwrap();
        for _ in 0..10 {
            let obs = Matrix::from_vec(3, 2, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let h = l.online.initial_state();
            let (_, a) = l.online.step(&h, &obs, None, None, false).unwrap();
            let (_, b) = l.target.step(&h, &obs, None, None, false).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sync_rejects_mismatched_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = QNetwork::new(config(Algo::Dcg, 3, 3), &mut rng).unwrap();
        let mut b = QNetwork::new(config(Algo::Vdn, 3, 3), &mut rng).unwrap();
        assert!(matches!(sync_target(&a, &mut b), Err(McgError::Config(_))));
    }

    #[test]
    fn target_unchanged_by_updates() {
        let online = QNetwork::new(config(Algo::Dmcg, 3, 3), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut l = Learner::new(online, AdamConfig::default());
        let before: Vec<Matrix> = l.target.params().iter().map(|p| p.value.clone()).collect();
        let ep = episode(vec![vec![0, 1, 2], vec![2, 1, 0]], vec![1.0, -1.0], 3);
        l.td_update(&[&ep], 0.9, 4, Some(10.0)).unwrap();
        let after: Vec<Matrix> = l.target.params().iter().map(|p| p.value.clone()).collect();
        assert_eq!(before, after);
    }

    struct Probe<'a> {
        learner: Learner,
        batch: Vec<&'a EpisodeRecord>,
    }

    impl HasParams for Probe<'_> {
        fn params(&self) -> Vec<&Parameter> {
            self.learner.online.params()
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            self.learner.online.params_mut()
        }
    }

    #[test]
    fn td_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let eps: Vec<EpisodeRecord> = (0..2)
            .map(|_| {
                let mut ep = episode(
                    (0..3).map(|_| (0..3).map(|_| rng.gen_range(0..3)).collect()).collect(),
                    (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    3,
                );
                for o in &mut ep.observations {
                    o.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
                }
                ep
            })
            .collect();
        for algo in Algo::ALL {
            let online = QNetwork::new(config(algo, 3, 3), &mut rng).unwrap();
            let mut learner = Learner::new(online, AdamConfig::default());
            // decouple target from online so the bootstrap term is a constant
            learner.target = QNetwork::new(config(algo, 3, 3), &mut rng).unwrap();
            let mut probe = Probe {
                learner,
                batch: eps.iter().collect(),
            };
            let err = finite_diff_check(&mut probe, |p, grad| {
                let batch = p.batch.clone();
                p.learner.td_loss(&batch, 0.9, 6, grad)
            })
            .unwrap();
            assert!(err < 1e-4, "{algo}: {err}");
        }
    }
}
