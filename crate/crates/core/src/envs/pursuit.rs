//! Predator-prey pursuit on a torus; captures need two predators.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, positive, Clock, Env, EnvSpec, StepResult, TaskMetric, MOVES};
use crate::coordination::JointAction;
use crate::error::{McgError, Result};
use crate::graph::AdjacencyTensor;
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitConfig {
    pub size: usize,
    pub predators: usize,
    pub prey: usize,
    pub episode_limit: usize,
    /// Half-width of the square observation patch and the proximity graph.
    pub view: usize,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        PursuitConfig {
            size: 10,
            predators: 10,
            prey: 5,
            episode_limit: 60,
            view: 2,
        }
    }
}

pub const CATCH: usize = 5;

#[derive(Clone, Debug)]
pub struct Pursuit {
    cfg: PursuitConfig,
    spec: EnvSpec,
    rng: ChaCha8Rng,
    clock: Clock,
    predators: Vec<(usize, usize)>,
    prey: Vec<(usize, usize)>,
    caught: usize,
}

impl Pursuit {
    pub fn new(cfg: PursuitConfig, rng: ChaCha8Rng) -> Result<Self> {
        positive("env.pursuit.predators", cfg.predators)?;
        positive("env.pursuit.prey", cfg.prey)?;
        positive("env.pursuit.episode_limit", cfg.episode_limit)?;
        if cfg.size < 3 || cfg.predators + cfg.prey > cfg.size * cfg.size {
            return Err(McgError::Config("`env.pursuit.size` too small for the population".into()));
        }
        if 2 * cfg.view + 1 > cfg.size {
            return Err(McgError::Config("`env.pursuit.view` exceeds the grid".into()));
        }
        let side = 2 * cfg.view + 1;
        Ok(Pursuit {
            spec: EnvSpec {
                name: "pursuit",
                n_agents: cfg.predators,
                n_actions: 6,
                obs_dim: 2 * side * side,
                episode_limit: cfg.episode_limit,
                metric: TaskMetric::PreyCaught,
                graph_layers: Some(2),
            },
            cfg,
            rng,
            clock: Clock::new(),
            predators: Vec::new(),
            prey: Vec::new(),
            caught: 0,
        })
    }

    pub fn predators(&self) -> &[(usize, usize)] {
        &self.predators
    }

    pub fn prey(&self) -> &[(usize, usize)] {
        &self.prey
    }

    pub fn caught(&self) -> usize {
        self.caught
    }

    pub fn set_state(&mut self, predators: Vec<(usize, usize)>, prey: Vec<(usize, usize)>) -> Result<Matrix> {
        let s = self.cfg.size;
        let mut cells: Vec<_> = predators.iter().chain(&prey).copied().collect();
        let total = cells.len();
        cells.sort_unstable();
        cells.dedup();
        if predators.len() != self.cfg.predators
            || prey.len() > self.cfg.prey
            || cells.len() != total
            || cells.iter().any(|&(x, y)| x >= s || y >= s)
        {
            return Err(McgError::arg("invalid pursuit state"));
        }
        self.clock.reset();
        self.caught = self.cfg.prey - prey.len();
        self.predators = predators;
        self.prey = prey;
        Ok(self.observations())
    }

    fn shift(&self, p: (usize, usize), d: (i64, i64)) -> (usize, usize) {
        let s = self.cfg.size as i64;
        (
            (p.0 as i64 + d.0).rem_euclid(s) as usize,
            (p.1 as i64 + d.1).rem_euclid(s) as usize,
        )
    }

    /// Signed torus offset of `b` relative to `a` along one axis.
    fn delta(&self, a: usize, b: usize) -> i64 {
        let s = self.cfg.size as i64;
        let d = (b as i64 - a as i64).rem_euclid(s);
        if d > s / 2 {
            d - s
        } else {
            d
        }
    }

    fn chebyshev(&self, a: (usize, usize), b: (usize, usize)) -> usize {
        self.delta(a.0, b.0).unsigned_abs().max(self.delta(a.1, b.1).unsigned_abs()) as usize
    }

    fn occupied(&self, p: (usize, usize)) -> bool {
        self.predators.contains(&p) || self.prey.contains(&p)
    }

    fn observations(&self) -> Matrix {
        let v = self.cfg.view as i64;
        let side = 2 * self.cfg.view + 1;
        let mut obs = Matrix::zeros(self.cfg.predators, 2 * side * side);
        for (i, &me) in self.predators.iter().enumerate() {
            let row = obs.row_mut(i);
            let mut mark = |layer: usize, p: (usize, usize)| {
                let (dx, dy) = (self.delta(me.0, p.0), self.delta(me.1, p.1));
                if dx.abs() <= v && dy.abs() <= v {
                    let cell = (dy + v) as usize * side + (dx + v) as usize;
                    row[layer * side * side + cell] = 1.0;
                }
            };
            for (j, &p) in self.predators.iter().enumerate() {
                if j != i {
                    mark(0, p);
                }
            }
            for &p in &self.prey {
                mark(1, p);
            }
        }
        obs
    }
}

impl Env for Pursuit {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Matrix {
        self.clock.reset();
        self.caught = 0;
        self.predators.clear();
        self.prey.clear();
        let s = self.cfg.size;
        for k in 0..self.cfg.predators + self.cfg.prey {
            let p = loop {
                let p = (self.rng.gen_range(0..s), self.rng.gen_range(0..s));
                if !self.occupied(p) {
                    break p;
                }
            };
            if k < self.cfg.predators {
                self.predators.push(p);
            } else {
                self.prey.push(p);
            }
        }
        self.observations()
    }

    fn step(&mut self, actions: &JointAction) -> Result<StepResult> {
        check_actions(&self.spec, actions)?;
        self.clock.begin_step("pursuit")?;
        for i in 0..self.predators.len() {
            let a = actions.0[i];
            if a < 4 {
                let target = self.shift(self.predators[i], MOVES[a]);
                if !self.occupied(target) {
                    self.predators[i] = target;
                }
            }
        }

        let mut reward = 0.0;
        let mut captured = 0;
        let mut k = 0;
        while k < self.prey.len() {
            let prey = self.prey[k];
            let catchers = self
                .predators
                .iter()
                .zip(&actions.0)
                .filter(|&(&p, &a)| a == CATCH && self.chebyshev(p, prey) == 1 && (p.0 == prey.0 || p.1 == prey.1))
                .count();
            if catchers >= 2 {
                reward += 1.0;
                captured += 1;
                self.prey.remove(k);
                continue;
            }
            if catchers == 1 {
                reward -= 1.0;
            }
            k += 1;
        }
        self.caught += captured;

        for k in 0..self.prey.len() {
            let d = MOVES[self.rng.gen_range(0..MOVES.len())];
            let target = self.shift(self.prey[k], d);
            if !self.occupied(target) {
                self.prey[k] = target;
            }
        }

        let terminated = self.prey.is_empty() || self.clock.t >= self.cfg.episode_limit;
        self.clock.done = terminated;
        Ok(StepResult {
            observations: self.observations(),
            reward,
            terminated,
            metric: captured as f64,
        })
    }

    /// Layer 0: predators within Chebyshev distance `view`. Layer 1: predators
    /// that both see at least one common prey.
    fn interaction_graphs(&self) -> Option<AdjacencyTensor> {
        let n = self.predators.len();
        let v = self.cfg.view;
        let mut near = Matrix::zeros(n, n);
        let mut shared = Matrix::zeros(n, n);
        let sees: Vec<Vec<bool>> = self
            .predators
            .iter()
            .map(|&p| self.prey.iter().map(|&q| self.chebyshev(p, q) <= v).collect())
            .collect();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if self.chebyshev(self.predators[i], self.predators[j]) <= v {
                    near.set(i, j, 1.0);
                }
                if sees[i].iter().zip(&sees[j]).any(|(a, b)| *a && *b) {
                    shared.set(i, j, 1.0);
                }
            }
        }
        Some(AdjacencyTensor::new(n, vec![near, shared]).expect("valid layers"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const STAY: usize = 4;

    fn env() -> Pursuit {
        Pursuit::new(PursuitConfig::default(), ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    /// Predators 0 and 1 flank a prey at (5,5); the rest are far away.
    fn flanked(e: &mut Pursuit) {
        let mut preds = vec![(4, 5), (6, 5)];
        preds.extend((0..8).map(|k| (k, 0)));
        e.set_state(preds, vec![(5, 5), (0, 8)]).unwrap();
    }

    #[test]
    fn two_catchers_capture() {
        let mut e = env();
        flanked(&mut e);
        let mut a = vec![STAY; 10];
        a[0] = CATCH;
        a[1] = CATCH;
        let out = e.step(&JointAction(a)).unwrap();
        assert_eq!((out.reward, out.metric), (1.0, 1.0));
        assert_eq!(e.prey().len(), 1);
        assert_eq!(e.caught(), 4);
    }

    #[test]
    fn lone_catcher_is_penalized() {
        let mut e = env();
        flanked(&mut e);
        let mut a = vec![STAY; 10];
        a[0] = CATCH;
        let out = e.step(&JointAction(a)).unwrap();
        assert_eq!((out.reward, out.metric), (-1.0, 0.0));
        assert_eq!(e.prey().len(), 2);
    }

    #[test]
    fn catch_without_prey_is_vacuous() {
        let mut e = env();
        flanked(&mut e);
        let mut a = vec![STAY; 10];
        a[5] = CATCH;
        assert_eq!(e.step(&JointAction(a)).unwrap().reward, 0.0);
    }

    #[test]
    fn proximity_layer_is_symmetric_pairwise_scan() {
        let mut e = env();
        for _ in 0..20 {
            e.reset();
            let g = e.interaction_graphs().unwrap();
            let near = g.layer(0);
            for i in 0..10 {
                assert_eq!(near.get(i, i), 0.0);
                for j in 0..10 {
                    let (a, b) = (e.predators()[i], e.predators()[j]);
                    let dx = (a.0 as i64 - b.0 as i64).rem_euclid(10).min((b.0 as i64 - a.0 as i64).rem_euclid(10));
                    let dy = (a.1 as i64 - b.1 as i64).rem_euclid(10).min((b.1 as i64 - a.1 as i64).rem_euclid(10));
                    let want = i != j && dx.max(dy) <= 2;
                    assert_eq!(near.get(i, j) == 1.0, want);
                    assert_eq!(near.get(i, j), near.get(j, i));
                }
            }
        }
    }

    #[test]
    fn adjacent_predators_are_linked() {
        let mut e = env();
        flanked(&mut e);
        let g = e.interaction_graphs().unwrap();
        assert_eq!(g.layer(0).get(0, 1), 1.0);
        assert_eq!(g.layer(0).get(1, 0), 1.0);
        assert_eq!(g.layer(1).get(0, 1), 1.0);
    }

    #[test]
    fn observation_patch_marks_neighbours() {
        let mut e = env();
        flanked(&mut e);
        let obs = e.observations();
        // predator 0 at (4,5): prey at dx=+1, predator 1 at dx=+2, same row
        assert_eq!(obs.row(0)[25 + 2 * 5 + 3], 1.0);
        assert_eq!(obs.row(0)[2 * 5 + 4], 1.0);
        assert_eq!(obs.row(0)[2 * 5 + 2], 0.0);
    }
}
