//! Verification suites behind `mcg verify`. Every oracle here is written
//! independently of the code it checks (enumeration, re-summation, finite
//! differences, exhaustive search).

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coordination::{
    greedy_action, greedy_action_trace, Aggregation, Algo, FactoredQ, JointAction, NetworkConfig, PairPayoff, QNetwork,
};
use crate::envs::{
    make_env, Env, EnvConfig, Pursuit, PursuitConfig, CLIMB_PAYOFF, ENV_NAMES,
};
use crate::error::{McgError, Result};
use crate::graph::{compose_metapath, soft_select, AdjacencyTensor, SelectionWeights, TopologyKind};
use crate::mcg::{McgGenerator, MetaPathConfig};
use crate::numerics::{finite_diff_check, Activation, Gru, HasParams, Linear, Matrix, Parameter};
use crate::training::{EpisodeRecord, Learner};

pub const SUITES: [&str; 4] = ["grads", "oracles", "envs", "reduction"];

/// Tolerance for finite-difference checks.
pub const GRAD_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}/{}: {}", self.suite, self.name, self.detail)
    }
}

fn check(suite: &'static str, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        suite,
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

pub fn run_suite(name: &str) -> Result<Vec<Check>> {
    match name {
        "grads" => grads(),
        "oracles" => oracles(),
        "envs" => envs(),
        "reduction" => reduction(),
        other => Err(McgError::Config(format!("unknown suite `{other}`"))),
    }
}

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).expect("finite")
}

fn randomize_biases(params: Vec<&mut Parameter>, rng: &mut impl Rng) {
    for p in params {
        if p.name.ends_with("bias") || p.name.contains(".b_") {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        }
    }
}

// ---------------------------------------------------------------- grads

struct Wrap<T>(T);

impl<T: HasParams> HasParams for Wrap<T> {
    fn params(&self) -> Vec<&Parameter> {
        self.0.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.0.params_mut()
    }
}

/// Linear loss `Σ c ⊙ out` gives upstream `c`.
fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn worst(errs: &[f64]) -> f64 {
    errs.iter().cloned().fold(0.0, f64::max)
}

fn grad_check(name: &str, errs: Vec<f64>) -> Check {
    let w = worst(&errs);
    check(
        "grads",
        name,
        w < GRAD_TOL && errs.iter().all(|e| e.is_finite()),
        format!("max relative error {w:.2e} over {} instances (tol {GRAD_TOL:.0e})", errs.len()),
    )
}

fn toy_network(algo: Algo, rng: &mut ChaCha8Rng) -> Result<QNetwork> {
    let cfg = NetworkConfig {
        algo,
        n_agents: 3,
        n_actions: 3,
        obs_dim: 4,
        embed_dim: 5,
        hidden: 4,
        mcg: MetaPathConfig {
            length: 2,
            channels: 2,
            edge_threshold: 1e-6,
        },
        mcg_bypass: false,
        activation: Activation::Tanh,
        topologies: vec![TopologyKind::Full, TopologyKind::Line],
        dynamic_layers: None,
        dcg_topology: TopologyKind::Full,
    };
    let mut net = QNetwork::new(cfg, rng)?;
    randomize_biases(net.params_mut(), rng);
    Ok(net)
}

fn toy_batch(rng: &mut ChaCha8Rng) -> Vec<EpisodeRecord> {
    (0..2)
        .map(|_| {
            let len = 3;
            EpisodeRecord {
                observations: (0..=len).map(|_| random_matrix(rng, 3, 4, 1.0)).collect(),
                graphs: vec![None; len + 1],
                actions: (0..len).map(|_| JointAction((0..3).map(|_| rng.gen_range(0..3)).collect())).collect(),
                rewards: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                terminated: (0..len).map(|t| t == len - 1).collect(),
                metric: 0.0,
            }
        })
        .collect()
}

pub fn grads() -> Result<Vec<Check>> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6ad5);
    let mut out = Vec::new();

    let mut errs = Vec::new();
    for _ in 0..10 {
        let (i, o, r) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..5));
        let mut m = Wrap(Linear::new("l", i, o, &mut rng));
        randomize_biases(m.params_mut(), &mut rng);
        let x = random_matrix(&mut rng, r, i, 1.0);
        let c = random_matrix(&mut rng, r, o, 1.0);
        errs.push(finite_diff_check(&mut m, |m, g| {
            let y = m.0.run(&x, g)?;
            if g {
                m.0.backward(&c)?;
            }
            Ok(dot(&y, &c))
        })?);
    }
    out.push(grad_check("linear", errs));

    let mut errs = Vec::new();
    for _ in 0..10 {
        let (i, h) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let mut m = Wrap(Gru::new("g", i, h, &mut rng));
        randomize_biases(m.params_mut(), &mut rng);
        let xs: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut rng, 2, i, 1.0)).collect();
        let cs: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut rng, 2, h, 1.0)).collect();
        errs.push(finite_diff_check(&mut m, |m, g| {
            let mut hs = Matrix::zeros(2, h);
            let mut loss = 0.0;
            for t in 0..3 {
                hs = m.0.run(&xs[t], &hs, g)?;
                loss += dot(&hs, &cs[t]);
            }
            if g {
                let mut carry = Matrix::zeros(2, h);
                for t in (0..3).rev() {
                    let mut dh = cs[t].clone();
                    dh.add_assign(&carry)?;
                    carry = m.0.backward(&dh)?.1;
                }
            }
            Ok(loss)
        })?);
    }
    out.push(grad_check("gru_bptt", errs));

    for activation in [Activation::Relu, Activation::Tanh] {
        let mut errs = Vec::new();
        for _ in 0..10 {
            let n = rng.gen_range(2..6);
            let d = rng.gen_range(1..5);
            let cfg = MetaPathConfig {
                length: rng.gen_range(1..4),
                channels: rng.gen_range(1..3),
                edge_threshold: 1e-6,
            };
            let a = AdjacencyTensor::from_topologies(&[TopologyKind::Full, TopologyKind::Cycle], n)?.append_identity()?;
            let mut m = Wrap(McgGenerator::new(cfg, 3, d, activation, false, &mut rng)?);
            let x = random_matrix(&mut rng, n, d, 1.0);
            let c = random_matrix(&mut rng, n, cfg.channels * d, 1.0);
            errs.push(finite_diff_check(&mut m, |m, g| {
                let o = m.0.run(&a, &x, g)?;
                if g {
                    m.0.generate_backward(&c)?;
                }
                Ok(dot(&o.z, &c))
            })?);
        }
        out.push(grad_check(&format!("mcg_generator_{}", activation_name(activation)), errs));
    }

    let batch = toy_batch(&mut rng);
    for algo in Algo::ALL {
        let online = toy_network(algo, &mut rng)?;
        let mut learner = Learner::new(online, Default::default());
        learner.target = toy_network(algo, &mut rng)?;
        let mut m = Wrap(learner);
        let refs: Vec<&EpisodeRecord> = batch.iter().collect();
        let err = finite_diff_check(&mut m, |m, g| m.0.td_loss(&refs, 0.9, 6, g))?;
        out.push(grad_check(&format!("td_loss_{algo}"), vec![err]));
    }

    let secs = start.elapsed().as_secs_f64();
    out.push(check("grads", "runtime", secs < 120.0, format!("{secs:.1}s (limit 120s)")));
    Ok(out)
}

impl HasParams for Learner {
    fn params(&self) -> Vec<&Parameter> {
        self.online.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.online.params_mut()
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

// ---------------------------------------------------------------- oracles

/// `true` iff a walk `j → … → i` exists whose `h`-th hop uses type `types[h]`.
pub fn typed_reachability(layers: &[Matrix], types: &[usize], n: usize) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for (j, row) in reach.iter_mut().enumerate() {
        // walk forward hop by hop from j by explicit enumeration of node sequences
        let mut frontier = vec![j];
        for &t in types {
            let mut next = Vec::new();
            for &u in &frontier {
                for v in 0..n {
                    // edge u -> v of type t is stored at layers[t][v][u]
                    if layers[t].get(v, u) != 0.0 {
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        for i in frontier {
            row[i] = true;
        }
    }
    // reach[j][i] -> transpose to [i][j]
    let mut out = vec![vec![false; n]; n];
    for j in 0..n {
        for i in 0..n {
            out[i][j] = reach[j][i];
        }
    }
    out
}

pub fn composition_oracle(instances: usize, seed: u64) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=3);
        let l = rng.gen_range(1..=3);
        let layers: Vec<Matrix> = (0..k)
            .map(|_| {
                let mut m = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        if rng.gen_bool(0.35) {
                            m.set(i, j, 1.0);
                        }
                    }
                }
                m
            })
            .collect();
        let tensor = AdjacencyTensor::new(n, layers.clone())?;
        let types: Vec<usize> = (0..l).map(|_| rng.gen_range(0..k)).collect();
        let mut logits = Matrix::zeros(l, k);
        for (s, &t) in types.iter().enumerate() {
            for c in 0..k {
                logits.set(s, c, if c == t { 40.0 } else { -40.0 });
            }
        }
        let sel = SelectionWeights::from_logits(l, 1, logits)?;
        let selected: Vec<Matrix> = (0..l).map(|s| soft_select(&tensor, &sel, s, 0)).collect::<Result<_>>()?;
        let a_m = compose_metapath(&selected)?;
        let reach = typed_reachability(&layers, &types, n);
        let ok = (0..n).all(|i| (0..n).all(|j| (a_m.get(i, j) > 0.5) == reach[i][j]));
        if !ok {
            failures += 1;
        }
    }
    Ok((instances - failures, instances))
}

fn random_factored(rng: &mut ChaCha8Rng, n: usize, actions: Vec<usize>, edges: Vec<(usize, usize)>) -> FactoredQ {
    let utilities = actions.iter().map(|&a| (0..a).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let payoffs = edges
        .iter()
        .map(|&(i, j)| PairPayoff {
            forward: (0..actions[i] * actions[j]).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            reverse: (0..actions[i] * actions[j]).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        })
        .collect();
    let _ = n;
    FactoredQ::new(utilities, edges, payoffs, Aggregation::Mean).expect("valid instance")
}

/// Enumerates every joint action, scoring each with `evaluate_q` so the
/// comparison with max-sum is exact.
pub fn exhaustive_max(fq: &FactoredQ) -> f64 {
    let n = fq.n();
    let sizes: Vec<usize> = (0..n).map(|i| fq.action_count(i)).collect();
    let total: usize = sizes.iter().product();
    let mut best = f64::NEG_INFINITY;
    for mut code in 0..total {
        let a: Vec<usize> = sizes
            .iter()
            .map(|&s| {
                let v = code % s;
                code /= s;
                v
            })
            .collect();
        best = best.max(fq.evaluate_q(&JointAction(a)).expect("valid action"));
    }
    best
}

/// Direct re-summation of the mean-aggregated value from the raw tables.
pub fn resum(fq: &FactoredQ, a: &[usize]) -> f64 {
    let n = fq.n() as f64;
    let mut util = 0.0;
    for (i, u) in fq.utilities().iter().enumerate() {
        util += u[a[i]];
    }
    let m = fq.edges().len();
    let mut pay = 0.0;
    for ((i, j), p) in fq.edges().iter().zip(fq.payoffs()) {
        let (ai, aj) = (a[*i], a[*j]);
        pay += p.forward[ai * fq.action_count(*j) + aj];
        pay += p.reverse[aj * fq.action_count(*i) + ai];
    }
    match fq.aggregation() {
        Aggregation::Mean if m > 0 => util / n + pay / (2.0 * m as f64),
        Aggregation::Mean => util / n,
        Aggregation::Sum | Aggregation::Independent => util,
    }
}

pub fn oracles() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let start = Instant::now();
    let (ok, total) = composition_oracle(200, 0xc0de)?;
    let secs = start.elapsed().as_secs_f64();
    out.push(check(
        "oracles",
        "metapath_reachability",
        ok == total && secs < 60.0,
        format!("{ok}/{total} supports equal typed-path reachability ({secs:.2}s)"),
    ));

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a11);
    let mut exact = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|c| (rng.gen_range(0..c), c)).collect();
        let fq = random_factored(&mut rng, n, actions, edges);
        let got = fq.evaluate_q(&greedy_action(&fq, 2 * n))?;
        if got == exhaustive_max(&fq) {
            exact += 1;
        }
    }
    out.push(check(
        "oracles",
        "maxsum_tree_exact",
        exact == 100,
        format!("{exact}/100 tree instances match the exhaustive maximum exactly"),
    ));

    let mut monotone = 0;
    for _ in 0..100 {
        let n = rng.gen_range(3..=6);
        let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n))).collect();
        if n > 3 && rng.gen_bool(0.5) {
            edges.push((0, 2));
        }
        edges.sort_unstable();
        edges.dedup();
        let fq = random_factored(&mut rng, n, actions, edges);
        let trace = greedy_action_trace(&fq, 2 * n);
        let mono = trace.best_per_round.windows(2).all(|w| w[1] >= w[0]);
        let consistent = fq.evaluate_q(&trace.action)? == trace.value;
        if mono && consistent {
            monotone += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    out.push(check(
        "oracles",
        "maxsum_cyclic_anytime",
        monotone == 100 && secs < 120.0,
        format!("{monotone}/100 cyclic instances have non-decreasing anytime values ({secs:.2}s)"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(0xfac7);
    let mut worst_err: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.5) {
                    edges.push((i, j));
                }
            }
        }
        let fq = random_factored(&mut rng, n, actions.clone(), edges);
        let a: Vec<usize> = actions.iter().map(|&k| rng.gen_range(0..k)).collect();
        let err = (fq.evaluate_q(&JointAction(a.clone()))? - resum(&fq, &a)).abs();
        worst_err = worst_err.max(err);
    }
    out.push(check(
        "oracles",
        "factorization_resum",
        worst_err <= 1e-12,
        format!("max |evaluate_q - resum| = {worst_err:.1e} over 100 instances (tol 1e-12)"),
    ));
    Ok(out)
}

// ---------------------------------------------------------------- envs

fn reward_allowed(env: &str, r: f64, spec_agents: usize) -> bool {
    let integral = r.fract() == 0.0;
    match env {
        "gather" => [10.0, 5.0, -5.0, 0.0].contains(&r),
        "disperse" => r <= 0.0 && integral && r >= -(spec_agents as f64),
        "pursuit" => integral,
        "hallway" => r == 0.0 || r == 1.0 || (r <= -1.0 && (2.0 * r).fract() == 0.0),
        "climb" => CLIMB_PAYOFF.iter().flatten().any(|&v| v == r),
        _ => false,
    }
}

/// Random-action contract run: reward sets, observation shapes, termination
/// latch and episode limits. Returns the first violation, if any.
pub fn env_contract(name: &str, steps: usize, seed: u64) -> Result<Option<String>> {
    let cfg = EnvConfig {
        name: Some(name.to_string()),
        ..EnvConfig::default()
    };
    let mut env = make_env(&cfg, seed)?;
    let spec = env.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut obs = env.reset();
    let mut t = 0;
    for _ in 0..steps {
        if obs.shape() != (spec.n_agents, spec.obs_dim) {
            return Ok(Some(format!("observation shape {:?}", obs.shape())));
        }
        if let Some(k) = spec.graph_layers {
            let g = env.interaction_graphs().ok_or_else(|| McgError::state("missing graphs"))?;
            if g.n() != spec.n_agents || g.k() != k {
                return Ok(Some("graph dimensions changed".into()));
            }
            for layer in g.layers() {
                for i in 0..spec.n_agents {
                    if layer.get(i, i) != 0.0 {
                        return Ok(Some("graph layer has a self loop".into()));
                    }
                    for j in 0..spec.n_agents {
                        if layer.get(i, j) != layer.get(j, i) {
                            return Ok(Some("graph layer is not symmetric".into()));
                        }
                    }
                }
            }
        }
        let a = JointAction((0..spec.n_agents).map(|_| rng.gen_range(0..spec.n_actions)).collect());
        let out = env.step(&a)?;
        t += 1;
        if !out.reward.is_finite() || !reward_allowed(name, out.reward, spec.n_agents) {
            return Ok(Some(format!("reward {} outside the allowed set", out.reward)));
        }
        if t > spec.episode_limit {
            return Ok(Some(format!("episode exceeded limit {}", spec.episode_limit)));
        }
        obs = out.observations;
        if out.terminated {
            if env.step(&a).is_ok() {
                return Ok(Some("step after termination succeeded".into()));
            }
            obs = env.reset();
            t = 0;
        }
    }
    Ok(None)
}

/// Two instances with the same seed must produce identical trajectories.
pub fn env_determinism(name: &str, seed: u64) -> Result<bool> {
    let cfg = EnvConfig {
        name: Some(name.to_string()),
        ..EnvConfig::default()
    };
    let mut a = make_env(&cfg, seed)?;
    let mut b = make_env(&cfg, seed)?;
    let spec = a.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let (oa, ob) = (a.reset(), b.reset());
        if oa.data().iter().map(|v| v.to_bits()).ne(ob.data().iter().map(|v| v.to_bits())) {
            return Ok(false);
        }
        loop {
            let act = JointAction((0..spec.n_agents).map(|_| rng.gen_range(0..spec.n_actions)).collect());
            let (ra, rb) = (a.step(&act)?, b.step(&act)?);
            if ra != rb || a.interaction_graphs() != b.interaction_graphs() {
                return Ok(false);
            }
            if ra.terminated {
                break;
            }
        }
    }
    Ok(true)
}

fn pursuit_conservation(steps: usize, seed: u64) -> Result<bool> {
    let cfg = PursuitConfig::default();
    let initial = cfg.prey;
    let mut env = Pursuit::new(cfg, ChaCha8Rng::seed_from_u64(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    env.reset();
    for _ in 0..steps {
        // bias towards catch so captures actually happen
        let a = JointAction((0..10).map(|_| if rng.gen_bool(0.4) { 5 } else { rng.gen_range(0..5) }).collect());
        let out = env.step(&a)?;
        if env.caught() + env.prey().len() != initial {
            return Ok(false);
        }
        if out.terminated {
            env.reset();
        }
    }
    Ok(true)
}

pub fn envs() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in ENV_NAMES {
        let violation = env_contract(name, 10_000, 17)?;
        out.push(check(
            "envs",
            format!("{name}_contract"),
            violation.is_none(),
            violation.unwrap_or_else(|| "10000 random steps, no violations".into()),
        ));
        let det = env_determinism(name, 23)?;
        out.push(check(
            "envs",
            format!("{name}_seeded_reset"),
            det,
            if det { "bitwise identical across instances" } else { "trajectories diverged" },
        ));
    }
    let conserved = pursuit_conservation(10_000, 5)?;
    out.push(check(
        "envs",
        "pursuit_prey_conservation",
        conserved,
        "caught + remaining = initial at every step",
    ));
    Ok(out)
}

// ---------------------------------------------------------------- reduction

/// DMCG in bypass mode over a single full topology against DCG over the full
/// graph, with every shared parameter copied across. Returns the largest
/// difference over utilities, payoffs and joint values.
pub fn reduction_gap(inputs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4;
    let base = |algo| NetworkConfig {
        algo,
        n_agents: n,
        n_actions: 3,
        obs_dim: 5,
        embed_dim: 6,
        hidden: 6,
        mcg: MetaPathConfig::default(),
        mcg_bypass: true,
        activation: Activation::Relu,
        topologies: vec![TopologyKind::Full],
        dynamic_layers: None,
        dcg_topology: TopologyKind::Full,
    };
    let mut dcg = QNetwork::new(base(Algo::Dcg), &mut rng)?;
    randomize_biases(dcg.params_mut(), &mut rng);
    let mut dmcg = QNetwork::new(base(Algo::Dmcg), &mut rng)?;
    for p in dmcg.params_mut() {
        if let Some(src) = dcg.params().into_iter().find(|q| q.name == p.name) {
            p.value = src.value.clone();
        }
    }
    let mut gap: f64 = 0.0;
    for _ in 0..inputs {
        let obs = random_matrix(&mut rng, n, 5, 1.0);
        let h = random_matrix(&mut rng, n, 6, 1.0);
        let prev = JointAction((0..n).map(|_| rng.gen_range(0..3)).collect());
        let (ha, qa) = dcg.step(&h, &obs, Some(&prev), None, false)?;
        let (hb, qb) = dmcg.step(&h, &obs, Some(&prev), None, false)?;
        if qa.edges() != qb.edges() {
            return Ok(f64::INFINITY);
        }
        gap = gap.max(ha.sub(&hb)?.max_abs());
        for (ua, ub) in qa.utilities().iter().zip(qb.utilities()) {
            for (x, y) in ua.iter().zip(ub) {
                gap = gap.max((x - y).abs());
            }
        }
        for (pa, pb) in qa.payoffs().iter().zip(qb.payoffs()) {
            for (x, y) in pa.forward.iter().chain(&pa.reverse).zip(pb.forward.iter().chain(&pb.reverse)) {
                gap = gap.max((x - y).abs());
            }
        }
        let a = JointAction((0..n).map(|_| rng.gen_range(0..3)).collect());
        gap = gap.max((qa.evaluate_q(&a)? - qb.evaluate_q(&a)?).abs());
    }
    Ok(gap)
}

pub fn reduction() -> Result<Vec<Check>> {
    let gap = reduction_gap(50, 0x7ed)?;
    Ok(vec![check(
        "reduction",
        "bypass_full_equals_dcg",
        gap <= 1e-12,
        format!("max |Q_dmcg - Q_dcg| = {gap:.1e} over 50 inputs (tol 1e-12)"),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for s in SUITES {
            for c in run_suite(s).unwrap() {
                assert!(c.passed, "{c}");
            }
        }
    }

    #[test]
    fn unknown_suite_is_config_error() {
        assert!(matches!(run_suite("nope"), Err(McgError::Config(_))));
    }

    #[test]
    fn reachability_oracle_on_a_path() {
        // 0 -> 1 of type 0, 1 -> 2 of type 1
        let mut a = Matrix::zeros(3, 3);
        a.set(1, 0, 1.0);
        let mut b = Matrix::zeros(3, 3);
        b.set(2, 1, 1.0);
        let r = typed_reachability(&[a, b], &[0, 1], 3);
        assert!(r[2][0]);
        assert_eq!(r.iter().flatten().filter(|&&x| x).count(), 1);
    }

    #[test]
    fn corrupted_reward_is_flagged() {
        assert!(!reward_allowed("gather", 7.0, 3));
        assert!(!reward_allowed("hallway", -0.75, 4));
        assert!(reward_allowed("hallway", -1.0, 4));
    }
}
