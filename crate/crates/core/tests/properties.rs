use mcg_core::config::RunConfig;
use mcg_core::coordination::{greedy_action, Aggregation, FactoredQ, JointAction, PairPayoff};
use mcg_core::graph::{compose_metapath, normalize, soft_select, AdjacencyTensor, SelectionWeights};
use mcg_core::mcg::{McgGenerator, MetaPathConfig};
use mcg_core::numerics::{adam_step, softmax, Activation, AdamConfig, AdamState, Matrix, Parameter};
use mcg_core::training::{EpisodeRecord, ReplayBuffer};
use mcg_core::verify::{env_contract, env_determinism};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn random_tensor(rng: &mut impl Rng, n: usize, k: usize) -> AdjacencyTensor {
    let layers = (0..k)
        .map(|_| {
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.5) {
                        m.set(i, j, 1.0);
                    }
                }
            }
            m
        })
        .collect();
    AdjacencyTensor::new(n, layers).unwrap().append_identity().unwrap()
}

fn random_factored(rng: &mut impl Rng, n: usize, density: f64) -> FactoredQ {
    let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
    let utilities = actions
        .iter()
        .map(|&k| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let mut edges = Vec::new();
    let mut payoffs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                let size = actions[i] * actions[j];
                edges.push((i, j));
                payoffs.push(PairPayoff {
                    forward: (0..size).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    reverse: (0..size).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                });
            }
        }
    }
    FactoredQ::new(utilities, edges, payoffs, Aggregation::Mean).unwrap()
}

/// Random spanning tree: agent `i > 0` links to an earlier agent. Max-sum is
/// exact on these, so greedy values can be compared across relabelings.
fn random_tree_factored(rng: &mut impl Rng, n: usize) -> FactoredQ {
    let base = random_factored(rng, n, 0.0);
    let mut edges = Vec::new();
    let mut payoffs = Vec::new();
    for j in 1..n {
        let i = rng.gen_range(0..j);
        let size = base.action_count(i) * base.action_count(j);
        edges.push((i, j));
        payoffs.push(PairPayoff {
            forward: (0..size).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            reverse: (0..size).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        });
    }
    FactoredQ::new(base.utilities().to_vec(), edges, payoffs, Aggregation::Mean).unwrap()
}

/// New agent `perm[i]` is old agent `i`; flipped edges swap table orientation.
fn permute_factored(fq: &FactoredQ, perm: &[usize]) -> FactoredQ {
    let n = fq.n();
    let mut utilities = vec![Vec::new(); n];
    for (i, u) in fq.utilities().iter().enumerate() {
        utilities[perm[i]] = u.clone();
    }
    let mut pairs: Vec<((usize, usize), PairPayoff)> = fq
        .edges()
        .iter()
        .zip(fq.payoffs())
        .map(|(&(i, j), p)| {
            let (u, v) = (perm[i], perm[j]);
            if u < v {
                ((u, v), p.clone())
            } else {
                (
                    (v, u),
                    PairPayoff {
                        forward: p.reverse.clone(),
                        reverse: p.forward.clone(),
                    },
                )
            }
        })
        .collect();
    pairs.sort_by_key(|p| p.0);
    let (edges, payoffs) = pairs.into_iter().unzip();
    FactoredQ::new(utilities, edges, payoffs, fq.aggregation()).unwrap()
}

fn permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(
        v in prop::collection::vec(-50.0f64..50.0, 1..12),
        c in -100.0f64..100.0,
    ) {
        let p = softmax(&v).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn matmul_is_associative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, 5, 5, -1.0, 1.0);
        let b = random_matrix(&mut rng, 5, 5, -1.0, 1.0);
        let c = random_matrix(&mut rng, 5, 5, -1.0, 1.0);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(left.sub(&right).unwrap().max_abs() <= 5e-10);
    }

    #[test]
    fn adam_with_zero_gradient_is_identity(seed in any::<u64>(), steps in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Parameter::new("w", random_matrix(&mut rng, 3, 4, -5.0, 5.0));
        let before = p.value.clone();
        let mut states = vec![AdamState::for_param(&p)];
        for _ in 0..steps {
            adam_step(&mut [&mut p], &mut states, AdamConfig::default()).unwrap();
        }
        prop_assert_eq!(p.value, before);
        prop_assert_eq!(states[0].step, steps as u64);
    }

    #[test]
    fn soft_select_is_a_convex_combination(seed in any::<u64>(), n in 2usize..6, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers: Vec<Matrix> = (0..k).map(|_| random_matrix(&mut rng, n, n, 0.0, 3.0)).collect();
        let a = AdjacencyTensor::new(n, layers).unwrap();
        let sel = SelectionWeights::from_logits(1, 1, random_matrix(&mut rng, 1, k, -4.0, 4.0)).unwrap();
        let out = soft_select(&a, &sel, 0, 0).unwrap();
        for i in 0..n {
            for j in 0..n {
                let vals: Vec<f64> = a.layers().iter().map(|l| l.get(i, j)).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = out.get(i, j);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn identity_chain_composes_to_identity(n in 1usize..7, l in 1usize..5) {
        let chain = vec![Matrix::identity(n); l];
        prop_assert_eq!(compose_metapath(&chain).unwrap(), Matrix::identity(n));
    }

    #[test]
    fn normalized_rows_sum_to_one(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, n, n, 0.0, 10.0);
        let norm = normalize(&m).unwrap();
        for s in norm.row_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn alpha_argmax_survives_row_shift(seed in any::<u64>(), k in 2usize..6, c in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = random_matrix(&mut rng, 2, k, -3.0, 3.0);
        let mut shifted = logits.clone();
        shifted.row_mut(1).iter_mut().for_each(|v| *v += c);
        let argmax = |v: Vec<f64>| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let a = SelectionWeights::from_logits(2, 1, logits).unwrap();
        let b = SelectionWeights::from_logits(2, 1, shifted).unwrap();
        prop_assert_eq!(argmax(a.alpha(1, 0).unwrap()), argmax(b.alpha(1, 0).unwrap()));
        prop_assert_eq!(a.alpha(0, 0).unwrap(), b.alpha(0, 0).unwrap());
    }

    #[test]
    fn generator_is_deterministic_with_o_times_d_columns(
        seed in any::<u64>(),
        n in 2usize..6,
        k in 1usize..4,
        l in 1usize..4,
        o in 1usize..4,
        d in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = MetaPathConfig { length: l, channels: o, edge_threshold: 1e-6 };
        let a = random_tensor(&mut rng, n, k);
        let x = random_matrix(&mut rng, n, d, -1.0, 1.0);
        let mut gen = McgGenerator::new(cfg, a.k(), d, Activation::Relu, false, &mut rng).unwrap();
        let first = gen.generate(&a, &x).unwrap();
        let second = gen.generate(&a, &x).unwrap();
        prop_assert_eq!(first.z.cols(), o * d);
        prop_assert_eq!(first.z.rows(), n);
        prop_assert!(first.z.data().iter().zip(second.z.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        prop_assert_eq!(first.edges, second.edges);
        prop_assert!(first.channels.iter().flat_map(|c| c.data()).all(|&v| v >= 0.0));
    }

    #[test]
    fn bypass_is_identity_on_features(seed in any::<u64>(), n in 2usize..6, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, n, 2);
        let x = random_matrix(&mut rng, n, d, -1.0, 1.0);
        let mut gen = McgGenerator::new(MetaPathConfig::default(), a.k(), d, Activation::Relu, true, &mut rng).unwrap();
        let out = gen.generate(&a, &x).unwrap();
        prop_assert_eq!(&out.z, &x);
        let layer = a.layer(1);
        let mut expected = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if layer.get(i, j) > 1e-6 || layer.get(j, i) > 1e-6 {
                    expected.push((i, j));
                }
            }
        }
        prop_assert_eq!(out.edges, expected);
    }

    #[test]
    fn generator_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, n, 2);
        let x = random_matrix(&mut rng, n, 3, -1.0, 1.0);
        let perm = permutation(&mut rng, n);
        let mut gen = McgGenerator::new(MetaPathConfig::default(), a.k(), 3, Activation::Tanh, false, &mut rng).unwrap();
        let base = gen.generate(&a, &x).unwrap();
        let mut px = Matrix::zeros(n, 3);
        for i in 0..n {
            px.row_mut(perm[i]).copy_from_slice(x.row(i));
        }
        let moved = gen.generate(&a.permuted(&perm), &px).unwrap();
        for i in 0..n {
            for (u, v) in base.z.row(i).iter().zip(moved.z.row(perm[i])) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
        let mut relabeled: Vec<(usize, usize)> = base
            .edges
            .iter()
            .map(|&(i, j)| (perm[i].min(perm[j]), perm[i].max(perm[j])))
            .collect();
        relabeled.sort_unstable();
        prop_assert_eq!(relabeled, moved.edges);
    }

    #[test]
    fn evaluate_q_ignores_edge_order(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fq = random_factored(&mut rng, n, 0.6);
        let mut order: Vec<usize> = (0..fq.edges().len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut edges = Vec::new();
        let mut payoffs = Vec::new();
        for &e in &order {
            edges.push(fq.edges()[e]);
            payoffs.push(fq.payoffs()[e].clone());
        }
        let shuffled = FactoredQ::new(fq.utilities().to_vec(), edges, payoffs, Aggregation::Mean).unwrap();
        let a = JointAction((0..n).map(|i| rng.gen_range(0..fq.action_count(i))).collect());
        prop_assert!((fq.evaluate_q(&a).unwrap() - shuffled.evaluate_q(&a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn utility_shift_moves_value_and_keeps_argmax(seed in any::<u64>(), n in 1usize..7, c in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fq = random_tree_factored(&mut rng, n);
        let shifted_utils: Vec<Vec<f64>> = fq.utilities().iter().map(|u| u.iter().map(|v| v + c).collect()).collect();
        let shifted = FactoredQ::new(shifted_utils, fq.edges().to_vec(), fq.payoffs().to_vec(), Aggregation::Mean).unwrap();
        let a = JointAction((0..n).map(|i| rng.gen_range(0..fq.action_count(i))).collect());
        prop_assert!((shifted.evaluate_q(&a).unwrap() - fq.evaluate_q(&a).unwrap() - c).abs() <= 1e-12);
        let g = greedy_action(&fq, 2 * n);
        let h = greedy_action(&shifted, 2 * n);
        // equal actions, or an exact tie in value
        prop_assert!(g == h || (fq.evaluate_q(&g).unwrap() - fq.evaluate_q(&h).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn greedy_action_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fq = random_tree_factored(&mut rng, n);
        let perm = permutation(&mut rng, n);
        let moved = permute_factored(&fq, &perm);
        let g = greedy_action(&fq, 2 * n);
        let h = greedy_action(&moved, 2 * n);
        let mut mapped = vec![0; n];
        for i in 0..n {
            mapped[perm[i]] = g.0[i];
        }
        let mapped = JointAction(mapped);
        prop_assert!((moved.evaluate_q(&mapped).unwrap() - fq.evaluate_q(&g).unwrap()).abs() <= 1e-12);
        prop_assert!(mapped == h || (moved.evaluate_q(&h).unwrap() - moved.evaluate_q(&mapped).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn replay_stays_bounded_and_never_returns_evicted(
        capacity in 1usize..20,
        pushes in 1usize..60,
        batch in 1usize..10,
        seed in any::<u64>(),
    ) {
        let mut buf = ReplayBuffer::new(capacity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ep = EpisodeRecord {
            observations: vec![Matrix::zeros(1, 1); 2],
            graphs: vec![None; 2],
            actions: vec![JointAction(vec![0])],
            rewards: vec![0.0],
            terminated: vec![true],
            metric: 0.0,
        };
        for p in 0..pushes {
            let id = buf.push(ep.clone());
            prop_assert_eq!(id, p as u64);
            prop_assert!(buf.len() <= capacity);
            let oldest = (p + 1).saturating_sub(capacity) as u64;
            let sample = buf.sample_with_ids(batch, &mut rng);
            prop_assert_eq!(sample.len(), batch.min(buf.len()));
            prop_assert!(sample.iter().all(|(i, _)| *i >= oldest && *i <= p as u64));
        }
    }

    #[test]
    fn resolved_config_round_trips(
        lr in 1e-6f64..1e-1,
        steps in 1u64..1_000_000,
        threshold in 0.0f64..1.0,
        env in prop::sample::select(vec!["gather", "disperse", "pursuit", "hallway", "climb"]),
        algo in prop::sample::select(vec!["iql", "vdn", "dcg", "dmcg", "dmcg_vdn"]),
    ) {
        let text = format!("algo = \"{algo}\"\n[env]\nname = \"{env}\"\n");
        let cfg = RunConfig::parse(&text, &[
            format!("train.lr={lr:e}"),
            format!("train.total_steps={steps}"),
            format!("mcg.edge_threshold={threshold:e}"),
        ]).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap(), &[]).unwrap();
        prop_assert_eq!(cfg, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn environments_keep_their_contracts(
        seed in any::<u64>(),
        env in prop::sample::select(vec!["gather", "disperse", "pursuit", "hallway", "climb"]),
    ) {
        prop_assert_eq!(env_contract(env, 1500, seed).unwrap(), None);
        prop_assert!(env_determinism(env, seed).unwrap());
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            RunConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn untrained_climb_policy_lands_near_the_table_mean() {
    // Shared parameters and a common observation make the two agents agree
    // more often than uniform play would, so the average sits above the
    // table mean. "Near" is checked as within one table standard deviation.
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/climb.toml");
    let cfg = RunConfig::load(&path, &[]).unwrap();
    let entries: Vec<f64> = mcg_core::envs::CLIMB_PAYOFF.iter().flatten().cloned().collect();
    let mean = entries.iter().sum::<f64>() / 9.0;
    assert!((mean + 31.0 / 9.0).abs() < 1e-12);
    let sd = (entries.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9.0).sqrt();

    let n = 300;
    let returns: Vec<f64> = (0..n as u64)
        .map(|seed| {
            let mut net = mcg_core::runner::build_network(&cfg, seed).unwrap();
            mcg_core::training::evaluate_seeded(&cfg.env, seed, &mut net, 1, cfg.train.maxsum_iterations)
                .unwrap()
                .return_mean
        })
        .collect();
    assert!(returns.iter().all(|r| entries.contains(r)));
    let avg = returns.iter().sum::<f64>() / n as f64;
    assert!((avg - mean).abs() < sd, "average untrained return {avg}, table mean {mean}");
}
