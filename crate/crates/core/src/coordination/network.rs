//! Value networks for every supported algorithm.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::AgentEncoder;
use super::factored::{Aggregation, FactoredQ, JointAction, PairPayoff};
use crate::error::{McgError, Result};
use crate::graph::{extract_edges, make_topology, AdjacencyTensor, Edge, TopologyKind};
use crate::mcg::{McgGenerator, McgOutput, MetaPathConfig};
use crate::numerics::{Activation, HasParams, Linear, Matrix, Parameter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    /// Independent per-agent Q-learning.
    Iql,
    /// Additive value decomposition.
    Vdn,
    /// Coordination graph over a static topology.
    Dcg,
    /// Coordination graph over generated meta coordination graphs.
    Dmcg,
    /// Additive decomposition on top of meta-graph node representations.
    DmcgVdn,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Iql, Algo::Vdn, Algo::Dcg, Algo::Dmcg, Algo::DmcgVdn];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Iql => "iql",
            Algo::Vdn => "vdn",
            Algo::Dcg => "dcg",
            Algo::Dmcg => "dmcg",
            Algo::DmcgVdn => "dmcg_vdn",
        }
    }

    pub fn uses_mcg(self) -> bool {
        matches!(self, Algo::Dmcg | Algo::DmcgVdn)
    }

    pub fn uses_payoffs(self) -> bool {
        matches!(self, Algo::Dcg | Algo::Dmcg)
    }

    pub fn aggregation(self) -> Aggregation {
        match self {
            Algo::Iql => Aggregation::Independent,
            Algo::Vdn | Algo::DmcgVdn => Aggregation::Sum,
            Algo::Dcg | Algo::Dmcg => Aggregation::Mean,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = McgError;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| McgError::Config(format!("unknown algo `{s}`")))
    }
}

/// Shared payoff head: `(z_i ‖ z_j) ↦ Q_ij` as a flattened `|A|×|A|` table.
///
/// The weight splits as `[W_a; W_b]`, so `Q_ij = z_i W_a + z_j W_b + b`; each
/// agent is projected once and the projections are gathered per edge.
#[derive(Clone, Debug)]
pub struct PayoffHead {
    pub linear: Linear,
    n_actions: usize,
    cache: Vec<(Matrix, Vec<Edge>)>,
}

impl PayoffHead {
    pub fn new(width: usize, n_actions: usize, rng: &mut impl Rng) -> Self {
        PayoffHead {
            linear: Linear::new("payoff", 2 * width, n_actions * n_actions, rng),
            n_actions,
            cache: Vec::new(),
        }
    }

    /// `(W_a, W_b)`: the halves acting on the first and second agent.
    fn halves(&self) -> (Matrix, Matrix) {
        let w = &self.linear.weight.value;
        let (half, cols) = (w.rows() / 2, w.cols());
        let (a, b) = w.data().split_at(half * cols);
        (
            Matrix::from_vec(half, cols, a.to_vec()).expect("sized"),
            Matrix::from_vec(half, cols, b.to_vec()).expect("sized"),
        )
    }

    /// Row `2e` holds `Q_ij`, row `2e + 1` holds `Q_ji` (from swapped inputs).
    pub fn run(&mut self, z: &Matrix, edges: &[Edge], record: bool) -> Result<Matrix> {
        if 2 * z.cols() != self.linear.inputs() {
            return Err(McgError::Dimension {
                op: "payoff",
                left: z.shape(),
                right: self.linear.weight.value.shape(),
            });
        }
        let (wa, wb) = self.halves();
        let first = z.matmul(&wa)?;
        let second = z.matmul(&wb)?;
        let bias = self.linear.bias.value.row(0);
        let mut out = Matrix::zeros(2 * edges.len(), bias.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            for (r, (p, q)) in [(2 * e, (i, j)), (2 * e + 1, (j, i))] {
                for (k, o) in out.row_mut(r).iter_mut().enumerate() {
                    *o = first.get(p, k) + second.get(q, k) + bias[k];
                }
            }
        }
        if record {
            self.cache.push((z.clone(), edges.to_vec()));
        }
        Ok(out)
    }

    pub fn tables(&self, out: &Matrix) -> Vec<PairPayoff> {
        (0..out.rows() / 2)
            .map(|e| PairPayoff {
                forward: out.row(2 * e).to_vec(),
                reverse: out.row(2 * e + 1).to_vec(),
            })
            .collect()
    }

    pub fn backward(&mut self, upstream: &Matrix) -> Result<Matrix> {
        let (z, edges) = self
            .cache
            .pop()
            .ok_or_else(|| McgError::state("payoff backward without forward"))?;
        let cols = upstream.cols();
        let mut dfirst = Matrix::zeros(z.rows(), cols);
        let mut dsecond = Matrix::zeros(z.rows(), cols);
        for (e, &(i, j)) in edges.iter().enumerate() {
            for (r, (p, q)) in [(2 * e, (i, j)), (2 * e + 1, (j, i))] {
                for (k, &g) in upstream.row(r).iter().enumerate() {
                    dfirst.row_mut(p)[k] += g;
                    dsecond.row_mut(q)[k] += g;
                }
            }
        }
        self.linear.bias.accumulate(&upstream.col_sums())?;
        let ga = z.matmul_tn(&dfirst)?;
        let gb = z.matmul_tn(&dsecond)?;
        let grad = self.linear.weight.grad.data_mut();
        let (top, bottom) = grad.split_at_mut(ga.data().len());
        top.iter_mut().zip(ga.data()).for_each(|(o, v)| *o += v);
        bottom.iter_mut().zip(gb.data()).for_each(|(o, v)| *o += v);
        let (wa, wb) = self.halves();
        let mut dz = dfirst.matmul_nt(&wa)?;
        dz.add_assign(&dsecond.matmul_nt(&wb)?)?;
        Ok(dz)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

/// Utility and payoff heads.
#[derive(Clone, Debug)]
pub struct Heads {
    pub utility: Linear,
    pub payoff: Option<PayoffHead>,
}

impl Heads {
    pub fn new(width: usize, n_actions: usize, payoffs: bool, rng: &mut impl Rng) -> Self {
        Heads {
            utility: Linear::new("utility", width, n_actions, rng),
            payoff: payoffs.then(|| PayoffHead::new(width, n_actions, rng)),
        }
    }

    pub fn clear_cache(&mut self) {
        self.utility.clear_cache();
        if let Some(p) = &mut self.payoff {
            p.clear_cache();
        }
    }
}

impl HasParams for Heads {
    fn params(&self) -> Vec<&Parameter> {
        let mut v = self.utility.params();
        if let Some(p) = &self.payoff {
            v.extend(p.linear.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.utility.params_mut();
        if let Some(p) = &mut self.payoff {
            v.extend(p.linear.params_mut());
        }
        v
    }
}

/// Assembles the factored value for one step.
///
/// Graph modes read node representations from `mcg` (DMCG) or raw features
/// `x` (DCG); DMCG uses the generated edge set, DCG the static one. VDN and
/// DMCG+VDN use utilities only with sum aggregation; IQL keeps per-agent
/// values.
pub fn build_factored_q(
    algo: Algo,
    heads: &mut Heads,
    x: &Matrix,
    mcg: Option<&McgOutput>,
    static_edges: &[Edge],
    record: bool,
) -> Result<FactoredQ> {
    let features = if algo.uses_mcg() {
        &mcg
            .ok_or_else(|| McgError::Config(format!("{algo} requires a generated meta coordination graph")))?
            .z
    } else {
        x
    };
    let util = heads.utility.run(features, record)?;
    let utilities: Vec<Vec<f64>> = (0..util.rows()).map(|i| util.row(i).to_vec()).collect();
    let (edges, payoffs) = if algo.uses_payoffs() {
        let edges: Vec<Edge> = match algo {
            Algo::Dmcg => mcg.expect("checked above").edges.clone(),
            _ => static_edges.to_vec(),
        };
        let head = heads
            .payoff
            .as_mut()
            .ok_or_else(|| McgError::Config(format!("{algo} requires a payoff head")))?;
        let out = head.run(features, &edges, record)?;
        let tables = head.tables(&out);
        (edges, tables)
    } else {
        (Vec::new(), Vec::new())
    };
    FactoredQ::new(utilities, edges, payoffs, algo.aggregation())
}

/// Gradient of a scalar loss with respect to the heads' outputs at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct QGrad {
    /// `n × |A|`.
    pub utilities: Matrix,
    /// `2|E| × |A|²`, same row layout as [`PayoffHead::run`].
    pub payoffs: Matrix,
}

impl QGrad {
    pub fn zeros(fq: &FactoredQ) -> Self {
        let a = fq.action_count(0);
        QGrad {
            utilities: Matrix::zeros(fq.n(), a),
            payoffs: Matrix::zeros(2 * fq.edges().len(), a * a),
        }
    }

    /// Adds `scale · ∂Q(a)/∂(heads)` for the joint value `Q`.
    pub fn add_joint(&mut self, fq: &FactoredQ, a: &JointAction, scale: f64) {
        let wu = fq.utility_weight() * scale;
        for (i, &ai) in a.0.iter().enumerate() {
            self.utilities.row_mut(i)[ai] += wu;
        }
        let wp = fq.payoff_weight() * scale;
        let na = fq.action_count(0);
        for (e, &(i, j)) in fq.edges().iter().enumerate() {
            let (ai, aj) = (a.0[i], a.0[j]);
            self.payoffs.row_mut(2 * e)[ai * na + aj] += wp;
            self.payoffs.row_mut(2 * e + 1)[aj * na + ai] += wp;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub algo: Algo,
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub mcg: MetaPathConfig,
    pub mcg_bypass: bool,
    pub activation: Activation,
    /// Static input graphs for the generator (identity is prepended).
    pub topologies: Vec<TopologyKind>,
    /// Layer count of environment-supplied graphs, which replace `topologies`.
    pub dynamic_layers: Option<usize>,
    /// Static coordination graph for DCG.
    pub dcg_topology: TopologyKind,
}

/// Encoder, optional meta-graph generator and value heads.
#[derive(Clone, Debug)]
pub struct QNetwork {
    cfg: NetworkConfig,
    pub encoder: AgentEncoder,
    pub generator: Option<McgGenerator>,
    pub heads: Heads,
    static_graph: AdjacencyTensor,
    static_edges: Vec<Edge>,
}

impl QNetwork {
    pub fn new(cfg: NetworkConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.n_agents == 0 || cfg.n_actions == 0 || cfg.hidden == 0 || cfg.embed_dim == 0 {
            return Err(McgError::Config("network sizes must be positive".into()));
        }
        let encoder = AgentEncoder::new(
            cfg.n_agents,
            cfg.n_actions,
            cfg.obs_dim,
            cfg.embed_dim,
            cfg.hidden,
            rng,
        );
        let static_graph = AdjacencyTensor::from_topologies(&cfg.topologies, cfg.n_agents)?.append_identity()?;
        let types = 1 + cfg.dynamic_layers.unwrap_or(cfg.topologies.len());
        let generator = if cfg.algo.uses_mcg() {
            Some(McgGenerator::new(
                cfg.mcg,
                types,
                cfg.hidden,
                cfg.activation,
                cfg.mcg_bypass,
                rng,
            )?)
        } else {
            None
        };
        let width = generator.as_ref().map_or(cfg.hidden, McgGenerator::output_width);
        let heads = Heads::new(width, cfg.n_actions, cfg.algo.uses_payoffs(), rng);
        let static_edges = if cfg.algo == Algo::Dcg {
            extract_edges(&[make_topology(cfg.dcg_topology, cfg.n_agents)?], 0.0)
        } else {
            Vec::new()
        };
        Ok(QNetwork {
            cfg,
            encoder,
            generator,
            heads,
            static_graph,
            static_edges,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn algo(&self) -> Algo {
        self.cfg.algo
    }

    pub fn initial_state(&self) -> Matrix {
        self.encoder.initial_state()
    }

    /// Generator input for this step: environment graphs when supplied,
    /// otherwise the configured static topologies.
    fn input_graph(&self, dynamic: Option<&AdjacencyTensor>) -> Result<AdjacencyTensor> {
        match (dynamic, self.cfg.dynamic_layers) {
            (Some(g), Some(_)) => g.clone().append_identity(),
            _ => Ok(self.static_graph.clone()),
        }
    }

    /// One decision step: encodes histories and builds the factored value.
    /// Returns the new hidden state and `Q(τ_t, ·)`.
    pub fn step(
        &mut self,
        h: &Matrix,
        obs: &Matrix,
        prev: Option<&JointAction>,
        graphs: Option<&AdjacencyTensor>,
        record: bool,
    ) -> Result<(Matrix, FactoredQ)> {
        let x = self.encoder.encode_step(h, obs, prev, record)?;
        let mcg = match &mut self.generator {
            Some(gen) => {
                let a = match (graphs, self.cfg.dynamic_layers) {
                    (Some(g), Some(_)) => g.clone().append_identity()?,
                    _ => self.static_graph.clone(),
                };
                Some(gen.run(&a, &x, record)?)
            }
            None => None,
        };
        let fq = build_factored_q(
            self.cfg.algo,
            &mut self.heads,
            &x,
            mcg.as_ref(),
            &self.static_edges,
            record,
        )?;
        Ok((x, fq))
    }

    /// Generated graphs for inspection (no caching).
    pub fn generate(&self, x: &Matrix, graphs: Option<&AdjacencyTensor>) -> Result<Option<McgOutput>> {
        match &self.generator {
            Some(gen) => Ok(Some(gen.apply(&self.input_graph(graphs)?, x)?)),
            None => Ok(None),
        }
    }

    /// Back-propagates one recorded step (most recent first). `dh_next` is the
    /// gradient flowing into this step's hidden state from later steps.
    pub fn step_backward(&mut self, grad: &QGrad, dh_next: &Matrix) -> Result<Matrix> {
        let mut dfeat = Matrix::zeros(grad.utilities.rows(), self.heads.utility.inputs());
        if let Some(head) = &mut self.heads.payoff {
            dfeat.add_assign(&head.backward(&grad.payoffs)?)?;
        }
        dfeat.add_assign(&self.heads.utility.backward(&grad.utilities)?)?;
        let mut dx = match &mut self.generator {
            Some(gen) => gen.generate_backward(&dfeat)?,
            None => dfeat,
        };
        dx.add_assign(dh_next)?;
        self.encoder.backward(&dx)
    }

    pub fn clear_cache(&mut self) {
        self.encoder.clear_cache();
        if let Some(g) = &mut self.generator {
            g.clear_cache();
        }
        self.heads.clear_cache();
    }

    /// Copies parameter values from `other`, which must have the same layout.
    pub fn copy_params_from(&mut self, other: &QNetwork) -> Result<()> {
        let src = other.params();
        let mut dst = self.params_mut();
        if src.len() != dst.len() {
            return Err(McgError::Config(format!(
                "parameter sets differ in size ({} vs {})",
                dst.len(),
                src.len()
            )));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            if d.name != s.name || d.value.shape() != s.value.shape() {
                return Err(McgError::Config(format!(
                    "parameter mismatch: {} {:?} vs {} {:?}",
                    d.name,
                    d.value.shape(),
                    s.name,
                    s.value.shape()
                )));
            }
            d.value = s.value.clone();
        }
        Ok(())
    }
}

impl HasParams for QNetwork {
    fn params(&self) -> Vec<&Parameter> {
        let mut v = self.encoder.params();
        if let Some(g) = &self.generator {
            v.extend(g.params());
        }
        v.extend(self.heads.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.encoder.params_mut();
        if let Some(g) = &mut self.generator {
            v.extend(g.params_mut());
        }
        v.extend(self.heads.params_mut());
        v
    }
}
