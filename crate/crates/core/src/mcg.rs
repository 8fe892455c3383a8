//! Meta coordination graph generation.
//!
//! For every output channel `c` the generator soft-selects `l` graphs from
//! the typed adjacency tensor, multiplies them into a meta-path adjacency
//! `A_M^(c)`, and runs one graph convolution
//! `Z_c = σ(D̃⁻¹(A_M^(c) + I) X W)` with a weight `W` shared across channels.
//! The node representations of all channels are concatenated column-wise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{McgError, Result};
use crate::graph::{
    compose_metapath, compose_metapath_backward, extract_edges, normalize, normalize_backward, soft_select,
    soft_select_backward, AdjacencyTensor, Edge, SelectionWeights,
};
use crate::numerics::{Activation, HasParams, Matrix, Parameter};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaPathConfig {
    pub length: usize,
    pub channels: usize,
    pub edge_threshold: f64,
}

impl Default for MetaPathConfig {
    fn default() -> Self {
        MetaPathConfig {
            length: 2,
            channels: 2,
            edge_threshold: 1e-6,
        }
    }
}

impl MetaPathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.channels == 0 {
            return Err(McgError::Config("mcg.length and mcg.channels must be >= 1".into()));
        }
        if !(self.edge_threshold >= 0.0) {
            return Err(McgError::Config("mcg.threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generated meta coordination graphs and node representations.
#[derive(Clone, Debug, PartialEq)]
pub struct McgOutput {
    /// `A_M` per output channel, before normalization.
    pub channels: Vec<Matrix>,
    pub edges: Vec<Edge>,
    /// `n × (o·d)` node representations (`n × d` when bypassed).
    pub z: Matrix,
}

#[derive(Clone, Debug)]
struct ChannelCache {
    selected: Vec<Matrix>,
    a_m: Matrix,
    norm: Matrix,
    hidden: Matrix,
    pre: Matrix,
    out: Matrix,
}

#[derive(Clone, Debug)]
enum GenCache {
    Bypass,
    Full {
        a: AdjacencyTensor,
        x: Matrix,
        channels: Vec<ChannelCache>,
    },
}

#[derive(Clone, Debug)]
pub struct McgGenerator {
    pub sel: SelectionWeights,
    pub gcn_weight: Parameter,
    cfg: MetaPathConfig,
    bypass: bool,
    activation: Activation,
    cache: Vec<GenCache>,
}

impl McgGenerator {
    /// `types` counts the identity layer; `features` is `d`.
    pub fn new(
        cfg: MetaPathConfig,
        types: usize,
        features: usize,
        activation: Activation,
        bypass: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(McgGenerator {
            sel: SelectionWeights::new(cfg.length, cfg.channels, types, rng),
            gcn_weight: Parameter::xavier("mcg.gcn_weight", features, features, rng),
            cfg,
            bypass,
            activation,
            cache: Vec::new(),
        })
    }

    pub fn from_parts(
        cfg: MetaPathConfig,
        sel: SelectionWeights,
        gcn_weight: Parameter,
        activation: Activation,
        bypass: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        if sel.slots() != cfg.length || sel.channels() != cfg.channels {
            return Err(McgError::Config("selection weights do not match mcg config".into()));
        }
        let (r, c) = gcn_weight.value.shape();
        if r != c {
            return Err(McgError::Dimension {
                op: "gcn weight",
                left: (r, c),
                right: (c, r),
            });
        }
        Ok(McgGenerator {
            sel,
            gcn_weight,
            cfg,
            bypass,
            activation,
            cache: Vec::new(),
        })
    }

    pub fn config(&self) -> &MetaPathConfig {
        &self.cfg
    }

    pub fn bypass(&self) -> bool {
        self.bypass
    }

    pub fn features(&self) -> usize {
        self.gcn_weight.value.rows()
    }

    /// Width of `z` produced for `d`-dimensional features.
    pub fn output_width(&self) -> usize {
        if self.bypass {
            self.features()
        } else {
            self.cfg.channels * self.features()
        }
    }

    fn compute(&self, a: &AdjacencyTensor, x: &Matrix) -> Result<(McgOutput, GenCache)> {
        if a.n() != x.rows() {
            return Err(McgError::Dimension {
                op: "generate",
                left: (a.n(), a.n()),
                right: x.shape(),
            });
        }
        if self.bypass {
            let channels: Vec<Matrix> = a.layers().get(1).cloned().into_iter().collect();
            let edges = extract_edges(&channels, self.cfg.edge_threshold);
            let out = McgOutput {
                channels,
                edges,
                z: x.clone(),
            };
            return Ok((out, GenCache::Bypass));
        }
        if !a.has_identity() {
            return Err(McgError::arg("generator input must include the identity layer"));
        }
        if x.cols() != self.features() {
            return Err(McgError::Dimension {
                op: "generate",
                left: self.gcn_weight.value.shape(),
                right: x.shape(),
            });
        }
        let mut caches = Vec::with_capacity(self.cfg.channels);
        for c in 0..self.cfg.channels {
            let selected = (0..self.cfg.length)
                .map(|s| soft_select(a, &self.sel, s, c))
                .collect::<Result<Vec<_>>>()?;
            let a_m = compose_metapath(&selected)?;
            let norm = normalize(&a_m)?;
            let hidden = norm.matmul(x)?;
            let pre = hidden.matmul(&self.gcn_weight.value)?;
            let out = self.activation.apply(&pre);
            caches.push(ChannelCache {
                selected,
                a_m,
                norm,
                hidden,
                pre,
                out,
            });
        }
        let outs: Vec<Matrix> = caches.iter().map(|c| c.out.clone()).collect();
        let channels: Vec<Matrix> = caches.iter().map(|c| c.a_m.clone()).collect();
        let edges = extract_edges(&channels, self.cfg.edge_threshold);
        let out = McgOutput {
            channels,
            edges,
            z: Matrix::hconcat(&outs)?,
        };
        let cache = GenCache::Full {
            a: a.clone(),
            x: x.clone(),
            channels: caches,
        };
        Ok((out, cache))
    }

    pub fn apply(&self, a: &AdjacencyTensor, x: &Matrix) -> Result<McgOutput> {
        Ok(self.compute(a, x)?.0)
    }

    /// Forward pass that keeps intermediates for [`Self::generate_backward`].
    pub fn generate(&mut self, a: &AdjacencyTensor, x: &Matrix) -> Result<McgOutput> {
        let (out, cache) = self.compute(a, x)?;
        self.cache.push(cache);
        Ok(out)
    }

    pub fn run(&mut self, a: &AdjacencyTensor, x: &Matrix, record: bool) -> Result<McgOutput> {
        if record {
            self.generate(a, x)
        } else {
            self.apply(a, x)
        }
    }

    /// Accumulates gradients into the selection logits and `W`; returns
    /// `∂L/∂X`. The discrete edge set receives no gradient.
    pub fn generate_backward(&mut self, upstream: &Matrix) -> Result<Matrix> {
        let cache = self
            .cache
            .pop()
            .ok_or_else(|| McgError::state("generate_backward called without a cached forward"))?;
        let (a, x, channels) = match cache {
            GenCache::Bypass => return Ok(upstream.clone()),
            GenCache::Full { a, x, channels } => (a, x, channels),
        };
        let d = self.features();
        if upstream.shape() != (x.rows(), d * channels.len()) {
            return Err(McgError::Dimension {
                op: "generate_backward",
                left: (x.rows(), d * channels.len()),
                right: upstream.shape(),
            });
        }
        let mut dx = Matrix::zeros(x.rows(), x.cols());
        for (c, ch) in channels.iter().enumerate() {
            let dz = upstream.col_block(c * d, d)?;
            let dpre = self.activation.backward(&ch.pre, &ch.out, &dz)?;
            self.gcn_weight.grad.add_matmul_tn(&ch.hidden, &dpre)?;
            let dhidden = dpre.matmul_nt(&self.gcn_weight.value)?;
            dx.add_assign(&ch.norm.matmul_tn(&dhidden)?)?;
            let dnorm = dhidden.matmul_nt(&x)?;
            let da_m = normalize_backward(&ch.a_m, &dnorm)?;
            let dselected = compose_metapath_backward(&ch.selected, &da_m)?;
            for (s, ds) in dselected.iter().enumerate() {
                soft_select_backward(&a, &mut self.sel, s, c, ds)?;
            }
        }
        Ok(dx)
    }

    pub fn pending(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl HasParams for McgGenerator {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.sel.w_phi, &self.gcn_weight]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.sel.w_phi, &mut self.gcn_weight]
    }
}
