use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{McgError, Result};
use crate::numerics::Matrix;

/// Named interaction topologies over `n` agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Full,
    Cycle,
    Line,
    Star,
    Identity,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 5] = [
        TopologyKind::Full,
        TopologyKind::Cycle,
        TopologyKind::Line,
        TopologyKind::Star,
        TopologyKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Full => "full",
            TopologyKind::Cycle => "cycle",
            TopologyKind::Line => "line",
            TopologyKind::Star => "star",
            TopologyKind::Identity => "identity",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = McgError;

    fn from_str(s: &str) -> Result<Self> {
        TopologyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| McgError::arg(format!("unknown topology `{s}`")))
    }
}

/// Binary `n × n` adjacency matrix for `kind`. `A[i][j] = 1` is an edge from
/// agent `j` to agent `i`; all kinds except `Identity` have a zero diagonal
/// and are symmetric.
pub fn make_topology(kind: TopologyKind, n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(McgError::arg("topology needs at least one agent"));
    }
    if matches!(kind, TopologyKind::Cycle | TopologyKind::Star) && n < 2 {
        return Err(McgError::arg(format!("{kind} topology needs n >= 2, got {n}")));
    }
    let mut m = Matrix::zeros(n, n);
    let mut link = |i: usize, j: usize| {
        if i != j {
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
    };
    match kind {
        TopologyKind::Full => {
            for i in 0..n {
                for j in 0..n {
                    link(i, j);
                }
            }
        }
        TopologyKind::Cycle => {
            for i in 0..n {
                link(i, (i + 1) % n);
            }
        }
        TopologyKind::Line => {
            for i in 0..n - 1 {
                link(i, i + 1);
            }
        }
        TopologyKind::Star => {
            for i in 1..n {
                link(0, i);
            }
        }
        TopologyKind::Identity => return Ok(Matrix::identity(n)),
    }
    Ok(m)
}

/// `k` typed `n × n` interaction graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyTensor {
    n: usize,
    layers: Vec<Matrix>,
    has_identity: bool,
}

impl AdjacencyTensor {
    pub fn new(n: usize, layers: Vec<Matrix>) -> Result<Self> {
        for (k, layer) in layers.iter().enumerate() {
            if layer.shape() != (n, n) {
                return Err(McgError::Dimension {
                    op: "adjacency layer",
                    left: (n, n),
                    right: layer.shape(),
                });
            }
            if layer.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(McgError::arg(format!(
                    "adjacency layer {k} has negative or non-finite entries"
                )));
            }
        }
        Ok(AdjacencyTensor {
            n,
            layers,
            has_identity: false,
        })
    }

    pub fn from_topologies(kinds: &[TopologyKind], n: usize) -> Result<Self> {
        let layers = kinds
            .iter()
            .map(|&k| make_topology(k, n))
            .collect::<Result<Vec<_>>>()?;
        AdjacencyTensor::new(n, layers)
    }

    /// Prepends `A₀ = I`; the remaining layers shift up by one.
    pub fn append_identity(mut self) -> Result<Self> {
        if self.has_identity {
            return Err(McgError::state("identity layer already appended"));
        }
        self.layers.insert(0, Matrix::identity(self.n));
        self.has_identity = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, k: usize) -> &Matrix {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn has_identity(&self) -> bool {
        self.has_identity
    }

    /// Relabels agents: new agent `perm[i]` is old agent `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let mut m = Matrix::zeros(self.n, self.n);
                for i in 0..self.n {
                    for j in 0..self.n {
                        m.set(perm[i], perm[j], l.get(i, j));
                    }
                }
                m
            })
            .collect();
        AdjacencyTensor {
            n: self.n,
            layers,
            has_identity: self.has_identity,
        }
    }
}
