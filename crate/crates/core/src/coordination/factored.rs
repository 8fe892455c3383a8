//! Factored joint action values over a coordination graph.

use crate::error::{McgError, Result};
use crate::graph::Edge;

/// One action index per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// How utilities and payoffs combine into a joint value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    /// `(1/|V|) Σ Q_i + (1/(2|E|)) Σ [Q_ij + Q_ji]`.
    Mean,
    /// `Σ Q_i`, no payoffs.
    Sum,
    /// Per-agent values with no joint value; `evaluate_q` reports the sum.
    Independent,
}

/// Both orientations of the payoff for edge `{i, j}`, `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPayoff {
    /// `Q_ij(a_i, a_j)` at `[a_i * |A_j| + a_j]`.
    pub forward: Vec<f64>,
    /// `Q_ji(a_j, a_i)` at `[a_j * |A_i| + a_i]`.
    pub reverse: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactoredQ {
    utilities: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    payoffs: Vec<PairPayoff>,
    aggregation: Aggregation,
}

impl FactoredQ {
    pub fn new(
        utilities: Vec<Vec<f64>>,
        edges: Vec<Edge>,
        payoffs: Vec<PairPayoff>,
        aggregation: Aggregation,
    ) -> Result<Self> {
        let n = utilities.len();
        if utilities.iter().any(Vec::is_empty) {
            return Err(McgError::arg("every agent needs at least one action"));
        }
        if edges.len() != payoffs.len() {
            return Err(McgError::arg(format!(
                "{} edges but {} payoff tables",
                edges.len(),
                payoffs.len()
            )));
        }
        if aggregation != Aggregation::Mean && !edges.is_empty() {
            return Err(McgError::arg("payoff edges require mean aggregation"));
        }
        for (&(i, j), p) in edges.iter().zip(&payoffs) {
            if i >= j || j >= n {
                return Err(McgError::arg(format!("invalid edge ({i}, {j}) for {n} agents")));
            }
            let size = utilities[i].len() * utilities[j].len();
            if p.forward.len() != size || p.reverse.len() != size {
                return Err(McgError::arg(format!("payoff table for ({i}, {j}) has the wrong size")));
            }
        }
        let all_finite = utilities.iter().flatten().all(|v| v.is_finite())
            && payoffs
                .iter()
                .all(|p| p.forward.iter().chain(&p.reverse).all(|v| v.is_finite()));
        if !all_finite {
            return Err(McgError::Numeric("non-finite utility or payoff".into()));
        }
        Ok(FactoredQ {
            utilities,
            edges,
            payoffs,
            aggregation,
        })
    }

    pub fn n(&self) -> usize {
        self.utilities.len()
    }

    pub fn action_count(&self, agent: usize) -> usize {
        self.utilities[agent].len()
    }

    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn payoffs(&self) -> &[PairPayoff] {
        &self.payoffs
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    /// Coefficient applied to each utility term.
    pub fn utility_weight(&self) -> f64 {
        match self.aggregation {
            Aggregation::Mean => 1.0 / self.n() as f64,
            Aggregation::Sum | Aggregation::Independent => 1.0,
        }
    }

    /// Coefficient applied to each payoff term `Q_ij` or `Q_ji`.
    pub fn payoff_weight(&self) -> f64 {
        if self.edges.is_empty() {
            0.0
        } else {
            1.0 / (2.0 * self.edges.len() as f64)
        }
    }

    /// `Q_ij(a_i, a_j) + Q_ji(a_j, a_i)` for edge index `e`.
    #[inline]
    pub fn pair_value(&self, e: usize, ai: usize, aj: usize) -> f64 {
        let (i, j) = self.edges[e];
        let p = &self.payoffs[e];
        p.forward[ai * self.utilities[j].len() + aj] + p.reverse[aj * self.utilities[i].len() + ai]
    }

    pub fn check_action(&self, a: &JointAction) -> Result<()> {
        if a.len() != self.n() {
            return Err(McgError::arg(format!(
                "joint action has {} entries for {} agents",
                a.len(),
                self.n()
            )));
        }
        for (i, &ai) in a.0.iter().enumerate() {
            if ai >= self.utilities[i].len() {
                return Err(McgError::arg(format!("agent {i} action {ai} out of range")));
            }
        }
        Ok(())
    }

    pub fn evaluate_q(&self, a: &JointAction) -> Result<f64> {
        self.check_action(a)?;
        let util: f64 = a.0.iter().enumerate().map(|(i, &ai)| self.utilities[i][ai]).sum();
        let mut total = self.utility_weight() * util;
        if !self.edges.is_empty() {
            let pairs: f64 = self
                .edges
                .iter()
                .enumerate()
                .map(|(e, &(i, j))| self.pair_value(e, a.0[i], a.0[j]))
                .sum();
            total += self.payoff_weight() * pairs;
        }
        Ok(total)
    }
}
