//! Soft selection of edge types (a 1×1 convolution over the type axis).

use rand::Rng;

use super::adjacency::AdjacencyTensor;
use crate::error::{McgError, Result};
use crate::numerics::{softmax, softmax_backward, Matrix, Parameter};

/// Selection logits, one row of `k` type weights per (slot, channel) pair.
/// Row index is `slot * channels + channel`.
#[derive(Clone, Debug)]
pub struct SelectionWeights {
    pub w_phi: Parameter,
    slots: usize,
    channels: usize,
}

impl SelectionWeights {
    pub fn new(slots: usize, channels: usize, types: usize, rng: &mut impl Rng) -> Self {
        SelectionWeights {
            w_phi: Parameter::xavier("mcg.w_phi", slots * channels, types, rng),
            slots,
            channels,
        }
    }

    pub fn from_logits(slots: usize, channels: usize, logits: Matrix) -> Result<Self> {
        if logits.rows() != slots * channels || logits.cols() == 0 {
            return Err(McgError::Dimension {
                op: "selection weights",
                left: (slots * channels, logits.cols()),
                right: logits.shape(),
            });
        }
        Ok(SelectionWeights {
            w_phi: Parameter::new("mcg.w_phi", logits),
            slots,
            channels,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn types(&self) -> usize {
        self.w_phi.value.cols()
    }

    fn row_index(&self, slot: usize, channel: usize) -> Result<usize> {
        if slot >= self.slots || channel >= self.channels {
            return Err(McgError::arg(format!(
                "selection index (slot {slot}, channel {channel}) out of range ({} x {})",
                self.slots, self.channels
            )));
        }
        Ok(slot * self.channels + channel)
    }

    /// `softmax(w_phi[slot][channel])`, recomputed on every call.
    pub fn alpha(&self, slot: usize, channel: usize) -> Result<Vec<f64>> {
        let row = self.row_index(slot, channel)?;
        softmax(self.w_phi.value.row(row))
    }
}

fn check_width(a: &AdjacencyTensor, sel: &SelectionWeights) -> Result<()> {
    if a.k() != sel.types() {
        return Err(McgError::arg(format!(
            "adjacency tensor has {} types but selection expects {}",
            a.k(),
            sel.types()
        )));
    }
    Ok(())
}

/// `Σ_k α_k A_k` with `α = softmax(w_phi[slot][channel])`.
pub fn soft_select(a: &AdjacencyTensor, sel: &SelectionWeights, slot: usize, channel: usize) -> Result<Matrix> {
    check_width(a, sel)?;
    let alpha = sel.alpha(slot, channel)?;
    let n = a.n();
    let mut out = Matrix::zeros(n, n);
    for (w, layer) in alpha.iter().zip(a.layers()) {
        out.add_scaled(layer, *w)?;
    }
    Ok(out)
}

/// Accumulates `∂L/∂w_phi[slot][channel]` given `∂L/∂(soft_select output)`.
pub fn soft_select_backward(
    a: &AdjacencyTensor,
    sel: &mut SelectionWeights,
    slot: usize,
    channel: usize,
    upstream: &Matrix,
) -> Result<()> {
    check_width(a, sel)?;
    let row = sel.row_index(slot, channel)?;
    let alpha = softmax(sel.w_phi.value.row(row))?;
    let d_alpha: Vec<f64> = a
        .layers()
        .iter()
        .map(|layer| layer.data().iter().zip(upstream.data()).map(|(x, g)| x * g).sum())
        .collect();
    let d_logits = softmax_backward(&alpha, &d_alpha);
    for (g, d) in sel.w_phi.grad.row_mut(row).iter_mut().zip(d_logits) {
        *g += d;
    }
    Ok(())
}
