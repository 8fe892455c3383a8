//! Meta-path composition, degree normalization and edge extraction.

use crate::error::{McgError, Result};
use crate::numerics::Matrix;

/// Unordered agent pair `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

fn check_square_chain(selected: &[Matrix]) -> Result<usize> {
    let first = selected
        .first()
        .ok_or_else(|| McgError::arg("meta-path needs at least one hop"))?;
    let n = first.rows();
    for m in selected {
        if m.shape() != (n, n) {
            return Err(McgError::Dimension {
                op: "compose_metapath",
                left: (n, n),
                right: m.shape(),
            });
        }
    }
    Ok(n)
}

/// `A_{e_l} ⋯ A_{e_2} A_{e_1}`: the first hop is applied first, so it sits
/// rightmost in the product.
pub fn compose_metapath(selected: &[Matrix]) -> Result<Matrix> {
    check_square_chain(selected)?;
    let mut acc = selected[0].clone();
    for hop in &selected[1..] {
        acc = hop.matmul(&acc)?;
    }
    Ok(acc)
}

/// Gradients of the composed product with respect to every hop:
/// `∂L/∂S_i = (S_l ⋯ S_{i+1})ᵀ G (S_{i-1} ⋯ S_1)ᵀ`.
pub fn compose_metapath_backward(selected: &[Matrix], upstream: &Matrix) -> Result<Vec<Matrix>> {
    let n = check_square_chain(selected)?;
    let l = selected.len();
    // prefix[i] = S_{i-1} ⋯ S_0 (I for i = 0)
    let mut prefix = Vec::with_capacity(l);
    prefix.push(Matrix::identity(n));
    for i in 1..l {
        prefix.push(selected[i - 1].matmul(&prefix[i - 1])?);
    }
    let mut grads = vec![Matrix::zeros(n, n); l];
    // suffix_t_g = (S_{l-1} ⋯ S_{i+1})ᵀ G, built from the last hop down
    let mut left = upstream.clone();
    for i in (0..l).rev() {
        grads[i] = left.matmul_nt(&prefix[i])?;
        if i > 0 {
            left = selected[i].matmul_tn(&left)?;
        }
    }
    Ok(grads)
}

/// `D̃⁻¹(A + I)` with `D̃` the row sums of `A + I`.
pub fn normalize(a_m: &Matrix) -> Result<Matrix> {
    let (n, c) = a_m.shape();
    if n != c {
        return Err(McgError::Dimension {
            op: "normalize",
            left: (n, c),
            right: (c, n),
        });
    }
    if a_m.data().iter().any(|v| *v < 0.0) {
        return Err(McgError::arg("normalize requires a nonnegative matrix"));
    }
    let mut out = a_m.add(&Matrix::identity(n))?;
    for i in 0..n {
        let row = out.row_mut(i);
        let deg: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= deg);
    }
    Ok(out)
}

/// `∂L/∂A` for [`normalize`], given `∂L/∂(D̃⁻¹Ã)`.
pub fn normalize_backward(a_m: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    let n = a_m.rows();
    let tilde = a_m.add(&Matrix::identity(n))?;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let row = tilde.row(i);
        let g = upstream.row(i);
        let deg: f64 = row.iter().sum();
        let dot: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
        for (o, gv) in out.row_mut(i).iter_mut().zip(g) {
            *o = gv / deg - dot / (deg * deg);
        }
    }
    Ok(out)
}

/// Unordered pairs `{i, j}`, `i ≠ j`, linked in any channel with weight above
/// `threshold` in either direction, in lexicographic order.
pub fn extract_edges(channels: &[Matrix], threshold: f64) -> Vec<Edge> {
    let n = channels.first().map_or(0, Matrix::rows);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if channels
                .iter()
                .any(|c| c.get(i, j).max(c.get(j, i)) > threshold)
            {
                edges.push((i, j));
            }
        }
    }
    edges
}
