//! Differentiable layers with explicit forward/backward passes.
//!
//! Layers keep a LIFO stack of cached activations: every `forward` pushes one
//! entry and every `backward` pops the most recent one, which makes
//! back-propagation through time a matter of calling `backward` in reverse
//! order. `apply` evaluates without caching.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{McgError, Result};

/// A named learnable matrix with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, shape `fan_in × fan_out`.
    pub fn xavier(name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Parameter::new(name, Matrix::from_vec(fan_in, fan_out, data).expect("sized"))
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Parameter::new(name, Matrix::zeros(rows, cols))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub(crate) fn accumulate(&mut self, g: &Matrix) -> Result<()> {
        self.grad.add_assign(g)
    }
}

/// Anything that owns learnable parameters in a fixed order.
pub trait HasParams {
    fn params(&self) -> Vec<&Parameter>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, pre: &Matrix) -> Matrix {
        match self {
            Activation::Relu => pre.map(|v| v.max(0.0)),
            Activation::Tanh => pre.map(f64::tanh),
            Activation::Identity => pre.clone(),
        }
    }

    /// `upstream ⊙ σ'(pre)`, using the cached output where cheaper.
    pub fn backward(self, pre: &Matrix, out: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        match self {
            Activation::Relu => {
                let mask = pre.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                upstream.hadamard(&mask)
            }
            Activation::Tanh => upstream.hadamard(&out.map(|y| 1.0 - y * y)),
            Activation::Identity => Ok(upstream.clone()),
        }
    }
}

/// Fully connected layer `y = xW + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
    cache: Vec<Matrix>,
}

impl Linear {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Linear {
            weight: Parameter::xavier(format!("{name}.weight"), inputs, outputs, rng),
            bias: Parameter::zeros(format!("{name}.bias"), 1, outputs),
            cache: Vec::new(),
        }
    }

    pub fn from_parameters(weight: Parameter, bias: Parameter) -> Result<Self> {
        if bias.value.rows() != 1 || bias.value.cols() != weight.value.cols() {
            return Err(McgError::Dimension {
                op: "linear",
                left: weight.value.shape(),
                right: bias.value.shape(),
            });
        }
        Ok(Linear {
            weight,
            bias,
            cache: Vec::new(),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.weight.value)?;
        y.add_row_broadcast(&self.bias.value)?;
        Ok(y)
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let y = self.apply(x)?;
        self.cache.push(x.clone());
        Ok(y)
    }

    pub fn run(&mut self, x: &Matrix, record: bool) -> Result<Matrix> {
        if record {
            self.forward(x)
        } else {
            self.apply(x)
        }
    }

    /// Accumulates weight/bias gradients and returns `∂L/∂x`.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<Matrix> {
        let x = self
            .cache
            .pop()
            .ok_or_else(|| McgError::state("linear backward called without a matching forward"))?;
        self.weight.grad.add_matmul_tn(&x, upstream)?;
        self.bias.accumulate(&upstream.col_sums())?;
        upstream.matmul_nt(&self.weight.value)
    }

    pub fn pending(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl HasParams for Linear {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Clone, Debug)]
struct GruCache {
    x: Matrix,
    h_prev: Matrix,
    r: Matrix,
    z: Matrix,
    n: Matrix,
    hn: Matrix,
}

/// Gated recurrent unit cell, gate order `[reset | update | candidate]`:
///
/// ```text
/// r  = σ(x W_r + b_r + h U_r + c_r)
/// z  = σ(x W_z + b_z + h U_z + c_z)
/// n  = tanh(x W_n + b_n + r ⊙ (h U_n + c_n))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Clone, Debug)]
pub struct Gru {
    pub w_input: Parameter,
    pub w_hidden: Parameter,
    pub b_input: Parameter,
    pub b_hidden: Parameter,
    hidden: usize,
    cache: Vec<GruCache>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Gru {
    pub fn new(name: &str, inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Gru {
            w_input: Parameter::xavier(format!("{name}.w_input"), inputs, 3 * hidden, rng),
            w_hidden: Parameter::xavier(format!("{name}.w_hidden"), hidden, 3 * hidden, rng),
            b_input: Parameter::zeros(format!("{name}.b_input"), 1, 3 * hidden),
            b_hidden: Parameter::zeros(format!("{name}.b_hidden"), 1, 3 * hidden),
            hidden,
            cache: Vec::new(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_input.value.rows()
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn compute(&self, x: &Matrix, h_prev: &Matrix) -> Result<(Matrix, GruCache)> {
        let d = self.hidden;
        if x.cols() != self.inputs() || h_prev.cols() != d || x.rows() != h_prev.rows() {
            return Err(McgError::Dimension {
                op: "gru",
                left: x.shape(),
                right: h_prev.shape(),
            });
        }
        let mut gx = x.matmul(&self.w_input.value)?;
        gx.add_row_broadcast(&self.b_input.value)?;
        let mut gh = h_prev.matmul(&self.w_hidden.value)?;
        gh.add_row_broadcast(&self.b_hidden.value)?;

        let rows = x.rows();
        let mut r = Matrix::zeros(rows, d);
        let mut z = Matrix::zeros(rows, d);
        let mut n = Matrix::zeros(rows, d);
        let mut hn = Matrix::zeros(rows, d);
        let mut h = Matrix::zeros(rows, d);
        for i in 0..rows {
            let (gxr, ghr) = (gx.row(i), gh.row(i));
            let hp = h_prev.row(i);
            for j in 0..d {
                let rv = sigmoid(gxr[j] + ghr[j]);
                let zv = sigmoid(gxr[d + j] + ghr[d + j]);
                let hnv = ghr[2 * d + j];
                let nv = (gxr[2 * d + j] + rv * hnv).tanh();
                r.set(i, j, rv);
                z.set(i, j, zv);
                hn.set(i, j, hnv);
                n.set(i, j, nv);
                h.set(i, j, (1.0 - zv) * nv + zv * hp[j]);
            }
        }
        let cache = GruCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            r,
            z,
            n,
            hn,
        };
        Ok((h, cache))
    }

    pub fn apply(&self, x: &Matrix, h_prev: &Matrix) -> Result<Matrix> {
        Ok(self.compute(x, h_prev)?.0)
    }

    pub fn forward(&mut self, x: &Matrix, h_prev: &Matrix) -> Result<Matrix> {
        let (h, cache) = self.compute(x, h_prev)?;
        self.cache.push(cache);
        Ok(h)
    }

    pub fn run(&mut self, x: &Matrix, h_prev: &Matrix, record: bool) -> Result<Matrix> {
        if record {
            self.forward(x, h_prev)
        } else {
            self.apply(x, h_prev)
        }
    }

    /// Given `∂L/∂h_t`, accumulates parameter gradients and returns
    /// `(∂L/∂x_t, ∂L/∂h_{t-1})`.
    pub fn backward(&mut self, dh: &Matrix) -> Result<(Matrix, Matrix)> {
        let c = self
            .cache
            .pop()
            .ok_or_else(|| McgError::state("gru backward called without a matching forward"))?;
        let d = self.hidden;
        let rows = dh.rows();
        if dh.shape() != c.h_prev.shape() {
            return Err(McgError::Dimension {
                op: "gru_backward",
                left: dh.shape(),
                right: c.h_prev.shape(),
            });
        }
        let mut dgx = Matrix::zeros(rows, 3 * d);
        let mut dgh = Matrix::zeros(rows, 3 * d);
        let mut dh_prev = Matrix::zeros(rows, d);
        for i in 0..rows {
            for j in 0..d {
                let g = dh.get(i, j);
                let (rv, zv, nv, hnv) = (c.r.get(i, j), c.z.get(i, j), c.n.get(i, j), c.hn.get(i, j));
                let hp = c.h_prev.get(i, j);
                let dn = g * (1.0 - zv);
                let dz = g * (hp - nv);
                dh_prev.set(i, j, g * zv);
                let dan = dn * (1.0 - nv * nv);
                let dr = dan * hnv;
                let daz = dz * zv * (1.0 - zv);
                let dar = dr * rv * (1.0 - rv);
                dgx.set(i, j, dar);
                dgx.set(i, d + j, daz);
                dgx.set(i, 2 * d + j, dan);
                dgh.set(i, j, dar);
                dgh.set(i, d + j, daz);
                dgh.set(i, 2 * d + j, dan * rv);
            }
        }
        self.w_input.grad.add_matmul_tn(&c.x, &dgx)?;
        self.b_input.accumulate(&dgx.col_sums())?;
        self.w_hidden.grad.add_matmul_tn(&c.h_prev, &dgh)?;
        self.b_hidden.accumulate(&dgh.col_sums())?;
        let dx = dgx.matmul_nt(&self.w_input.value)?;
        dh_prev.add_assign(&dgh.matmul_nt(&self.w_hidden.value)?)?;
        Ok((dx, dh_prev))
    }

    pub fn pending(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl HasParams for Gru {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.w_input, &self.w_hidden, &self.b_input, &self.b_hidden]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w_input,
            &mut self.w_hidden,
            &mut self.b_input,
            &mut self.b_hidden,
        ]
    }
}
