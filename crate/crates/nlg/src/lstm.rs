use rand::Rng;
use taskcorpus_tensor::{matvec, matvec_transposed, Matrix, TensorError, Vector};

use crate::error::{NlgError, Result};

/// Gate order used for every per-gate array in [`LstmParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

/// One LSTM cell: recurrent matrices (H×H), input matrices (H×I) and biases,
/// each indexed by [`Gate`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub recurrent: [Matrix; 4],
    pub input: [Matrix; 4],
    pub bias: [Vector; 4],
}

impl LstmParams {
    pub fn zeros(hidden: usize, input_dim: usize) -> Self {
        Self {
            recurrent: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            input: std::array::from_fn(|_| Matrix::zeros(hidden, input_dim)),
            bias: std::array::from_fn(|_| Vector::zeros(hidden)),
        }
    }

    pub fn uniform(hidden: usize, input_dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(hidden, input_dim);
        for t in p.tensors_mut() {
            for x in t {
                *x = rng.gen_range(-scale..=scale);
            }
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.bias[0].dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input[0].cols()
    }

    pub fn recurrent_for(&self, g: Gate) -> &Matrix {
        &self.recurrent[g as usize]
    }

    pub fn input_for(&self, g: Gate) -> &Matrix {
        &self.input[g as usize]
    }

    pub fn bias_for(&self, g: Gate) -> &Vector {
        &self.bias[g as usize]
    }

    pub fn bias_for_mut(&mut self, g: Gate) -> &mut Vector {
        &mut self.bias[g as usize]
    }

    /// Checks that all twelve tensors agree on H and I.
    pub fn check_shapes(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input_dim());
        for g in 0..4 {
            if self.recurrent[g].shape() != (h, h) || self.input[g].shape() != (h, i) || self.bias[g].dim() != h {
                return Err(NlgError::ShapeMismatch(format!(
                    "LSTM gate {g}: expected H={h}, I={i}, got recurrent {:?}, input {:?}, bias {}",
                    self.recurrent[g].shape(),
                    self.input[g].shape(),
                    self.bias[g].dim()
                )));
            }
        }
        Ok(())
    }

    /// Recurrent, input, bias per gate, in gate order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(12);
        for g in 0..4 {
            out.push(self.recurrent[g].as_slice());
            out.push(self.input[g].as_slice());
            out.push(self.bias[g].as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(12);
        for ((r, i), b) in self
            .recurrent
            .iter_mut()
            .zip(self.input.iter_mut())
            .zip(self.bias.iter_mut())
        {
            out.push(r.as_mut_slice());
            out.push(i.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }

    /// `(rows, cols)` of each tensor in [`tensors`](Self::tensors) order; biases are `(H, 1)`.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(12);
        for g in 0..4 {
            out.push(self.recurrent[g].shape());
            out.push(self.input[g].shape());
            out.push((self.bias[g].dim(), 1));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vector,
    pub cell: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden: Vector::zeros(hidden),
            cell: Vector::zeros(hidden),
        }
    }

    pub fn dim(&self) -> usize {
        self.hidden.dim()
    }
}

/// Activations from one forward step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    x: Vector,
    prev: LstmState,
    gates: [Vector; 4],
    tanh_cell: Vector,
}

pub fn lstm_step(p: &LstmParams, prev: &LstmState, x: &Vector) -> Result<LstmState> {
    Ok(lstm_forward(p, prev, x)?.0)
}

pub(crate) fn lstm_forward(p: &LstmParams, prev: &LstmState, x: &Vector) -> Result<(LstmState, StepCache)> {
    let h = p.hidden();
    if prev.hidden.dim() != h || prev.cell.dim() != h {
        return Err(TensorError::DimensionMismatch {
            op: "lstm_step(state)",
            expected: h,
            actual: prev.hidden.dim().max(prev.cell.dim()),
        }
        .into());
    }
    let mut gates: [Vector; 4] = std::array::from_fn(|_| Vector::zeros(0));
    for g in Gate::ALL {
        let mut pre = matvec(p.input_for(g), x)?;
        pre.add_scaled(1.0, &matvec(p.recurrent_for(g), &prev.hidden)?)?;
        pre.add_scaled(1.0, p.bias_for(g))?;
        gates[g as usize] = match g {
            Gate::Candidate => taskcorpus_tensor::tanh_elem(&pre),
            _ => taskcorpus_tensor::sigmoid(&pre),
        };
    }
    let [i, f, o, c] = &gates;
    let cell: Vector = (0..h)
        .map(|k| f.as_slice()[k] * prev.cell.as_slice()[k] + i.as_slice()[k] * c.as_slice()[k])
        .collect();
    let tanh_cell = cell.map(f64::tanh);
    let hidden: Vector = o.iter().zip(tanh_cell.iter()).map(|(a, b)| a * b).collect();
    let state = LstmState { hidden, cell };
    let cache = StepCache {
        x: x.clone(),
        prev: prev.clone(),
        gates,
        tanh_cell,
    };
    Ok((state, cache))
}

/// Backpropagates `dh`, `dc` (gradients w.r.t. this step's hidden and cell)
/// through one step, accumulating parameter gradients into `grads`.
/// Returns gradients w.r.t. `(x, prev.hidden, prev.cell)`.
pub(crate) fn lstm_backward(
    p: &LstmParams,
    cache: &StepCache,
    dh: &Vector,
    dc: &Vector,
    grads: &mut LstmParams,
) -> Result<(Vector, Vector, Vector)> {
    let h = p.hidden();
    let [i, f, o, g] = &cache.gates;
    let (i, f, o, g) = (i.as_slice(), f.as_slice(), o.as_slice(), g.as_slice());
    let tc = cache.tanh_cell.as_slice();
    let c_prev = cache.prev.cell.as_slice();
    let (dh, dc_in) = (dh.as_slice(), dc.as_slice());

    let mut d_pre: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
    let mut dc_prev = vec![0.0; h];
    for k in 0..h {
        let d_o = dh[k] * tc[k];
        let dc = dc_in[k] + dh[k] * o[k] * (1.0 - tc[k] * tc[k]);
        let d_i = dc * g[k];
        let d_g = dc * i[k];
        let d_f = dc * c_prev[k];
        dc_prev[k] = dc * f[k];
        d_pre[Gate::Input as usize][k] = d_i * i[k] * (1.0 - i[k]);
        d_pre[Gate::Forget as usize][k] = d_f * f[k] * (1.0 - f[k]);
        d_pre[Gate::Output as usize][k] = d_o * o[k] * (1.0 - o[k]);
        d_pre[Gate::Candidate as usize][k] = d_g * (1.0 - g[k] * g[k]);
    }

    let mut dx = Vector::zeros(p.input_dim());
    let mut dh_prev = Vector::zeros(h);
    for gate in Gate::ALL {
        let gi = gate as usize;
        let d = Vector::from(std::mem::take(&mut d_pre[gi]));
        grads.input[gi].add_outer(1.0, &d, &cache.x)?;
        grads.recurrent[gi].add_outer(1.0, &d, &cache.prev.hidden)?;
        grads.bias[gi].add_scaled(1.0, &d)?;
        dx.add_scaled(1.0, &matvec_transposed(&p.input[gi], &d)?)?;
        dh_prev.add_scaled(1.0, &matvec_transposed(&p.recurrent[gi], &d)?)?;
    }
    Ok((dx, dh_prev, Vector::from(dc_prev)))
}
