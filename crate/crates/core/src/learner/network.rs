//! Bidirectional LSTM forward pass and hand-written backpropagation.
//!
//! Per direction and step:
//!
//! ```text
//! f = sigmoid(W_f x + U_f h' + b_f)     i = sigmoid(W_i x + U_i h' + b_i)
//! o = sigmoid(W_o x + U_o h' + b_o)     g = tanh(W_c x + U_c h' + b_c)
//! c = f * c' + i * g                    h = o * tanh(c)
//! ```
//!
//! The per-step outputs of both directions are concatenated, averaged over
//! time, mapped by `W_fc` and passed through a softmax.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::{LearnerParams, ParamLayout};
use crate::grid::GridDiagram;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("non-finite activation in the forward pass")]
    NonFiniteActivation,
    #[error("input sequence is empty")]
    EmptyInput,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

/// How a diagram becomes a sequence of points in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// One step per row carrying `(x[t], o[t])`.
    #[default]
    RowPairs,
    /// Two steps per row, one per vertex, each carrying `(column, row)`.
    Vertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Coordinates divided by the grid size, landing in `(0, 1]`.
    #[default]
    DivideByN,
    Raw,
}

pub fn encode_input<F: Scalar>(d: &GridDiagram, encoding: InputEncoding, norm: Normalization) -> Vec<[F; 2]> {
    let scale = match norm {
        Normalization::DivideByN => F::one() / F::lit(d.n() as f64),
        Normalization::Raw => F::one(),
    };
    let v = |c: usize| F::lit(c as f64) * scale;
    match encoding {
        InputEncoding::RowPairs => d.x().iter().zip(d.o()).map(|(&a, &b)| [v(a), v(b)]).collect(),
        InputEncoding::Vertices => d
            .x()
            .iter()
            .zip(d.o())
            .enumerate()
            .flat_map(|(r, (&a, &b))| [[v(a), v(r + 1)], [v(b), v(r + 1)]])
            .collect(),
    }
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(z: &[F]) -> Vec<F> {
    let max = z.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Activations of one direction, indexed by processing step.
#[derive(Debug, Clone)]
pub struct DirectionCache<F> {
    /// Position in the input of each processing step.
    pub order: Vec<usize>,
    /// Activated gates per step, `4d` each: f, i, o, g.
    pub gates: Vec<F>,
    pub c: Vec<F>,
    pub tanh_c: Vec<F>,
    pub h: Vec<F>,
}

impl<F: Scalar> DirectionCache<F> {
    fn step(&self, k: usize, d: usize) -> StepView<'_, F> {
        StepView {
            gates: &self.gates[4 * d * k..4 * d * (k + 1)],
            c: &self.c[d * k..d * (k + 1)],
            tanh_c: &self.tanh_c[d * k..d * (k + 1)],
            h: &self.h[d * k..d * (k + 1)],
        }
    }
}

/// Cached state of one step: gate activations, cell and hidden vectors.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a, F> {
    pub gates: &'a [F],
    pub c: &'a [F],
    pub tanh_c: &'a [F],
    pub h: &'a [F],
}

#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    pub inputs: Vec<[F; 2]>,
    pub dirs: [DirectionCache<F>; 2],
    pub pooled: Vec<F>,
    pub probs: Vec<F>,
}

impl<F: Scalar> ForwardCache<F> {
    pub fn step(&self, dir: usize, k: usize) -> StepView<'_, F> {
        let d = self.pooled.len() / 2;
        self.dirs[dir].step(k, d)
    }
}

fn run_direction<F: Scalar>(params: &LearnerParams<F>, dir: usize, inputs: &[[F; 2]]) -> DirectionCache<F> {
    let ParamLayout { hidden: d, input, .. } = params.layout;
    debug_assert_eq!(input, 2);
    let t_len = inputs.len();
    let order: Vec<usize> = if dir == 0 {
        (0..t_len).collect()
    } else {
        (0..t_len).rev().collect()
    };
    let (w, u, b) = (params.w(dir), params.u(dir), params.b(dir));
    let mut gates = vec![F::zero(); 4 * d * t_len];
    let mut c = vec![F::zero(); d * t_len];
    let mut tanh_c = vec![F::zero(); d * t_len];
    let mut h = vec![F::zero(); d * t_len];
    let zeros = vec![F::zero(); d];
    let mut pre = vec![F::zero(); 4 * d];

    for (k, &pos) in order.iter().enumerate() {
        let x = inputs[pos];
        let (h_prev, c_prev) = if k == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&h[d * (k - 1)..d * k], &c[d * (k - 1)..d * k])
        };
        for j in 0..4 * d {
            let urow = &u[j * d..(j + 1) * d];
            let mut acc = b[j] + w[2 * j] * x[0] + w[2 * j + 1] * x[1];
            for m in 0..d {
                acc += urow[m] * h_prev[m];
            }
            pre[j] = acc;
        }
        let g_out = &mut gates[4 * d * k..4 * d * (k + 1)];
        for j in 0..3 * d {
            g_out[j] = sigmoid(pre[j]);
        }
        for j in 3 * d..4 * d {
            g_out[j] = pre[j].tanh();
        }
        let mut c_new = vec![F::zero(); d];
        for m in 0..d {
            c_new[m] = g_out[m] * c_prev[m] + g_out[d + m] * g_out[3 * d + m];
        }
        for m in 0..d {
            let tc = c_new[m].tanh();
            c[d * k + m] = c_new[m];
            tanh_c[d * k + m] = tc;
            h[d * k + m] = g_out[2 * d + m] * tc;
        }
    }
    DirectionCache {
        order,
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Runs the network on one encoded sequence. Initial states are zero.
pub fn forward<F: Scalar>(params: &LearnerParams<F>, inputs: &[[F; 2]]) -> Result<ForwardCache<F>, NetworkError> {
    if inputs.is_empty() {
        return Err(NetworkError::EmptyInput);
    }
    let ParamLayout { hidden: d, classes, .. } = params.layout;
    let t_len = F::lit(inputs.len() as f64);
    let dirs = [run_direction(params, 0, inputs), run_direction(params, 1, inputs)];
    let mut pooled = vec![F::zero(); 2 * d];
    for (dir, cache) in dirs.iter().enumerate() {
        for k in 0..inputs.len() {
            for m in 0..d {
                pooled[dir * d + m] += cache.h[d * k + m];
            }
        }
    }
    for v in pooled.iter_mut() {
        *v /= t_len;
    }
    let fc = params.fc();
    let z: Vec<F> = (0..classes)
        .map(|r| {
            let row = &fc[r * 2 * d..(r + 1) * 2 * d];
            row.iter().zip(&pooled).map(|(&a, &b)| a * b).sum()
        })
        .collect();
    let probs = softmax(&z);
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(NetworkError::NonFiniteActivation);
    }
    Ok(ForwardCache {
        inputs: inputs.to_vec(),
        dirs,
        pooled,
        probs,
    })
}

/// Smallest probability fed to the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Categorical cross entropy summed over the batch.
pub fn loss<F: Scalar>(probs: &[Vec<F>], labels: &[usize]) -> F {
    let floor = F::lit(LOG_FLOOR);
    probs
        .iter()
        .zip(labels)
        .map(|(p, &l)| -p[l].max(floor).ln())
        .sum()
}

/// Accumulates the gradient of `-ln p[label]` into `grad` (same layout as
/// the parameters). Uses `p - onehot` for the logits, i.e. the unclamped loss.
pub fn backward<F: Scalar>(
    params: &LearnerParams<F>,
    cache: &ForwardCache<F>,
    label: usize,
    grad: &mut [F],
) -> Result<(), NetworkError> {
    let layout = params.layout;
    let ParamLayout { hidden: d, classes, .. } = layout;
    if label >= classes {
        return Err(NetworkError::LabelOutOfRange { label, classes });
    }
    let t_len = cache.inputs.len();
    let inv_t = F::one() / F::lit(t_len as f64);

    let mut dz = cache.probs.clone();
    dz[label] -= F::one();

    let fc = params.fc();
    let fc_range = layout.fc();
    let mut d_pooled = vec![F::zero(); 2 * d];
    for r in 0..classes {
        let row = &fc[r * 2 * d..(r + 1) * 2 * d];
        let g_row = &mut grad[fc_range.start + r * 2 * d..fc_range.start + (r + 1) * 2 * d];
        for m in 0..2 * d {
            g_row[m] += dz[r] * cache.pooled[m];
            d_pooled[m] += row[m] * dz[r];
        }
    }

    let mut dh_next = vec![F::zero(); d];
    let mut dc_next = vec![F::zero(); d];
    let mut da = vec![F::zero(); 4 * d];
    for dir in 0..2 {
        let u = params.u(dir);
        let (w_range, u_range, b_range) = (layout.w(dir), layout.u(dir), layout.b(dir));
        let dcache = &cache.dirs[dir];
        dh_next.iter_mut().for_each(|v| *v = F::zero());
        dc_next.iter_mut().for_each(|v| *v = F::zero());
        for k in (0..t_len).rev() {
            let s = dcache.step(k, d);
            let x = cache.inputs[dcache.order[k]];
            let prev = (k > 0).then(|| dcache.step(k - 1, d));
            for m in 0..d {
                let (f, i, o, g) = (s.gates[m], s.gates[d + m], s.gates[2 * d + m], s.gates[3 * d + m]);
                let tc = s.tanh_c[m];
                let dh = d_pooled[dir * d + m] * inv_t + dh_next[m];
                let d_o = dh * tc;
                let dc = dh * o * (F::one() - tc * tc) + dc_next[m];
                let c_prev = prev.map_or(F::zero(), |p| p.c[m]);
                let df = dc * c_prev;
                let di = dc * g;
                let dg = dc * i;
                dc_next[m] = dc * f;
                da[m] = df * f * (F::one() - f);
                da[d + m] = di * i * (F::one() - i);
                da[2 * d + m] = d_o * o * (F::one() - o);
                da[3 * d + m] = dg * (F::one() - g * g);
            }
            for j in 0..4 * d {
                let a = da[j];
                grad[w_range.start + 2 * j] += a * x[0];
                grad[w_range.start + 2 * j + 1] += a * x[1];
                grad[b_range.start + j] += a;
            }
            dh_next.iter_mut().for_each(|v| *v = F::zero());
            if let Some(p) = prev {
                for j in 0..4 * d {
                    let a = da[j];
                    let g_row = &mut grad[u_range.start + j * d..u_range.start + (j + 1) * d];
                    let u_row = &u[j * d..(j + 1) * d];
                    for m in 0..d {
                        g_row[m] += a * p.h[m];
                        dh_next[m] += u_row[m] * a;
                    }
                }
            }
        }
    }
    Ok(())
}
