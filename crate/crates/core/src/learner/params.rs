use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Gate order used for every stacked block: forget, input, output, cell.
pub const GATES: [&str; 4] = ["f", "i", "o", "c"];
pub const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

/// Shapes of all learnable tensors, stored back to back in one flat buffer.
///
/// Per direction: `W` (4d x input, gates stacked), `U` (4d x d), `b` (4d).
/// Then the fully connected map `W_fc` (classes x 2d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub hidden: usize,
    pub input: usize,
    pub classes: usize,
}

/// Shape and position of one named tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub range: Range<usize>,
}

impl ParamLayout {
    pub fn new(hidden: usize, input: usize, classes: usize) -> Self {
        ParamLayout {
            hidden,
            input,
            classes,
        }
    }

    fn direction_len(&self) -> usize {
        let d = self.hidden;
        4 * d * self.input + 4 * d * d + 4 * d
    }

    pub fn w(&self, dir: usize) -> Range<usize> {
        let start = dir * self.direction_len();
        start..start + 4 * self.hidden * self.input
    }

    pub fn u(&self, dir: usize) -> Range<usize> {
        let start = self.w(dir).end;
        start..start + 4 * self.hidden * self.hidden
    }

    pub fn b(&self, dir: usize) -> Range<usize> {
        let start = self.u(dir).end;
        start..start + 4 * self.hidden
    }

    pub fn fc(&self) -> Range<usize> {
        let start = 2 * self.direction_len();
        start..start + self.classes * 2 * self.hidden
    }

    pub fn len(&self) -> usize {
        self.fc().end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Named tensors (`fwd.W_f`, ..., `bwd.b_c`, `W_fc`) in buffer order.
    pub fn groups(&self) -> Vec<ParamGroup> {
        let d = self.hidden;
        let mut out = Vec::with_capacity(25);
        for (dir, dname) in DIRECTIONS.iter().enumerate() {
            for (kind, block, cols) in [("W", self.w(dir), self.input), ("U", self.u(dir), d), ("b", self.b(dir), 1)] {
                let per_gate = d * cols;
                for (g, gname) in GATES.iter().enumerate() {
                    let start = block.start + g * per_gate;
                    out.push(ParamGroup {
                        name: format!("{dname}.{kind}_{gname}"),
                        rows: d,
                        cols,
                        range: start..start + per_gate,
                    });
                }
            }
        }
        out.push(ParamGroup {
            name: "W_fc".to_string(),
            rows: self.classes,
            cols: 2 * d,
            range: self.fc(),
        });
        out
    }
}

/// All weights and biases of the classifier in a flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams<F> {
    pub layout: ParamLayout,
    pub data: Vec<F>,
}

impl<F: Scalar> LearnerParams<F> {
    pub fn zeros(layout: ParamLayout) -> Self {
        LearnerParams {
            layout,
            data: vec![F::zero(); layout.len()],
        }
    }

    /// Uniform initialisation in `[-scale, scale]`.
    pub fn uniform<R: Rng + ?Sized>(layout: ParamLayout, scale: f64, rng: &mut R) -> Self {
        let data = (0..layout.len())
            .map(|_| F::lit(rng.gen_range(-scale..=scale)))
            .collect();
        LearnerParams { layout, data }
    }

    pub fn w(&self, dir: usize) -> &[F] {
        &self.data[self.layout.w(dir)]
    }

    pub fn u(&self, dir: usize) -> &[F] {
        &self.data[self.layout.u(dir)]
    }

    pub fn b(&self, dir: usize) -> &[F] {
        &self.data[self.layout.b(dir)]
    }

    pub fn fc(&self) -> &[F] {
        &self.data[self.layout.fc()]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
