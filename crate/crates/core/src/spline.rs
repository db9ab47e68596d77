//! Tensor-product cubic B-spline interpolation on uniform grids.
//!
//! Non-periodic axes use the not-a-knot end condition so values are
//! fourth-order and second derivatives second-order accurate up to the ends.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis: `nodes` samples on `[lo, hi]` (periodic: `[lo, hi)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    #[serde(default)]
    pub periodic: bool,
}

impl GridAxis {
    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.hi - self.lo) / self.nodes as f64
        } else {
            (self.hi - self.lo) / (self.nodes - 1) as f64
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    fn coef_count(&self) -> usize {
        if self.periodic {
            self.nodes
        } else {
            self.nodes + 2
        }
    }

    /// Matrix mapping node values to B-spline coefficients.
    fn solve_matrix(&self) -> DMatrix<f64> {
        let n = self.nodes;
        if self.periodic {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, (i + n - 1) % n)] += 1.0 / 6.0;
                m[(i, i)] += 4.0 / 6.0;
                m[(i, (i + 1) % n)] += 1.0 / 6.0;
            }
            return m.try_inverse().expect("periodic spline system is invertible");
        }
        let k = n + 2;
        let mut m = DMatrix::zeros(k, k);
        // not-a-knot: third derivative continuous across the second and
        // second-to-last knots
        let row = [-1.0, 4.0, -6.0, 4.0, -1.0];
        for (j, c) in row.iter().enumerate() {
            m[(0, j)] = *c;
            m[(k - 1, k - 5 + j)] = *c;
        }
        for i in 0..n {
            m[(i + 1, i)] = 1.0 / 6.0;
            m[(i + 1, i + 1)] = 4.0 / 6.0;
            m[(i + 1, i + 2)] = 1.0 / 6.0;
        }
        let inv = m.try_inverse().expect("spline system is invertible");
        inv.columns(1, n).into_owned()
    }

    /// Index of the first of four coefficients and the local parameter.
    fn locate(&self, x: f64) -> (isize, f64) {
        let h = self.spacing();
        let u = (x - self.lo) / h;
        if self.periodic {
            let i = u.floor();
            (i as isize, u - i)
        } else {
            let i = u.floor().clamp(0.0, (self.nodes - 2) as f64);
            // coefficient c_{i-1} is stored at index i
            (i as isize, u - i)
        }
    }
}

fn basis(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    let v = [s * s * s / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0];
    let d = [-s * s / 2.0, (3.0 * t2 - 4.0 * t) / 2.0, (-3.0 * t2 + 2.0 * t + 1.0) / 2.0, t2 / 2.0];
    let dd = [s, 3.0 * t - 2.0, -3.0 * t + 1.0, t];
    (v, d, dd)
}

/// Interpolant of `comps`-component samples on a tensor grid.
#[derive(Clone, Debug)]
pub struct TensorSpline {
    axes: Vec<GridAxis>,
    comps: usize,
    shape: Vec<usize>,
    coeffs: Vec<f64>,
}

impl TensorSpline {
    /// `values` is row-major over the grid (last axis fastest) with the
    /// components innermost.
    pub fn new(axes: Vec<GridAxis>, comps: usize, values: &[f64]) -> Result<Self> {
        for (a, axis) in axes.iter().enumerate() {
            let min = if axis.periodic { 3 } else { 4 };
            if axis.nodes < min || !(axis.hi > axis.lo) {
                return Err(Error::InvalidParameter(format!("grid axis {a} needs >= {min} nodes and hi > lo")));
            }
        }
        let total: usize = axes.iter().map(|a| a.nodes).product::<usize>() * comps;
        if values.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: values.len() });
        }
        let mut shape: Vec<usize> = axes.iter().map(|a| a.nodes).collect();
        let mut data = values.to_vec();
        for (a, axis) in axes.iter().enumerate() {
            let s = axis.solve_matrix();
            let outer: usize = shape[..a].iter().product();
            let inner: usize = shape[a + 1..].iter().product::<usize>() * comps;
            let len_in = shape[a];
            let len_out = axis.coef_count();
            let mut out = vec![0.0; outer * len_out * inner];
            for o in 0..outer {
                for r in 0..len_out {
                    for i in 0..len_in {
                        let c = s[(r, i)];
                        if c == 0.0 {
                            continue;
                        }
                        let src = (o * len_in + i) * inner;
                        let dst = (o * len_out + r) * inner;
                        for k in 0..inner {
                            out[dst + k] += c * data[src + k];
                        }
                    }
                }
            }
            shape[a] = len_out;
            data = out;
        }
        Ok(TensorSpline { axes, comps, shape, coeffs: data })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn components(&self) -> usize {
        self.comps
    }

    /// Evaluates all components at `x`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.eval_with(x, None)
    }

    /// Evaluates a mixed derivative; `orders[a] ∈ {0, 1, 2}` per axis.
    pub fn eval_derivative(&self, x: &[f64], orders: &[usize]) -> Vec<f64> {
        self.eval_with(x, Some(orders))
    }

    fn eval_with(&self, x: &[f64], orders: Option<&[usize]>) -> Vec<f64> {
        let dim = self.axes.len();
        let mut starts = Vec::with_capacity(dim);
        let mut weights = Vec::with_capacity(dim);
        for (a, axis) in self.axes.iter().enumerate() {
            let (i, t) = axis.locate(x[a]);
            let (v, d, dd) = basis(t);
            let h = axis.spacing();
            let w = match orders.map(|o| o[a]).unwrap_or(0) {
                0 => v,
                1 => d.map(|c| c / h),
                _ => dd.map(|c| c / (h * h)),
            };
            starts.push(i);
            weights.push(w);
        }
        let mut out = vec![0.0; self.comps];
        let total = 4usize.pow(dim as u32);
        for combo in 0..total {
            let mut rem = combo;
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..dim {
                let k = rem % 4;
                rem /= 4;
                w *= weights[a][k];
                let len = self.shape[a] as isize;
                let mut idx = starts[a] + k as isize;
                if self.axes[a].periodic {
                    idx = (idx - 1).rem_euclid(len);
                }
                flat = flat * self.shape[a] + idx as usize;
            }
            if w == 0.0 {
                continue;
            }
            let base = flat * self.comps;
            for c in 0..self.comps {
                out[c] += w * self.coeffs[base + c];
            }
        }
        out
    }
}
