//! Fourth-order central finite-difference stencils over generic linear values.

use nalgebra::DMatrix;

/// Values that can be combined linearly by a stencil.
pub(crate) trait Linear: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, a: f64, other: &Self);
    fn scale(&mut self, a: f64);
}

impl Linear for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
}

impl Linear for DMatrix<f64> {
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += other * a;
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
}

const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
const D1: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
const D2: [f64; 4] = [-1.0, 16.0, 16.0, -1.0];
const D2_CENTER: f64 = -30.0;

pub(crate) struct Derivatives<T> {
    pub value: T,
    pub first: Vec<T>,
    pub second: Vec<Vec<T>>,
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(axis, dx) in moves {
        y[axis] += dx;
    }
    y
}

/// Value and first derivatives.
pub(crate) fn first<T: Linear>(f: &impl Fn(&[f64]) -> T, x: &[f64], steps: &[f64]) -> (T, Vec<T>) {
    let value = f(x);
    let first = (0..x.len())
        .map(|a| {
            let h = steps[a];
            let mut acc = value.zero_like();
            for (off, c) in OFFSETS.iter().zip(D1) {
                acc.add_scaled(c, &f(&shifted(x, &[(a, off * h)])));
            }
            acc.scale(1.0 / (12.0 * h));
            acc
        })
        .collect();
    (value, first)
}

/// Value, first and second derivatives (symmetric second block).
pub(crate) fn second<T: Linear>(f: &impl Fn(&[f64]) -> T, x: &[f64], steps: &[f64]) -> Derivatives<T> {
    let n = x.len();
    let value = f(x);
    let mut first = Vec::with_capacity(n);
    let mut second = vec![vec![value.zero_like(); n]; n];
    for a in 0..n {
        let h = steps[a];
        let samples: Vec<T> = OFFSETS.iter().map(|off| f(&shifted(x, &[(a, off * h)]))).collect();
        let mut d1 = value.zero_like();
        let mut d2 = value.zero_like();
        d2.add_scaled(D2_CENTER, &value);
        for k in 0..4 {
            d1.add_scaled(D1[k], &samples[k]);
            d2.add_scaled(D2[k], &samples[k]);
        }
        d1.scale(1.0 / (12.0 * h));
        d2.scale(1.0 / (12.0 * h * h));
        first.push(d1);
        second[a][a] = d2;
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (ha, hb) = (steps[a], steps[b]);
            let mut acc = value.zero_like();
            for (p, cp) in OFFSETS.iter().zip(D1) {
                for (q, cq) in OFFSETS.iter().zip(D1) {
                    acc.add_scaled(cp * cq, &f(&shifted(x, &[(a, p * ha), (b, q * hb)])));
                }
            }
            acc.scale(1.0 / (144.0 * ha * hb));
            second[b][a] = acc.clone();
            second[a][b] = acc;
        }
    }
    Derivatives { value, first, second }
}

/// Fourth-order derivative of a uniformly sampled sequence at interior index `i`.
pub(crate) fn sampled_first(values: &[f64], i: usize, h: f64) -> f64 {
    (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h)
}

pub(crate) fn sampled_second(values: &[f64], i: usize, h: f64) -> f64 {
    (-values[i - 2] + 16.0 * values[i - 1] - 30.0 * values[i] + 16.0 * values[i + 1] - values[i + 2])
        / (12.0 * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact() {
        let f = |x: &[f64]| x[0].powi(3) * x[1] + 2.0 * x[1] * x[1];
        let d = second(&f, &[0.7, -0.3], &[1e-2, 1e-2]);
        assert!((d.first[0] - 3.0 * 0.49 * -0.3).abs() < 1e-10);
        assert!((d.first[1] - (0.343 - 1.2)).abs() < 1e-10);
        assert!((d.second[0][0] - 6.0 * 0.7 * -0.3).abs() < 1e-8);
        assert!((d.second[0][1] - 3.0 * 0.49).abs() < 1e-8);
        assert!((d.second[1][1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn matrix_values_differentiate_entrywise() {
        let f = |x: &[f64]| DMatrix::from_row_slice(2, 2, &[x[0].sin(), 0.0, 0.0, x[0].cos()]);
        let (_, d) = first(&f, &[0.4], &[1e-3]);
        assert!((d[0][(0, 0)] - 0.4f64.cos()).abs() < 1e-11);
        assert!((d[0][(1, 1)] + 0.4f64.sin()).abs() < 1e-11);
    }
}
