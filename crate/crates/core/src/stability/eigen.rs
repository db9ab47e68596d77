//! Structured-grid Jacobi operators and shifted inverse iteration.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Hypersurface, TOL_MIN};
use crate::error::{Error, Result};
use crate::field::TableField;
use crate::spline::GridAxis;

/// Relative residual at which inverse iteration stops.
pub const TOL_EIG: f64 = 1e-8;
const MAX_ITER: usize = 500;
const MAX_SHIFT_UPDATES: usize = 4;

/// Coordinate ball cutting a box grid down to a rounded domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Tensor grid on a parameter box. Nodes on non-periodic box faces, and
/// nodes outside the optional ball, carry the Dirichlet condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGrid {
    pub axes: Vec<GridAxis>,
    #[serde(default)]
    pub ball: Option<Ball>,
}

impl DomainGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidParameter("grid needs at least one axis".into()));
        }
        for (a, axis) in axes.iter().enumerate() {
            let min = if axis.periodic { 3 } else { 4 };
            if axis.nodes < min || !(axis.hi > axis.lo) {
                return Err(Error::InvalidParameter(format!("grid axis {a} needs >= {min} nodes and hi > lo")));
            }
        }
        Ok(DomainGrid { axes, ball: None })
    }

    /// Uniform grid over `[lo, hi]` on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        DomainGrid::new(vec![GridAxis { lo, hi, nodes, periodic: false }; dim])
    }

    pub fn with_ball(mut self, center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: center.len() });
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        self.ball = Some(Ball { center, radius });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.axes[a].nodes;
            idx /= self.axes[a].nodes;
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.axes).fold(0, |acc, (&i, axis)| acc * axis.nodes + i)
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().zip(&self.axes).map(|(&i, axis)| axis.node(i)).collect()
    }

    pub fn is_unknown(&self, idx: usize) -> bool {
        let mi = self.multi_index(idx);
        let inside_box = mi
            .iter()
            .zip(&self.axes)
            .all(|(&i, axis)| axis.periodic || (i > 0 && i + 1 < axis.nodes));
        inside_box
            && self.ball.as_ref().is_none_or(|b| {
                let x = self.coords(idx);
                x.iter().zip(&b.center).map(|(p, c)| (p - c) * (p - c)).sum::<f64>().sqrt() < b.radius
            })
    }

    pub fn unknowns(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_unknown(i)).collect()
    }

    fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let mut mi = self.multi_index(idx);
        let n = self.axes[axis].nodes as isize;
        let next = mi[axis] as isize + dir;
        mi[axis] = if self.axes[axis].periodic {
            next.rem_euclid(n) as usize
        } else if next < 0 || next >= n {
            return None;
        } else {
            next as usize
        };
        Some(self.flat_index(&mi))
    }

    /// Trapezoid weight of a node in the coordinate measure, leaving out `skip`.
    fn node_weight(&self, idx: usize, skip: Option<usize>) -> f64 {
        self.multi_index(idx)
            .iter()
            .zip(&self.axes)
            .enumerate()
            .filter(|(a, _)| Some(*a) != skip)
            .map(|(_, (&i, axis))| {
                let end = !axis.periodic && (i == 0 || i + 1 == axis.nodes);
                axis.spacing() * if end { 0.5 } else { 1.0 }
            })
            .product()
    }
}

/// Jacobi operator `L φ = −Δ_S φ + V φ` discretized on a grid, with
/// `V = |∇^⊥ν|² − |A_ν|² − Σ_i Rm(e_i, ν, e_i, ν)`.
#[derive(Clone, Debug)]
pub struct JacobiOperator {
    hs: Hypersurface,
    grid: DomainGrid,
    normal: usize,
    unknowns: Vec<usize>,
    slots: Vec<Option<usize>>,
    rows: Vec<Vec<(usize, f64)>>,
    weights: Vec<f64>,
    potential: Vec<f64>,
    max_mean_curvature: f64,
}

fn sqrt_det(g: &DMatrix<f64>) -> f64 {
    g.determinant().max(0.0).sqrt()
}

fn is_diagonal(g: &DMatrix<f64>) -> bool {
    let n = g.nrows();
    (0..n).all(|a| (0..n).all(|b| a == b || g[(a, b)].abs() <= 1e-13 * (g[(a, a)] * g[(b, b)]).abs().sqrt()))
}

/// `√det g · g^{ab}` at `u`.
fn flux_tensor(hs: &Hypersurface, u: &[f64]) -> Result<DMatrix<f64>> {
    let g = hs.induced_metric(u);
    let w = sqrt_det(&g);
    let ginv = g.try_inverse().ok_or(Error::RankDeficient { param: u.to_vec() })?;
    Ok(ginv * w)
}

impl JacobiOperator {
    /// Builds the operator for the normal `ν_normal`.
    pub fn assemble(hs: &Hypersurface, grid: &DomainGrid, normal: usize) -> Result<Self> {
        if grid.dim() != hs.dim() {
            return Err(Error::DimensionMismatch { expected: hs.dim(), got: grid.dim() });
        }
        if normal >= hs.codim() {
            return Err(Error::InvalidParameter(format!("normal index {normal} with codimension {}", hs.codim())));
        }
        for (a, (g, p)) in grid.axes.iter().zip(&hs.params().axes).enumerate() {
            let fits = if g.periodic {
                p.periodic && (g.hi - g.lo - p.width()).abs() < 1e-12
            } else {
                g.lo >= p.lo && g.hi <= p.hi
            };
            if !fits {
                return Err(Error::InvalidParameter(format!("grid axis {a} does not fit the parameter domain")));
            }
        }
        let unknowns = grid.unknowns();
        if unknowns.is_empty() {
            return Err(Error::InvalidParameter("grid has no interior nodes".into()));
        }
        let mut slots = vec![None; grid.len()];
        for (s, &i) in unknowns.iter().enumerate() {
            slots[i] = Some(s);
        }
        let built = unknowns
            .par_iter()
            .map(|&i| Self::row(hs, grid, normal, i))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(built.len());
        let mut weights = Vec::with_capacity(built.len());
        let mut potential = Vec::with_capacity(built.len());
        let mut max_mean_curvature: f64 = 0.0;
        for (row, w, v, h) in built {
            rows.push(row);
            weights.push(w);
            potential.push(v);
            max_mean_curvature = max_mean_curvature.max(h);
        }
        Ok(JacobiOperator {
            hs: hs.clone(),
            grid: grid.clone(),
            normal,
            unknowns,
            slots,
            rows,
            weights,
            potential,
            max_mean_curvature,
        })
    }

    fn row(hs: &Hypersurface, grid: &DomainGrid, normal: usize, i: usize) -> Result<(Vec<(usize, f64)>, f64, f64, f64)> {
        let u = grid.coords(i);
        let g = hs.induced_metric(&u);
        let w = sqrt_det(&g);
        if !(w > 0.0) {
            return Err(Error::RankDeficient { param: u });
        }
        let k = grid.dim();
        let mut row = Vec::with_capacity(2 * k + 1 + 4 * k * k);
        let mut diag = 0.0;
        for a in 0..k {
            let h = grid.axes[a].spacing();
            for dir in [-1isize, 1] {
                let j = grid.neighbor(i, a, dir).expect("interior node has both neighbors");
                let mut mid = u.clone();
                mid[a] += dir as f64 * 0.5 * h;
                let c = flux_tensor(hs, &mid)?[(a, a)] / (w * h * h);
                row.push((j, -c));
                diag += c;
            }
        }
        if !is_diagonal(&g) {
            for a in 0..k {
                for b in 0..k {
                    if a == b {
                        continue;
                    }
                    let scale = 4.0 * grid.axes[a].spacing() * grid.axes[b].spacing() * w;
                    for sa in [-1isize, 1] {
                        let na = grid.neighbor(i, a, sa).expect("interior node has both neighbors");
                        let flux = flux_tensor(hs, &grid.coords(na))?[(a, b)];
                        for sb in [-1isize, 1] {
                            let nab = grid.neighbor(na, b, sb).expect("interior node has diagonal neighbors");
                            row.push((nab, -((sa * sb) as f64) * flux / scale));
                        }
                    }
                }
            }
        }
        let (v, h) = hs.potential_and_mean(&u, normal)?;
        row.push((i, diag + v));
        Ok((row, w, v, h))
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn normal(&self) -> usize {
        self.normal
    }

    /// Full-grid indices of the interior nodes.
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Potential `V` at the interior nodes.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Largest mean-curvature norm seen while assembling.
    pub fn max_mean_curvature(&self) -> f64 {
        self.max_mean_curvature
    }

    /// True when the surface is not minimal to within [`TOL_MIN`]; the
    /// operator is still assembled.
    pub fn is_flagged(&self) -> bool {
        self.max_mean_curvature > TOL_MIN
    }

    /// Applies `L` to a function given on every grid node; boundary
    /// entries of the result are zero.
    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: phi.len() });
        }
        let mut out = vec![0.0; phi.len()];
        for (row, &i) in self.rows.iter().zip(&self.unknowns) {
            out[i] = row.iter().map(|&(j, c)| c * phi[j]).sum();
        }
        Ok(out)
    }

    fn apply_interior(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().filter_map(|&(j, c)| self.slots[j].map(|s| c * x[s])).sum())
            .collect()
    }

    fn gershgorin_lower(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.unknowns)
            .map(|(row, &i)| {
                let diag: f64 = row.iter().filter(|(j, _)| *j == i).map(|(_, c)| c).sum();
                let off: f64 = row.iter().filter(|(j, _)| *j != i && self.slots[*j].is_some()).map(|(_, c)| c.abs()).sum();
                diag - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn banded(&self, shift: f64) -> Banded {
        let n = self.unknowns.len();
        let mut entries = Vec::new();
        let mut bw = 0;
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                if let Some(s) = self.slots[j] {
                    bw = bw.max(r.abs_diff(s));
                    entries.push((r, s, c));
                }
            }
        }
        let mut m = Banded::new(n, bw);
        for (r, s, c) in entries {
            m.add(r, s, c);
        }
        for r in 0..n {
            m.add(r, r, -shift);
        }
        m
    }

    fn weighted_norm(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    /// Smallest eigenvalue and positive eigenfunction, `max f = 1`.
    pub fn first_eigenpair(&self) -> Result<EigenResult> {
        let n = self.unknowns.len();
        // the diffusion part is nonnegative, so min V bounds the spectrum
        // from below as well and is far tighter once mixed terms appear
        let floor = self.potential.iter().copied().fold(f64::INFINITY, f64::min);
        let lower = self.gershgorin_lower().max(floor);
        let mut shift = lower - 1e-3 * lower.abs().max(1.0);
        let mut lu = self.banded(shift).factor()?;
        let mut x = vec![1.0; n];
        let mut updates = 0;
        let mut residual = f64::INFINITY;
        for it in 1..=MAX_ITER {
            let y = lu.solve(&x);
            let norm = self.weighted_norm(&y);
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::EigenNonConvergence { iterations: it, residual });
            }
            x = y.iter().map(|v| v / norm).collect();
            let ax = self.apply_interior(&x);
            let lambda: f64 = x.iter().zip(&ax).zip(&self.weights).map(|((p, q), w)| w * p * q).sum::<f64>();
            let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
            residual = self.weighted_norm(&r) / lambda.abs().max(1.0);
            if residual < TOL_EIG {
                return self.finish(x, lambda, residual, it);
            }
            if residual < 1e-3 && updates < MAX_SHIFT_UPDATES && lambda > shift {
                shift += 0.9 * (lambda - shift);
                lu = self.banded(shift).factor()?;
                updates += 1;
            }
        }
        Err(Error::EigenNonConvergence { iterations: MAX_ITER, residual })
    }

    fn finish(&self, mut x: Vec<f64>, lambda: f64, residual: f64, iterations: usize) -> Result<EigenResult> {
        if x.iter().sum::<f64>() < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if let Some(s) = x.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::EigenfunctionNotPositive { node: self.unknowns[s] });
        }
        let mut f = vec![0.0; self.grid.len()];
        for (&i, v) in self.unknowns.iter().zip(&x) {
            f[i] = v / max;
        }
        Ok(EigenResult { lambda, eigenfunction: f, grid: self.grid.clone(), residual, iterations })
    }

    /// Quadrature of `∫ (|∇φ|² + V φ²) dvol` for a function on every grid
    /// node vanishing on the Dirichlet nodes.
    pub fn second_variation(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: phi.len() });
        }
        let grid = &self.grid;
        let k = grid.dim();
        let mut total = 0.0;
        for i in 0..grid.len() {
            let u = grid.coords(i);
            for a in 0..k {
                let Some(j) = grid.neighbor(i, a, 1) else { continue };
                if phi[i] == 0.0 && phi[j] == 0.0 {
                    continue;
                }
                let h = grid.axes[a].spacing();
                let mut mid = u.clone();
                mid[a] += 0.5 * h;
                let flux = flux_tensor(&self.hs, &mid)?[(a, a)];
                let d = (phi[j] - phi[i]) / h;
                total += flux * d * d * h * grid.node_weight(i, Some(a));
            }
        }
        for (s, &i) in self.unknowns.iter().enumerate() {
            let u = grid.coords(i);
            let vol = grid.node_weight(i, None);
            total += self.potential[s] * phi[i] * phi[i] * self.weights[s] * vol;
            let g = self.hs.induced_metric(&u);
            if is_diagonal(&g) {
                continue;
            }
            let flux = flux_tensor(&self.hs, &u)?;
            let grad: Vec<f64> = (0..k)
                .map(|a| {
                    let p = grid.neighbor(i, a, 1).expect("interior");
                    let m = grid.neighbor(i, a, -1).expect("interior");
                    (phi[p] - phi[m]) / (2.0 * grid.axes[a].spacing())
                })
                .collect();
            for a in 0..k {
                for b in 0..k {
                    if a != b {
                        total += flux[(a, b)] * grad[a] * grad[b] * vol;
                    }
                }
            }
        }
        Ok(total)
    }
}

/// Applies the Jacobi operator of `ν_normal` to a grid function.
pub fn jacobi_operator(hs: &Hypersurface, grid: &DomainGrid, normal: usize, phi: &[f64]) -> Result<Vec<f64>> {
    JacobiOperator::assemble(hs, grid, normal)?.apply(phi)
}

/// First Dirichlet eigenpair of the Jacobi operator of the first normal.
pub fn first_eigenpair(hs: &Hypersurface, grid: &DomainGrid) -> Result<EigenResult> {
    JacobiOperator::assemble(hs, grid, 0)?.first_eigenpair()
}

/// Second variation `I(φν)` of a grid function.
pub fn second_variation(op: &JacobiOperator, phi: &[f64]) -> Result<f64> {
    op.second_variation(phi)
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    /// Values on every grid node, zero on the Dirichlet nodes.
    pub eigenfunction: Vec<f64>,
    pub grid: DomainGrid,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub interior_nodes: usize,
    pub shape: Vec<usize>,
}

impl EigenResult {
    pub fn summary(&self) -> EigenSummary {
        EigenSummary {
            lambda: self.lambda,
            residual: self.residual,
            iterations: self.iterations,
            interior_nodes: self.eigenfunction.iter().filter(|v| **v > 0.0).count(),
            shape: self.grid.axes.iter().map(|a| a.nodes).collect(),
        }
    }

    /// Spline interpolant of the eigenfunction.
    pub fn field(&self) -> Result<TableField> {
        TableField::new(self.grid.axes.clone(), &self.eigenfunction)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.grid.dim()).map(|a| format!("u{a}")).collect();
        header.push("f".into());
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for (i, f) in self.eigenfunction.iter().enumerate() {
            let mut rec: Vec<String> = self.grid.coords(i).iter().map(|v| v.to_string()).collect();
            rec.push(f.to_string());
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Band matrix with LU factorization without pivoting.
struct Banded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Banded {
    fn new(n: usize, bw: usize) -> Self {
        Banded { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.at(k, k)];
            if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
                return Err(Error::EigenNonConvergence { iterations: 0, residual: f64::INFINITY });
            }
            let end = (k + bw + 1).min(n);
            for i in (k + 1)..end {
                let ik = self.at(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in (k + 1)..end {
                    let kj = self.data[self.at(k, j)];
                    let ij = self.at(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = y[i];
            for j in start..i {
                s -= self.data[self.at(i, j)] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut s = y[i];
            for j in (i + 1)..end {
                s -= self.data[self.at(i, j)] * y[j];
            }
            y[i] = s / self.data[self.at(i, i)];
        }
        y
    }
}
