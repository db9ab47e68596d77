//! Minimal submanifolds: second fundamental form, Jacobi operator, first
//! Dirichlet eigenpairs and the curvature identities built on them.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chart::{Axis, Chart, Domain, MetricField, Warp};
use crate::error::{Error, Result};
use crate::fd;
use crate::linalg;

mod eigen;
mod lemmas;

pub use eigen::{
    first_eigenpair, jacobi_operator, second_variation, Ball, DomainGrid, EigenResult, EigenSummary, JacobiOperator,
};
pub use lemmas::{gauss_ricci, lemma3_conformal_ricci, lemma4_check, lemma9_lower_bound, GaussCheck, Lemma4Sides};

/// Residual allowed in the mean curvature of a declared-minimal surface.
pub const TOL_MIN: f64 = 1e-6;
const EMBED_STEP: f64 = 1e-3;

/// A map from a parameter box into ambient chart coordinates.
pub trait Embedding: Send + Sync {
    fn param_dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn point(&self, u: &[f64]) -> Vec<f64>;
    /// Columns `∂X/∂u_j`, when known in closed form.
    fn jacobian(&self, _u: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    fn name(&self) -> String;
}

/// Built-in embeddings together with their ambient charts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BuiltinEmbedding {
    /// Totally geodesic `Sⁿ ⊂ S^{n+codim}`: the leading `codim` polar angles fixed at `π/2`.
    Equator { dim: usize, #[serde(default = "one")] codim: usize },
    /// The same equator `Sⁿ ⊂ S^{n+1}` written in normal coordinates about a point on it.
    NormalEquator { dim: usize },
    /// Coordinate plane `ℝᵏ × {0} ⊂ ℝᵐ`.
    Plane { dim: usize, ambient: usize, #[serde(default = "unit")] half_width: f64 },
    /// Flat strip `[0, length] × S¹` in `ℝ² × S¹`, the circle of unit length.
    Strip { length: f64 },
    /// Clifford torus `ξ = π/4` in toroidal coordinates on `S³`.
    CliffordTorus,
    /// Round sphere of the given radius in flat space (not minimal).
    RoundSphere { dim: usize, radius: f64 },
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl BuiltinEmbedding {
    fn param_domain(&self) -> Domain {
        match self {
            BuiltinEmbedding::Equator { dim, .. } | BuiltinEmbedding::RoundSphere { dim, .. } => {
                let mut axes = vec![Axis::new(0.0, PI); dim - 1];
                axes.push(Axis::periodic(0.0, 2.0 * PI));
                Domain::new(axes)
            }
            BuiltinEmbedding::NormalEquator { dim } => Domain::cube(*dim, -NORMAL_REACH, NORMAL_REACH),
            BuiltinEmbedding::Plane { dim, half_width, .. } => Domain::cube(*dim, -half_width, *half_width),
            BuiltinEmbedding::Strip { length } => Domain::new(vec![Axis::new(0.0, *length), Axis::periodic(0.0, 1.0)]),
            BuiltinEmbedding::CliffordTorus => {
                Domain::new(vec![Axis::periodic(0.0, 2.0 * PI), Axis::periodic(0.0, 2.0 * PI)])
            }
        }
    }

    fn ambient(&self) -> Chart {
        match self {
            BuiltinEmbedding::Equator { dim, codim } => Chart::sphere(dim + codim, 1.0),
            BuiltinEmbedding::NormalEquator { dim } => {
                Chart::rotational(dim + 1, Warp::Sphere { radius: 1.0 }, NORMAL_REACH + 0.1)
            }
            BuiltinEmbedding::Plane { ambient, half_width, .. } => Chart::flat(*ambient, half_width + 0.1),
            BuiltinEmbedding::Strip { length } => Chart::flat_box(Domain::new(vec![
                Axis::new(-0.1, length + 0.1),
                Axis::periodic(0.0, 1.0),
                Axis::new(-1.0, 1.0),
            ])),
            BuiltinEmbedding::CliffordTorus => Chart::sphere3_toroidal(),
            BuiltinEmbedding::RoundSphere { dim, radius } => Chart::flat(dim + 1, 1.5 * radius),
        }
    }

    fn is_minimal(&self) -> bool {
        !matches!(self, BuiltinEmbedding::RoundSphere { .. })
    }
}

const NORMAL_REACH: f64 = 1.7;

impl Embedding for BuiltinEmbedding {
    fn param_dim(&self) -> usize {
        match self {
            BuiltinEmbedding::Equator { dim, .. }
            | BuiltinEmbedding::NormalEquator { dim }
            | BuiltinEmbedding::Plane { dim, .. }
            | BuiltinEmbedding::RoundSphere { dim, .. } => *dim,
            BuiltinEmbedding::Strip { .. } | BuiltinEmbedding::CliffordTorus => 2,
        }
    }

    fn ambient_dim(&self) -> usize {
        match self {
            BuiltinEmbedding::Equator { dim, codim } => dim + codim,
            BuiltinEmbedding::NormalEquator { dim } | BuiltinEmbedding::RoundSphere { dim, .. } => dim + 1,
            BuiltinEmbedding::Plane { ambient, .. } => *ambient,
            BuiltinEmbedding::Strip { .. } | BuiltinEmbedding::CliffordTorus => 3,
        }
    }

    fn point(&self, u: &[f64]) -> Vec<f64> {
        match self {
            BuiltinEmbedding::Equator { codim, .. } => {
                let mut x = vec![PI / 2.0; *codim];
                x.extend_from_slice(u);
                x
            }
            BuiltinEmbedding::NormalEquator { .. } | BuiltinEmbedding::Plane { .. } | BuiltinEmbedding::Strip { .. } => {
                let mut x = u.to_vec();
                x.resize(self.ambient_dim(), 0.0);
                x
            }
            BuiltinEmbedding::CliffordTorus => vec![PI / 4.0, u[0], u[1]],
            BuiltinEmbedding::RoundSphere { dim, radius } => {
                let mut x = Vec::with_capacity(dim + 1);
                let mut prod = *radius;
                for &angle in &u[..dim - 1] {
                    x.push(prod * angle.cos());
                    prod *= angle.sin();
                }
                x.push(prod * u[dim - 1].cos());
                x.push(prod * u[dim - 1].sin());
                x
            }
        }
    }

    fn jacobian(&self, _u: &[f64]) -> Option<DMatrix<f64>> {
        let (k, m) = (self.param_dim(), self.ambient_dim());
        match self {
            BuiltinEmbedding::RoundSphere { .. } => None,
            _ => {
                let shift = self.coordinate_shift();
                Some(DMatrix::from_fn(m, k, |i, j| if i == j + shift { 1.0 } else { 0.0 }))
            }
        }
    }

    fn name(&self) -> String {
        match self {
            BuiltinEmbedding::Equator { dim, codim } => format!("equator S{dim} in S{}", dim + codim),
            BuiltinEmbedding::NormalEquator { dim } => format!("equator S{dim} in S{} (normal coordinates)", dim + 1),
            BuiltinEmbedding::Plane { dim, ambient, .. } => format!("plane R{dim} in R{ambient}"),
            BuiltinEmbedding::Strip { length } => format!("strip of length {length}"),
            BuiltinEmbedding::CliffordTorus => "clifford torus".into(),
            BuiltinEmbedding::RoundSphere { dim, radius } => format!("sphere S{dim}({radius}) in R{}", dim + 1),
        }
    }
}

impl BuiltinEmbedding {
    /// Index of the ambient coordinate carrying the first parameter.
    fn coordinate_shift(&self) -> usize {
        match self {
            BuiltinEmbedding::Equator { codim, .. } => *codim,
            BuiltinEmbedding::CliffordTorus => 1,
            _ => 0,
        }
    }
}

/// Second fundamental form at a parameter point.
#[derive(Clone, Debug)]
pub struct SecondFundamentalForm {
    /// `A_α(∂_i, ∂_j)` in parameter coordinates, one matrix per normal.
    pub forms: Vec<DMatrix<f64>>,
    pub induced: DMatrix<f64>,
    /// `|A|²` summed over normals.
    pub norm_sq: f64,
    /// `tr_g A_α` per normal.
    pub mean_curvature: Vec<f64>,
}

impl SecondFundamentalForm {
    pub fn norm_sq_of(&self, alpha: usize) -> f64 {
        let ginv = self.induced.clone().try_inverse().expect("induced metric is invertible");
        let s = &ginv * &self.forms[alpha];
        (&s * &s).trace()
    }

    pub fn mean_curvature_norm(&self) -> f64 {
        self.mean_curvature.iter().map(|h| h * h).sum::<f64>().sqrt()
    }
}

/// Local extrinsic data at a parameter point.
#[derive(Clone, Debug)]
pub(crate) struct Frame {
    pub x: Vec<f64>,
    pub jac: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub induced: DMatrix<f64>,
    pub normals: Vec<DVector<f64>>,
}

/// An immersed submanifold of an ambient chart.
#[derive(Clone)]
pub struct Hypersurface {
    ambient: Chart,
    embedding: Arc<dyn Embedding>,
    params: Domain,
    declared_minimal: bool,
}

impl std::fmt::Debug for Hypersurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hypersurface")
            .field("ambient", &self.ambient.name())
            .field("embedding", &self.embedding.name())
            .field("params", &self.params)
            .finish()
    }
}

impl Hypersurface {
    /// Validates dimensions, rank and (for declared-minimal surfaces)
    /// the mean curvature on a small interior sample grid.
    pub fn new(ambient: Chart, embedding: Arc<dyn Embedding>, params: Domain, declared_minimal: bool) -> Result<Self> {
        let (k, m) = (embedding.param_dim(), embedding.ambient_dim());
        if ambient.dim() != m {
            return Err(Error::DimensionMismatch { expected: ambient.dim(), got: m });
        }
        if params.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: params.dim() });
        }
        if k < 2 || k >= m {
            return Err(Error::UnsupportedDimension {
                dim: k,
                reason: format!("submanifold of dimension {k} in dimension {m}; need 2 <= n < m"),
            });
        }
        let hs = Hypersurface { ambient, embedding, params, declared_minimal };
        for u in hs.probe_points() {
            let sff = hs.second_fundamental_form(&u)?;
            if declared_minimal && sff.mean_curvature_norm() > TOL_MIN {
                return Err(Error::NonzeroTrace { trace: sff.mean_curvature_norm() });
            }
        }
        Ok(hs)
    }

    pub fn builtin(b: BuiltinEmbedding) -> Result<Self> {
        let params = b.param_domain();
        let ambient = b.ambient();
        let minimal = b.is_minimal();
        Hypersurface::new(ambient, Arc::new(b), params, minimal)
    }

    fn probe_points(&self) -> Vec<Vec<f64>> {
        let k = self.dim();
        let fracs = [0.3, 0.5, 0.7];
        let total = fracs.len().pow(k as u32);
        (0..total)
            .map(|mut code| {
                (0..k)
                    .map(|a| {
                        let axis = &self.params.axes[a];
                        let f = fracs[code % fracs.len()];
                        code /= fracs.len();
                        axis.lo + f * axis.width()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.embedding.param_dim()
    }

    pub fn codim(&self) -> usize {
        self.ambient.dim() - self.dim()
    }

    pub fn ambient(&self) -> &Chart {
        &self.ambient
    }

    pub fn params(&self) -> &Domain {
        &self.params
    }

    pub fn embedding(&self) -> &Arc<dyn Embedding> {
        &self.embedding
    }

    pub fn is_declared_minimal(&self) -> bool {
        self.declared_minimal
    }

    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        self.embedding.point(u)
    }

    fn displaced(&self, base: &[f64], u: &[f64]) -> DMatrix<f64> {
        let d = self.ambient.domain().displacement(base, &self.embedding.point(u));
        DMatrix::from_vec(d.len(), 1, d)
    }

    /// `∂X/∂u` as an `m × k` matrix.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        if let Some(j) = self.embedding.jacobian(u) {
            return j;
        }
        let base = self.embedding.point(u);
        let (_, cols) = fd::first(&|y: &[f64]| self.displaced(&base, y), u, &vec![EMBED_STEP; u.len()]);
        let mut j = DMatrix::zeros(base.len(), u.len());
        for (c, col) in cols.iter().enumerate() {
            j.set_column(c, &col.column(0));
        }
        j
    }

    /// Second derivatives `∂_i ∂_j X`.
    fn second_derivatives(&self, u: &[f64]) -> Vec<Vec<DVector<f64>>> {
        let k = u.len();
        let steps = vec![EMBED_STEP; k];
        if self.embedding.jacobian(u).is_some() {
            let (_, dj) = fd::first(&|y: &[f64]| self.embedding.jacobian(y).expect("closed-form jacobian"), u, &steps);
            (0..k).map(|i| (0..k).map(|j| dj[i].column(j).into_owned()).collect()).collect()
        } else {
            let base = self.embedding.point(u);
            let d = fd::second(&|y: &[f64]| self.displaced(&base, y), u, &steps);
            (0..k).map(|i| (0..k).map(|j| d.second[i][j].column(0).into_owned()).collect()).collect()
        }
    }

    /// Induced metric `Jᵀ g J`.
    pub fn induced_metric(&self, u: &[f64]) -> DMatrix<f64> {
        let j = self.jacobian(u);
        let g = self.ambient.metric_at(&self.embedding.point(u));
        j.transpose() * g * j
    }

    pub(crate) fn frame(&self, u: &[f64]) -> Result<Frame> {
        let x = self.embedding.point(u);
        let jac = self.jacobian(u);
        let g = self.ambient.metric_at(&x);
        let induced = jac.transpose() * &g * &jac;
        if linalg::cholesky_pivot_failure(&induced).is_some() {
            return Err(Error::RankDeficient { param: u.to_vec() });
        }
        let tangents: Vec<DVector<f64>> = (0..jac.ncols()).map(|c| jac.column(c).into_owned()).collect();
        let basis = linalg::gram_schmidt(&g, &tangents, 1e-8);
        if basis.len() < tangents.len() {
            return Err(Error::RankDeficient { param: u.to_vec() });
        }
        let normals = linalg::orthonormal_complement(&g, &basis);
        Ok(Frame { x, jac, g, induced, normals })
    }

    /// Orthonormal normal fields `ν_α` at `u`.
    pub fn normal_frame(&self, u: &[f64]) -> Result<Vec<DVector<f64>>> {
        Ok(self.frame(u)?.normals)
    }

    /// `A_α(∂_i, ∂_j) = ⟨∇_{∂_i} ∂_j X, ν_α⟩`.
    pub fn second_fundamental_form(&self, u: &[f64]) -> Result<SecondFundamentalForm> {
        self.params.check_interior(u, &vec![0.0; u.len()])?;
        let fr = self.frame(u)?;
        let (_, _, gamma) = self.ambient.christoffel(&fr.x)?;
        let k = u.len();
        let d2 = self.second_derivatives(u);
        let cols: Vec<Vec<f64>> = (0..k).map(|i| fr.jac.column(i).iter().copied().collect()).collect();
        let mut accel = vec![vec![DVector::zeros(fr.x.len()); k]; k];
        for i in 0..k {
            for j in i..k {
                let v = &d2[i][j] + DVector::from_vec(gamma.contract(&cols[i], &cols[j]));
                accel[i][j] = v.clone();
                accel[j][i] = v;
            }
        }
        let ginv = fr.induced.clone().try_inverse().ok_or(Error::RankDeficient { param: u.to_vec() })?;
        let forms: Vec<DMatrix<f64>> = fr
            .normals
            .iter()
            .map(|nu| {
                let gnu = &fr.g * nu;
                DMatrix::from_fn(k, k, |i, j| gnu.dot(&accel[i][j]))
            })
            .collect();
        let mut norm_sq = 0.0;
        let mut mean_curvature = Vec::with_capacity(forms.len());
        for a in &forms {
            let s = &ginv * a;
            norm_sq += (&s * &s).trace();
            mean_curvature.push(s.trace());
        }
        Ok(SecondFundamentalForm { forms, induced: fr.induced, norm_sq, mean_curvature })
    }

    /// Coefficients `⟨∇_{∂_i} ν_α, ν_β⟩`, indexed `[i][α][β]`.
    pub(crate) fn normal_connection(&self, u: &[f64], fr: &Frame) -> Result<Vec<DMatrix<f64>>> {
        let (_, _, gamma) = self.ambient.christoffel(&fr.x)?;
        let c = fr.normals.len();
        let pack = |nus: &[DVector<f64>]| DMatrix::from_columns(nus);
        let reference = pack(&fr.normals);
        let eval = |y: &[f64]| -> DMatrix<f64> {
            match self.frame(y) {
                Ok(f) => pack(&f.normals),
                Err(_) => reference.clone(),
            }
        };
        let (_, dnu) = fd::first(&eval, u, &vec![EMBED_STEP; u.len()]);
        // a global frame moves continuously; a jump between stencil points means it does not
        for d in &dnu {
            if d.amax() * EMBED_STEP > 0.1 {
                return Err(Error::FrameNotGlobal(format!("normal frame jumps near {u:?}")));
            }
        }
        Ok((0..u.len())
            .map(|i| {
                let ti: Vec<f64> = fr.jac.column(i).iter().copied().collect();
                DMatrix::from_fn(c, c, |a, b| {
                    let na: Vec<f64> = fr.normals[a].iter().copied().collect();
                    let cov = dnu[i].column(a) + DVector::from_vec(gamma.contract(&ti, &na));
                    (&fr.g * &fr.normals[b]).dot(&cov)
                })
            })
            .collect())
    }

    /// `|∇^⊥ ν_α|²` summed over an orthonormal tangent frame.
    pub fn normal_connection_sq(&self, u: &[f64], alpha: usize) -> Result<f64> {
        let fr = self.frame(u)?;
        let conn = self.normal_connection(u, &fr)?;
        let ginv = fr.induced.clone().try_inverse().ok_or(Error::RankDeficient { param: u.to_vec() })?;
        let c = fr.normals.len();
        let mut total = 0.0;
        for b in 0..c {
            let w = DVector::from_fn(u.len(), |i, _| conn[i][(alpha, b)]);
            total += (w.transpose() * &ginv * &w)[(0, 0)];
        }
        Ok(total)
    }

    /// Induced-orthonormal tangent basis in parameter coordinates.
    pub(crate) fn tangent_basis(&self, induced: &DMatrix<f64>) -> Vec<DVector<f64>> {
        let k = induced.nrows();
        let coords: Vec<DVector<f64>> = (0..k).map(|i| DVector::from_fn(k, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
        linalg::gram_schmidt(induced, &coords, 1e-12)
    }

    /// Potential of the Jacobi operator for the normal `ν_α`:
    /// `|∇^⊥ν|² − |A_ν|² − Σ_i Rm(e_i, ν, e_i, ν)`.
    pub fn jacobi_potential(&self, u: &[f64], alpha: usize) -> Result<f64> {
        Ok(self.potential_and_mean(u, alpha)?.0)
    }

    /// Jacobi potential and mean-curvature norm at `u`.
    pub(crate) fn potential_and_mean(&self, u: &[f64], alpha: usize) -> Result<(f64, f64)> {
        if alpha >= self.codim() {
            return Err(Error::InvalidParameter(format!("normal index {alpha} with codimension {}", self.codim())));
        }
        let sff = self.second_fundamental_form(u)?;
        let fr = self.frame(u)?;
        let bundle = self.ambient.curvature(&fr.x)?;
        let nu = &fr.normals[alpha];
        let rm: f64 = self
            .tangent_basis(&fr.induced)
            .iter()
            .map(|e| {
                let t = &fr.jac * e;
                bundle.rm(&t, nu, &t, nu)
            })
            .sum();
        let perp = if self.codim() > 1 { self.normal_connection_sq(u, alpha)? } else { 0.0 };
        Ok((perp - sff.norm_sq_of(alpha) - rm, sff.mean_curvature_norm()))
    }

    /// The induced metric as a chart on the parameter box.
    pub fn induced_chart(&self) -> Result<Chart> {
        Chart::new(self.params.clone(), Arc::new(InducedMetric { hs: self.clone() }))
    }
}

struct InducedMetric {
    hs: Hypersurface,
}

impl MetricField for InducedMetric {
    fn dim(&self) -> usize {
        self.hs.dim()
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        self.hs.induced_metric(x)
    }
    fn name(&self) -> String {
        format!("induced({})", self.hs.embedding.name())
    }
}

#[cfg(test)]
mod tests;
