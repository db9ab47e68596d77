//! Coordinate charts carrying a Riemannian metric, and pointwise curvature.
//!
//! A [`Chart`] is an axis-aligned coordinate box with a metric field. All
//! derivatives of the metric are taken with fourth-order central stencils,
//! so analytic and grid-sampled metrics go through the same code path.

mod builtin;
mod bundle;
mod frame;
mod grid;
mod spec;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use builtin::{Flat, Hyperbolic, RoundSphere, Rotational, SphereProduct, ToroidalSphere3, Warp};
pub use bundle::{Christoffel, CurvatureBundle, Riemann};
pub use frame::TangentFrame;
pub use grid::{GridMetric, GridHeader};
pub use spec::ChartSpec;

use crate::error::{Error, Result};
use crate::fd;
use crate::field::ScalarField;
use crate::linalg;

/// Default finite-difference step for unit-scale coordinates.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Tolerance on Gram deviation for orthonormal inputs.
pub const TOL_FRAME: f64 = 1e-6;

/// One coordinate axis of a chart domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub periodic: bool,
}

impl Axis {
    pub fn new(lo: f64, hi: f64) -> Self {
        Axis { lo, hi, periodic: false }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Axis { lo, hi, periodic: true }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Axis-aligned coordinate box; periodic axes are identified at their ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub axes: Vec<Axis>,
}

impl Domain {
    pub fn new(axes: Vec<Axis>) -> Self {
        Domain { axes }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Domain { axes: vec![Axis::new(lo, hi); dim] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Checks that `x` sits at least `margins[a]` inside every non-periodic axis.
    pub fn check_interior(&self, x: &[f64], margins: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        for (a, axis) in self.axes.iter().enumerate() {
            if axis.periodic {
                continue;
            }
            let m = margins[a];
            if !(x[a] >= axis.lo + m && x[a] <= axis.hi - m) {
                return Err(Error::PointOutsideDomain { point: x.to_vec(), axis: a, margin: m });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .axes
                .iter()
                .zip(x)
                .all(|(axis, &v)| axis.periodic || (v >= axis.lo && v <= axis.hi))
    }

    /// Maps periodic coordinates back into `[lo, hi)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for (axis, v) in self.axes.iter().zip(x.iter_mut()) {
            if axis.periodic {
                *v = axis.lo + (*v - axis.lo).rem_euclid(axis.width());
            }
        }
    }

    /// Coordinate difference `b - a`, taking the short way round periodic axes.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .zip(a.iter().zip(b))
            .map(|(axis, (&p, &q))| {
                let d = q - p;
                if axis.periodic {
                    let w = axis.width();
                    d - w * (d / w).round()
                } else {
                    d
                }
            })
            .collect()
    }
}

/// A metric field `x -> g_ij(x)`.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    fn metric(&self, x: &[f64]) -> DMatrix<f64>;

    /// Exact distance to a distinguished center when the coordinates are
    /// geodesic normal coordinates of a rotationally symmetric metric.
    fn radial_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

/// How the metric is represented; informational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    AnalyticCallback,
    GridSampled { resolution: Vec<usize>, order: usize },
}

/// Finite-difference step selection.
#[derive(Clone, Debug, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// `h = max(floor, frac * |x - center|)`; used near punctures where the
    /// metric varies on the scale of the distance to the center.
    Radial { frac: f64, floor: f64, center: Vec<f64> },
}

impl StepRule {
    pub fn step(&self, x: &[f64]) -> f64 {
        match self {
            StepRule::Fixed(h) => *h,
            StepRule::Radial { frac, floor, center } => {
                let r = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (frac * r).max(*floor)
            }
        }
    }
}

/// A coordinate box with a metric field.
#[derive(Clone)]
pub struct Chart {
    domain: Domain,
    metric: Arc<dyn MetricField>,
    kind: MetricKind,
    step: StepRule,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("metric", &self.metric.name())
            .field("domain", &self.domain)
            .field("kind", &self.kind)
            .field("step", &self.step)
            .finish()
    }
}

impl Chart {
    pub fn new(domain: Domain, metric: Arc<dyn MetricField>) -> Result<Self> {
        if domain.dim() != metric.dim() || domain.dim() == 0 {
            return Err(Error::DimensionMismatch { expected: metric.dim(), got: domain.dim() });
        }
        Ok(Chart { domain, metric, kind: MetricKind::AnalyticCallback, step: StepRule::Fixed(DEFAULT_STEP) })
    }

    pub fn with_kind(mut self, kind: MetricKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn step_rule(&self) -> &StepRule {
        &self.step
    }

    pub fn metric_field(&self) -> &Arc<dyn MetricField> {
        &self.metric
    }

    pub fn name(&self) -> String {
        self.metric.name()
    }

    pub fn metric_at(&self, x: &[f64]) -> DMatrix<f64> {
        self.metric.metric(x)
    }

    pub fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        self.metric.radial_distance(x)
    }

    pub(crate) fn steps(&self, x: &[f64]) -> Vec<f64> {
        let h = self.step.step(x);
        vec![h; self.dim()]
    }

    /// Verifies the stencil fits inside the domain and the metric is
    /// positive definite at `x`.
    pub fn check_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let steps = self.steps(x);
        let margins: Vec<f64> = steps.iter().map(|h| 2.0 * h).collect();
        self.domain.check_interior(x, &margins)?;
        Ok(steps)
    }

    fn check_positive(&self, x: &[f64], g: &DMatrix<f64>) -> Result<()> {
        match linalg::cholesky_pivot_failure(g) {
            None => Ok(()),
            Some((pivot, value)) => Err(Error::NotPositiveDefinite { point: x.to_vec(), pivot, value }),
        }
    }

    /// Metric, its inverse and the Christoffel symbols at `x`.
    pub fn christoffel(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, Christoffel)> {
        let steps = self.check_point(x)?;
        let eval = |y: &[f64]| self.metric.metric(y);
        let (g, dg) = fd::first(&eval, x, &steps);
        self.check_positive(x, &g)?;
        let ginv = g.clone().try_inverse().ok_or(Error::NotPositiveDefinite {
            point: x.to_vec(),
            pivot: 0,
            value: 0.0,
        })?;
        let gamma = Christoffel::from_metric(&ginv, &dg);
        Ok((g, ginv, gamma))
    }

    /// Full curvature bundle at an interior point.
    pub fn curvature(&self, x: &[f64]) -> Result<CurvatureBundle> {
        let steps = self.check_point(x)?;
        let eval = |y: &[f64]| self.metric.metric(y);
        let d = fd::second(&eval, x, &steps);
        self.check_positive(x, &d.value)?;
        Ok(CurvatureBundle::from_derivatives(x.to_vec(), d.value, &d.first, &d.second))
    }

    pub fn sectional(&self, x: &[f64], v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        Ok(self.curvature(x)?.sectional(v, w))
    }

    pub fn bi_ricci(&self, x: &[f64], v: &DVector<f64>, w: &DVector<f64>, sigma: f64) -> Result<f64> {
        self.curvature(x)?.bi_ricci(v, w, sigma)
    }

    /// Bi-Ricci curvature with the harmonic weight `(m-2)/(m-1)`.
    pub fn harmonic_bi_ricci(&self, x: &[f64], v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        let b = self.curvature(x)?;
        b.bi_ricci(v, w, harmonic_weight(self.dim()))
    }

    pub fn k_sigma(&self, x: &[f64], v: &DVector<f64>, subspace: &[DVector<f64>], sigma: f64) -> Result<f64> {
        self.curvature(x)?.k_sigma(v, subspace, sigma)
    }

    /// Covariant Hessian `∇df` of a scalar field.
    pub fn field_hessian(&self, f: &dyn ScalarField, x: &[f64]) -> Result<DMatrix<f64>> {
        let (_, _, gamma) = self.christoffel(x)?;
        let steps = self.steps(x);
        let eval = |y: &[f64]| f.value(y);
        let d = fd::second(&eval, x, &steps);
        Ok(covariant_hessian(&gamma, &d.first, &d.second))
    }

    /// Trace Laplacian `Δf = g^{ij} (∇df)_{ij}`.
    pub fn field_laplacian(&self, f: &dyn ScalarField, x: &[f64]) -> Result<f64> {
        let (_, ginv, gamma) = self.christoffel(x)?;
        let steps = self.steps(x);
        let eval = |y: &[f64]| f.value(y);
        let d = fd::second(&eval, x, &steps);
        let h = covariant_hessian(&gamma, &d.first, &d.second);
        Ok(ginv.component_mul(&h).sum())
    }

    /// Metric gradient `g^{ij} ∂_j f`.
    pub fn field_gradient(&self, f: &dyn ScalarField, x: &[f64]) -> Result<DVector<f64>> {
        let steps = self.check_point(x)?;
        let g = self.metric.metric(x);
        self.check_positive(x, &g)?;
        let eval = |y: &[f64]| f.value(y);
        let (_, df) = fd::first(&eval, x, &steps);
        let ginv = g.try_inverse().expect("positive definite metric is invertible");
        Ok(ginv * DVector::from_vec(df))
    }
}

/// `(m - 2)/(m - 1)`.
pub fn harmonic_weight(m: usize) -> f64 {
    (m as f64 - 2.0) / (m as f64 - 1.0)
}

pub(crate) fn covariant_hessian(gamma: &Christoffel, df: &[f64], ddf: &[Vec<f64>]) -> DMatrix<f64> {
    let n = df.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = 0.5 * (ddf[i][j] + ddf[j][i]);
        for k in 0..n {
            v -= gamma.get(k, i, j) * df[k];
        }
        v
    })
}
