//! Built-in analytic metrics.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Axis, Chart, Domain, MetricField};

/// Euclidean metric.
#[derive(Clone, Debug)]
pub struct Flat {
    pub dim: usize,
}

impl MetricField for Flat {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
    fn name(&self) -> String {
        format!("flat{}", self.dim)
    }
}

/// Round sphere of the given radius in hyperspherical coordinates
/// `(x_0, …, x_{n-2}) ∈ [0, π]`, `x_{n-1} ∈ [0, 2π)`.
#[derive(Clone, Debug)]
pub struct RoundSphere {
    pub dim: usize,
    pub radius: f64,
}

impl MetricField for RoundSphere {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let r2 = self.radius * self.radius;
        let mut g = DMatrix::zeros(self.dim, self.dim);
        let mut w = r2;
        for k in 0..self.dim {
            g[(k, k)] = w;
            let s = x[k].sin();
            w *= s * s;
        }
        g
    }
    fn name(&self) -> String {
        format!("sphere{}(r={})", self.dim, self.radius)
    }
}

/// Upper half-space model of hyperbolic space, `g = δ / y²` with `y` the last coordinate.
#[derive(Clone, Debug)]
pub struct Hyperbolic {
    pub dim: usize,
}

impl MetricField for Hyperbolic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let y = x[self.dim - 1];
        DMatrix::identity(self.dim, self.dim) / (y * y)
    }
    fn name(&self) -> String {
        format!("hyperbolic{}", self.dim)
    }
}

/// Riemannian product of a round sphere with flat or circle factors.
#[derive(Clone, Debug)]
pub struct SphereProduct {
    pub sphere_dim: usize,
    pub radius: f64,
    /// Radius of each extra factor; circles are periodic in angle.
    pub factor_radii: Vec<f64>,
}

impl MetricField for SphereProduct {
    fn dim(&self) -> usize {
        self.sphere_dim + self.factor_radii.len()
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let sphere = RoundSphere { dim: self.sphere_dim, radius: self.radius };
        let gs = sphere.metric(&x[..self.sphere_dim]);
        let mut g = DMatrix::zeros(n, n);
        g.view_mut((0, 0), (self.sphere_dim, self.sphere_dim)).copy_from(&gs);
        for (j, r) in self.factor_radii.iter().enumerate() {
            let k = self.sphere_dim + j;
            g[(k, k)] = r * r;
        }
        g
    }
    fn name(&self) -> String {
        format!("sphere{}x{}", self.sphere_dim, self.factor_radii.len())
    }
}

/// Unit 3-sphere in toroidal coordinates `dξ² + cos²ξ dθ₁² + sin²ξ dθ₂²`.
#[derive(Clone, Debug)]
pub struct ToroidalSphere3;

impl MetricField for ToroidalSphere3 {
    fn dim(&self) -> usize {
        3
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let (c, s) = (x[0].cos(), x[0].sin());
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, c * c, s * s]))
    }
    fn name(&self) -> String {
        "sphere3-toroidal".into()
    }
}

/// Warping function `w(r)` of a rotationally symmetric metric `dr² + w(r)² dω²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warp", rename_all = "kebab-case")]
pub enum Warp {
    Flat,
    Sphere { radius: f64 },
    /// `w(r) = sin(r) (1 + eps r²)`.
    PerturbedSphere { eps: f64 },
}

/// `(1 - sinc²(u)) / u²`, stable near zero.
fn sinc_defect(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let u2 = u * u;
        1.0 / 3.0 + u2 * (-2.0 / 45.0 + u2 * (1.0 / 315.0 + u2 * (-2.0 / 14175.0 + u2 * (2.0 / 467775.0))))
    } else {
        let s = u.sin() / u;
        (1.0 - s * s) / (u * u)
    }
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

impl Warp {
    /// Returns `(w(r)/r)²` and `(1 - (w(r)/r)²)/r²`.
    fn ratios(&self, r: f64) -> (f64, f64) {
        match self {
            Warp::Flat => (1.0, 0.0),
            Warp::Sphere { radius } => {
                let u = r / radius;
                let s = sinc(u);
                (s * s, sinc_defect(u) / (radius * radius))
            }
            Warp::PerturbedSphere { eps } => {
                let s = sinc(r);
                let bump = 1.0 + eps * r * r;
                let ratio = s * s * bump * bump;
                (ratio, sinc_defect(r) - s * s * (2.0 * eps + eps * eps * r * r))
            }
        }
    }

    pub fn warp(&self, r: f64) -> f64 {
        match self {
            Warp::Flat => r,
            Warp::Sphere { radius } => radius * (r / radius).sin(),
            Warp::PerturbedSphere { eps } => r.sin() * (1.0 + eps * r * r),
        }
    }
}

/// Rotationally symmetric metric in geodesic normal coordinates about the
/// origin, so `|x|` is the exact distance to the center.
#[derive(Clone, Debug)]
pub struct Rotational {
    pub dim: usize,
    pub warp: Warp,
}

impl MetricField for Rotational {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let (ratio, defect) = self.warp.ratios(r2.sqrt());
        DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { ratio } else { 0.0 };
            delta + defect * x[i] * x[j]
        })
    }
    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
    fn name(&self) -> String {
        format!("rotational{}({:?})", self.dim, self.warp)
    }
}

/// Metric given by a closure.
pub struct FnMetric {
    pub dim: usize,
    pub label: String,
    pub f: Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
}

impl MetricField for FnMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        (self.f)(x)
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

fn sphere_domain(dim: usize) -> Domain {
    let mut axes = vec![Axis::new(0.0, PI); dim - 1];
    axes.push(Axis::periodic(0.0, 2.0 * PI));
    Domain::new(axes)
}

impl Chart {
    /// Flat `ℝⁿ` on `[-half_width, half_width]ⁿ`.
    pub fn flat(dim: usize, half_width: f64) -> Chart {
        Chart::new(Domain::cube(dim, -half_width, half_width), Arc::new(Flat { dim })).expect("valid flat chart")
    }

    /// Flat metric on an explicit box.
    pub fn flat_box(domain: Domain) -> Chart {
        let dim = domain.dim();
        Chart::new(domain, Arc::new(Flat { dim })).expect("valid flat chart")
    }

    /// Round `Sⁿ(radius)` in hyperspherical coordinates.
    pub fn sphere(dim: usize, radius: f64) -> Chart {
        Chart::new(sphere_domain(dim), Arc::new(RoundSphere { dim, radius })).expect("valid sphere chart")
    }

    /// Upper half-space `ℍⁿ` over `[-half_width, half_width]^{n-1} × [y_lo, y_hi]`.
    pub fn hyperbolic(dim: usize, half_width: f64, y_lo: f64, y_hi: f64) -> Chart {
        let mut axes = vec![Axis::new(-half_width, half_width); dim - 1];
        axes.push(Axis::new(y_lo, y_hi));
        Chart::new(Domain::new(axes), Arc::new(Hyperbolic { dim })).expect("valid hyperbolic chart")
    }

    /// `S^k(radius) × S¹(r_1) × …`, circle factors parametrized by angle.
    pub fn sphere_times_circles(sphere_dim: usize, radius: f64, circle_radii: Vec<f64>) -> Chart {
        let mut domain = sphere_domain(sphere_dim);
        for _ in &circle_radii {
            domain.axes.push(Axis::periodic(0.0, 2.0 * PI));
        }
        Chart::new(domain, Arc::new(SphereProduct { sphere_dim, radius, factor_radii: circle_radii }))
            .expect("valid product chart")
    }

    /// Unit `S³` in toroidal coordinates.
    pub fn sphere3_toroidal() -> Chart {
        let domain = Domain::new(vec![
            Axis::new(0.0, PI / 2.0),
            Axis::periodic(0.0, 2.0 * PI),
            Axis::periodic(0.0, 2.0 * PI),
        ]);
        Chart::new(domain, Arc::new(ToroidalSphere3)).expect("valid toroidal chart")
    }

    /// Rotationally symmetric metric in normal coordinates on `[-r_max, r_max]ⁿ`.
    pub fn rotational(dim: usize, warp: Warp, r_max: f64) -> Chart {
        Chart::new(Domain::cube(dim, -r_max, r_max), Arc::new(Rotational { dim, warp }))
            .expect("valid rotational chart")
    }

    /// Chart from a metric closure.
    pub fn from_fn(
        domain: Domain,
        label: &str,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Chart {
        let dim = domain.dim();
        Chart::new(domain, Arc::new(FnMetric { dim, label: label.to_string(), f: Box::new(f) }))
            .expect("valid closure chart")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotational_sphere_metric_matches_warp() {
        let m = Rotational { dim: 3, warp: Warp::Sphere { radius: 1.0 } };
        let x = [0.3, -0.2, 0.5];
        let r = (0.09f64 + 0.04 + 0.25).sqrt();
        let g = m.metric(&x);
        // radial direction has unit length
        let u = nalgebra::DVector::from_vec(x.iter().map(|v| v / r).collect());
        assert!(((u.transpose() * &g * &u)[(0, 0)] - 1.0).abs() < 1e-14);
        // tangential direction is scaled by (sin r / r)²
        let t = nalgebra::DVector::from_vec(vec![0.2, 0.3, 0.0]) / (0.13f64).sqrt();
        let want = (r.sin() / r).powi(2);
        assert!(((t.transpose() * &g * &t)[(0, 0)] - want).abs() < 1e-14);
    }

    #[test]
    fn sinc_defect_matches_reference_across_switch() {
        // (1 - sinc²(u)) / u² evaluated in 40-digit arithmetic.
        let refs = [
            (0.09999999, 0.332_889_206_296_917_6),
            (0.10000001, 0.332_889_206_119_393_6),
            (1e-3, 0.333_333_288_888_892),
        ];
        for (u, want) in refs {
            assert!((sinc_defect(u) - want).abs() < 2e-14, "u={u}");
        }
    }
}
