//! Geodesics in base and conformal metrics, diameter estimation, the
//! index-form check along minimizing arcs, and closed-form diameter bounds.

mod bounds;
mod diameter;
mod lemma1;

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

pub use bounds::{
    bound_value, c_constant, primed_bound, prop1_epsilon_threshold, theta_inverse, young_gap, BoundKind, BoundSpec,
    Prop1Case,
};
pub use diameter::{estimate_diameter, estimate_diameter_with, DiameterEstimate, DiameterMode, DiameterOptions};
pub use lemma1::{lemma1_check, Lemma1Terms, PhiFamily, PhiProfile};

use crate::chart::Chart;
use crate::conformal::ConformalData;
use crate::error::{Error, Result};

/// Number of integration steps per path.
pub const STEPS: usize = 2000;

/// Tolerance on the `h`-length of the initial vector.
const UNIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    /// Arc length in `h`.
    pub s: f64,
    pub x: Vec<f64>,
    /// Unit tangent in `h`.
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "metric", rename_all = "kebab-case")]
pub enum MetricTag {
    Base,
    Conformal { weights: Vec<f64> },
}

/// Curve sampled uniformly in `h`-arc length.
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicPath {
    samples: Vec<PathSample>,
    tag: MetricTag,
    total_length: f64,
    /// Set when integration stopped at the chart boundary.
    left_domain: bool,
}

impl GeodesicPath {
    pub fn new(samples: Vec<PathSample>, tag: MetricTag) -> Self {
        let total_length = samples.last().map_or(0.0, |p| p.s);
        GeodesicPath { samples, tag, total_length, left_domain: false }
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn tag(&self) -> &MetricTag {
        &self.tag
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn left_domain(&self) -> bool {
        self.left_domain
    }

    pub fn start(&self) -> &PathSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("paths hold at least the initial sample")
    }

    /// Writes `s,x0..,t0..` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.samples.first().map_or(0, |p| p.x.len());
        let mut header = vec!["s".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("t{i}")));
        w.write_record(&header).map_err(csv_error)?;
        for p in &self.samples {
            let row = std::iter::once(p.s).chain(p.x.iter().copied()).chain(p.t.iter().copied());
            w.write_record(row.map(|v| format!("{v:.17e}"))).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn h_norm(chart: &Chart, x: &[f64], v: &DVector<f64>) -> f64 {
    let g = chart.metric_at(x);
    (v.transpose() * g * v)[(0, 0)].max(0.0).sqrt()
}

fn check_unit(chart: &Chart, x0: &[f64], v0: &[f64]) -> Result<DVector<f64>> {
    if v0.len() != chart.dim() {
        return Err(Error::DimensionMismatch { expected: chart.dim(), got: v0.len() });
    }
    chart.check_point(x0)?;
    let v = DVector::from_column_slice(v0);
    let norm = h_norm(chart, x0, &v);
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidParameter(format!("initial vector has h-length {norm}, expected 1")));
    }
    Ok(v)
}

/// Geodesic of the chart metric from `x0` with unit initial velocity `v0`.
pub fn integrate_geodesic(chart: &Chart, x0: &[f64], v0: &[f64], length: f64) -> Result<GeodesicPath> {
    let v = check_unit(chart, x0, v0)?;
    integrate_unit_speed(chart, x0, v, length, MetricTag::Base, |x, t| {
        let (_, _, gamma) = chart.christoffel(x)?;
        Ok(-DVector::from_vec(gamma.contract(t.as_slice(), t.as_slice())))
    })
}

/// Geodesic of `η² h`, `η = Π f_i^{a_i}`, in unit `h`-speed:
/// `∇_s γ' = (∇ ln η)^⊥`.
pub fn integrate_conformal_geodesic(
    chart: &Chart,
    cd: &ConformalData,
    x0: &[f64],
    v0: &[f64],
    length: f64,
) -> Result<GeodesicPath> {
    let v = check_unit(chart, x0, v0)?;
    let tag = MetricTag::Conformal { weights: cd.weights().to_vec() };
    integrate_unit_speed(chart, x0, v, length, tag, |x, t| {
        let (g, _, gamma) = chart.christoffel(x)?;
        let grad = cd.grad_log_eta(chart, x)?;
        let along = (grad.transpose() * &g * t)[(0, 0)];
        Ok(-DVector::from_vec(gamma.contract(t.as_slice(), t.as_slice())) + grad - t * along)
    })
}

fn integrate_unit_speed(
    chart: &Chart,
    x0: &[f64],
    t0: DVector<f64>,
    length: f64,
    tag: MetricTag,
    accel: impl Fn(&[f64], &DVector<f64>) -> Result<DVector<f64>>,
) -> Result<GeodesicPath> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParameter(format!("path length {length} must be positive")));
    }
    let h = length / STEPS as f64;
    let domain = chart.domain();
    let mut x = DVector::from_column_slice(x0);
    let mut t = t0;
    let mut samples = vec![PathSample { s: 0.0, x: x0.to_vec(), t: t.as_slice().to_vec() }];
    let mut left_domain = false;

    let shifted = |x: &DVector<f64>, dx: &DVector<f64>, scale: f64| -> Vec<f64> {
        let mut y: Vec<f64> = (x + dx * scale).as_slice().to_vec();
        domain.wrap(&mut y);
        y
    };

    for step in 1..=STEPS {
        let stage = || -> Result<(DVector<f64>, DVector<f64>)> {
            let k1x = t.clone();
            let k1t = accel(x.as_slice(), &t)?;
            let x2 = shifted(&x, &k1x, 0.5 * h);
            let t2 = &t + &k1t * (0.5 * h);
            let k2t = accel(&x2, &t2)?;
            let x3 = shifted(&x, &t2, 0.5 * h);
            let t3 = &t + &k2t * (0.5 * h);
            let k3t = accel(&x3, &t3)?;
            let x4 = shifted(&x, &t3, h);
            let t4 = &t + &k3t * h;
            let k4t = accel(&x4, &t4)?;
            let dx = (&k1x + &t2 * 2.0 + &t3 * 2.0 + &t4) * (h / 6.0);
            let dt = (&k1t + &k2t * 2.0 + &k3t * 2.0 + &k4t) * (h / 6.0);
            Ok((dx, dt))
        };
        let (dx, dt) = match stage() {
            Ok(d) => d,
            Err(Error::PointOutsideDomain { .. }) => {
                left_domain = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut next: Vec<f64> = (&x + dx).as_slice().to_vec();
        domain.wrap(&mut next);
        if chart.check_point(&next).is_err() {
            left_domain = true;
            break;
        }
        let mut tn = &t + dt;
        let norm = h_norm(chart, &next, &tn);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::StepFailure { s: step as f64 * h, reason: "tangent degenerated".into() });
        }
        tn /= norm;
        x = DVector::from_vec(next);
        t = tn;
        samples.push(PathSample { s: step as f64 * h, x: x.as_slice().to_vec(), t: t.as_slice().to_vec() });
    }
    let mut path = GeodesicPath::new(samples, tag);
    path.left_domain = left_domain;
    Ok(path)
}

/// Integrates the geodesic of the conformal chart with affine parameter
/// and resamples it at uniform `h`-arc length. Used as an independent check
/// of [`integrate_conformal_geodesic`].
pub fn integrate_dual_conformal_geodesic(
    chart: &Chart,
    cd: &ConformalData,
    x0: &[f64],
    v0: &[f64],
    length: f64,
) -> Result<GeodesicPath> {
    let v = check_unit(chart, x0, v0)?;
    let tilde = crate::conformal::conformal_metric(chart, cd)?;
    let eta0 = cd.eta(x0)?;
    // Unit speed in h̃, affine parameter τ; ds/dτ = |x'|_h.
    let mut x = DVector::from_column_slice(x0);
    let mut u = &v / eta0;
    let mut s = 0.0;
    let dtau = eta0 * length / STEPS as f64;
    let domain = chart.domain();
    let rhs = |x: &[f64], u: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>, f64)> {
        let (_, _, gamma) = tilde.christoffel(x)?;
        let acc = -DVector::from_vec(gamma.contract(u.as_slice(), u.as_slice()));
        Ok((u.clone(), acc, h_norm(chart, x, u)))
    };
    let mut knots: Vec<(f64, DVector<f64>, DVector<f64>)> = vec![(0.0, x.clone(), v.clone())];
    let mut guard = 0;
    while s < length {
        guard += 1;
        if guard > 50 * STEPS {
            return Err(Error::StepFailure { s, reason: "affine integration did not reach the requested length".into() });
        }
        let wrap = |y: DVector<f64>| {
            let mut v = y.as_slice().to_vec();
            domain.wrap(&mut v);
            v
        };
        let (k1x, k1u, k1s) = rhs(x.as_slice(), &u)?;
        let (k2x, k2u, k2s) = rhs(&wrap(&x + &k1x * (0.5 * dtau)), &(&u + &k1u * (0.5 * dtau)))?;
        let (k3x, k3u, k3s) = rhs(&wrap(&x + &k2x * (0.5 * dtau)), &(&u + &k2u * (0.5 * dtau)))?;
        let (k4x, k4u, k4s) = rhs(&wrap(&x + &k3x * dtau), &(&u + &k3u * dtau))?;
        x = DVector::from_vec(wrap(&x + (&k1x + &k2x * 2.0 + &k3x * 2.0 + &k4x) * (dtau / 6.0)));
        u = &u + (&k1u + &k2u * 2.0 + &k3u * 2.0 + &k4u) * (dtau / 6.0);
        s += (k1s + 2.0 * k2s + 2.0 * k3s + k4s) * dtau / 6.0;
        let speed = h_norm(chart, x.as_slice(), &u);
        knots.push((s, x.clone(), &u / speed));
    }
    // Cubic Hermite resampling on uniform s; the tangent dx/ds is the unit
    // h-tangent, so each knot carries exact first derivatives.
    let h = length / STEPS as f64;
    let mut samples = Vec::with_capacity(STEPS + 1);
    let mut k = 0;
    for i in 0..=STEPS {
        let target = i as f64 * h;
        while k + 2 < knots.len() && knots[k + 1].0 < target {
            k += 1;
        }
        let (s0, x0k, t0k) = &knots[k];
        let (s1, x1k, t1k) = &knots[k + 1];
        let span = s1 - s0;
        let d = DVector::from_vec(domain.displacement(x0k.as_slice(), x1k.as_slice()));
        let q = (target - s0) / span;
        let (h10, h01, h11) = (q.powi(3) - 2.0 * q * q + q, -2.0 * q.powi(3) + 3.0 * q * q, q.powi(3) - q * q);
        let (dh10, dh01, dh11) = (3.0 * q * q - 4.0 * q + 1.0, -6.0 * q * q + 6.0 * q, 3.0 * q * q - 2.0 * q);
        let offset = t0k * (h10 * span) + &d * h01 + t1k * (h11 * span);
        let mut xs: Vec<f64> = (x0k + offset).as_slice().to_vec();
        domain.wrap(&mut xs);
        let tangent = t0k * dh10 + &d * (dh01 / span) + t1k * dh11;
        let norm = h_norm(chart, &xs, &tangent);
        samples.push(PathSample { s: target, x: xs, t: (tangent / norm).as_slice().to_vec() });
    }
    Ok(GeodesicPath::new(samples, MetricTag::Conformal { weights: cd.weights().to_vec() }))
}
