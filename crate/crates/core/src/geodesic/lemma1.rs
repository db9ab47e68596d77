//! Quadrature of the index-form inequality along a conformal geodesic.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use super::GeodesicPath;
use crate::chart::Chart;
use crate::conformal::{conformal_ricci, ConformalData};
use crate::error::{Error, Result};

/// Test function on `[0, l]` vanishing at both ends.
pub trait PhiProfile {
    fn value(&self, s: f64, l: f64) -> f64;
    fn derivative(&self, s: f64, l: f64) -> f64;
    fn label(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "phi", rename_all = "kebab-case")]
pub enum PhiFamily {
    /// `sin(kπ s/l)`.
    Sine { k: u32 },
    /// `4 s (l − s)/l²`.
    Bump,
    /// `(4 s (l − s)/l²)²`.
    BumpSquared,
}

impl PhiFamily {
    /// The five test functions used by the suites.
    pub fn standard() -> [PhiFamily; 5] {
        [PhiFamily::Sine { k: 1 }, PhiFamily::Sine { k: 2 }, PhiFamily::Sine { k: 3 }, PhiFamily::Bump, PhiFamily::BumpSquared]
    }
}

impl PhiProfile for PhiFamily {
    fn value(&self, s: f64, l: f64) -> f64 {
        match *self {
            PhiFamily::Sine { k } => (k as f64 * PI * s / l).sin(),
            PhiFamily::Bump => 4.0 * s * (l - s) / (l * l),
            PhiFamily::BumpSquared => (4.0 * s * (l - s) / (l * l)).powi(2),
        }
    }

    fn derivative(&self, s: f64, l: f64) -> f64 {
        match *self {
            PhiFamily::Sine { k } => {
                let w = k as f64 * PI / l;
                w * (w * s).cos()
            }
            PhiFamily::Bump => 4.0 * (l - 2.0 * s) / (l * l),
            PhiFamily::BumpSquared => {
                let b = 4.0 * s * (l - s) / (l * l);
                2.0 * b * 4.0 * (l - 2.0 * s) / (l * l)
            }
        }
    }

    fn label(&self) -> String {
        match self {
            PhiFamily::Sine { k } => format!("sin{k}"),
            PhiFamily::Bump => "bump".into(),
            PhiFamily::BumpSquared => "bump2".into(),
        }
    }
}

/// Both sides of the inequality `lhs ≥ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Terms {
    pub phi: String,
    pub lhs: f64,
    pub rhs: f64,
    pub length: f64,
    pub nodes: usize,
}

impl Lemma1Terms {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

const MAX_NODES: usize = 401;

struct NodeData {
    s: Vec<f64>,
    /// `d ln η / ds`.
    dlog: Vec<f64>,
    /// `Ric^{(f,a)}(γ', γ')`.
    ric: Vec<f64>,
    /// `Σ a_i |∇ ln f_i|²`.
    grad: Vec<f64>,
}

fn node_data(chart: &Chart, cd: &ConformalData, path: &GeodesicPath) -> Result<NodeData> {
    let samples = path.samples();
    if samples.len() < 8 {
        return Err(Error::InsufficientSamples { got: samples.len(), need: 8 });
    }
    let panels = samples.len() - 1;
    let stride = (1..=panels).find(|st| panels.is_multiple_of(*st) && panels / st < MAX_NODES).unwrap_or(1);
    let picked: Vec<_> = samples.iter().step_by(stride).collect();
    let mut data = NodeData { s: vec![], dlog: vec![], ric: vec![], grad: vec![] };
    for p in picked {
        let t = DVector::from_column_slice(&p.t);
        let g = chart.metric_at(&p.x);
        let grad = cd.grad_log_eta(chart, &p.x)?;
        let ric = conformal_ricci(chart, cd, &p.x)?;
        data.s.push(p.s);
        data.dlog.push((grad.transpose() * &g * &t)[(0, 0)]);
        data.ric.push((t.transpose() * ric * &t)[(0, 0)]);
        data.grad.push(cd.weighted_gradient_term(chart, &p.x)?);
    }
    Ok(data)
}

/// Composite Simpson on uniform nodes; an odd panel count closes with the
/// three-eighths rule.
pub(crate) fn simpson(values: &[f64], h: f64) -> f64 {
    let panels = values.len().saturating_sub(1);
    match panels {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let even = if panels.is_multiple_of(2) { panels } else { panels - 3 };
            let mut sum = values[0] + values[even];
            for (i, v) in values.iter().enumerate().take(even).skip(1) {
                sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = h / 3.0 * sum;
            if even != panels {
                let v = &values[even..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

fn evaluate(chart: &Chart, data: &NodeData, phi: &dyn PhiProfile, l: f64) -> Result<Lemma1Terms> {
    let (start, end) = (phi.value(0.0, l), phi.value(l, l));
    if start.abs() > 1e-12 || end.abs() > 1e-12 {
        return Err(Error::PhiBoundaryNonzero { start, end });
    }
    let n = chart.dim() as f64;
    let h = data.s[1] - data.s[0];
    let mut lhs_terms = Vec::with_capacity(data.s.len());
    let mut rhs_terms = Vec::with_capacity(data.s.len());
    for i in 0..data.s.len() {
        let (p, dp) = (phi.value(data.s[i], l), phi.derivative(data.s[i], l));
        let d = data.dlog[i];
        lhs_terms.push((n - 1.0) * dp * dp + 0.25 * (n - 1.0) * p * p * d * d + (3.0 - n) * p * dp * d);
        rhs_terms.push(p * p * (data.ric[i] + data.grad[i]));
    }
    Ok(Lemma1Terms {
        phi: phi.label(),
        lhs: simpson(&lhs_terms, h),
        rhs: simpson(&rhs_terms, h),
        length: l,
        nodes: data.s.len(),
    })
}

/// Evaluates both sides of the index-form inequality for each test function.
///
/// LHS: `(n−1)∫φ′² + (n−1)/4 ∫φ²(ln η)′² + (3−n)∫φφ′(ln η)′`;
/// RHS: `∫φ² Ric^{(f,a)}(γ′,γ′) + ∫φ² Σ a_i |∇ ln f_i|²`.
pub fn lemma1_check(
    chart: &Chart,
    cd: &ConformalData,
    path: &GeodesicPath,
    phis: &[&dyn PhiProfile],
) -> Result<Vec<Lemma1Terms>> {
    let l = path.total_length();
    for phi in phis {
        let (start, end) = (phi.value(0.0, l), phi.value(l, l));
        if start.abs() > 1e-12 || end.abs() > 1e-12 {
            return Err(Error::PhiBoundaryNonzero { start, end });
        }
    }
    let data = node_data(chart, cd, path)?;
    phis.iter().map(|phi| evaluate(chart, &data, *phi, l)).collect()
}
