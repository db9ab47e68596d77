//! Conformal factors, the conformal Ricci tensor and checks of the conformal
//! transformation laws.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{Chart, MetricField};
use crate::error::{Error, Result};
use crate::field::{BuiltinField, ScalarField};
use crate::geodesic::GeodesicPath;

/// Positive factors `f_1..f_k` with positive weights `a_1..a_k`.
#[derive(Clone)]
pub struct ConformalData {
    factors: Vec<Arc<dyn ScalarField>>,
    weights: Vec<f64>,
}

impl std::fmt::Debug for ConformalData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = self.factors.iter().map(|f| f.name()).collect();
        f.debug_struct("ConformalData").field("factors", &names).field("weights", &self.weights).finish()
    }
}

impl ConformalData {
    pub fn new(factors: Vec<Arc<dyn ScalarField>>, weights: Vec<f64>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidConformalData("at least one factor is required".into()));
        }
        if factors.len() != weights.len() {
            return Err(Error::InvalidConformalData(format!(
                "{} factors but {} weights",
                factors.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidConformalData(format!("weight {w} is not positive")));
        }
        Ok(ConformalData { factors, weights })
    }

    /// Single factor `f` with weight `sigma`.
    pub fn single(f: Arc<dyn ScalarField>, sigma: f64) -> Result<Self> {
        Self::new(vec![f], vec![sigma])
    }

    /// `f ≡ 1` with weight `sigma`.
    pub fn trivial(sigma: f64) -> Result<Self> {
        Self::single(Arc::new(BuiltinField::Constant { value: 1.0 }), sigma)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[Arc<dyn ScalarField>] {
        &self.factors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ a_i`.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn factor_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.factors
            .iter()
            .enumerate()
            .map(|(index, f)| {
                let value = f.value(x);
                if value > 0.0 && value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::NonPositiveFactor { index, point: x.to_vec(), value })
                }
            })
            .collect()
    }

    /// `ln η = Σ a_i ln f_i`.
    pub fn log_eta(&self, x: &[f64]) -> Result<f64> {
        Ok(self.factor_values(x)?.iter().zip(&self.weights).map(|(f, a)| a * f.ln()).sum())
    }

    /// `η = Π f_i^{a_i}`.
    pub fn eta(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_eta(x)?.exp())
    }

    /// Checks positivity of every factor on a uniform grid with
    /// `per_axis` nodes per axis (endpoints excluded on non-periodic axes).
    pub fn check_on_chart(&self, chart: &Chart, per_axis: usize) -> Result<()> {
        let axes = &chart.domain().axes;
        let n = axes.len();
        let total = per_axis.pow(n as u32);
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut rem = idx;
            for (a, axis) in axes.iter().enumerate().rev() {
                let i = rem % per_axis;
                rem /= per_axis;
                let t = if axis.periodic {
                    i as f64 / per_axis as f64
                } else {
                    (i as f64 + 0.5) / per_axis as f64
                };
                x[a] = axis.lo + t * axis.width();
            }
            self.factor_values(&x)?;
        }
        Ok(())
    }

    /// `Σ a_i f_i^{-1} Δf_i`.
    pub fn laplacian_term(&self, chart: &Chart, x: &[f64]) -> Result<f64> {
        let values = self.factor_values(x)?;
        let mut total = 0.0;
        for ((f, a), v) in self.factors.iter().zip(&self.weights).zip(values) {
            total += a * chart.field_laplacian(f.as_ref(), x)? / v;
        }
        Ok(total)
    }

    /// `Σ a_i |∇ ln f_i|²`.
    pub fn weighted_gradient_term(&self, chart: &Chart, x: &[f64]) -> Result<f64> {
        let g = chart.metric_at(x);
        let mut total = 0.0;
        for (f, a) in self.factors.iter().zip(&self.weights) {
            let grad = chart.field_gradient(&LogField(f.as_ref()), x)?;
            total += a * (grad.transpose() * &g * &grad)[(0, 0)];
        }
        Ok(total)
    }

    /// Metric gradient of `ln η`.
    pub fn grad_log_eta(&self, chart: &Chart, x: &[f64]) -> Result<DVector<f64>> {
        self.factor_values(x)?;
        chart.field_gradient(&LogEta(self), x)
    }

    /// `ln η` as a scalar field (non-positive factors give NaN).
    pub fn log_eta_field(&self) -> impl ScalarField + '_ {
        LogEta(self)
    }
}

struct LogField<'a>(&'a dyn ScalarField);

impl ScalarField for LogField<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x).ln()
    }
}

struct LogEta<'a>(&'a ConformalData);

impl ScalarField for LogEta<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0
            .factors
            .iter()
            .zip(&self.0.weights)
            .map(|(f, a)| a * f.value(x).ln())
            .sum()
    }
}

/// `Ric − (Σ a_i f_i^{-1} Δf_i) h` at `x`.
pub fn conformal_ricci(chart: &Chart, cd: &ConformalData, x: &[f64]) -> Result<DMatrix<f64>> {
    let bundle = chart.curvature(x)?;
    let term = cd.laplacian_term(chart, x)?;
    Ok(&bundle.ricci - &bundle.metric * term)
}

/// Metric `(Π f_i^{2 a_i}) h` evaluated through the base metric and factors.
pub struct ConformalMetric {
    base: Arc<dyn MetricField>,
    data: ConformalData,
}

impl MetricField for ConformalMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let mut scale = 1.0;
        for (f, a) in self.data.factors.iter().zip(&self.data.weights) {
            let v = f.value(x);
            scale *= if v > 0.0 { v.powf(2.0 * a) } else { f64::NAN };
        }
        self.base.metric(x) * scale
    }

    fn name(&self) -> String {
        format!("conformal({})", self.base.name())
    }
}

/// Chart carrying the conformal metric `(Π f_i^{2 a_i}) h`.
pub fn conformal_metric(chart: &Chart, cd: &ConformalData) -> Result<Chart> {
    cd.check_on_chart(chart, 9)?;
    let metric = ConformalMetric { base: Arc::clone(chart.metric_field()), data: cd.clone() };
    Ok(Chart::new(chart.domain().clone(), Arc::new(metric))?
        .with_kind(chart.kind().clone())
        .with_step(chart.step_rule().clone()))
}

fn max_abs_residual(direct: &DMatrix<f64>, other: &DMatrix<f64>) -> f64 {
    let diff = (direct - other).abs().max();
    let scale = direct.abs().max();
    if scale > 1.0 {
        diff / scale
    } else {
        diff
    }
}

fn scalar_residual(direct: f64, other: f64) -> f64 {
    let diff = (direct - other).abs();
    if direct.abs() > 1.0 {
        diff / direct.abs()
    } else {
        diff
    }
}

/// Pieces of the conformal change by `η` computed on the base chart.
struct LogEtaDerivatives {
    hessian: DMatrix<f64>,
    laplacian: f64,
    differential: DVector<f64>,
    grad_sq: f64,
}

fn log_eta_derivatives(chart: &Chart, eta: &dyn ScalarField, x: &[f64]) -> Result<LogEtaDerivatives> {
    let v = eta.value(x);
    if !(v > 0.0) {
        return Err(Error::NonPositiveFactor { index: 0, point: x.to_vec(), value: v });
    }
    let log = LogField(eta);
    let hessian = chart.field_hessian(&log, x)?;
    let g = chart.metric_at(x);
    let ginv = g.clone().try_inverse().ok_or(Error::NotPositiveDefinite { point: x.to_vec(), pivot: 0, value: 0.0 })?;
    let laplacian = ginv.component_mul(&hessian).sum();
    let grad = chart.field_gradient(&log, x)?;
    let differential = &g * &grad;
    let grad_sq = grad.dot(&differential);
    Ok(LogEtaDerivatives { hessian, laplacian, differential, grad_sq })
}

/// Max-norm difference between the Ricci tensor of `η² h` computed directly
/// and through the transformation law on the base chart.
pub fn verify_ricci_law(chart: &Chart, eta: Arc<dyn ScalarField>, x: &[f64]) -> Result<f64> {
    let n = chart.dim() as f64;
    let d = log_eta_derivatives(chart, eta.as_ref(), x)?;
    let conformal = conformal_metric(chart, &ConformalData::single(eta, 1.0)?)?;
    let direct = conformal.curvature(x)?.ricci;
    let base = chart.curvature(x)?;
    let outer = &d.differential * d.differential.transpose();
    let law = &base.ricci
        - &base.metric * d.laplacian
        - (&d.hessian - outer) * (n - 2.0)
        - &base.metric * ((n - 2.0) * d.grad_sq);
    Ok(max_abs_residual(&direct, &law))
}

/// Residuals of the scalar-curvature law and of the trace identity.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ScalarLawResidual {
    /// Direct `R̃` against `η^{-2}(R − 2(n−1)Δ ln η − (n−1)(n−2)|∇ ln η|²)`.
    pub law_residual: f64,
    /// Direct `R̃` against the `f^{4/(n-2)} h`-trace of the conformal Ricci
    /// tensor with `f = η^{(n-2)/2}` and weight `4(n−1)/(n−2)`.
    pub trace_residual: f64,
}

pub fn verify_scalar_law(chart: &Chart, eta: Arc<dyn ScalarField>, x: &[f64]) -> Result<ScalarLawResidual> {
    let n = chart.dim();
    if n <= 2 {
        return Err(Error::UnsupportedDimension { dim: n, reason: "the exponent 2/(n-2) is singular".into() });
    }
    let nf = n as f64;
    let d = log_eta_derivatives(chart, eta.as_ref(), x)?;
    let eta_value = eta.value(x);
    let conformal = conformal_metric(chart, &ConformalData::single(Arc::clone(&eta), 1.0)?)?;
    let direct = conformal.curvature(x)?.scalar;
    let base = chart.curvature(x)?;
    let law = (base.scalar - 2.0 * (nf - 1.0) * d.laplacian - (nf - 1.0) * (nf - 2.0) * d.grad_sq)
        / (eta_value * eta_value);

    let f: Arc<dyn ScalarField> = Arc::new(PowerOf { inner: eta, power: 0.5 * (nf - 2.0) });
    let sigma = 4.0 * (nf - 1.0) / (nf - 2.0);
    let ric = conformal_ricci(chart, &ConformalData::single(Arc::clone(&f), sigma)?, x)?;
    let ginv = base.metric_inv.clone();
    let scale = f.value(x).powf(-4.0 / (nf - 2.0));
    let trace = scale * ginv.component_mul(&ric).sum();

    Ok(ScalarLawResidual { law_residual: scalar_residual(direct, law), trace_residual: scalar_residual(direct, trace) })
}

struct PowerOf {
    inner: Arc<dyn ScalarField>,
    power: f64,
}

impl ScalarField for PowerOf {
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x).powf(self.power)
    }
}

/// Compares the conformal Ricci curvature in the direction of the path
/// tangent at `x` with the expression through the conformal metric:
/// `R̃ic(v,v) + (n−2) ∂²_s ln η − Σ a_i |∇ ln f_i|²`.
///
/// The path must be a conformal geodesic in unit `h`-speed with uniform
/// arc-length spacing; `∂²_s` is a five-point difference along it.
pub fn verify_2_6(chart: &Chart, cd: &ConformalData, path: &GeodesicPath, x: &[f64]) -> Result<f64> {
    let samples = path.samples();
    let (i, gap) = samples
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = chart.domain().displacement(x, &p.x);
            (i, d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::PathCheck("empty path".into()))?;
    if gap > 1e-6 {
        return Err(Error::PathCheck(format!("path misses the point by {gap:.3e}")));
    }
    if i < 2 || i + 2 >= samples.len() {
        return Err(Error::PathCheck("point too close to a path end for differencing".into()));
    }
    for p in &samples[i - 2..=i + 2] {
        let speed = chart.metric_at(&p.x).clone();
        let t = DVector::from_column_slice(&p.t);
        let norm = (t.transpose() * speed * &t)[(0, 0)].sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::PathCheck(format!("tangent has h-length {norm}")));
        }
    }
    let ds = samples[i + 1].s - samples[i].s;
    let logs: Vec<f64> = samples[i - 2..=i + 2].iter().map(|p| cd.log_eta(&p.x)).collect::<Result<_>>()?;
    let second = (-logs[0] + 16.0 * logs[1] - 30.0 * logs[2] + 16.0 * logs[3] - logs[4]) / (12.0 * ds * ds);

    let v = DVector::from_column_slice(&samples[i].t);
    let n = chart.dim() as f64;
    let lhs = {
        let ric = conformal_ricci(chart, cd, x)?;
        (v.transpose() * ric * &v)[(0, 0)]
    };
    let tilde = conformal_metric(chart, cd)?.curvature(x)?;
    let rhs = (v.transpose() * &tilde.ricci * &v)[(0, 0)] + (n - 2.0) * second
        - cd.weighted_gradient_term(chart, x)?;
    Ok(scalar_residual(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::chart::Domain;
    use crate::field::{BuiltinField, FnField, FourierTerm};
    use crate::geodesic::integrate_conformal_geodesic;

    fn field(f: BuiltinField) -> Arc<dyn ScalarField> {
        Arc::new(f)
    }

    #[test]
    fn rejects_bad_data() {
        let one = field(BuiltinField::Constant { value: 1.0 });
        assert!(ConformalData::new(vec![], vec![]).is_err());
        assert!(ConformalData::new(vec![one.clone()], vec![1.0, 2.0]).is_err());
        assert!(ConformalData::single(one, 0.0).is_err());
        let neg = field(BuiltinField::Cosine { axis: 0, base: 0.0, amplitude: 1.0 });
        let cd = ConformalData::single(neg, 1.0).unwrap();
        let chart = Chart::flat(2, 2.0);
        assert!(matches!(cd.check_on_chart(&chart, 9), Err(Error::NonPositiveFactor { .. })));
        assert!(matches!(conformal_ricci(&chart, &cd, &[1.8, 0.0]), Err(Error::NonPositiveFactor { .. })));
    }

    #[test]
    fn trivial_factor_leaves_ricci_unchanged() {
        let chart = Chart::sphere(3, 1.0);
        let x = [1.0, 1.3, 0.2];
        let cd = ConformalData::trivial(0.7).unwrap();
        assert_eq!(conformal_ricci(&chart, &cd, &x).unwrap(), chart.curvature(&x).unwrap().ricci);
    }

    #[test]
    fn exponential_factor_on_the_plane() {
        let chart = Chart::flat(2, 1.0);
        let cd = ConformalData::single(field(BuiltinField::ExpLinear { coeffs: vec![1.0, 0.0], scale: 1.0 }), 1.0).unwrap();
        let ric = conformal_ricci(&chart, &cd, &[0.3, -0.2]).unwrap();
        assert!((ric + DMatrix::identity(2, 2)).abs().max() < 1e-8);
    }

    #[test]
    fn weights_enter_the_laplacian_term() {
        let chart = Chart::sphere(3, 1.0);
        let x = [1.1, 0.8, 2.0];
        let f = field(BuiltinField::Cosine { axis: 0, base: 1.0, amplitude: 0.1 });
        let g = field(BuiltinField::Cosine { axis: 1, base: 2.0, amplitude: 0.5 });
        let (a, b) = (0.4, 0.9);
        let cd = ConformalData::new(vec![f.clone(), g.clone()], vec![a, b]).unwrap();
        let combined = conformal_ricci(&chart, &cd, &x).unwrap();
        let bundle = chart.curvature(&x).unwrap();
        let term = a * chart.field_laplacian(f.as_ref(), &x).unwrap() / f.value(&x)
            + b * chart.field_laplacian(g.as_ref(), &x).unwrap() / g.value(&x);
        let manual = &bundle.ricci - &bundle.metric * term;
        assert!((combined - manual).abs().max() < 1e-10);
    }

    #[test]
    fn conformal_metric_scaling() {
        let chart = Chart::sphere(2, 1.0);
        let x = [0.7, 2.0];
        let same = conformal_metric(&chart, &ConformalData::trivial(1.0).unwrap()).unwrap();
        assert_eq!(same.metric_at(&x), chart.metric_at(&x));

        let flat = Chart::flat(2, 1.0);
        let c = field(BuiltinField::Constant { value: 3.0 });
        let scaled = conformal_metric(&flat, &ConformalData::single(c, 1.0).unwrap()).unwrap();
        assert!((scaled.metric_at(&[0.1, 0.2]) - DMatrix::identity(2, 2) * 9.0).abs().max() < 1e-14);
    }

    #[test]
    fn inverse_radius_factor_gives_a_cylinder() {
        // r^{-2} δ on ℝ³∖{0} is dt² + g_{S²} with t = ln r; R = (m−1)(m−2) = 2.
        let domain = Domain::cube(3, 0.05, 1.0);
        let chart = Chart::flat_box(domain);
        let f = field(BuiltinField::RadialPower { power: -1.0, scale: 1.0 });
        let tilde = conformal_metric(&chart, &ConformalData::single(f, 1.0).unwrap()).unwrap();
        for x in [[0.5, 0.5, 0.5], [0.1, 0.1, 0.12], [0.9, 0.2, 0.3]] {
            let r = tilde.curvature(&x).unwrap().scalar;
            assert!((r - 2.0).abs() < 1e-5, "R = {r} at {x:?}");
        }
    }

    #[test]
    fn ricci_law_trivial_and_exponential() {
        let chart = Chart::flat(3, 1.0);
        let one = field(BuiltinField::Constant { value: 1.0 });
        assert_eq!(verify_ricci_law(&chart, one, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
        let exp = field(BuiltinField::ExpLinear { coeffs: vec![1.0, 0.0, 0.0], scale: 1.0 });
        assert!(verify_ricci_law(&chart, exp, &[0.1, 0.2, 0.3]).unwrap() < 1e-6);
    }

    #[test]
    fn ricci_law_on_sphere_at_random_points() {
        let chart = Chart::sphere(2, 1.0);
        let eta = field(BuiltinField::LogFourier {
            terms: vec![
                FourierTerm { wave: vec![1.0, 0.0], amplitude: 0.3, phase: 0.2 },
                FourierTerm { wave: vec![0.0, 2.0], amplitude: 0.2, phase: 1.0 },
                FourierTerm { wave: vec![1.0, 1.0], amplitude: 0.1, phase: -0.4 },
            ],
        });
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = [rng.gen_range(0.3..PI - 0.3), rng.gen_range(0.0..2.0 * PI)];
            let r = verify_ricci_law(&chart, eta.clone(), &x).unwrap();
            assert!(r < 1e-5, "residual {r} at {x:?}");
        }
    }

    #[test]
    fn scalar_law_rejects_surfaces() {
        let chart = Chart::hyperbolic(2, 1.0, 0.5, 2.0);
        let one = field(BuiltinField::Constant { value: 1.0 });
        assert!(matches!(verify_scalar_law(&chart, one, &[0.0, 1.0]), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn scalar_law_trivial_factor() {
        let chart = Chart::sphere(3, 1.0);
        let one = field(BuiltinField::Constant { value: 1.0 });
        let r = verify_scalar_law(&chart, one, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.law_residual, 0.0);
        assert!(r.trace_residual < 1e-9);
    }

    #[test]
    fn stereographic_four_sphere() {
        let chart = Chart::flat(4, 0.5);
        let eta = field(BuiltinField::InverseQuadratic { scale: 2.0 });
        let tilde = conformal_metric(&chart, &ConformalData::single(eta.clone(), 1.0).unwrap()).unwrap();
        for x in [[0.0; 4], [0.1, -0.05, 0.2, 0.0], [0.3, 0.3, -0.2, 0.1]] {
            assert!((tilde.curvature(&x).unwrap().scalar - 12.0).abs() < 1e-4);
            assert!(verify_scalar_law(&chart, eta.clone(), &x).unwrap().law_residual < 1e-5);
        }
    }

    #[test]
    fn formula_2_6_trivial_and_plane() {
        let chart = Chart::flat(2, 1.0);
        let trivial = ConformalData::trivial(1.0).unwrap();
        let path = integrate_conformal_geodesic(&chart, &trivial, &[-0.2, 0.0], &[1.0, 0.0], 0.4).unwrap();
        assert!(verify_2_6(&chart, &trivial, &path, &[0.0, 0.0]).unwrap() < 1e-9);

        let cd = ConformalData::single(field(BuiltinField::ExpLinear { coeffs: vec![1.0, 0.0], scale: 1.0 }), 1.0).unwrap();
        let path = integrate_conformal_geodesic(&chart, &cd, &[-0.2, 0.0], &[1.0, 0.0], 0.4).unwrap();
        assert!(verify_2_6(&chart, &cd, &path, &[0.0, 0.0]).unwrap() < 1e-5);
    }

    #[test]
    fn formula_2_6_two_factors_on_three_sphere() {
        let chart = Chart::sphere(3, 1.0);
        let f = field(BuiltinField::Cosine { axis: 0, base: 1.0, amplitude: 0.1 });
        let g = Arc::new(FnField(|x: &[f64]| 1.5 + 0.2 * x[1].sin() * x[2].cos()));
        let cd = ConformalData::new(vec![f, g], vec![0.5, 0.3]).unwrap();
        let x0 = [1.0, 1.2, 0.5];
        let g0 = chart.metric_at(&x0);
        let v0 = [0.6 / g0[(0, 0)].sqrt(), 0.0, 0.8 / g0[(2, 2)].sqrt()];
        let path = integrate_conformal_geodesic(&chart, &cd, &x0, &v0, 0.5).unwrap();
        let mid = path.samples()[1000].x.clone();
        let r = verify_2_6(&chart, &cd, &path, &mid).unwrap();
        assert!(r < 1e-4, "residual {r}");
    }

    #[test]
    fn formula_2_6_needs_the_point_on_the_path() {
        let chart = Chart::flat(2, 1.0);
        let cd = ConformalData::trivial(1.0).unwrap();
        let path = integrate_conformal_geodesic(&chart, &cd, &[-0.2, 0.0], &[1.0, 0.0], 0.4).unwrap();
        assert!(matches!(verify_2_6(&chart, &cd, &path, &[0.0, 0.5]), Err(Error::PathCheck(_))));
        assert!(matches!(verify_2_6(&chart, &cd, &path, &[-0.2, 0.0]), Err(Error::PathCheck(_))));
    }
}
