use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{smoothstep, RadialProfile};
use crate::chart::{Chart, MetricField, StepRule};
use crate::error::{Error, Result};
use crate::sampling::{cube_to_sphere, Halton};
use crate::scan::direction_pairs;

const STEP_FRAC: f64 = 0.02;
const STEP_FLOOR: f64 = 1e-12;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn radius(base: &dyn MetricField, x: &[f64]) -> f64 {
    base.radial_distance(x).unwrap_or_else(|| norm(x))
}

struct NeckMetric {
    base: Arc<dyn MetricField>,
    profile: Arc<dyn RadialProfile>,
}

impl MetricField for NeckMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let r = radius(self.base.as_ref(), x);
        self.base.metric(x) * (2.0 * self.profile.tau(r)).exp()
    }
    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        self.base.radial_distance(x)
    }
    fn name(&self) -> String {
        format!("neck({})", self.base.name())
    }
}

/// The product metric `ℝ⁺ × S^{m−1}(ρ)` written as `(ρ/r)² δ` in
/// Euclidean coordinates about the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub dim: usize,
    pub rho: f64,
}

impl MetricField for Cylinder {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let r = norm(x);
        DMatrix::identity(self.dim, self.dim) * (self.rho * self.rho / (r * r))
    }
    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        Some(norm(x))
    }
    fn name(&self) -> String {
        format!("cylinder{}({})", self.dim, self.rho)
    }
}

struct BlendMetric {
    inner: Arc<dyn MetricField>,
    outer: Arc<dyn MetricField>,
    r_a: f64,
    r_b: f64,
}

impl MetricField for BlendMetric {
    fn dim(&self) -> usize {
        self.outer.dim()
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let r = norm(x);
        let (s, _) = smoothstep((r - self.r_a) / (self.r_b - self.r_a));
        if s <= 0.0 {
            self.inner.metric(x)
        } else if s >= 1.0 {
            self.outer.metric(x)
        } else {
            self.inner.metric(x) * (1.0 - s) + self.outer.metric(x) * s
        }
    }
    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        Some(norm(x))
    }
    fn name(&self) -> String {
        format!("blend({}, {})", self.inner.name(), self.outer.name())
    }
}

/// The conformal chart `η² g` on a punctured ball together with its base.
#[derive(Clone)]
pub struct NeckChart {
    pub chart: Chart,
    pub base: Chart,
    pub profile: Arc<dyn RadialProfile>,
}

impl std::fmt::Debug for NeckChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeckChart").field("chart", &self.chart).field("r_min", &self.r_min()).finish()
    }
}

impl NeckChart {
    pub fn r_min(&self) -> f64 {
        self.profile.r_min()
    }
}

fn radial_step() -> StepRule {
    StepRule::Radial { frac: STEP_FRAC, floor: STEP_FLOOR, center: Vec::new() }
}

fn with_center(step: StepRule, dim: usize) -> StepRule {
    match step {
        StepRule::Radial { frac, floor, .. } => StepRule::Radial { frac, floor, center: vec![0.0; dim] },
        other => other,
    }
}

/// Conformal chart `η² g` for a base chart written in geodesic polar
/// normal coordinates about the origin.
pub fn neck_metric(base: &Chart, profile: Arc<dyn RadialProfile>) -> Result<NeckChart> {
    let dim = base.dim();
    let origin = vec![0.0; dim];
    if !base.domain().contains(&origin) {
        return Err(Error::NoPolarStructure);
    }
    let reach = base.domain().axes.iter().map(|a| a.hi.min(-a.lo)).fold(f64::INFINITY, f64::min);
    let probe: Vec<f64> = (0..dim).map(|i| 0.3 * reach / (dim as f64).sqrt() * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    match base.radial_distance(&probe) {
        Some(r) if (r - norm(&probe)).abs() <= 1e-12 * norm(&probe) => {}
        _ => return Err(Error::NoPolarStructure),
    }
    let metric = NeckMetric { base: Arc::clone(base.metric_field()), profile: Arc::clone(&profile) };
    let chart = Chart::new(base.domain().clone(), Arc::new(metric))?.with_step(with_center(radial_step(), dim));
    Ok(NeckChart { chart, base: base.clone(), profile })
}

/// Radial shells times direction pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub shells: usize,
    pub points_per_shell: usize,
    pub pairs_per_shell: usize,
    pub seed: u64,
    /// Radii of the innermost and outermost shells; defaults to
    /// `[r_min, r0]` of the profile.
    pub r_range: Option<(f64, f64)>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { shells: 20, points_per_shell: 8, pairs_per_shell: 200, seed: 0, r_range: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSummary {
    pub r: f64,
    pub min_biricci: f64,
    /// Smallest analytic lower bound on the shell, if a base is known.
    pub min_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argmin {
    pub point: Vec<f64>,
    pub r: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckReport {
    pub min_biricci: f64,
    pub argmin: Argmin,
    /// Smallest value of `direct − analytic lower bound`; negative values
    /// mark samples where the bound fails.
    pub bound_margin: f64,
    pub samples: usize,
    pub shells: Vec<ShellSummary>,
}

struct Sample {
    direct: f64,
    bound: f64,
    point: Vec<f64>,
    v: DVector<f64>,
    w: DVector<f64>,
}

struct Bound<'a> {
    base: &'a Chart,
    profile: &'a dyn RadialProfile,
    c0: f64,
    c1: f64,
}

fn shell_radii(lo: f64, hi: f64, shells: usize) -> Vec<f64> {
    if shells <= 1 {
        return vec![lo];
    }
    (0..shells).map(|k| lo * (hi / lo).powf(k as f64 / (shells - 1) as f64)).collect()
}

fn sample_shell(chart: &Chart, r: f64, spec: &SampleSpec, sigma: f64, bound: Option<&Bound>, salt: u64) -> Result<Vec<Sample>> {
    let dim = chart.dim();
    let points = spec.points_per_shell.max(1);
    let mut seq = Halton::seeded(dim, spec.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut out = Vec::with_capacity(spec.pairs_per_shell);
    for p in 0..points {
        let count = spec.pairs_per_shell / points + usize::from(p < spec.pairs_per_shell % points);
        let dir = cube_to_sphere(&seq.next_point());
        let x: Vec<f64> = dir.iter().map(|d| r * d).collect();
        let bundle = chart.curvature(&x)?;
        let base = bound.map(|b| b.base.curvature(&x)).transpose()?;
        for (v, w) in direction_pairs(&bundle.metric, count, spec.seed.wrapping_add(p as u64)) {
            let direct = bundle.bi_ricci(&v, &w, sigma)?;
            let bound_value = match (bound, &base) {
                (Some(b), Some(bb)) => {
                    let tau = b.profile.tau(r);
                    let e = tau.exp();
                    let (phi, dphi) = (b.profile.phi(r), b.profile.phi_prime(r));
                    let plain = bb.bi_ricci_unchecked(&(&v * e), &(&w * e), sigma);
                    (-2.0 * tau).exp() * (plain + phi * (b.c0 - b.c1 * phi) / (r * r) + b.c1 * dphi / r)
                }
                _ => f64::NEG_INFINITY,
            };
            out.push(Sample { direct, bound: bound_value, point: x.clone(), v, w });
        }
    }
    Ok(out)
}

fn scan_shells(chart: &Chart, radii: &[f64], spec: &SampleSpec, sigma: f64, bound: Option<&Bound>) -> Result<NeckReport> {
    let per_shell: Vec<Result<Vec<Sample>>> =
        radii.par_iter().enumerate().map(|(k, &r)| sample_shell(chart, r, spec, sigma, bound, k as u64)).collect();
    let mut shells = Vec::with_capacity(radii.len());
    let mut best: Option<(Sample, f64)> = None;
    let mut bound_margin = f64::INFINITY;
    let mut samples = 0;
    for (samples_k, &r) in per_shell.into_iter().zip(radii) {
        let samples_k = samples_k?;
        let mut summary = ShellSummary { r, min_biricci: f64::INFINITY, min_bound: f64::INFINITY };
        for s in samples_k {
            samples += 1;
            summary.min_biricci = summary.min_biricci.min(s.direct);
            summary.min_bound = summary.min_bound.min(s.bound);
            bound_margin = bound_margin.min(s.direct - s.bound);
            if best.as_ref().is_none_or(|(b, _)| s.direct < b.direct) {
                best = Some((s, r));
            }
        }
        shells.push(summary);
    }
    let (s, r) = best.ok_or(Error::InsufficientSamples { got: 0, need: 1 })?;
    Ok(NeckReport {
        min_biricci: s.direct,
        argmin: Argmin { point: s.point, r, v: s.v.iter().copied().collect(), w: s.w.iter().copied().collect() },
        bound_margin,
        samples,
        shells,
    })
}

/// Evaluates `B_σRc` of the neck metric over radial shells and compares it
/// with the lower bound `e^{−2τ}(B_σRc_g + φ(c0 − c1 φ)/r² + c1 φ'/r)`.
pub fn certify_neck(neck: &NeckChart, m: usize, sigma: f64, spec: &SampleSpec) -> Result<NeckReport> {
    if m != neck.chart.dim() {
        return Err(Error::DimensionMismatch { expected: neck.chart.dim(), got: m });
    }
    let (lo, hi) = spec.r_range.unwrap_or((neck.r_min(), neck.profile.r0()));
    if lo < neck.r_min() * (1.0 - 1e-12) || !(hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "shells [{lo}, {hi}] leave the clipped domain r >= {}",
            neck.r_min()
        )));
    }
    let c0 = sigma.min(1.0) / 2.0;
    let c1 = m as f64 + (m as f64 - 2.0) * sigma;
    let bound = Bound { base: &neck.base, profile: neck.profile.as_ref(), c0, c1 };
    scan_shells(&neck.chart, &shell_radii(lo, hi, spec.shells), spec, sigma, Some(&bound))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendReport {
    pub r_a: f64,
    pub r_b: f64,
    pub rho: f64,
    /// `max_k r^k |∂_r^k (g_neck − g_cyl)| / |g_cyl|` for `k ≤ 2` at `r_b`.
    pub mismatch: f64,
    pub min_biricci: f64,
    pub argmin: Argmin,
    pub shells: Vec<ShellSummary>,
}

fn c2_mismatch(neck: &dyn MetricField, cyl: &dyn MetricField, r: f64, dim: usize, seed: u64) -> f64 {
    let mut seq = Halton::seeded(dim, seed);
    let h = 1e-3 * r;
    (0..8)
        .map(|_| {
            let dir = cube_to_sphere(&seq.next_point());
            let diff = |s: f64| {
                let x: Vec<f64> = dir.iter().map(|d| s * d).collect();
                neck.metric(&x) - cyl.metric(&x)
            };
            let x: Vec<f64> = dir.iter().map(|d| r * d).collect();
            let scale = cyl.metric(&x).norm();
            let (lo, mid, hi) = (diff(r - h), diff(r), diff(r + h));
            let d1 = (&hi - &lo) / (2.0 * h);
            let d2 = (&hi - &mid * 2.0 + &lo) / (h * h);
            (mid.norm().max(r * d1.norm()).max(r * r * d2.norm())) / scale
        })
        .fold(0.0, f64::max)
}

/// Replaces the neck metric by the product metric `ℝ⁺ × S^{m−1}(ρ)` for
/// `r ≤ r_a`, blending with a quintic step on `[r_a, r_b]`.
pub fn interpolate_to_cylinder(
    neck: &NeckChart,
    window: (f64, f64),
    sigma: f64,
    spec: &SampleSpec,
) -> Result<(Chart, BlendReport)> {
    let (r_a, r_b) = window;
    if !(r_a < r_b) {
        return Err(Error::InvalidWindow(format!("r_a = {r_a} must be below r_b = {r_b}")));
    }
    if r_a < neck.r_min() || r_b > neck.profile.r_cyl() {
        return Err(Error::InvalidWindow(format!(
            "[{r_a}, {r_b}] is not inside the near-cylinder region [{}, {}]",
            neck.r_min(),
            neck.profile.r_cyl()
        )));
    }
    let dim = neck.chart.dim();
    let rho = neck.profile.rho();
    let cyl: Arc<dyn MetricField> = Arc::new(Cylinder { dim, rho });
    let outer = Arc::clone(neck.chart.metric_field());
    let mismatch = c2_mismatch(outer.as_ref(), cyl.as_ref(), r_b, dim, spec.seed);
    let blend = BlendMetric { inner: cyl, outer, r_a, r_b };
    let chart = Chart::new(neck.chart.domain().clone(), Arc::new(blend))?.with_step(neck.chart.step_rule().clone());
    let report = scan_shells(&chart, &shell_radii(r_a, r_b, spec.shells), spec, sigma, None)?;
    Ok((
        chart,
        BlendReport { r_a, r_b, rho, mismatch, min_biricci: report.min_biricci, argmin: report.argmin, shells: report.shells },
    ))
}
