//! Closed-form diameter and length bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Thm1,
    Cor1,
    Thm1prime,
    Cor1prime,
    Thm2,
    /// Decaying-curvature hypersurface bound, `θ_p^{-1}(c(n, σ)² π²/κ)`.
    Thm3,
    Lemma7,
    #[serde(rename = "prop1-case1")]
    Prop1Case1,
    #[serde(rename = "prop1-case2")]
    Prop1Case2,
}

/// Inputs of a bound. `n` is the dimension of the manifold whose diameter
/// is bounded (the hypersurface for `thm2`, `thm3` and `prop1-*`); `m` is
/// the ambient dimension for `prop1-*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    pub n: usize,
    pub kappa: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Total weight `Σ a_i`.
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub delta: f64,
    /// Lower bound on the first Dirichlet eigenvalue for `thm2`.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub m: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl BoundSpec {
    pub fn new(kind: BoundKind, n: usize, kappa: f64) -> Self {
        BoundSpec { kind, n, kappa, sigma: 1.0, epsilon: 0.0, a: 0.0, delta: 0.0, lambda: 0.0, m: None }
    }

    pub fn sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn total_weight(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn ambient(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }
}

fn inadmissible(msg: impl Into<String>) -> Error {
    Error::InadmissibleSpec(msg.into())
}

/// `n − 1 + (n − 3)²/(4ε)`, the squared constant of the `thm1` bound.
fn thm1_square(n: usize, epsilon: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 3 {
        return Ok(nf - 1.0);
    }
    if !(epsilon > 0.0) {
        return Err(inadmissible(format!("epsilon must be positive for n = {n}, got {epsilon}")));
    }
    Ok(nf - 1.0 + (nf - 3.0).powi(2) / (4.0 * epsilon))
}

/// Squared constant `n − 1 + (n−3)²/(4/w − n + 1)` for a weight `w` below
/// `4/(n−1)`, or `n − 1` at `w = 4/(n−1)` when `n = 3`.
fn weight_square(n: usize, w: f64, what: &str) -> Result<f64> {
    let nf = n as f64;
    if n < 2 {
        return Err(inadmissible(format!("dimension {n} is below 2")));
    }
    let edge = 4.0 / (nf - 1.0);
    if !(w > 0.0) {
        return Err(inadmissible(format!("{what} = {w} must be positive")));
    }
    if w < edge {
        Ok(nf - 1.0 + (nf - 3.0).powi(2) / (4.0 / w - nf + 1.0))
    } else if n == 3 && w == edge {
        Ok(nf - 1.0)
    } else if n == 3 {
        Err(inadmissible(format!("{what} = {w} exceeds 4/(n-1) = {edge}")))
    } else {
        Err(inadmissible(format!("{what} = {w} must be below 4/(n-1) = {edge} for n = {n}")))
    }
}

/// `c(n, σ)` of the hypersurface diameter theorem.
pub fn c_constant(n: usize, sigma: f64) -> Result<f64> {
    Ok(weight_square(n, sigma, "sigma")?.sqrt())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(inadmissible(format!("kappa must be positive, got {kappa}")))
    }
}

fn check_hypersurface_window(n: usize, sigma: f64) -> Result<()> {
    let nf = n as f64;
    let lower = (nf - 1.0) / nf;
    if sigma < lower {
        return Err(inadmissible(format!("sigma = {sigma} is below (n-1)/n = {lower}")));
    }
    weight_square(n, sigma, "sigma").map(|_| ())
}

/// Which of the two codimension cases applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prop1Case {
    One,
    Two,
}

fn check_prop1_case(case: Prop1Case, m: usize, sigma: f64) -> Result<()> {
    match case {
        Prop1Case::One => {
            if !(4..=9).contains(&m) {
                return Err(inadmissible(format!("case 1 needs 4 <= m <= 9, got m = {m}")));
            }
            let upper = 4.0 / (m as f64 - 2.0);
            if !(sigma > 0.5 && sigma < upper) {
                return Err(inadmissible(format!("case 1 needs 1/2 < sigma < {upper}, got {sigma}")));
            }
        }
        Prop1Case::Two => {
            if m != 5 {
                return Err(inadmissible(format!("case 2 needs m = 5, got m = {m}")));
            }
            if !(sigma > 2.0 / 3.0 && sigma <= 1.0) {
                return Err(inadmissible(format!("case 2 needs 2/3 < sigma <= 1, got {sigma}")));
            }
        }
    }
    Ok(())
}

/// Strict upper bound on the almost-flatness parameter ε.
pub fn prop1_epsilon_threshold(case: Prop1Case, m: usize, sigma: f64, kappa: f64) -> Result<f64> {
    check_prop1_case(case, m, sigma)?;
    if !(kappa > 0.0) {
        return Err(inadmissible(format!("kappa must be positive, got {kappa}")));
    }
    Ok(match case {
        Prop1Case::One => {
            let q = (m as f64 - 2.0) * sigma / (4.0 - (m as f64 - 2.0) * sigma);
            kappa * kappa / (2.0 * (kappa + 1.0 + q * PI * PI))
        }
        Prop1Case::Two => kappa / (8.0 * PI + 2.0 * kappa),
    })
}

/// Closed-form bound for the non-primed kinds.
pub fn bound_value(spec: &BoundSpec) -> Result<f64> {
    check_kappa(spec.kappa)?;
    let n = spec.n;
    let root_k = spec.kappa.sqrt();
    match spec.kind {
        BoundKind::Thm1 => Ok(thm1_square(n, spec.epsilon)?.sqrt() * PI / root_k),
        BoundKind::Cor1 => Ok(weight_square(n, spec.sigma, "sigma")?.sqrt() * PI / root_k),
        BoundKind::Thm2 => {
            check_hypersurface_window(n, spec.sigma)?;
            let denom = spec.sigma * spec.lambda + spec.kappa;
            if !(denom > 0.0) {
                return Err(inadmissible(format!("sigma*lambda + kappa = {denom} must be positive")));
            }
            Ok(c_constant(n, spec.sigma)? * PI / denom.sqrt())
        }
        BoundKind::Lemma7 => Ok(weight_square(n, spec.a, "total weight a")?.sqrt() * PI / root_k),
        BoundKind::Prop1Case1 | BoundKind::Prop1Case2 => {
            let case = if spec.kind == BoundKind::Prop1Case1 { Prop1Case::One } else { Prop1Case::Two };
            let expected_n = if case == Prop1Case::One { 2 } else { 3 };
            if n != expected_n {
                return Err(inadmissible(format!("{case:?} needs n = {expected_n}, got {n}")));
            }
            let m = spec.m.ok_or_else(|| inadmissible("ambient dimension m is required"))?;
            let threshold = prop1_epsilon_threshold(case, m, spec.sigma, spec.kappa)?;
            if !(spec.epsilon > 0.0 && spec.epsilon < threshold) {
                return Err(inadmissible(format!(
                    "epsilon = {} must lie in (0, {threshold})",
                    spec.epsilon
                )));
            }
            let reduced = (spec.kappa - 2.0 * spec.epsilon).sqrt();
            Ok(match case {
                Prop1Case::One => {
                    let q = (m as f64 - 2.0) * spec.sigma / (4.0 - (m as f64 - 2.0) * spec.sigma);
                    (1.0 + q).sqrt() * 2f64.sqrt() * PI / reduced
                }
                Prop1Case::Two => 2.0 * PI / reduced,
            })
        }
        BoundKind::Thm1prime | BoundKind::Cor1prime | BoundKind::Thm3 => {
            Err(inadmissible(format!("{:?} is a decaying-curvature bound; use primed_bound", spec.kind)))
        }
    }
}

const THETA_HI: f64 = 1e6;
const BISECTION_STEPS: usize = 200;

/// Inverse of `t ↦ t²/(1 + (d + t)^δ)` on `[0, 10⁶]` by bisection.
pub fn theta_inverse(y: f64, delta: f64, dist: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(inadmissible(format!("delta = {delta} must lie in (0, 2)")));
    }
    if !(y >= 0.0) || !(dist >= 0.0) {
        return Err(Error::InvalidParameter(format!("theta inverse needs y >= 0 and dist >= 0, got {y}, {dist}")));
    }
    let theta = |t: f64| t * t / (1.0 + (dist + t).powf(delta));
    if theta(THETA_HI) < y {
        return Err(Error::InvalidParameter(format!("theta^-1({y}) exceeds the search interval")));
    }
    let (mut lo, mut hi) = (0.0, THETA_HI);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if theta(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bounds under curvature decaying like `κ/(1 + dist(·, p₀)^δ)`.
///
/// With `p0_dist = None` the global form `2 θ^{-1}(C π²/κ)` is returned;
/// with `Some(d)` the single-arc form `θ_p^{-1}(C π²/κ)` for an arc
/// starting at distance `d` from `p₀`.
pub fn primed_bound(spec: &BoundSpec, p0_dist: Option<f64>) -> Result<f64> {
    check_kappa(spec.kappa)?;
    let square = match spec.kind {
        BoundKind::Thm1prime | BoundKind::Thm1 => thm1_square(spec.n, spec.epsilon)?,
        BoundKind::Cor1prime | BoundKind::Cor1 => weight_square(spec.n, spec.sigma, "sigma")?,
        BoundKind::Thm3 => {
            check_hypersurface_window(spec.n, spec.sigma)?;
            weight_square(spec.n, spec.sigma, "sigma")?
        }
        other => return Err(inadmissible(format!("{other:?} has no decaying-curvature form"))),
    };
    let y = square * PI * PI / spec.kappa;
    match p0_dist {
        None => Ok(2.0 * theta_inverse(y, spec.delta, 0.0)?),
        Some(d) => theta_inverse(y, spec.delta, d),
    }
}

/// `((n−3)²/(4ε)) x² + ε y² − (3−n) x y`, nonnegative for all inputs with `ε > 0`.
pub fn young_gap(n: usize, x: f64, y: f64, epsilon: f64) -> f64 {
    let c = 3.0 - n as f64;
    c * c / (4.0 * epsilon) * x * x + epsilon * y * y - c * x * y
}
