//! Curvature of a minimal submanifold seen through its stability eigenfunction.

use nalgebra::{DMatrix, DVector};

use super::{EigenResult, Hypersurface};
use crate::error::{Error, Result};
use crate::linalg;

fn check_unit(g: &DMatrix<f64>, v: &DVector<f64>) -> Result<()> {
    if v.len() != g.nrows() {
        return Err(Error::DimensionMismatch { expected: g.nrows(), got: v.len() });
    }
    let dev = (linalg::inner(g, v, v) - 1.0).abs();
    if dev > 1e-6 {
        return Err(Error::InvalidParameter(format!("tangent vector is not unit (deviation {dev:e})")));
    }
    Ok(())
}

/// `Σ_i a_i² A_ii²` for `v = Σ a_i e_i` in a frame diagonalizing `A`.
fn weighted_principal_sq(a: &DMatrix<f64>, g: &DMatrix<f64>, v: &DVector<f64>, frame: &[DVector<f64>]) -> f64 {
    frame
        .iter()
        .map(|e| {
            let coeff = linalg::inner(g, v, e);
            let aii = (e.transpose() * a * e)[(0, 0)];
            coeff * coeff * aii * aii
        })
        .sum()
}

/// `Ric(v) + σRic(ν) − K(v,ν) + σ|A|² − Σ a_i² A_ii² + σλ` at `u` for a
/// hypersurface, `v` unit in the induced metric (parameter coordinates).
pub fn lemma3_conformal_ricci(hs: &Hypersurface, u: &[f64], v: &DVector<f64>, sigma: f64, eig: &EigenResult) -> Result<f64> {
    let inside = eig.grid.axes.iter().zip(u).all(|(a, &x)| a.periodic || (x >= a.lo && x <= a.hi));
    if !inside {
        return Err(Error::InvalidParameter(format!("{u:?} lies outside the eigenfunction domain")));
    }
    let sff = hs.second_fundamental_form(u)?;
    let (_, frame) = linalg::generalized_symmetric_eigen(&sff.forms[0], &sff.induced);
    lemma3_with_frame(hs, u, v, sigma, eig.lambda, &frame)
}

pub(crate) fn lemma3_with_frame(
    hs: &Hypersurface,
    u: &[f64],
    v: &DVector<f64>,
    sigma: f64,
    lambda: f64,
    frame: &[DVector<f64>],
) -> Result<f64> {
    if hs.codim() != 1 {
        return Err(Error::UnsupportedDimension { dim: hs.codim(), reason: "the eigenfunction-weighted Ricci form needs codimension 1".into() });
    }
    let fr = hs.frame(u)?;
    check_unit(&fr.induced, v)?;
    let sff = hs.second_fundamental_form(u)?;
    let bundle = hs.ambient().curvature(&fr.x)?;
    let big_v = &fr.jac * v;
    let nu = &fr.normals[0];
    Ok(bundle.ricci_value(&big_v) + sigma * bundle.ricci_value(nu) - bundle.sectional(&big_v, nu)
        + sigma * sff.norm_sq
        - weighted_principal_sq(&sff.forms[0], &fr.induced, v, frame)
        + sigma * lambda)
}

/// Intrinsic and extrinsic evaluations of `Ric_S(v)`. Here and below
/// `K(v, e_i)` for a unit `v` and an orthonormal frame `e_i` stands for
/// `Rm(v, e_i, v, e_i)`, so the sum does not depend on the frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussCheck {
    /// From the curvature of the induced chart.
    pub intrinsic: f64,
    /// `Σ_i K(v, e_i) − Σ_α Σ_i a_{i,α}² A_α(e_{i,α}, e_{i,α})²`.
    pub extrinsic: f64,
}

impl GaussCheck {
    pub fn residual(&self) -> f64 {
        (self.intrinsic - self.extrinsic).abs()
    }
}

/// Evaluates the Gauss equation for a minimal submanifold in both ways.
pub fn gauss_ricci(hs: &Hypersurface, u: &[f64], v: &DVector<f64>) -> Result<GaussCheck> {
    let fr = hs.frame(u)?;
    check_unit(&fr.induced, v)?;
    let intrinsic = hs.induced_chart()?.curvature(u)?.ricci_value(v);
    let sff = hs.second_fundamental_form(u)?;
    let bundle = hs.ambient().curvature(&fr.x)?;
    let big_v = &fr.jac * v;
    let mut extrinsic: f64 = hs
        .tangent_basis(&fr.induced)
        .iter()
        .map(|e| {
            let t = &fr.jac * e;
            bundle.rm(&big_v, &t, &big_v, &t)
        })
        .sum();
    for a in &sff.forms {
        let (_, frame) = linalg::generalized_symmetric_eigen(a, &fr.induced);
        extrinsic -= weighted_principal_sq(a, &fr.induced, v, &frame);
    }
    Ok(GaussCheck { intrinsic, extrinsic })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lemma4Sides {
    /// `Σ A_ii²`.
    pub lhs: f64,
    /// `n/(n−1) Σ a_i² A_ii²`.
    pub rhs: f64,
}

/// Both sides of `Σ A_ii² ≥ n/(n−1) Σ a_i² A_ii²` for a traceless diagonal
/// form and unit coefficients.
pub fn lemma4_check(diag: &[f64], a: &[f64]) -> Result<Lemma4Sides> {
    let n = diag.len();
    if n < 2 {
        return Err(Error::UnsupportedDimension { dim: n, reason: "need at least two principal curvatures".into() });
    }
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    let trace: f64 = diag.iter().sum();
    let scale = diag.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    if trace.abs() > 1e-9 * scale {
        return Err(Error::NonzeroTrace { trace });
    }
    let norm: f64 = a.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("coefficients have squared norm {norm}, expected 1")));
    }
    let lhs = diag.iter().map(|x| x * x).sum();
    let weighted: f64 = diag.iter().zip(a).map(|(d, c)| c * c * d * d).sum();
    Ok(Lemma4Sides { lhs, rhs: n as f64 / (n as f64 - 1.0) * weighted })
}

/// Lower bound for the multi-factor conformal Ricci curvature of a
/// minimal submanifold with a global normal frame:
/// `Σ K(v,e_i) + Σ_α σ_α Σ_i K(ν_α,e_i) + Σ_α σ_α|A_α|² − (n−1)/n |A|² − Σ_α σ_α|∇^⊥ν_α|²`.
pub fn lemma9_lower_bound(hs: &Hypersurface, u: &[f64], v: &DVector<f64>, sigmas: &[f64]) -> Result<f64> {
    if sigmas.len() != hs.codim() {
        return Err(Error::DimensionMismatch { expected: hs.codim(), got: sigmas.len() });
    }
    let fr = hs.frame(u)?;
    check_unit(&fr.induced, v)?;
    let n = hs.dim() as f64;
    let sff = hs.second_fundamental_form(u)?;
    let bundle = hs.ambient().curvature(&fr.x)?;
    let conn = hs.normal_connection(u, &fr)?;
    let ginv = fr.induced.clone().try_inverse().ok_or(Error::RankDeficient { param: u.to_vec() })?;
    let tangents: Vec<DVector<f64>> = hs.tangent_basis(&fr.induced).iter().map(|e| &fr.jac * e).collect();
    let big_v = &fr.jac * v;
    let mut total: f64 = tangents.iter().map(|e| bundle.rm(&big_v, e, &big_v, e)).sum();
    let c = hs.codim();
    for (alpha, sigma) in sigmas.iter().enumerate() {
        let nu = &fr.normals[alpha];
        let ksum: f64 = tangents.iter().map(|e| bundle.sectional(nu, e)).sum();
        let perp: f64 = (0..c)
            .map(|b| {
                let w = DVector::from_fn(u.len(), |i, _| conn[i][(alpha, b)]);
                (w.transpose() * &ginv * &w)[(0, 0)]
            })
            .sum();
        total += sigma * (ksum + sff.norm_sq_of(alpha) - perp);
    }
    Ok(total - (n - 1.0) / n * sff.norm_sq)
}
