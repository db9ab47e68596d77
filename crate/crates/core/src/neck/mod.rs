//! Conformal neck construction around a point with positive bi-Ricci
//! curvature: a radial factor `η = e^τ` with `τ' = −φ/r` turns a punctured
//! ball into a region that flares out into a thin cylinder-like end.
//!
//! Everything is parametrized by the log-radial variable `t = ln(r0/r)`.

mod metric;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;

pub use metric::{
    certify_neck, interpolate_to_cylinder, neck_metric, BlendReport, Cylinder, NeckChart, NeckReport, SampleSpec,
    ShellSummary,
};

/// Default number of log-radial grid nodes.
pub const GRID_NODES: usize = 400;
/// Required relative slack in the profile inequality.
pub const MARGIN_FRAC: f64 = 1e-3;
const C_FLOOR: f64 = 1e-12;

/// Five-point Gauss–Legendre rule on `[-1, 1]`.
const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// `ψ_c(t) = ratio·c·e^{ratio t} / (1 + c·e^{ratio t})`, the logistic
/// solution of `ψ' = ψ(ratio − ψ)`.
pub fn psi_solution(c: f64, ratio: f64, t: f64) -> f64 {
    let b = c * (ratio * t).exp();
    ratio * b / (1.0 + b)
}

fn smoothstep(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    (x * x * x * (10.0 + x * (-15.0 + 6.0 * x)), 30.0 * x * x * (1.0 - x) * (1.0 - x))
}

/// Nondecreasing C² cutoff: `0` for `t ≤ ln 2`, `e^{ratio t}` on
/// `[2 ln 2, t1]`, `e^{ratio(t1+1)}` for `t ≥ t1 + 1`. Returns `(β, β')`.
pub fn cutoff_beta(ratio: f64, t1: f64, t: f64) -> Result<(f64, f64)> {
    if !(t1 > 2.0 * LN_2) {
        return Err(Error::InvalidParameter(format!("t1 = {t1} must exceed 2 ln 2")));
    }
    Ok(beta_unchecked(ratio, t1, t))
}

fn beta_unchecked(ratio: f64, t1: f64, t: f64) -> (f64, f64) {
    let e = (ratio * t).exp();
    if t <= LN_2 {
        (0.0, 0.0)
    } else if t < 2.0 * LN_2 {
        let (s, ds) = smoothstep((t - LN_2) / LN_2);
        (s * e, (ds / LN_2 + s * ratio) * e)
    } else if t <= t1 {
        (e, ratio * e)
    } else if t < t1 + 1.0 {
        let top = (ratio * (t1 + 1.0)).exp();
        let (s, ds) = smoothstep(t - t1);
        (e + s * (top - e), ratio * e * (1.0 - s) + ds * (top - e))
    } else {
        ((ratio * (t1 + 1.0)).exp(), 0.0)
    }
}

/// A radial conformal factor `η(r) = e^{τ(r)}` about a center with
/// `τ' = −φ/r`.
pub trait RadialProfile: Send + Sync {
    fn phi(&self, r: f64) -> f64;
    /// `dφ/dr`.
    fn phi_prime(&self, r: f64) -> f64;
    fn tau(&self, r: f64) -> f64;
    /// Radius of the cylinder the end approaches.
    fn rho(&self) -> f64;
    /// Smallest radius at which the conformal metric is sampled.
    fn r_min(&self) -> f64;
    /// Outer radius of the neck region.
    fn r0(&self) -> f64;
    /// Radius below which `φ` is constant.
    fn r_cyl(&self) -> f64;
}

/// `φ ≡ p`, so `η = (r0/r)^p`; `p = 1` on flat space is the round cylinder
/// of radius `r0`, `p = 0` leaves the metric unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub exponent: f64,
    pub r0: f64,
    pub r_min: f64,
}

impl RadialProfile for PowerProfile {
    fn phi(&self, _r: f64) -> f64 {
        self.exponent
    }
    fn phi_prime(&self, _r: f64) -> f64 {
        0.0
    }
    fn tau(&self, r: f64) -> f64 {
        self.exponent * (self.r0 / r).ln()
    }
    fn rho(&self) -> f64 {
        if self.exponent == 1.0 {
            self.r0
        } else {
            f64::INFINITY
        }
    }
    fn r_min(&self) -> f64 {
        self.r_min
    }
    fn r0(&self) -> f64 {
        self.r0
    }
    fn r_cyl(&self) -> f64 {
        self.r0
    }
}

/// Sampled neck profile together with the constants that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckProfile {
    pub m: usize,
    pub sigma: f64,
    pub kappa: f64,
    pub r0: f64,
    pub t1: f64,
    pub c: f64,
    pub c0: f64,
    pub c1: f64,
    /// Multiplier applied to `φ`; 1 for a built profile.
    pub scale: f64,
    /// Log-radial nodes `t_k`, uniform on `[0, t1 + 1 + ln 4 + 1/2]`.
    pub grid: Vec<f64>,
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub tau: Vec<f64>,
    pub eta: Vec<f64>,
    pub r1: f64,
    pub rho: f64,
    /// Limit value of `φ` as `r → 0`.
    pub plateau: f64,
    /// Smallest `(rhs − ψ')/rhs` of the log-radial inequality over the grid.
    pub margin: f64,
    /// Smallest `κ + φ(c0 − c1 φ)/r² + c1 φ'/r` over the grid.
    pub radial_min: f64,
    /// Largest `|dτ/dt − φ|` over interior nodes, from sampled differences.
    pub tau_residual: f64,
    /// Largest jump of the sampled `d²η/dt²` between neighboring nodes.
    pub eta_c2_jump: f64,
}

fn check_inputs(m: usize, sigma: f64, kappa: f64, r0: f64, t1: f64) -> Result<()> {
    if m < 3 {
        return Err(Error::UnsupportedDimension { dim: m, reason: "necks are built in dimension at least 3".into() });
    }
    for (name, v) in [("sigma", sigma), ("kappa", kappa), ("r0", r0)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
        }
    }
    if !(t1 > 2.0 * LN_2) {
        return Err(Error::InvalidParameter(format!("t1 = {t1} must exceed 2 ln 2")));
    }
    Ok(())
}

impl NeckProfile {
    pub fn ratio(&self) -> f64 {
        self.c0 / self.c1
    }

    fn t_end(&self) -> f64 {
        *self.grid.last().expect("nonempty grid")
    }

    /// `(ψ̃, dψ̃/dt)` of the unscaled profile.
    fn psi_pair(&self, t: f64) -> (f64, f64) {
        let ratio = self.ratio();
        let (b, db) = beta_unchecked(ratio, self.t1, t);
        let q = 1.0 + self.c * b;
        (ratio * self.c * b / q, ratio * self.c * db / (q * q))
    }

    /// `φ` as a function of `t`.
    pub fn phi_t(&self, t: f64) -> f64 {
        self.scale * self.psi_pair(t).0
    }

    /// `τ` as a function of `t`: `∫_0^t φ ds`.
    pub fn tau_t(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let end = self.t_end();
        if t >= end {
            return self.tau[self.tau.len() - 1] + self.plateau * (t - end);
        }
        let h = end / (self.grid.len() - 1) as f64;
        let k = ((t / h) as usize).min(self.grid.len() - 2);
        self.tau[k] + gauss_legendre(|s| self.phi_t(s), self.grid[k], t)
    }

    fn t_of(&self, r: f64) -> f64 {
        (self.r0 / r).ln()
    }

    /// Same construction with an explicit constant `c` and no certification.
    pub fn with_constant(m: usize, sigma: f64, kappa: f64, r0: f64, t1: f64, c: f64) -> Result<Self> {
        check_inputs(m, sigma, kappa, r0, t1)?;
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter(format!("c = {c} must be nonnegative")));
        }
        let c0 = sigma.min(1.0) / 2.0;
        let c1 = m as f64 + (m as f64 - 2.0) * sigma;
        let end = t1 + 1.0 + 4f64.ln() + 0.5;
        let grid: Vec<f64> = (0..GRID_NODES).map(|k| end * k as f64 / (GRID_NODES - 1) as f64).collect();
        let mut p = NeckProfile {
            m,
            sigma,
            kappa,
            r0,
            t1,
            c,
            c0,
            c1,
            scale: 1.0,
            r: grid.iter().map(|t| r0 * (-t).exp()).collect(),
            grid,
            psi: Vec::new(),
            beta: Vec::new(),
            phi: Vec::new(),
            tau: Vec::new(),
            eta: Vec::new(),
            r1: r0 * (-(t1 + 1.0)).exp(),
            rho: 0.0,
            plateau: 0.0,
            margin: 0.0,
            radial_min: 0.0,
            tau_residual: 0.0,
            eta_c2_jump: 0.0,
        };
        let ratio = p.ratio();
        p.beta = p.grid.iter().map(|&t| beta_unchecked(ratio, t1, t).0).collect();
        p.psi = p.grid.iter().map(|&t| p.psi_pair(t).0).collect();
        p.margin = p
            .grid
            .iter()
            .map(|&t| {
                let (psi, dpsi) = p.psi_pair(t);
                let rhs = kappa * r0 * r0 * (-2.0 * t).exp() / c1 + psi * (ratio - psi);
                (rhs - dpsi) / rhs
            })
            .fold(f64::INFINITY, f64::min);
        p.rescale(1.0);
        Ok(p)
    }

    /// Copy with `φ` multiplied by `factor`; `τ`, `η`, `ρ` and the
    /// diagnostics are recomputed, `margin` refers to the unscaled profile.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.rescale(factor);
        p
    }

    fn rescale(&mut self, factor: f64) {
        self.scale = factor;
        let top = beta_unchecked(self.ratio(), self.t1, f64::INFINITY).0;
        self.plateau = factor * self.ratio() * self.c * top / (1.0 + self.c * top);
        self.phi = self.psi.iter().map(|v| factor * v).collect();
        self.tau = vec![0.0; self.grid.len()];
        for k in 1..self.grid.len() {
            self.tau[k] = self.tau[k - 1] + gauss_legendre(|s| self.phi_t(s), self.grid[k - 1], self.grid[k]);
        }
        self.eta = self.tau.iter().map(|v| v.exp()).collect();
        self.rho = self.tau_t(self.t1 + 1.0).exp() * self.r1;

        self.radial_min = self.radial_worst().1;

        let h = self.grid[1] - self.grid[0];
        let n = self.grid.len();
        self.tau_residual = (2..n - 2)
            .map(|k| (fd::sampled_first(&self.tau, k, h) - self.phi[k]).abs())
            .fold(0.0, f64::max);
        let second: Vec<f64> = (2..n - 2).map(|k| fd::sampled_second(&self.eta, k, h)).collect();
        self.eta_c2_jump = second.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    }

    fn radial_value(&self, t: f64, r: f64) -> f64 {
        let (psi, dpsi) = self.psi_pair(t);
        let (phi, dphi_dr) = (self.scale * psi, -self.scale * dpsi / r);
        self.kappa + phi * (self.c0 - self.c1 * phi) / (r * r) + self.c1 * dphi_dr / r
    }

    /// Radius and value where the radial inequality has the least slack.
    pub fn radial_worst(&self) -> (f64, f64) {
        self.grid
            .iter()
            .zip(&self.r)
            .map(|(&t, &r)| (r, self.radial_value(t, r)))
            .fold((self.r0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Node `t` where the log-radial inequality has the least slack.
    pub fn worst_node(&self) -> (f64, f64) {
        let ratio = self.ratio();
        self.grid
            .iter()
            .map(|&t| {
                let (psi, dpsi) = self.psi_pair(t);
                let rhs = self.kappa * self.r0 * self.r0 * (-2.0 * t).exp() / self.c1 + psi * (ratio - psi);
                (t, (rhs - dpsi) / rhs)
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Writes `t, r, psi, beta, phi, tau, eta` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "r", "psi", "beta", "phi", "tau", "eta"]).map_err(csv_err)?;
        for k in 0..self.grid.len() {
            let row = [self.grid[k], self.r[k], self.psi[k], self.beta[k], self.phi[k], self.tau[k], self.eta[k]];
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl RadialProfile for NeckProfile {
    fn phi(&self, r: f64) -> f64 {
        let t = self.t_of(r);
        if t >= self.t_end() {
            self.plateau
        } else {
            self.phi_t(t)
        }
    }
    fn phi_prime(&self, r: f64) -> f64 {
        -self.scale * self.psi_pair(self.t_of(r)).1 / r
    }
    fn tau(&self, r: f64) -> f64 {
        self.tau_t(self.t_of(r))
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn r_min(&self) -> f64 {
        self.r1 / 4.0
    }
    fn r0(&self) -> f64 {
        self.r0
    }
    fn r_cyl(&self) -> f64 {
        self.r1
    }
}

/// Builds a certified profile: `c` is halved from `c_hint` (default 1)
/// until `dψ̃/dt < κ r0² e^{−2t}/c1 + ψ̃(c0/c1 − ψ̃)` holds at every node
/// with relative slack at least [`MARGIN_FRAC`], then the radial form
/// `κ + φ(c0 − c1 φ)/r² + c1 φ'/r > 0` is checked on the grid.
pub fn build_profile(m: usize, sigma: f64, kappa: f64, r0: f64, t1: f64, c_hint: Option<f64>) -> Result<NeckProfile> {
    check_inputs(m, sigma, kappa, r0, t1)?;
    let mut c = c_hint.unwrap_or(1.0);
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
    }
    loop {
        let p = NeckProfile::with_constant(m, sigma, kappa, r0, t1, c)?;
        if p.margin >= MARGIN_FRAC {
            if !(p.radial_min > 0.0) {
                let (r, value) = p.radial_worst();
                return Err(Error::CertificationFailure { r, value });
            }
            return Ok(p);
        }
        c *= 0.5;
        if c < C_FLOOR {
            let (worst_t, margin) = p.worst_node();
            return Err(Error::NoAdmissibleConstant { worst_t, margin });
        }
    }
}

/// One row of a `ρ(t1)` sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t1: f64,
    pub c: f64,
    pub r1: f64,
    pub tau_r1: f64,
    pub rho: f64,
    pub plateau: f64,
}

pub fn rho_sweep(m: usize, sigma: f64, kappa: f64, r0: f64, t1s: &[f64]) -> Result<Vec<SweepRow>> {
    t1s.iter()
        .map(|&t1| {
            let p = build_profile(m, sigma, kappa, r0, t1, None)?;
            Ok(SweepRow { t1, c: p.c, r1: p.r1, tau_r1: p.tau_t(t1 + 1.0), rho: p.rho, plateau: p.plateau })
        })
        .collect()
}
