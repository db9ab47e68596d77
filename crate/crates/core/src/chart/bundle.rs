use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::TOL_FRAME;
use crate::error::{Error, Result};
use crate::linalg::{self, inner};

/// `Γ^k_{ij}` stored as `[k][i][j]`.
#[derive(Clone, Debug, Serialize)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub(crate) fn from_metric(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = ginv.nrows();
        let mut data = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    data[(k * n + i) * n + j] = 0.5 * s;
                    data[(k * n + j) * n + i] = 0.5 * s;
                }
            }
        }
        Christoffel { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    /// `Γ^k_{ij} v^i w^j` for each `k`.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(k, i, j) * v[i] * w[j];
                    }
                }
                s
            })
            .collect()
    }
}

/// Fully lowered Riemann tensor `R_{abcd}`, normalized so that
/// `R(v, w, v, w) > 0` on round spheres.
#[derive(Clone, Debug, Serialize)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.n + b) * self.n + c) * self.n + d
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[self.idx(a, b, c, d)]
    }

    pub fn contract(&self, v1: &DVector<f64>, v2: &DVector<f64>, v3: &DVector<f64>, v4: &DVector<f64>) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            if v1[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if v2[b] == 0.0 {
                    continue;
                }
                let ab = v1[a] * v2[b];
                for c in 0..n {
                    if v3[c] == 0.0 {
                        continue;
                    }
                    for d in 0..n {
                        s += self.get(a, b, c, d) * ab * v3[c] * v4[d];
                    }
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Christoffel symbols, Riemann, Ricci and scalar curvature at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureBundle {
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub christoffel: Christoffel,
    pub riemann: Riemann,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
}

impl CurvatureBundle {
    pub(crate) fn from_derivatives(
        point: Vec<f64>,
        g: DMatrix<f64>,
        dg: &[DMatrix<f64>],
        ddg: &[Vec<DMatrix<f64>>],
    ) -> Self {
        let n = g.nrows();
        let ginv = g.clone().try_inverse().expect("positive definite metric is invertible");
        let gamma = Christoffel::from_metric(&ginv, dg);

        // ∂_a Γ^k_{ij}
        let dginv: Vec<DMatrix<f64>> = dg.iter().map(|d| -(&ginv * d * &ginv)).collect();
        let mut dgamma = vec![0.0; n * n * n * n];
        let di = |a: usize, k: usize, i: usize, j: usize| ((a * n + k) * n + i) * n + j;
        for a in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let t = dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)];
                            let dt = ddg[a][i][(j, l)] + ddg[a][j][(i, l)] - ddg[a][l][(i, j)];
                            s += dginv[a][(k, l)] * t + ginv[(k, l)] * dt;
                        }
                        dgamma[di(a, k, i, j)] = 0.5 * s;
                        dgamma[di(a, k, j, i)] = 0.5 * s;
                    }
                }
            }
        }

        // R^r_{s m v} = ∂_m Γ^r_{v s} − ∂_v Γ^r_{m s} + Γ^r_{m l} Γ^l_{v s} − Γ^r_{v l} Γ^l_{m s}
        let mut up = vec![0.0; n * n * n * n];
        for r in 0..n {
            for s in 0..n {
                for m in 0..n {
                    for v in (m + 1)..n {
                        let mut val = dgamma[di(m, r, v, s)] - dgamma[di(v, r, m, s)];
                        for l in 0..n {
                            val += gamma.get(r, m, l) * gamma.get(l, v, s) - gamma.get(r, v, l) * gamma.get(l, m, s);
                        }
                        up[((r * n + s) * n + m) * n + v] = val;
                        up[((r * n + s) * n + v) * n + m] = -val;
                    }
                }
            }
        }
        let mut low = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            s += g[(a, e)] * up[((e * n + b) * n + c) * n + d];
                        }
                        low[((a * n + b) * n + c) * n + d] = s;
                    }
                }
            }
        }
        let riemann = Riemann { n, data: low };
        let mut ricci = DMatrix::from_fn(n, n, |b, d| {
            (0..n).map(|a| up[((a * n + b) * n + a) * n + d]).sum::<f64>()
        });
        ricci = (&ricci + ricci.transpose()) * 0.5;
        let scalar = ginv.component_mul(&ricci).sum();
        CurvatureBundle { point, metric: g, metric_inv: ginv, christoffel: gamma, riemann, ricci, scalar }
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    pub fn inner(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        inner(&self.metric, v, w)
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn rm(&self, v1: &DVector<f64>, v2: &DVector<f64>, v3: &DVector<f64>, v4: &DVector<f64>) -> f64 {
        self.riemann.contract(v1, v2, v3, v4)
    }

    /// `Ric(v, v)`.
    pub fn ricci_value(&self, v: &DVector<f64>) -> f64 {
        inner(&self.ricci, v, v)
    }

    /// Sectional curvature of the plane spanned by `v, w`; degenerate planes give 0.
    pub fn sectional(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let vv = self.inner(v, v);
        let ww = self.inner(w, w);
        let vw = self.inner(v, w);
        let denom = vv * ww - vw * vw;
        if denom <= 1e-12 * vv * ww || denom <= 0.0 {
            return 0.0;
        }
        self.rm(v, w, v, w) / denom
    }

    fn check_orthonormal(&self, v: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
        let dev = (self.inner(v, v) - 1.0)
            .abs()
            .max((self.inner(w, w) - 1.0).abs())
            .max(self.inner(v, w).abs());
        if dev > TOL_FRAME {
            return Err(Error::NonOrthonormalPair { deviation: dev });
        }
        Ok(())
    }

    /// σ-weighted bi-Ricci curvature `Ric(v) + σ Ric(w) − K(v, w)`.
    pub fn bi_ricci(&self, v: &DVector<f64>, w: &DVector<f64>, sigma: f64) -> Result<f64> {
        self.check_orthonormal(v, w)?;
        Ok(self.bi_ricci_unchecked(v, w, sigma))
    }

    pub(crate) fn bi_ricci_unchecked(&self, v: &DVector<f64>, w: &DVector<f64>, sigma: f64) -> f64 {
        self.ricci_value(v) + sigma * self.ricci_value(w) - self.sectional(v, w)
    }

    /// `Σ_i K(v, e_i) + σ Σ_{i,α} K(ν_α, e_i)` over orthonormal bases of
    /// `V` and its orthogonal complement.
    pub fn k_sigma(&self, v: &DVector<f64>, subspace: &[DVector<f64>], sigma: f64) -> Result<f64> {
        let n = self.dim();
        let basis = linalg::gram_schmidt(&self.metric, subspace, 1e-10);
        if basis.is_empty() || basis.len() >= n {
            return Err(Error::TrivialSubspace { dim: basis.len(), ambient: n });
        }
        let mut resid = v.clone();
        for e in &basis {
            let c = self.inner(e, &resid);
            resid -= e * c;
        }
        let rel = self.norm(&resid) / self.norm(v).max(f64::MIN_POSITIVE);
        if rel > 1e-8 {
            return Err(Error::VectorNotInSubspace { residual: rel });
        }
        // Starting the basis at v makes Σ K(v, e_i) = Σ Rm(v, e_i, v, e_i),
        // which does not depend on the remaining basis vectors.
        let mut seeded = vec![v.clone()];
        seeded.extend(basis.iter().cloned());
        let basis = linalg::gram_schmidt(&self.metric, &seeded, 1e-10);
        let normals = linalg::orthonormal_complement(&self.metric, &basis);
        let mut total: f64 = basis.iter().map(|e| self.sectional(v, e)).sum();
        for nu in &normals {
            total += sigma * basis.iter().map(|e| self.sectional(nu, e)).sum::<f64>();
        }
        Ok(total)
    }

    /// Largest absolute violation of the pair symmetries and the first
    /// Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let r = &self.riemann;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let x = r.get(a, b, c, d);
                        worst = worst
                            .max((x + r.get(b, a, c, d)).abs())
                            .max((x + r.get(a, b, d, c)).abs())
                            .max((x - r.get(c, d, a, b)).abs())
                            .max((x + r.get(a, c, d, b) + r.get(a, d, b, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest deviation between the stored Ricci tensor and the contraction
    /// `g^{ac} R_{abcd}` of the lowered Riemann tensor, together with the
    /// scalar-trace deviation.
    pub fn contraction_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for b in 0..n {
            for d in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        s += self.metric_inv[(a, c)] * self.riemann.get(a, b, c, d);
                    }
                }
                worst = worst.max((s - self.ricci[(b, d)]).abs());
            }
        }
        let trace = self.metric_inv.component_mul(&self.ricci).sum();
        worst.max((trace - self.scalar).abs())
    }
}
