//! Small dense helpers shared by the curvature kernels.

use nalgebra::{DMatrix, DVector};

/// Cholesky-style factorization used as a positive-definiteness test.
/// Returns the first failing pivot index and its value.
pub fn cholesky_pivot_failure(g: &DMatrix<f64>) -> Option<(usize, f64)> {
    let n = g.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Some((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    None
}

pub fn inner(g: &DMatrix<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    (v.transpose() * g * w)[(0, 0)]
}

/// Modified Gram–Schmidt under `g` with pivoting: at each step the remaining
/// vector with the largest residual norm is taken (ties go to input order).
/// Vectors whose residual norm falls below `tol` times their original norm
/// are dropped.
pub fn gram_schmidt(g: &DMatrix<f64>, vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let scales: Vec<f64> = vectors.iter().map(|v| inner(g, v, v).max(0.0).sqrt()).collect();
    let mut work: Vec<DVector<f64>> = vectors.to_vec();
    let mut alive: Vec<bool> = scales.iter().map(|&s| s > 0.0).collect();
    let mut out: Vec<DVector<f64>> = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in work.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let rel = inner(g, v, v).max(0.0).sqrt() / scales[i];
            if rel <= tol {
                alive[i] = false;
                continue;
            }
            if best.is_none_or(|(_, b)| rel > b * (1.0 + 1e-12)) {
                best = Some((i, rel));
            }
        }
        let Some((pick, _)) = best else { break };
        alive[pick] = false;
        let norm = inner(g, &work[pick], &work[pick]).sqrt();
        let e = &work[pick] / norm;
        for (i, v) in work.iter_mut().enumerate() {
            if alive[i] {
                let c = inner(g, &e, v);
                *v -= &e * c;
            }
        }
        out.push(e);
    }
    out
}

/// Completes an orthonormal set to an orthonormal basis of the whole space,
/// returning only the added vectors.
pub fn orthonormal_complement(g: &DMatrix<f64>, basis: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = g.nrows();
    let mut added = Vec::new();
    let mut current: Vec<DVector<f64>> = basis.to_vec();
    for k in 0..n {
        if current.len() == n {
            break;
        }
        let mut v = DVector::<f64>::zeros(n);
        v[k] = 1.0;
        let scale = inner(g, &v, &v).sqrt();
        for e in &current {
            let c = inner(g, e, &v);
            v -= e * c;
        }
        for e in &current {
            let c = inner(g, e, &v);
            v -= e * c;
        }
        let norm = inner(g, &v, &v).max(0.0).sqrt();
        if norm > 1e-8 * scale {
            let e = v / norm;
            current.push(e.clone());
            added.push(e);
        }
    }
    added
}

/// Symmetric eigendecomposition of `a` relative to the inner product `g`:
/// returns eigenvalues in ascending order and `g`-orthonormal eigenvectors.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, g: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let chol = g.clone().cholesky().expect("metric must be positive definite");
    let l = chol.l();
    let linv = l.clone().try_inverse().expect("invertible Cholesky factor");
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| linv.transpose() * eig.eigenvectors.column(i))
        .collect();
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reports_offending_pivot() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (pivot, value) = cholesky_pivot_failure(&g).unwrap();
        assert_eq!(pivot, 1);
        assert!((value + 3.0).abs() < 1e-12);
        assert!(cholesky_pivot_failure(&DMatrix::identity(3, 3)).is_none());
    }

    #[test]
    fn gram_schmidt_orthonormalizes_and_drops_dependent() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 9.0]));
        let vs = vec![
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![2.0, 2.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0]),
        ];
        let es = gram_schmidt(&g, &vs, 1e-10);
        assert_eq!(es.len(), 2);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&g, &es[i], &es[j]) - want).abs() < 1e-12);
            }
        }
        let rest = orthonormal_complement(&g, &es);
        assert_eq!(rest.len(), 1);
        assert!(inner(&g, &rest[0], &es[0]).abs() < 1e-12);
    }
}
