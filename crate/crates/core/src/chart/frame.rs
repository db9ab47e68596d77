use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// Tangent vectors at a point together with their Gram matrix under `g`.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub vectors: Vec<DVector<f64>>,
    pub gram: DMatrix<f64>,
}

impl TangentFrame {
    pub fn new(vectors: Vec<DVector<f64>>, g: &DMatrix<f64>) -> Self {
        let k = vectors.len();
        let gram = DMatrix::from_fn(k, k, |i, j| linalg::inner(g, &vectors[i], &vectors[j]));
        TangentFrame { vectors, gram }
    }

    /// Orthonormalizes `vectors` (pivoted modified Gram–Schmidt, dependent
    /// vectors dropped).
    pub fn orthonormalize(vectors: &[DVector<f64>], g: &DMatrix<f64>) -> Self {
        Self::new(linalg::gram_schmidt(g, vectors, 1e-10), g)
    }

    /// An orthonormal basis of the whole tangent space.
    pub fn full(g: &DMatrix<f64>) -> Self {
        Self::new(linalg::orthonormal_complement(g, &[]), g)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn gram_deviation(&self) -> f64 {
        let k = self.len();
        (&self.gram - DMatrix::<f64>::identity(k, k)).abs().max()
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.gram_deviation() <= tol
    }
}
