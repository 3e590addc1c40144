//! Small dense linear-algebra helpers shared by the distribution and moment
//! code. Cholesky is the only factorization used for determinants, quadratic
//! forms and whitening; the symmetric eigendecomposition is used only for
//! matrix square roots and conditioning checks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) const SYMMETRY_TOL: f64 = 1e-10;

/// Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if !is_symmetric(m, SYMMETRY_TOL) {
            return Err(Error::NotSpd);
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd);
        }
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotSpd)?;
        if chol.l_dirty().diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NotSpd);
        }
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor `L` with `L Lᵀ = A`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `xᵀ A⁻¹ x` via a triangular solve.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut y = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if n <= 16 {
            &mut y[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        forward_solve(l, x, y);
        y.iter().map(|v| v * v).sum()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        symmetrize(&inv)
    }
}

fn forward_solve(l: &DMatrix<f64>, b: &[f64], y: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[(i, j)] * y[j];
        }
        y[i] = acc / l[(i, i)];
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric square root through the eigendecomposition. Tiny negative
/// eigenvalues from roundoff are clamped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&roots) * q.transpose()))
}

pub fn eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

/// Rejects matrices whose smallest eigenvalue is not above `rel_tol` times the
/// largest.
pub fn ensure_well_conditioned(m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    let ev = eigenvalues(m);
    let max = ev.max();
    let min = ev.min();
    if !(max > 0.0) || !(min > rel_tol * max) {
        return Err(Error::Degenerate {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok(())
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
