//! Small dense linear-algebra helpers over `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest condition number accepted for a positive definite matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factorisation of a symmetric positive definite matrix, refusing
/// matrices whose spectral condition number exceeds [`MAX_CONDITION`].
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Matrix(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Matrix("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (m - m.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Matrix(format!("matrix is not symmetric (|M - Mᵀ| = {asym:e})")));
        }
        let eig = m.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if min <= 0.0 {
            return Err(Error::Matrix(format!(
                "matrix is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        let condition = max / min;
        if condition > MAX_CONDITION {
            return Err(Error::Matrix(format!(
                "condition number {condition:e} exceeds {MAX_CONDITION:e}"
            )));
        }
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| Error::Matrix("Cholesky factorisation failed".into()))?;
        Ok(Self { chol, condition })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Lower triangular `L` with `M = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn ln_determinant(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Indices of `0..k` not in the sorted set `set`.
pub fn complement(set: &[usize], k: usize) -> Vec<usize> {
    (0..k).filter(|i| !set.contains(i)).collect()
}

/// Position of each element of `subset` inside `set`.
pub fn positions(subset: &[usize], set: &[usize]) -> Vec<usize> {
    subset
        .iter()
        .map(|s| set.iter().position(|x| x == s).expect("subset element not in set"))
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::arg("matrix rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdFactor::new(&m), Err(Error::Matrix(_))));
    }

    #[test]
    fn rejects_ill_conditioned() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 - 1e-14, 1.0 - 1e-14, 1.0]);
        assert!(SpdFactor::new(&m).is_err());
    }

    #[test]
    fn determinant_and_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let f = SpdFactor::new(&m).unwrap();
        assert!((f.ln_determinant() - 0.75f64.ln()).abs() < 1e-14);
        let id = &m * f.inverse();
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn complement_and_positions() {
        assert_eq!(complement(&[0, 2], 4), vec![1, 3]);
        assert_eq!(positions(&[3], &[1, 3]), vec![1]);
    }
}
