use faer::{c64, Mat, Side};

use super::operator::{hermiticity_defect, DenseOperator};
use crate::error::{domain, LabError, Result};

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) V^†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Mat<c64> {
        let weights: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        weighted_outer(&self.vectors, &weights)
    }

    /// `V^† A V`, the matrix of `A` in the eigenbasis.
    pub fn to_eigenbasis(&self, a: &Mat<c64>) -> Mat<c64> {
        let av = a * &self.vectors;
        self.vectors.adjoint() * &av
    }
}

/// `V diag(w) V^†`.
pub(crate) fn weighted_outer(vectors: &Mat<c64>, weights: &[f64]) -> Mat<c64> {
    let scaled = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, k| vectors[(i, k)] * weights[k]);
    &scaled * vectors.adjoint()
}

/// Eigendecomposition of a Hermitian operator.
///
/// Real symmetric inputs (all imaginary parts exactly zero) take the real
/// solver, which is about four times cheaper.
pub fn eigh(op: &DenseOperator) -> Result<HermitianEigen> {
    if !op.is_hermitian() {
        return domain(format!("eigh needs a Hermitian operator (defect {:e})", op.hermiticity_defect()));
    }
    eigh_mat(op.mat())
}

pub(crate) fn eigh_mat(m: &Mat<c64>) -> Result<HermitianEigen> {
    let n = m.nrows();
    let defect = hermiticity_defect(m);
    let scale = max_abs(m).max(1.0);
    if defect > 1e-10 * scale {
        return domain(format!("eigh needs a Hermitian matrix (defect {defect:e})"));
    }
    if is_real(m) {
        let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = real
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("real eigendecomposition failed: {e:?}")))?;
        let values = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let vectors = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        Ok(HermitianEigen { values, vectors })
    } else {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("complex eigendecomposition failed: {e:?}")))?;
        let values = (0..n).map(|k| evd.S()[k].re).collect();
        Ok(HermitianEigen { values, vectors: evd.U().to_owned() })
    }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(op: &DenseOperator) -> Result<Vec<f64>> {
    if !op.is_hermitian() {
        return domain("eigvalsh needs a Hermitian operator");
    }
    eigvalsh_mat(op.mat())
}

pub(crate) fn eigvalsh_mat(m: &Mat<c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if is_real(m) {
        let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        real.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("eigenvalue computation failed: {e:?}")))
    } else {
        m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("eigenvalue computation failed: {e:?}")))
    }
}

fn is_real(m: &Mat<c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

fn max_abs(m: &Mat<c64>) -> f64 {
    (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| (i, j))).map(|(i, j)| m[(i, j)].norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::pauli;

    #[test]
    fn pauli_y_spectrum_and_reconstruction() {
        let y = DenseOperator::embed(&[2], &pauli::y(), &[0]).unwrap();
        let e = eigh(&y).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let back = e.reconstruct(|l| l);
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[(i, j)] - pauli::y()[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = Mat::from_fn(2, 2, |i, j| c64::new(if i < j { 1.0 } else { 0.0 }, 0.0));
        assert!(eigh(&DenseOperator::new(&[2], m).unwrap()).is_err());
    }
}
