//! Norms, entropies (in bits), mutual information and free energy.

use faer::{c64, Mat};

use super::eigen::eigvalsh_mat;
use super::operator::DenseOperator;
use super::partial::partial_trace;
use super::state::{DensityMatrix, ZERO_EIGENVALUE};
use crate::error::{domain, LabError, Result};
use crate::lattice::Region;

/// `ln 2`: multiply an entropy in bits by this to get nats.
pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

const SUPPORT_LEAK: f64 = 1e-12;

fn singular_values(op: &DenseOperator) -> Result<Vec<f64>> {
    if op.is_hermitian() {
        Ok(eigvalsh_mat(op.mat())?.into_iter().map(f64::abs).collect())
    } else {
        op.mat().singular_values().map_err(|e| LabError::Numerical(format!("singular values failed: {e:?}")))
    }
}

/// Largest singular value.
pub fn spectral_norm(op: &DenseOperator) -> Result<f64> {
    Ok(singular_values(op)?.into_iter().fold(0.0, f64::max))
}

/// Sum of singular values.
pub fn trace_norm(op: &DenseOperator) -> Result<f64> {
    Ok(singular_values(op)?.into_iter().sum())
}

/// `‖a − b‖₁` (not halved).
pub fn trace_distance(a: &DenseOperator, b: &DenseOperator) -> Result<f64> {
    trace_norm(&a.sub(b)?)
}

fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values.iter().filter(|&&l| l > ZERO_EIGENVALUE).map(|&l| -l * l.log2()).sum()
}

/// `S(ρ) = −Tr ρ log₂ ρ`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigen().values)
}

/// `S(ρ‖σ) = Tr ρ log₂ ρ − Tr ρ log₂ σ`; `+∞` when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return domain("relative entropy of states on different spaces");
    }
    let (r, s) = (rho.eigen(), sigma.eigen());
    let overlap: Mat<c64> = r.vectors.adjoint() * &s.vectors;
    let mut cross = 0.0;
    for (k, &mu) in s.values.iter().enumerate() {
        let weight: f64 = r.values.iter().enumerate().map(|(i, &l)| l * overlap[(i, k)].norm_sqr()).sum();
        if mu <= ZERO_EIGENVALUE {
            if weight > SUPPORT_LEAK {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross -= weight * mu.log2();
    }
    Ok((cross - von_neumann_entropy(rho)).max(0.0))
}

/// `I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ)` for the bipartition `part | complement`.
pub fn mutual_information(rho: &DensityMatrix, part: &Region) -> Result<f64> {
    let rest: Region = (0..rho.dims().len()).filter(|&v| !part.contains(v)).collect();
    let ra = DensityMatrix::new(partial_trace(rho.operator(), part)?)?;
    let rb = DensityMatrix::new(partial_trace(rho.operator(), &rest)?)?;
    Ok(von_neumann_entropy(&ra) + von_neumann_entropy(&rb) - von_neumann_entropy(rho))
}

/// Out-of-equilibrium free energy `Tr(ρH) − S(ρ)/β` with the entropy in
/// nats, so that `F(ρ) − F(g(β)) = S(ρ‖g(β)) ln 2 / β`.
pub fn free_energy(rho: &DensityMatrix, h: &DenseOperator, beta: f64) -> Result<f64> {
    if beta == 0.0 || !beta.is_finite() {
        return domain("free energy needs a finite nonzero inverse temperature");
    }
    rho.operator().check_same_space(h)?;
    let energy = rho.expectation(h).re;
    Ok(energy - von_neumann_entropy(rho) * NATS_PER_BIT / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::{gibbs_state, pauli};

    fn diag(values: &[f64]) -> DenseOperator {
        let n = values.len();
        DenseOperator::new(&[n], Mat::from_fn(n, n, |i, j| c64::new(if i == j { values[i] } else { 0.0 }, 0.0))).unwrap()
    }

    #[test]
    fn norms_of_a_diagonal_matrix() {
        let d = diag(&[3.0, -4.0]);
        assert!((trace_norm(&d).unwrap() - 7.0).abs() < 1e-14);
        assert!((spectral_norm(&d).unwrap() - 4.0).abs() < 1e-14);
        let nilpotent = DenseOperator::new(&[2], Mat::from_fn(2, 2, |i, j| c64::new(if i < j { 2.0 } else { 0.0 }, 0.0))).unwrap();
        assert!((spectral_norm(&nilpotent).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn entropies_in_bits() {
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(&[2, 2])) - 2.0).abs() < 1e-14);
        let pure = DensityMatrix::new(diag(&[1.0, 0.0])).unwrap();
        assert_eq!(von_neumann_entropy(&pure), 0.0);
        assert!((NATS_PER_BIT - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn relative_entropy_support_and_zero() {
        let mixed = DensityMatrix::maximally_mixed(&[2]);
        let pure = DensityMatrix::new(diag(&[1.0, 0.0])).unwrap();
        assert_eq!(relative_entropy(&mixed, &pure).unwrap(), f64::INFINITY);
        assert!((relative_entropy(&pure, &mixed).unwrap() - 1.0).abs() < 1e-14);
        let h = DenseOperator::embed(&[2], &pauli::x(), &[0]).unwrap();
        let g = gibbs_state(&h, 0.4).unwrap().state;
        assert!(relative_entropy(&g, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn product_state_has_no_mutual_information() {
        let a = DensityMatrix::new(diag(&[0.3, 0.7])).unwrap();
        let b = DensityMatrix::new(diag(&[0.1, 0.9])).unwrap();
        let prod = DensityMatrix::new(a.operator().kron(b.operator())).unwrap();
        assert!(mutual_information(&prod, &Region::new([0])).unwrap().abs() < 1e-12);
    }
}
