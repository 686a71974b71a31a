use faer::{c64, Mat};

use super::eigen::{eigh, eigh_mat, weighted_outer, HermitianEigen};
use super::operator::DenseOperator;
use crate::error::{domain, Result};

/// Eigenvalues at or below this are treated as exact zeros.
pub const ZERO_EIGENVALUE: f64 = 1e-14;

const PSD_TOLERANCE: f64 = 1e-12;
const TRACE_TOLERANCE: f64 = 1e-10;

/// `λ^τ` under the zero-eigenvalue convention: `0` for `λ <= 1e-14` and
/// `τ > 0`, `1` for `τ = 0`.
#[inline]
pub fn power_weight(lambda: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else if lambda <= ZERO_EIGENVALUE {
        0.0
    } else {
        lambda.powf(tau)
    }
}

/// A density matrix together with its eigendecomposition, computed once at
/// construction. Eigenvalues are ascending and clamped at zero.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: DenseOperator,
    eigen: HermitianEigen,
}

impl DensityMatrix {
    /// Validates positivity (eigenvalues >= -1e-12) and unit trace.
    pub fn new(op: DenseOperator) -> Result<Self> {
        let mut eigen = eigh(&op)?;
        if let Some(&min) = eigen.values.first() {
            if min < -PSD_TOLERANCE {
                return domain(format!("not positive semidefinite: eigenvalue {min:e}"));
            }
        }
        let trace: f64 = eigen.values.iter().sum();
        if (trace - 1.0).abs() > TRACE_TOLERANCE {
            return domain(format!("trace {trace} differs from 1"));
        }
        for v in &mut eigen.values {
            *v = v.max(0.0);
        }
        Ok(DensityMatrix { op, eigen })
    }

    /// `Σ_k w_k |v_k><v_k|` with eigenvectors as the columns of `vectors`.
    /// Weights must be nonnegative and sum to one.
    pub fn from_spectrum(dims: &[usize], weights: Vec<f64>, vectors: Mat<c64>) -> Result<Self> {
        if weights.len() != vectors.ncols() {
            return domain("one weight per eigenvector required");
        }
        if weights.iter().any(|&w| w < -PSD_TOLERANCE) {
            return domain("negative population");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TRACE_TOLERANCE {
            return domain(format!("populations sum to {total}, not 1"));
        }
        let op = DenseOperator::new(dims, weighted_outer(&vectors, &weights))?;
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));
        let values = order.iter().map(|&k| weights[k].max(0.0)).collect();
        let vectors = Mat::from_fn(vectors.nrows(), order.len(), |i, j| vectors[(i, order[j])]);
        Ok(DensityMatrix { op, eigen: HermitianEigen { values, vectors } })
    }

    /// Maximally mixed state `1/dim`.
    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let id = DenseOperator::identity(dims);
        let n = id.dim();
        let op = id.scale(c64::new(1.0 / n as f64, 0.0));
        let eigen = HermitianEigen { values: vec![1.0 / n as f64; n], vectors: Mat::identity(n, n) };
        DensityMatrix { op, eigen }
    }

    /// `|ψ><ψ|` for a normalized vector.
    pub fn pure(dims: &[usize], psi: &[c64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return domain(format!("state vector has squared norm {norm}"));
        }
        let m = Mat::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj());
        Self::new(DenseOperator::new(dims, m)?)
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.op
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    pub fn dims(&self) -> &[usize] {
        self.op.dims()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Tr(ρ A).
    pub fn expectation(&self, a: &DenseOperator) -> c64 {
        a.expectation(&self.op)
    }
}

/// Gibbs state `e^{-βH}/Z` together with `ln Z`.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub state: DensityMatrix,
    pub log_partition: f64,
}

/// Thermal state of a Hermitian operator at inverse temperature `beta`
/// (negative values allowed).
pub fn gibbs_state(h: &DenseOperator, beta: f64) -> Result<GibbsState> {
    if !h.is_hermitian() {
        return domain("Gibbs state needs a Hermitian Hamiltonian");
    }
    let eigen = eigh_mat(h.mat())?;
    gibbs_from_eigen(h.dims(), &eigen, beta)
}

/// Gibbs state from a precomputed eigendecomposition of `H`. Populations
/// use the max-shift trick so `ln Z` stays finite at large `|β| N`.
pub fn gibbs_from_eigen(dims: &[usize], eigen: &HermitianEigen, beta: f64) -> Result<GibbsState> {
    if !beta.is_finite() {
        return domain("inverse temperature must be finite");
    }
    let (weights, log_partition) = boltzmann_weights(&eigen.values, beta);
    let state = DensityMatrix::from_spectrum(dims, weights, eigen.vectors.clone())?;
    Ok(GibbsState { state, log_partition })
}

/// Normalized Boltzmann weights and `ln Z` for a list of energies.
pub(crate) fn boltzmann_weights(energies: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let exponents: Vec<f64> = energies.iter().map(|&e| -beta * e).collect();
    let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = exponents.iter().map(|&x| (x - shift).exp()).collect();
    let z: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= z;
    }
    (weights, shift + z.ln())
}

/// `ρ^τ` through the cached eigendecomposition.
pub fn fractional_power(rho: &DensityMatrix, tau: f64) -> Result<DenseOperator> {
    if !(0.0..=1.0).contains(&tau) {
        return domain(format!("fractional power exponent {tau} outside [0, 1]"));
    }
    let eigen = rho.eigen();
    DenseOperator::new(rho.dims(), eigen.reconstruct(|l| power_weight(l, tau)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::pauli;

    fn diag(values: &[f64]) -> DenseOperator {
        let n = values.len();
        let m = Mat::from_fn(n, n, |i, j| c64::new(if i == j { values[i] } else { 0.0 }, 0.0));
        DenseOperator::new(&[n], m).unwrap()
    }

    #[test]
    fn infinite_temperature_is_maximally_mixed() {
        let h = DenseOperator::embed(&[2, 2], &pauli::kron(&pauli::x(), &pauli::y()), &[0, 1]).unwrap();
        let g = gibbs_state(&h, 0.0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(&[2, 2]);
        assert!(g.state.operator().max_abs_diff(mixed.operator()) < 1e-15);
        assert!((g.log_partition - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_level_closed_form() {
        let h = DenseOperator::embed(&[2], &pauli::z(), &[0]).unwrap();
        let g = gibbs_state(&h, 1.0).unwrap();
        let m = g.state.operator().mat();
        let z = 2.0 * 1f64.cosh();
        assert!((m[(0, 0)].re - (-1f64).exp() / z).abs() < 1e-15);
        assert!((m[(1, 1)].re - 1f64.exp() / z).abs() < 1e-15);
        assert!((m[(0, 0)].re - 0.11920292202211755).abs() < 1e-15);
        assert!((g.log_partition - z.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_partition_survives_large_beta() {
        let h = diag(&[-1000.0, 0.0]);
        let g = gibbs_state(&h, 10.0).unwrap();
        assert!((g.log_partition - 10_000.0).abs() < 1e-9);
        assert!((g.state.operator().mat()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fractional_power_conventions() {
        let rho = DensityMatrix::new(diag(&[0.25, 0.75])).unwrap();
        let half = fractional_power(&rho, 0.5).unwrap();
        assert!((half.mat()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((half.mat()[(1, 1)].re - 0.8660254037844386).abs() < 1e-15);
        assert!(fractional_power(&rho, 1.0).unwrap().max_abs_diff(rho.operator()) < 1e-15);
        assert!(fractional_power(&rho, 0.0).unwrap().max_abs_diff(&DenseOperator::identity(&[2])) < 1e-15);
        assert!(fractional_power(&rho, 1.5).is_err());

        let rank_one = DensityMatrix::new(diag(&[1.0, 0.0])).unwrap();
        let p0 = fractional_power(&rank_one, 0.0).unwrap();
        assert!(p0.max_abs_diff(&DenseOperator::identity(&[2])) < 1e-15);
        let p = fractional_power(&rank_one, 0.3).unwrap();
        assert_eq!(p.mat()[(1, 1)].re, 0.0);
    }

    #[test]
    fn invalid_states_are_rejected() {
        assert!(DensityMatrix::new(diag(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(diag(&[0.5, 0.6])).is_err());
    }
}
