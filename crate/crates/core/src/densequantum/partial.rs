use faer::{c64, Mat};

use super::operator::{DenseOperator, SiteLayout};
use crate::error::{domain, Result};
use crate::lattice::Region;

/// Full-space indices grouped by the complement digits: `groups[r][k]` is the
/// basis index whose kept digits are `k` and whose traced digits are `r`.
pub(crate) fn index_groups(layout: &SiteLayout, keep: &[usize]) -> (usize, Vec<Vec<usize>>) {
    let keep_dim: usize = keep.iter().map(|&s| layout.dims()[s]).product();
    let rest: Vec<usize> = (0..layout.dims().len()).filter(|s| !keep.contains(s)).collect();
    let rest_dim: usize = rest.iter().map(|&s| layout.dims()[s]).product();
    let mut groups = vec![vec![0usize; keep_dim]; rest_dim];
    for i in 0..layout.total() {
        groups[layout.local_index(i, &rest)][layout.local_index(i, keep)] = i;
    }
    (keep_dim, groups)
}

fn check_keep(dims: &[usize], keep: &Region) -> Result<Vec<usize>> {
    if keep.sites().iter().any(|&s| s >= dims.len()) {
        return domain(format!("sites {keep} are not a subset of the {} tensor factors", dims.len()));
    }
    Ok(keep.sites().to_vec())
}

/// Traces out every site not in `keep`. The result acts on the kept sites in
/// increasing order.
pub fn partial_trace(op: &DenseOperator, keep: &Region) -> Result<DenseOperator> {
    let keep = check_keep(op.dims(), keep)?;
    let (keep_dim, groups) = index_groups(op.layout(), &keep);
    let m = op.mat();
    let mut out = Mat::<c64>::zeros(keep_dim, keep_dim);
    for g in &groups {
        for (b, &jb) in g.iter().enumerate() {
            for (a, &ia) in g.iter().enumerate() {
                out[(a, b)] += m[(ia, jb)];
            }
        }
    }
    let dims: Vec<usize> = keep.iter().map(|&s| op.dims()[s]).collect();
    DenseOperator::new(&dims, out)
}

/// Reduced state `Tr_rest |ψ><ψ|` of a state vector.
pub fn partial_trace_vector(dims: &[usize], psi: &[c64], keep: &Region) -> Result<DenseOperator> {
    let keep = check_keep(dims, keep)?;
    let layout = SiteLayout::new(dims);
    if psi.len() != layout.total() {
        return domain("state vector length does not match the site dimensions");
    }
    let (keep_dim, groups) = index_groups(&layout, &keep);
    let mut out = Mat::<c64>::zeros(keep_dim, keep_dim);
    for g in &groups {
        for (b, &jb) in g.iter().enumerate() {
            let cb = psi[jb].conj();
            for (a, &ia) in g.iter().enumerate() {
                out[(a, b)] += psi[ia] * cb;
            }
        }
    }
    let dims: Vec<usize> = keep.iter().map(|&s| dims[s]).collect();
    DenseOperator::new(&dims, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::{pauli, DensityMatrix};

    #[test]
    fn product_state_reduces_to_factor() {
        let a = Mat::from_fn(2, 2, |i, j| c64::new([[0.7, 0.1], [0.1, 0.3]][i][j], [[0.0, 0.2], [-0.2, 0.0]][i][j]));
        let b = Mat::from_fn(3, 3, |i, j| c64::new(if i == j { [0.5, 0.3, 0.2][i] } else { 0.0 }, 0.0));
        let rho = DenseOperator::new(&[2, 3], pauli::kron(&a, &b)).unwrap();
        let ra = partial_trace(&rho, &Region::new([0])).unwrap();
        let rb = partial_trace(&rho, &Region::new([1])).unwrap();
        assert!(ra.max_abs_diff(&DenseOperator::new(&[2], a).unwrap()) < 1e-15);
        assert!(rb.max_abs_diff(&DenseOperator::new(&[3], b).unwrap()) < 1e-15);
        assert!(partial_trace(&rho, &Region::new([2])).is_err());
    }

    #[test]
    fn bell_state_marginal_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c64::new(s, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0), c64::new(s, 0.0)];
        let half = DensityMatrix::maximally_mixed(&[2]);
        let from_vec = partial_trace_vector(&[2, 2], &psi, &Region::new([0])).unwrap();
        assert!(from_vec.max_abs_diff(half.operator()) < 1e-15);
        let rho = DensityMatrix::pure(&[2, 2], &psi).unwrap();
        let from_op = partial_trace(rho.operator(), &Region::new([0])).unwrap();
        assert!(from_op.max_abs_diff(half.operator()) < 1e-15);
    }

    #[test]
    fn keeping_everything_is_identity_and_nothing_is_the_trace() {
        let m = Mat::from_fn(4, 4, |i, j| c64::new((i * 4 + j) as f64, (i as f64) - (j as f64)));
        let op = DenseOperator::new(&[2, 2], m).unwrap();
        let all = partial_trace(&op, &Region::new([0, 1])).unwrap();
        assert!(all.max_abs_diff(&op) == 0.0);
        let none = partial_trace(&op, &Region::empty()).unwrap();
        assert_eq!(none.mat()[(0, 0)], op.trace());
    }
}
