//! Single-qubit Pauli matrices.

use faer::{c64, Mat};

pub fn identity() -> Mat<c64> {
    Mat::identity(2, 2)
}

pub fn x() -> Mat<c64> {
    from_rows([[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]])
}

pub fn y() -> Mat<c64> {
    from_rows([[0.0, 0.0], [0.0, 0.0]], [[0.0, -1.0], [1.0, 0.0]])
}

pub fn z() -> Mat<c64> {
    from_rows([[1.0, 0.0], [0.0, -1.0]], [[0.0, 0.0], [0.0, 0.0]])
}

/// Hadamard gate; conjugation by it swaps `x` and `z`.
pub fn hadamard() -> Mat<c64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    from_rows([[s, s], [s, -s]], [[0.0, 0.0], [0.0, 0.0]])
}

/// `[x, y, z]`.
pub fn basis() -> [Mat<c64>; 3] {
    [x(), y(), z()]
}

fn from_rows(re: [[f64; 2]; 2], im: [[f64; 2]; 2]) -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| c64::new(re[i][j], im[i][j]))
}

/// Kronecker product `a ⊗ b`, with `a` on the more significant factor.
pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}
