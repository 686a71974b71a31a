//! Seeded randomness shared by experiments and tests.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::densequantum::{spectral_norm, DenseOperator};
use crate::error::Result;

/// Recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = grid index";

/// Generator for grid point `stream` of a run seeded with `seed`.
pub fn lab_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Hermitian matrix with independent Gaussian entries (GUE up to scale).
pub fn gaussian_hermitian<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Mat<c64> {
    let mut g = |_: usize, _: usize| -> c64 {
        c64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    };
    let a = Mat::from_fn(dim, dim, &mut g);
    Mat::from_fn(dim, dim, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Random Hermitian operator on `dims` rescaled to spectral norm `norm`.
pub fn random_hermitian<R: rand::Rng + ?Sized>(rng: &mut R, dims: &[usize], norm: f64) -> Result<DenseOperator> {
    let dim = dims.iter().product();
    let op = DenseOperator::new(dims, gaussian_hermitian(rng, dim))?;
    let scale = norm / spectral_norm(&op)?;
    Ok(op.scale(c64::new(scale, 0.0)))
}
