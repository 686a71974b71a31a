//! Size budgets for dense linear algebra.
//!
//! A full dense complex operator on `dim` states costs `16 dim^2` bytes and
//! its eigendecomposition roughly `40 dim^3` flops. The defaults keep a single
//! dense operator below 300 MB; sector-resolved spectra may go further since
//! each conserved block is diagonalized on its own.

use crate::error::{LabError, Result};

/// Environment variable overriding [`max_dense_dim`].
pub const DENSE_DIM_ENV: &str = "GIBBSLAB_MAX_DIM";
/// Environment variable overriding [`max_sector_space_dim`].
pub const SECTOR_DIM_ENV: &str = "GIBBSLAB_MAX_SECTOR_SPACE";
/// Environment variable overriding [`max_series_work`].
pub const SERIES_WORK_ENV: &str = "GIBBSLAB_MAX_SERIES_WORK";

const DEFAULT_DENSE_DIM: usize = 1 << 12;
const DEFAULT_SECTOR_SPACE_DIM: usize = 1 << 14;
const DEFAULT_MAX_BLOCK_DIM: usize = 1 << 13;
const DEFAULT_SERIES_WORK: usize = 1 << 40;

fn env_usize(key: &str) -> Option<usize> {
    std::env::var(key).ok()?.trim().parse().ok()
}

/// Largest Hilbert-space dimension assembled as one dense matrix.
pub fn max_dense_dim() -> usize {
    env_usize(DENSE_DIM_ENV).unwrap_or(DEFAULT_DENSE_DIM)
}

/// Largest total Hilbert-space dimension handled by the sector-resolved path.
pub fn max_sector_space_dim() -> usize {
    env_usize(SECTOR_DIM_ENV).unwrap_or(DEFAULT_SECTOR_SPACE_DIM)
}

/// Largest single conserved block diagonalized densely.
pub fn max_block_dim() -> usize {
    DEFAULT_MAX_BLOCK_DIM.max(max_dense_dim())
}

/// Largest number of complex multiply-adds spent on a dense truncated
/// cluster series.
pub fn max_series_work() -> usize {
    env_usize(SERIES_WORK_ENV).unwrap_or(DEFAULT_SERIES_WORK)
}

/// `local_dim^n_sites`, or a resource error when it overflows or exceeds `limit`.
pub fn checked_space_dim(local_dim: usize, n_sites: usize, limit: usize, what: &str) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n_sites {
        dim = dim.checked_mul(local_dim).filter(|&d| d <= limit).ok_or_else(|| LabError::Resource {
            what: format!("{what}: {local_dim}^{n_sites} states"),
            limit,
        })?;
    }
    Ok(dim)
}
