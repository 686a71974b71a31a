//! Dense operator algebra on tensor-product spaces.
//!
//! Every matrix function goes through a single Hermitian eigendecomposition
//! ([`HermitianEigen`]). Zero-eigenvalue conventions:
//! `0 log 0 = 0`, and `lambda^tau` is `0` for `lambda <= 1e-14, tau > 0` and
//! `1` for `tau = 0`.

mod eigen;
mod entropy;
mod operator;
mod partial;
pub mod pauli;
mod state;

pub use eigen::{eigh, eigvalsh, HermitianEigen};
pub use entropy::{
    free_energy, mutual_information, relative_entropy, spectral_norm, trace_distance, trace_norm,
    von_neumann_entropy, NATS_PER_BIT,
};
pub use operator::{DenseOperator, SiteLayout};
pub use partial::{partial_trace, partial_trace_vector};
pub use state::{
    fractional_power, gibbs_from_eigen, gibbs_state, power_weight, DensityMatrix, GibbsState,
    ZERO_EIGENVALUE,
};

pub(crate) use eigen::eigvalsh_mat;
pub(crate) use operator::hermiticity_defect;
pub(crate) use state::boltzmann_weights;

pub use faer::c64;
pub use faer::Mat;
