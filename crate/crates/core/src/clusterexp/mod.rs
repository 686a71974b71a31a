//! Truncated cluster expansion of `e^{−βH}` and an MPO backend for chains.

mod chain;
mod mpo;
mod series;

pub use chain::{mpo_from_truncation, positivity_by_squaring, positivity_sweep, PositiveMpo, PositivityRow, SeriesMpo};
pub use mpo::{Compression, Mpo, SiteTensor, LOSSLESS_FLOOR, MPO_FORMAT_VERSION, MPO_MAGIC};
pub use series::{truncated_series_dense, ClusterAlphabet, ClusterWord, TruncatedSeries, WordCounts, MAX_LETTERS};
