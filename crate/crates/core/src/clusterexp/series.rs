//! Truncated high-temperature series of `e^{−βH}`.
//!
//! Letters are the folded edge terms (plus the single-site term of any
//! isolated site), so `H = Σ_letters h`. A word `w = (w_1, …, w_j)` is kept
//! iff every connected component of its letters, joined through shared
//! sites, covers fewer than `L` sites.
//!
//! Whether a word is kept only depends on its set of distinct letters, and
//! allowed sets are closed under taking subsets. With `a(S)` the indicator of
//! an allowed set and `μ(T) = Σ_{S ⊇ T} (−1)^{|S \ T|} a(S)`,
//!
//! `Σ_{j ≤ j_max} Σ_{w kept} (−β)^j / j! h(w) = Σ_T μ(T) Σ_{j ≤ j_max} (−β H_T)^j / j!`
//!
//! where `H_T` sums the letters in `T`. Most `μ(T)` vanish; for `L > N` only
//! `T = all letters` survives.

use faer::{c64, Mat};
use serde::Serialize;

use crate::budget::{checked_space_dim, max_dense_dim, max_series_work};
use crate::densequantum::DenseOperator;
use crate::error::{domain, LabError, Result};
use crate::hamiltonian::{LocalHamiltonian, LocalTerm};
use crate::lattice::Region;

/// Largest alphabet enumerated by subsets.
pub const MAX_LETTERS: usize = 20;

/// Letters of the series.
#[derive(Clone, Debug)]
pub struct ClusterAlphabet {
    letters: Vec<LocalTerm>,
    num_sites: usize,
    local_dim: usize,
}

impl ClusterAlphabet {
    pub fn new(h: &LocalHamiltonian) -> Result<Self> {
        Ok(ClusterAlphabet { letters: h.folded_edge_terms()?, num_sites: h.num_sites(), local_dim: h.local_dim() })
    }

    pub fn letters(&self) -> &[LocalTerm] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// Site counts of the connected components formed by `letters`.
    pub fn component_sizes(&self, letters: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.num_sites).collect();
        let mut used = vec![false; self.num_sites];
        fn root(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for k in letters {
            let sites = self.letters[k].support().sites();
            for &v in sites {
                used[v] = true;
            }
            if let [u, v] = *sites {
                let (ru, rv) = (root(&mut parent, u), root(&mut parent, v));
                parent[ru] = rv;
            }
        }
        let mut sizes = vec![0usize; self.num_sites];
        for v in 0..self.num_sites {
            if used[v] {
                let r = root(&mut parent, v);
                sizes[r] += 1;
            }
        }
        sizes.into_iter().filter(|&s| s > 0).collect()
    }

    /// True iff every component has fewer than `max_cluster` sites.
    pub fn is_retained(&self, letters: impl IntoIterator<Item = usize>, max_cluster: usize) -> bool {
        self.component_sizes(letters).into_iter().all(|s| s < max_cluster)
    }

    /// Letter `k` on the full space.
    pub fn letter_operator(&self, k: usize) -> Result<DenseOperator> {
        let t = &self.letters[k];
        DenseOperator::embed(&vec![self.local_dim; self.num_sites], t.matrix(), t.support().sites())
    }

    fn mask_sites(&self, mask: u32) -> impl Iterator<Item = usize> {
        (0..self.letters.len()).filter(move |&k| mask >> k & 1 == 1)
    }
}

/// A word `(w_1, …, w_j)` over the alphabet, repeats allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterWord(Vec<usize>);

impl ClusterWord {
    pub fn new(alphabet: &ClusterAlphabet, letters: Vec<usize>) -> Result<Self> {
        if letters.iter().any(|&k| k >= alphabet.len()) {
            return domain(format!("word {letters:?} uses letters outside an alphabet of {}", alphabet.len()));
        }
        Ok(ClusterWord(letters))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn support(&self, alphabet: &ClusterAlphabet) -> Region {
        self.0.iter().fold(Region::empty(), |acc, &k| acc.union(alphabet.letters[k].support()))
    }

    pub fn is_retained(&self, alphabet: &ClusterAlphabet, max_cluster: usize) -> bool {
        alphabet.is_retained(self.0.iter().copied(), max_cluster)
    }

    /// `h_{w_1} h_{w_2} ⋯ h_{w_j}` on the full space.
    pub fn operator(&self, alphabet: &ClusterAlphabet) -> Result<DenseOperator> {
        let dims = vec![alphabet.local_dim; alphabet.num_sites];
        let mut out = DenseOperator::identity(&dims);
        for &k in &self.0 {
            out = out.matmul(&alphabet.letter_operator(k)?)?;
        }
        Ok(out)
    }
}

/// Number of words up to the order cap, split by the cluster predicate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WordCounts {
    pub retained: u128,
    pub dropped: u128,
}

/// Dense truncated series with its bookkeeping.
#[derive(Clone, Debug)]
pub struct TruncatedSeries {
    pub operator: DenseOperator,
    pub words: WordCounts,
    /// Letter sets with nonzero inclusion-exclusion weight.
    pub letter_sets: usize,
}

/// Allowed-set indicator and its superset Möbius transform.
pub(crate) fn allowed_sets(alphabet: &ClusterAlphabet, max_cluster: usize) -> Result<(Vec<bool>, Vec<i64>)> {
    let m = alphabet.len();
    if m > MAX_LETTERS {
        return Err(LabError::Resource { what: format!("cluster series over {m} letters"), limit: MAX_LETTERS });
    }
    let allowed: Vec<bool> = (0..1u32 << m).map(|mask| alphabet.is_retained(alphabet.mask_sites(mask), max_cluster)).collect();
    let mut mu: Vec<i64> = allowed.iter().map(|&a| a as i64).collect();
    for b in 0..m {
        for mask in 0..mu.len() {
            if mask >> b & 1 == 0 {
                mu[mask] -= mu[mask | 1 << b];
            }
        }
    }
    Ok((allowed, mu))
}

fn word_counts(allowed: &[bool], m: usize, max_order: usize) -> Result<WordCounts> {
    let overflow = || LabError::Resource { what: "word count overflows 128 bits".into(), limit: u128::BITS as usize };
    // onto[j][k]: words of length j using each of k given letters at least once
    let mut onto = vec![vec![0u128; m + 1]; max_order + 1];
    onto[0][0] = 1;
    for j in 1..=max_order {
        for k in 1..=m {
            let s = onto[j - 1][k - 1].checked_add(onto[j - 1][k]).ok_or_else(overflow)?;
            onto[j][k] = s.checked_mul(k as u128).ok_or_else(overflow)?;
        }
    }
    let mut by_size = vec![0u128; m + 1];
    for (mask, &a) in allowed.iter().enumerate() {
        if a {
            by_size[mask.count_ones() as usize] += 1;
        }
    }
    let (mut retained, mut total) = (0u128, 0u128);
    for row in &onto {
        for k in 0..=m {
            retained = row[k].checked_mul(by_size[k]).and_then(|x| x.checked_add(retained)).ok_or_else(overflow)?;
        }
    }
    let mut power = 1u128;
    for _ in 0..=max_order {
        total = total.checked_add(power).ok_or_else(overflow)?;
        power = power.saturating_mul(m as u128);
    }
    Ok(WordCounts { retained, dropped: total - retained })
}

/// `Σ_{j ≤ order} (c X)^j / j!` by a running product.
pub(crate) fn taylor_exp(x: &Mat<c64>, c: f64, order: usize) -> Mat<c64> {
    let n = x.nrows();
    let mut sum = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for j in 1..=order {
        let prod = &term * x;
        let f = c / j as f64;
        term = Mat::from_fn(n, n, |r, s| prod[(r, s)] * f);
        sum += &term;
    }
    sum
}

/// Order-resolved series of words whose letter set is exactly `letters`:
/// entry `j` is `(−β)^j / j! Σ_{w ∈ letters^j, all used} h(w)`, for
/// `j = 0..=order`. The letters are given as matrices on a common space.
pub(crate) fn exact_letter_set_series(letters: &[Mat<c64>], beta: f64, order: usize) -> Vec<Mat<c64>> {
    let n = letters.first().map_or(1, |m| m.nrows());
    let m = letters.len();
    let mut out = vec![Mat::<c64>::zeros(n, n); order + 1];
    for mask in 0..1u32 << m {
        let sign = if (m as u32 - mask.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        let mut h = Mat::<c64>::zeros(n, n);
        for (k, l) in letters.iter().enumerate() {
            if mask >> k & 1 == 1 {
                h += l;
            }
        }
        let mut term = Mat::<c64>::identity(n, n);
        for (j, slot) in out.iter_mut().enumerate() {
            if j > 0 {
                let prod = &term * &h;
                let f = -beta / j as f64;
                term = Mat::from_fn(n, n, |r, s| prod[(r, s)] * f);
            }
            *slot += Mat::from_fn(n, n, |r, s| term[(r, s)] * sign);
        }
    }
    out
}

/// `Σ_{j ≤ j_max} Σ_{w kept} (−β)^j / j! h(w)` as a dense operator.
pub fn truncated_series_dense(h: &LocalHamiltonian, beta: f64, max_cluster: usize, max_order: usize) -> Result<TruncatedSeries> {
    series_within(h, beta, max_cluster, max_order, max_series_work())
}

fn series_within(h: &LocalHamiltonian, beta: f64, max_cluster: usize, max_order: usize, limit: usize) -> Result<TruncatedSeries> {
    if !beta.is_finite() {
        return domain("inverse temperature must be finite");
    }
    if max_cluster == 0 {
        return domain("cluster size cap L must be at least 1");
    }
    let alphabet = ClusterAlphabet::new(h)?;
    let dims = h.site_dims();
    let dim = checked_space_dim(h.local_dim(), h.num_sites(), max_dense_dim(), "truncated cluster series")?;
    let (allowed, mu) = allowed_sets(&alphabet, max_cluster)?;
    let words = word_counts(&allowed, alphabet.len(), max_order)?;
    let active: Vec<(u32, i64)> = mu.iter().enumerate().filter(|(_, &c)| c != 0).map(|(t, &c)| (t as u32, c)).collect();

    if beta == 0.0 || max_order == 0 {
        return Ok(TruncatedSeries { operator: DenseOperator::identity(&dims), words, letter_sets: active.len() });
    }
    let work = (active.len() as u128) * (max_order as u128) * (dim as u128).pow(3);
    if work > limit as u128 {
        return Err(LabError::Resource {
            what: format!(
                "truncated cluster series: {} letter sets to order {max_order} at dimension {dim}; reduce j_max or L",
                active.len()
            ),
            limit,
        });
    }
    let ops: Vec<Mat<c64>> =
        (0..alphabet.len()).map(|k| alphabet.letter_operator(k).map(DenseOperator::into_mat)).collect::<Result<_>>()?;
    let mut total = Mat::<c64>::zeros(dim, dim);
    for &(mask, weight) in &active {
        let mut x = Mat::<c64>::zeros(dim, dim);
        for k in alphabet.mask_sites(mask) {
            x += &ops[k];
        }
        let t = taylor_exp(&x, -beta, max_order);
        let w = weight as f64;
        total += Mat::from_fn(dim, dim, |r, s| t[(r, s)] * w);
    }
    Ok(TruncatedSeries { operator: DenseOperator::new(&dims, total)?, words, letter_sets: active.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::{trace_norm, DenseOperator};
    use crate::hamiltonian::{build_model, Couplings, ModelKind};
    use crate::lattice::InteractionGraph;

    fn chain(kind: ModelKind, n: usize, pairs: &[(&str, f64)]) -> LocalHamiltonian {
        let c: Couplings = pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        build_model(kind, &InteractionGraph::chain(n).unwrap(), &c).unwrap()
    }

    fn dense_exp(h: &LocalHamiltonian, beta: f64) -> DenseOperator {
        let eig = crate::densequantum::eigh(&h.assemble_dense().unwrap()).unwrap();
        DenseOperator::new(&h.site_dims(), eig.reconstruct(|e| (-beta * e).exp())).unwrap()
    }

    /// Every word of `E^j` for `j ≤ j_max` summed by brute force.
    fn brute_force(h: &LocalHamiltonian, beta: f64, max_cluster: usize, max_order: usize) -> (DenseOperator, WordCounts) {
        let alphabet = ClusterAlphabet::new(h).unwrap();
        let dims = h.site_dims();
        let mut out = DenseOperator::zeros(&dims);
        let mut counts = WordCounts::default();
        let m = alphabet.len();
        let mut fact = 1.0;
        for j in 0..=max_order {
            if j > 0 {
                fact *= j as f64;
            }
            let coeff = (-beta).powi(j as i32) / fact;
            for idx in 0..m.pow(j as u32) {
                let letters: Vec<usize> = (0..j).map(|p| idx / m.pow(p as u32) % m).collect();
                let w = ClusterWord::new(&alphabet, letters).unwrap();
                if w.is_retained(&alphabet, max_cluster) {
                    counts.retained += 1;
                    out = out.add(&w.operator(&alphabet).unwrap().scale(c64::new(coeff, 0.0))).unwrap();
                } else {
                    counts.dropped += 1;
                }
            }
        }
        (out, counts)
    }

    #[test]
    fn matches_word_enumeration() {
        let h = chain(ModelKind::TransverseIsing, 4, &[("j_zz", 1.0), ("h_x", 0.7), ("h_z", 0.2)]);
        for l in [1, 2, 3, 4, 5] {
            let series = truncated_series_dense(&h, 0.3, l, 4).unwrap();
            let (oracle, counts) = brute_force(&h, 0.3, l, 4);
            assert!(series.operator.max_abs_diff(&oracle) < 1e-12, "L = {l}");
            assert_eq!(series.words, counts, "L = {l}");
        }
    }

    #[test]
    fn zeroth_order_and_infinite_temperature_give_identity() {
        let h = chain(ModelKind::Heisenberg, 4, &[("j", 1.0)]);
        let id = DenseOperator::identity(&h.site_dims());
        assert_eq!(truncated_series_dense(&h, 0.4, 5, 0).unwrap().operator.max_abs_diff(&id), 0.0);
        assert_eq!(truncated_series_dense(&h, 0.0, 3, 10).unwrap().operator.max_abs_diff(&id), 0.0);
    }

    #[test]
    fn converges_to_exponential_without_truncation() {
        let h = chain(ModelKind::TransverseIsing, 4, &[("j_zz", 1.0), ("h_x", 1.0)]);
        let series = truncated_series_dense(&h, 0.2, 5, 20).unwrap();
        let diff = series.operator.sub(&dense_exp(&h, 0.2)).unwrap();
        assert!(trace_norm(&diff).unwrap() <= 1e-8);
        assert_eq!(series.letter_sets, 1);
    }

    #[test]
    fn single_edge_boundary_convention() {
        let h = chain(ModelKind::Ising, 2, &[("j_zz", 1.0)]);
        let series = truncated_series_dense(&h, 0.5, 2, 6).unwrap();
        // a single edge already covers two sites, so L = 2 drops it
        assert_eq!(series.operator.max_abs_diff(&DenseOperator::identity(&[2, 2])), 0.0);
        assert_eq!(series.words.retained, 1);
        assert!(truncated_series_dense(&h, 0.5, 3, 6).unwrap().words.retained == 7);
    }

    #[test]
    fn retention_is_monotone_in_cluster_size() {
        let g = InteractionGraph::cubic(3, 2, crate::lattice::Boundary::Open).unwrap();
        let h = build_model(ModelKind::Ising, &g, &[("j_zz".to_string(), 1.0)].into()).unwrap();
        let alphabet = ClusterAlphabet::new(&h).unwrap();
        let (a3, _) = allowed_sets(&alphabet, 3).unwrap();
        let (a4, _) = allowed_sets(&alphabet, 4).unwrap();
        assert!(a3.iter().zip(&a4).all(|(&x, &y)| !x || y));
        let mut last = 0;
        for l in 1..=10 {
            let c = truncated_series_dense(&chain(ModelKind::Ising, 5, &[("j_zz", 1.0)]), 0.1, l, 3).unwrap().words.retained;
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn truncation_error_shrinks_with_cluster_size() {
        let h = chain(ModelKind::TransverseIsing, 6, &[("j_zz", 1.0), ("h_x", 1.0)]);
        let exact = dense_exp(&h, 0.1);
        let errs: Vec<f64> = (2..=7)
            .map(|l| trace_norm(&truncated_series_dense(&h, 0.1, l, 14).unwrap().operator.sub(&exact).unwrap()).unwrap())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[5] < 1e-10);
    }

    #[test]
    fn order_cap_is_enforced() {
        let h = chain(ModelKind::Ising, 4, &[("j_zz", 1.0)]);
        assert!(matches!(series_within(&h, 0.1, 3, 30, 1000), Err(LabError::Resource { .. })));
        assert!(series_within(&h, 0.1, 3, 30, 1 << 30).is_ok());
    }
}
