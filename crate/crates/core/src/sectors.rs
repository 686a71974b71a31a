//! Block-resolved exact diagonalization.
//!
//! The Hamiltonian is written in a product frame `U = ⊗_v U_v` (identity or
//! Hadamard on every site, whichever gives the smaller largest block), and
//! the computational basis of that frame is split into connected components
//! of the matrix's nonzero pattern. Each component is diagonalized densely on
//! its own. Transverse-field Ising chains split into two parity blocks in the
//! Hadamard frame, XX and Heisenberg chains into magnetization blocks, and
//! classical Ising models into one-dimensional blocks.

use faer::{c64, Mat, Side};

use crate::budget::{checked_space_dim, max_block_dim, max_sector_space_dim};
use crate::densequantum::{boltzmann_weights, pauli, DenseOperator, SiteLayout};
use crate::error::{domain, LabError, Result};
use crate::hamiltonian::{max_abs, LocalHamiltonian};
use crate::lattice::Region;

/// Entries of frame-rotated terms below this (relative to the largest entry)
/// are rounding residue of the frame change and are set to zero.
const FRAME_ROUNDING: f64 = 1e-13;

#[derive(Clone, Debug)]
enum Vectors {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl Vectors {
    #[inline]
    fn get(&self, i: usize, k: usize) -> c64 {
        match self {
            Vectors::Real(m) => c64::new(m[(i, k)], 0.0),
            Vectors::Complex(m) => m[(i, k)],
        }
    }
}

/// One conserved block: frame basis states and their eigenpairs.
#[derive(Clone, Debug)]
pub struct Block {
    basis: Vec<usize>,
    energies: Vec<f64>,
    vectors: Vectors,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Frame basis indices spanning the block, ascending.
    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn is_real(&self) -> bool {
        matches!(self.vectors, Vectors::Real(_))
    }
}

/// Nonnegative populations, one per eigenvector of every block.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralWeights(pub Vec<Vec<f64>>);

impl SpectralWeights {
    pub fn total(&self) -> f64 {
        self.0.iter().flatten().sum()
    }
}

/// Full spectrum of a local Hamiltonian, resolved into conserved blocks.
#[derive(Clone, Debug)]
pub struct SectorSpectrum {
    layout: SiteLayout,
    frame: Vec<Mat<c64>>,
    hadamard_frame: bool,
    blocks: Vec<Block>,
}

struct FrameTerm {
    sites: Vec<usize>,
    entries: Vec<(usize, usize, c64)>,
}

impl SectorSpectrum {
    pub fn new(h: &LocalHamiltonian) -> Result<Self> {
        let dims = h.site_dims();
        let dim = checked_space_dim(h.local_dim(), h.num_sites(), max_sector_space_dim(), "sector-resolved spectrum")?;
        let layout = SiteLayout::new(&dims);

        let mut candidates = vec![(false, frame_terms(h, None))];
        if h.local_dim() == 2 {
            candidates.push((true, frame_terms(h, Some(&pauli::hadamard()))));
        }
        let mut best: Option<(bool, Vec<FrameTerm>, Vec<Vec<usize>>)> = None;
        for (hadamard, terms) in candidates {
            let comps = components(&layout, dim, &terms);
            let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
            if best.as_ref().is_none_or(|(_, _, c)| largest < c.iter().map(Vec::len).max().unwrap_or(0)) {
                best = Some((hadamard, terms, comps));
            }
        }
        let (hadamard_frame, terms, comps) = best.expect("at least one frame");
        let limit = max_block_dim();
        if let Some(big) = comps.iter().map(Vec::len).find(|&len| len > limit) {
            return Err(LabError::Resource { what: format!("conserved block of dimension {big}"), limit });
        }
        let real = terms.iter().all(|t| t.entries.iter().all(|e| e.2.im == 0.0));

        let mut position = vec![0usize; dim];
        let mut blocks = Vec::with_capacity(comps.len());
        for basis in comps {
            for (p, &i) in basis.iter().enumerate() {
                position[i] = p;
            }
            blocks.push(diagonalize_block(&layout, &terms, basis, &position, real)?);
        }
        let frame_site = if hadamard_frame { pauli::hadamard() } else { Mat::identity(h.local_dim(), h.local_dim()) };
        Ok(SectorSpectrum { layout, frame: vec![frame_site; h.num_sites()], hadamard_frame, blocks })
    }

    pub fn dims(&self) -> &[usize] {
        self.layout.dims()
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn uses_hadamard_frame(&self) -> bool {
        self.hadamard_frame
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(Block::dim).max().unwrap_or(0)
    }

    /// All eigenvalues, ascending.
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.blocks.iter().flat_map(|b| b.energies.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Gibbs populations and `ln Z`.
    pub fn gibbs_weights(&self, beta: f64) -> Result<(SpectralWeights, f64)> {
        if !beta.is_finite() {
            return domain("inverse temperature must be finite");
        }
        let flat: Vec<f64> = self.blocks.iter().flat_map(|b| b.energies.iter().copied()).collect();
        let (w, log_z) = boltzmann_weights(&flat, beta);
        Ok((self.unflatten(w), log_z))
    }

    /// Populations given by a function of the energy.
    pub fn weights_from(&self, f: impl Fn(f64) -> f64) -> SpectralWeights {
        SpectralWeights(self.blocks.iter().map(|b| b.energies.iter().map(|&e| f(e)).collect()).collect())
    }

    /// `Σ_k w_k E_k`.
    pub fn mean_energy(&self, w: &SpectralWeights) -> f64 {
        self.blocks.iter().zip(&w.0).flat_map(|(b, wb)| b.energies.iter().zip(wb)).map(|(e, w)| e * w).sum()
    }

    /// Populations `<k|ρ|k>` of the product state `⊗_v rho_v`.
    pub fn product_state_weights(&self, locals: &[Mat<c64>]) -> Result<SpectralWeights> {
        if locals.len() != self.dims().len() {
            return domain("one local state per site required");
        }
        let rotated: Vec<Mat<c64>> = locals
            .iter()
            .zip(&self.frame)
            .map(|(r, u)| {
                let ru = r * u;
                u.adjoint() * &ru
            })
            .collect();
        let n = self.dims().len();
        let entry = |i: usize, j: usize| -> c64 {
            (0..n).map(|v| rotated[v][(self.layout.digit(i, v), self.layout.digit(j, v))]).product()
        };
        let mut out = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let m = b.dim();
            let rho_b = Mat::from_fn(m, m, |p, q| entry(b.basis[p], b.basis[q]));
            let weights = (0..m)
                .map(|k| {
                    let mut acc = c64::new(0.0, 0.0);
                    for q in 0..m {
                        let vq = b.vectors.get(q, k);
                        let row: c64 = (0..m).map(|p| b.vectors.get(p, k).conj() * rho_b[(p, q)]).sum();
                        acc += row * vq;
                    }
                    acc.re.max(0.0)
                })
                .collect();
            out.push(weights);
        }
        Ok(SpectralWeights(out))
    }

    /// Reduced state on `keep` of `Σ_k w_k |k><k|` (sites of `keep` in
    /// increasing order).
    pub fn reduced_state(&self, weights: &SpectralWeights, keep: &Region) -> Result<DenseOperator> {
        let n = self.dims().len();
        if keep.sites().iter().any(|&s| s >= n) {
            return domain(format!("sites {keep} are not a subset of the {n} tensor factors"));
        }
        self.check_weights(weights)?;
        let keep_sites = keep.sites();
        let rest: Vec<usize> = (0..n).filter(|v| !keep.contains(*v)).collect();
        let kd: usize = keep_sites.iter().map(|&s| self.dims()[s]).product();
        let rest_dim = self.dim() / kd;
        let mut acc = Mat::<c64>::zeros(kd, kd);
        let mut buf = vec![c64::new(0.0, 0.0); rest_dim * kd];
        for (b, wb) in self.blocks.iter().zip(&weights.0) {
            let labels: Vec<(usize, usize)> = b
                .basis
                .iter()
                .map(|&i| (self.layout.local_index(i, &rest), self.layout.local_index(i, keep_sites)))
                .collect();
            for (k, &w) in wb.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (p, &(r, a)) in labels.iter().enumerate() {
                    buf[r * kd + a] = b.vectors.get(p, k);
                }
                for (p, &(r, a)) in labels.iter().enumerate() {
                    let vp = b.vectors.get(p, k) * w;
                    let row = &buf[r * kd..(r + 1) * kd];
                    for (a2, &v2) in row.iter().enumerate() {
                        acc[(a, a2)] += vp * v2.conj();
                    }
                }
                for &(r, a) in &labels {
                    buf[r * kd + a] = c64::new(0.0, 0.0);
                }
            }
        }
        let mut u = Mat::<c64>::identity(1, 1);
        for &s in keep_sites {
            u = pauli::kron(&u, &self.frame[s]);
        }
        let au = &acc * u.adjoint();
        let dims: Vec<usize> = keep_sites.iter().map(|&s| self.dims()[s]).collect();
        DenseOperator::new(&dims, &u * &au)
    }

    /// Dense `Σ_k w_k |k><k|` on the full space, in the original frame.
    pub fn dense_state(&self, weights: &SpectralWeights) -> Result<DenseOperator> {
        self.reduced_state(weights, &(0..self.dims().len()).collect())
    }

    fn unflatten(&self, flat: Vec<f64>) -> SpectralWeights {
        let mut it = flat.into_iter();
        SpectralWeights(self.blocks.iter().map(|b| it.by_ref().take(b.dim()).collect()).collect())
    }

    fn check_weights(&self, w: &SpectralWeights) -> Result<()> {
        if w.0.len() != self.blocks.len() || w.0.iter().zip(&self.blocks).any(|(wb, b)| wb.len() != b.dim()) {
            return domain("weights do not match the block structure");
        }
        Ok(())
    }
}

fn frame_terms(h: &LocalHamiltonian, site_frame: Option<&Mat<c64>>) -> Vec<FrameTerm> {
    h.terms()
        .iter()
        .map(|t| {
            let sites = t.support().sites().to_vec();
            let m = match site_frame {
                None => t.matrix().clone(),
                Some(f) => {
                    let mut u = Mat::<c64>::identity(1, 1);
                    for _ in &sites {
                        u = pauli::kron(&u, f);
                    }
                    let mu = t.matrix() * &u;
                    u.adjoint() * &mu
                }
            };
            let cut = FRAME_ROUNDING * max_abs(&m);
            let clean = |x: f64| if x.abs() <= cut { 0.0 } else { x };
            let mut entries = Vec::new();
            for a in 0..m.nrows() {
                for b in 0..m.ncols() {
                    let v = c64::new(clean(m[(a, b)].re), clean(m[(a, b)].im));
                    if v != c64::new(0.0, 0.0) {
                        entries.push((a, b, v));
                    }
                }
            }
            FrameTerm { sites, entries }
        })
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the nonzero pattern, each sorted, ordered by
/// smallest member.
fn components(layout: &SiteLayout, dim: usize, terms: &[FrameTerm]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..dim).collect();
    for t in terms {
        for i in 0..dim {
            let a = layout.local_index(i, &t.sites);
            for &(row, col, _) in &t.entries {
                if row == a && col != a {
                    let j = layout.replace_local(i, &t.sites, col);
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
    }
    let mut label = vec![usize::MAX; dim];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in 0..dim {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[label[r]].push(i);
    }
    comps
}

fn diagonalize_block(
    layout: &SiteLayout,
    terms: &[FrameTerm],
    basis: Vec<usize>,
    position: &[usize],
    real: bool,
) -> Result<Block> {
    let m = basis.len();
    let fill = |mut put: Box<dyn FnMut(usize, usize, c64) + '_>| {
        for (p, &i) in basis.iter().enumerate() {
            for t in terms {
                let a = layout.local_index(i, &t.sites);
                for &(row, col, v) in &t.entries {
                    if row == a {
                        put(p, position[layout.replace_local(i, &t.sites, col)], v);
                    }
                }
            }
        }
    };
    let failed = |e| LabError::Numerical(format!("block eigendecomposition failed: {e:?}"));
    if real {
        let mut h = Mat::<f64>::zeros(m, m);
        fill(Box::new(|p, q, v| h[(p, q)] += v.re));
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(failed)?;
        let energies = (0..m).map(|k| evd.S()[k]).collect();
        Ok(Block { basis, energies, vectors: Vectors::Real(evd.U().to_owned()) })
    } else {
        let mut h = Mat::<c64>::zeros(m, m);
        fill(Box::new(|p, q, v| h[(p, q)] += v));
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(failed)?;
        let energies = (0..m).map(|k| evd.S()[k].re).collect();
        Ok(Block { basis, energies, vectors: Vectors::Complex(evd.U().to_owned()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::{eigvalsh, gibbs_state, partial_trace};
    use crate::hamiltonian::{build_model, Couplings, LocalTerm, ModelKind};
    use crate::lattice::InteractionGraph;

    fn model(kind: ModelKind, n: usize, pairs: &[(&str, f64)]) -> LocalHamiltonian {
        let c: Couplings = pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        build_model(kind, &InteractionGraph::chain(n).unwrap(), &c).unwrap()
    }

    fn assert_spectrum_matches(h: &LocalHamiltonian) -> SectorSpectrum {
        let s = SectorSpectrum::new(h).unwrap();
        let dense = eigvalsh(&h.assemble_dense().unwrap()).unwrap();
        for (a, b) in s.energies().iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        s
    }

    #[test]
    fn block_structure_of_standard_models() {
        let tfi = assert_spectrum_matches(&model(ModelKind::TransverseIsing, 6, &[("j_zz", 1.0), ("h_x", 0.8)]));
        assert!(tfi.uses_hadamard_frame());
        assert_eq!(tfi.blocks().len(), 2);
        assert!(tfi.blocks().iter().all(Block::is_real));
        let ising = assert_spectrum_matches(&model(ModelKind::Ising, 5, &[("j_zz", 1.0), ("h_z", 0.3)]));
        assert_eq!(ising.largest_block(), 1);
        let heis = assert_spectrum_matches(&model(ModelKind::Heisenberg, 6, &[("j", 1.0)]));
        assert_eq!(heis.largest_block(), 20);
        let xx = assert_spectrum_matches(&model(ModelKind::Xx, 5, &[("j", 0.7), ("h_z", 0.2)]));
        assert_eq!(xx.blocks().len(), 6);
    }

    #[test]
    fn reduced_gibbs_states_match_dense() {
        let h = model(ModelKind::TransverseIsing, 5, &[("j_zz", 1.0), ("h_x", 0.9), ("h_z", 0.2)]);
        let s = SectorSpectrum::new(&h).unwrap();
        let (w, log_z) = s.gibbs_weights(0.6).unwrap();
        let g = gibbs_state(&h.assemble_dense().unwrap(), 0.6).unwrap();
        assert!((log_z - g.log_partition).abs() < 1e-12);
        for keep in [Region::new([2]), Region::new([0, 3]), Region::new([1, 2, 4])] {
            let fast = s.reduced_state(&w, &keep).unwrap();
            let slow = partial_trace(g.state.operator(), &keep).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-13);
        }
        assert!(s.dense_state(&w).unwrap().max_abs_diff(g.state.operator()) < 1e-13);
    }

    #[test]
    fn complex_terms_use_one_complex_block() {
        let g = InteractionGraph::chain(3).unwrap();
        let xy = pauli::kron(&pauli::x(), &pauli::y());
        let yx = pauli::kron(&pauli::y(), &pauli::x());
        let terms = vec![
            LocalTerm::new(Region::new([0, 1]), &xy + &yx, 2).unwrap(),
            LocalTerm::new(Region::new([1, 2]), pauli::kron(&pauli::z(), &pauli::y()), 2).unwrap(),
            LocalTerm::new(Region::new([0]), pauli::x(), 2).unwrap(),
        ];
        let h = LocalHamiltonian::new(g, 2, terms).unwrap();
        let s = assert_spectrum_matches(&h);
        assert!(s.blocks().iter().any(|b| !b.is_real()));
        let (w, _) = s.gibbs_weights(-0.4).unwrap();
        let dense = gibbs_state(&h.assemble_dense().unwrap(), -0.4).unwrap();
        assert!(s.dense_state(&w).unwrap().max_abs_diff(dense.state.operator()) < 1e-13);
    }

    #[test]
    fn product_state_populations() {
        let h = model(ModelKind::TransverseIsing, 4, &[("j_zz", 1.0), ("h_x", 0.5)]);
        let s = SectorSpectrum::new(&h).unwrap();
        let plus = Mat::from_fn(2, 2, |_, _| c64::new(0.5, 0.0));
        let up = Mat::from_fn(2, 2, |i, j| c64::new(if i == 0 && j == 0 { 1.0 } else { 0.0 }, 0.0));
        let locals = vec![plus.clone(), up.clone(), plus, up];
        let w = s.product_state_weights(&locals).unwrap();
        assert!((w.total() - 1.0).abs() < 1e-12);
        // <H> of the product state two ways
        let mut rho = Mat::<c64>::identity(1, 1);
        for l in &locals {
            rho = pauli::kron(&rho, l);
        }
        let rho = DenseOperator::new(&[2, 2, 2, 2], rho).unwrap();
        let direct = h.assemble_dense().unwrap().expectation(&rho).re;
        assert!((s.mean_energy(&w) - direct).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let h = model(ModelKind::Ising, 15, &[("j_zz", 1.0)]);
        assert!(matches!(SectorSpectrum::new(&h), Err(LabError::Resource { .. })));
    }
}
