//! Local Hamiltonians built from edge and single-site terms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::budget::{checked_space_dim, max_dense_dim};
use crate::densequantum::{eigvalsh_mat, hermiticity_defect, pauli, DenseOperator, SiteLayout};
use crate::error::{domain, LabError, Result};
use crate::lattice::{InteractionGraph, Region};

const TERM_HERMITICITY: f64 = 1e-12;
const TERM_EQUALITY: f64 = 1e-12;

/// A Hermitian operator acting on one site or on the two endpoints of an edge.
/// Two-site matrices put the smaller site label in the more significant factor.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    support: Region,
    matrix: Mat<c64>,
    norm: f64,
}

impl LocalTerm {
    pub fn new(support: Region, matrix: Mat<c64>, local_dim: usize) -> Result<Self> {
        let size = local_dim.pow(support.len() as u32);
        if support.is_empty() || support.len() > 2 {
            return domain(format!("term support {support} must have one or two sites"));
        }
        if matrix.nrows() != size || matrix.ncols() != size {
            return domain(format!("term on {support} needs a {size}x{size} matrix"));
        }
        let scale = max_abs(&matrix).max(1.0);
        let defect = hermiticity_defect(&matrix);
        if defect > TERM_HERMITICITY * scale {
            return domain(format!("term on {support} is not Hermitian (defect {defect:e})"));
        }
        let norm = eigvalsh_mat(&matrix)?.into_iter().fold(0.0, |m: f64, l| m.max(l.abs()));
        Ok(LocalTerm { support, matrix, norm })
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    fn is_zero(&self) -> bool {
        max_abs(&self.matrix) == 0.0
    }
}

/// Supported nearest-neighbour models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `j_zz Σ Z Z`
    Ising,
    /// `j_zz Σ Z Z + h_x Σ X`
    TransverseIsing,
    /// `j Σ (X X + Y Y + Z Z)`
    Heisenberg,
    /// `j Σ (X X + Y Y)`
    Xx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Ising, ModelKind::TransverseIsing, ModelKind::Heisenberg, ModelKind::Xx];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ising => "ising",
            ModelKind::TransverseIsing => "transverse_ising",
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::Xx => "xx",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ising => &["j_zz"],
            ModelKind::TransverseIsing => &["j_zz", "h_x"],
            ModelKind::Heisenberg | ModelKind::Xx => &["j"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
            LabError::Config(format!("unknown model '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

/// Named coupling constants. Every model also accepts an optional
/// longitudinal field `h_z`.
pub type Couplings = BTreeMap<String, f64>;

/// `Σ_e h_e` on an interaction graph with local dimension `d`.
#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    graph: InteractionGraph,
    terms: Vec<LocalTerm>,
    local_dim: usize,
}

impl LocalHamiltonian {
    /// Validates that every two-site support is an edge of `graph`.
    pub fn new(graph: InteractionGraph, local_dim: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        if local_dim < 2 {
            return domain("local dimension must be at least 2");
        }
        for t in &terms {
            graph.check_region(&t.support)?;
            if t.matrix.nrows() != local_dim.pow(t.support.len() as u32) {
                return domain(format!("term on {} has the wrong local dimension", t.support));
            }
            if let [u, v] = t.support.sites() {
                if !graph.has_edge(*u, *v) {
                    return domain(format!("term on {} is not supported on an edge", t.support));
                }
            }
        }
        Ok(LocalHamiltonian { graph, terms, local_dim })
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn num_sites(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn site_dims(&self) -> Vec<usize> {
        vec![self.local_dim; self.num_sites()]
    }

    /// Sum of all term matrices embedded in the full space.
    pub fn assemble_dense(&self) -> Result<DenseOperator> {
        let dim = checked_space_dim(self.local_dim, self.num_sites(), max_dense_dim(), "dense Hamiltonian")?;
        let layout = SiteLayout::new(&self.site_dims());
        let mut mat = Mat::<c64>::zeros(dim, dim);
        for t in &self.terms {
            let sites = t.support.sites();
            let k = t.matrix.nrows();
            for row in 0..dim {
                let a = layout.local_index(row, sites);
                for b in 0..k {
                    let v = t.matrix[(a, b)];
                    if v != c64::new(0.0, 0.0) {
                        mat[(row, layout.replace_local(row, sites, b))] += v;
                    }
                }
            }
        }
        DenseOperator::new(&self.site_dims(), mat)
    }

    /// Terms with support inside `b`. The vertex set is unchanged; only
    /// edges inside `b` remain in the graph.
    pub fn truncate_to_region(&self, b: &Region) -> Result<LocalHamiltonian> {
        self.graph.check_region(b)?;
        let edges: Vec<[usize; 2]> =
            self.graph.edges().iter().copied().filter(|e| b.contains(e[0]) && b.contains(e[1])).collect();
        let graph = InteractionGraph::from_edges(self.num_sites(), edges, self.graph.spatial_dim())?;
        let terms = self.terms.iter().filter(|t| t.support.is_subset(b)).cloned().collect();
        Ok(LocalHamiltonian { graph, terms, local_dim: self.local_dim })
    }

    /// Terms with support inside `b`, relabeled onto the subsystem `b`
    /// (sites in increasing order).
    pub fn restrict_to_sites(&self, b: &Region) -> Result<LocalHamiltonian> {
        let graph = self.graph.induced(b)?;
        let pos = |v: usize| b.sites().binary_search(&v).expect("support inside region");
        let terms = self
            .terms
            .iter()
            .filter(|t| t.support.is_subset(b))
            .map(|t| LocalTerm { support: t.support.sites().iter().map(|&v| pos(v)).collect(), ..t.clone() })
            .collect();
        Ok(LocalHamiltonian { graph, terms, local_dim: self.local_dim })
    }

    /// Sum of two Hamiltonians on the same vertex set; edges are merged.
    pub fn union(&self, other: &LocalHamiltonian) -> Result<LocalHamiltonian> {
        self.check_compatible(other)?;
        let edges = self.graph.edges().iter().chain(other.graph.edges()).copied();
        let graph = InteractionGraph::from_edges(self.num_sites(), edges.collect::<Vec<_>>(), self.graph.spatial_dim())?;
        let terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Ok(LocalHamiltonian { graph, terms, local_dim: self.local_dim })
    }

    /// `self − other`, one term per support on which the two differ.
    pub fn difference(&self, other: &LocalHamiltonian) -> Result<LocalHamiltonian> {
        self.check_compatible(other)?;
        let mine = self.summed_by_support();
        let theirs = other.summed_by_support();
        let mut terms = Vec::new();
        let keys: std::collections::BTreeSet<&Vec<usize>> = mine.keys().chain(theirs.keys()).collect();
        for key in keys {
            let size = self.local_dim.pow(key.len() as u32);
            let zero = Mat::<c64>::zeros(size, size);
            let a = mine.get(key).unwrap_or(&zero);
            let b = theirs.get(key).unwrap_or(&zero);
            let diff = a - b;
            if max_abs(&diff) > TERM_EQUALITY {
                terms.push(LocalTerm::new(Region::new(key.iter().copied()), diff, self.local_dim)?);
            }
        }
        let edges = self.graph.edges().iter().chain(other.graph.edges()).copied();
        let graph = InteractionGraph::from_edges(self.num_sites(), edges.collect::<Vec<_>>(), self.graph.spatial_dim())?;
        Ok(LocalHamiltonian { graph, terms, local_dim: self.local_dim })
    }

    /// Union of the supports on which `self` and `other` differ.
    pub fn difference_support(&self, other: &LocalHamiltonian) -> Result<Region> {
        let diff = self.difference(other)?;
        Ok(diff.terms.iter().fold(Region::empty(), |acc, t| acc.union(&t.support)))
    }

    /// Edge terms with on-site terms folded in: each site's field is split
    /// equally among the graph edges at that site. Sites without edges keep
    /// their single-site term. Identically zero results are dropped.
    pub fn folded_edge_terms(&self) -> Result<Vec<LocalTerm>> {
        let d = self.local_dim;
        let id = Mat::<c64>::identity(d, d);
        let mut per_edge: BTreeMap<[usize; 2], Mat<c64>> =
            self.graph.edges().iter().map(|&e| (e, Mat::zeros(d * d, d * d))).collect();
        let mut isolated: BTreeMap<usize, Mat<c64>> = BTreeMap::new();
        for t in &self.terms {
            match *t.support.sites() {
                [u, v] => {
                    let slot = per_edge.get_mut(&[u, v]).expect("validated edge");
                    *slot += &t.matrix;
                }
                [v] => {
                    let deg = self.graph.degree(v);
                    if deg == 0 {
                        let slot = isolated.entry(v).or_insert_with(|| Mat::zeros(d, d));
                        *slot += &t.matrix;
                        continue;
                    }
                    let share = c64::new(1.0 / deg as f64, 0.0);
                    for &w in self.graph.neighbors(v) {
                        let key = [v.min(w), v.max(w)];
                        let lifted = if v < w { pauli::kron(&t.matrix, &id) } else { pauli::kron(&id, &t.matrix) };
                        let slot = per_edge.get_mut(&key).expect("graph edge");
                        *slot += Mat::from_fn(d * d, d * d, |i, j| lifted[(i, j)] * share);
                    }
                }
                _ => unreachable!("terms have one or two sites"),
            }
        }
        let mut out = Vec::new();
        for ([u, v], m) in per_edge {
            out.push(LocalTerm::new(Region::new([u, v]), m, d)?);
        }
        for (v, m) in isolated {
            out.push(LocalTerm::new(Region::new([v]), m, d)?);
        }
        out.retain(|t| !t.is_zero());
        Ok(out)
    }

    /// `J = max_e ‖h_e‖` over the folded edge terms.
    pub fn interaction_strength(&self) -> Result<f64> {
        Ok(self.folded_edge_terms()?.iter().map(LocalTerm::norm).fold(0.0, f64::max))
    }

    /// Sum of term norms, an upper bound on `‖H‖`.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(LocalTerm::norm).sum()
    }

    fn summed_by_support(&self) -> BTreeMap<Vec<usize>, Mat<c64>> {
        let mut out: BTreeMap<Vec<usize>, Mat<c64>> = BTreeMap::new();
        for t in &self.terms {
            let size = t.matrix.nrows();
            let slot = out.entry(t.support.sites().to_vec()).or_insert_with(|| Mat::zeros(size, size));
            *slot += &t.matrix;
        }
        out
    }

    fn check_compatible(&self, other: &LocalHamiltonian) -> Result<()> {
        if self.num_sites() != other.num_sites() || self.local_dim != other.local_dim {
            return domain("Hamiltonians live on different graphs or local dimensions");
        }
        Ok(())
    }
}

/// Nearest-neighbour model on `graph`. Zero couplings produce no terms.
pub fn build_model(kind: ModelKind, graph: &InteractionGraph, couplings: &Couplings) -> Result<LocalHamiltonian> {
    for key in couplings.keys() {
        if !kind.required().contains(&key.as_str()) && key != "h_z" {
            return Err(LabError::Config(format!("coupling '{key}' is not used by model {kind}")));
        }
    }
    let get = |key: &str| {
        couplings
            .get(key)
            .copied()
            .ok_or_else(|| LabError::Config(format!("model {kind} needs coupling '{key}'")))
    };
    for key in kind.required() {
        if !get(key)?.is_finite() {
            return Err(LabError::Config(format!("coupling '{key}' must be finite")));
        }
    }
    let [x, y, z] = pauli::basis();
    let scaled = |m: Mat<c64>, s: f64| Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s);
    let zz = pauli::kron(&z, &z);
    let bond = match kind {
        ModelKind::Ising | ModelKind::TransverseIsing => scaled(zz, get("j_zz")?),
        ModelKind::Heisenberg => scaled(&pauli::kron(&x, &x) + &pauli::kron(&y, &y) + &zz, get("j")?),
        ModelKind::Xx => scaled(&pauli::kron(&x, &x) + &pauli::kron(&y, &y), get("j")?),
    };
    let mut field = Mat::<c64>::zeros(2, 2);
    if kind == ModelKind::TransverseIsing {
        field += scaled(x.clone(), get("h_x")?);
    }
    if let Some(&hz) = couplings.get("h_z") {
        if !hz.is_finite() {
            return Err(LabError::Config("coupling 'h_z' must be finite".into()));
        }
        field += scaled(z.clone(), hz);
    }
    let mut terms = Vec::new();
    if max_abs(&bond) > 0.0 {
        for &[u, v] in graph.edges() {
            terms.push(LocalTerm::new(Region::new([u, v]), bond.clone(), 2)?);
        }
    }
    if max_abs(&field) > 0.0 {
        for v in 0..graph.num_vertices() {
            terms.push(LocalTerm::new(Region::new([v]), field.clone(), 2)?);
        }
    }
    LocalHamiltonian::new(graph.clone(), 2, terms)
}

pub(crate) fn max_abs(m: &Mat<c64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::eigvalsh;

    fn couplings(pairs: &[(&str, f64)]) -> Couplings {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn chain(n: usize) -> InteractionGraph {
        InteractionGraph::chain(n).unwrap()
    }

    #[test]
    fn ising_chain_terms_and_diagonal() {
        let h = build_model(ModelKind::Ising, &chain(3), &couplings(&[("j_zz", 1.0)])).unwrap();
        assert_eq!(h.terms().len(), 2);
        assert!(h.terms().iter().all(|t| (t.norm() - 1.0).abs() < 1e-15));
        let m = h.assemble_dense().unwrap();
        // zz on bits (b0 b1), (b1 b2), b0 most significant
        let expected: Vec<f64> = (0..8)
            .map(|i: usize| {
                let s = |k: usize| if (i >> (2 - k)) & 1 == 0 { 1.0 } else { -1.0 };
                s(0) * s(1) + s(1) * s(2)
            })
            .collect();
        assert_eq!(expected, vec![2.0, 0.0, -2.0, 0.0, 0.0, -2.0, 0.0, 2.0]);
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_eq!(m.mat()[(i, j)], c64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn zero_couplings_give_zero_operator() {
        let h = build_model(ModelKind::TransverseIsing, &chain(2), &couplings(&[("j_zz", 0.0), ("h_x", 0.0)])).unwrap();
        let m = h.assemble_dense().unwrap();
        assert_eq!(max_abs(m.mat()), 0.0);
        assert_eq!(h.interaction_strength().unwrap(), 0.0);
    }

    #[test]
    fn heisenberg_dimer_spectrum() {
        let h = build_model(ModelKind::Heisenberg, &chain(2), &couplings(&[("j", 1.0)])).unwrap();
        let ev = eigvalsh(&h.assemble_dense().unwrap()).unwrap();
        for (a, b) in ev.iter().zip([-3.0, 1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn model_errors() {
        assert!(matches!("potts".parse::<ModelKind>(), Err(LabError::Config(_))));
        assert!(build_model(ModelKind::TransverseIsing, &chain(2), &couplings(&[("j_zz", 1.0)])).is_err());
        assert!(build_model(ModelKind::Ising, &chain(2), &couplings(&[("j_zz", 1.0), ("h_y", 1.0)])).is_err());
        assert_eq!("transverse_ising".parse::<ModelKind>().unwrap(), ModelKind::TransverseIsing);
    }

    #[test]
    fn single_site_term_embeds_on_the_left() {
        let g = chain(2);
        let term = LocalTerm::new(Region::new([0]), pauli::y(), 2).unwrap();
        let h = LocalHamiltonian::new(g, 2, vec![term]).unwrap();
        let want = pauli::kron(&pauli::y(), &pauli::identity());
        assert_eq!(h.assemble_dense().unwrap().mat(), &want);
    }

    #[test]
    fn assembly_is_linear_in_term_lists() {
        let g = chain(4);
        let h = build_model(ModelKind::TransverseIsing, &g, &couplings(&[("j_zz", 0.7), ("h_x", -0.4)])).unwrap();
        let left = h.truncate_to_region(&Region::new([0, 1])).unwrap();
        let right = h.truncate_to_region(&Region::new([2, 3])).unwrap();
        let middle = h.difference(&left.union(&right).unwrap()).unwrap();
        let sum = left.assemble_dense().unwrap().add(&right.assemble_dense().unwrap()).unwrap();
        let sum = sum.add(&middle.assemble_dense().unwrap()).unwrap();
        assert!(sum.max_abs_diff(&h.assemble_dense().unwrap()) < 1e-15);
        assert_eq!(h.difference_support(&left.union(&right).unwrap()).unwrap(), Region::new([1, 2]));
    }

    #[test]
    fn truncation_keeps_contained_terms() {
        let h = build_model(ModelKind::Ising, &chain(5), &couplings(&[("j_zz", 1.0)])).unwrap();
        let b = h.truncate_to_region(&Region::new([1, 2, 3])).unwrap();
        let supports: Vec<_> = b.terms().iter().map(|t| t.support().sites().to_vec()).collect();
        assert_eq!(supports, vec![vec![1, 2], vec![2, 3]]);
        assert!(h.truncate_to_region(&Region::empty()).unwrap().terms().is_empty());
        let all = h.truncate_to_region(&h.graph().vertices()).unwrap();
        assert!(all.assemble_dense().unwrap().max_abs_diff(&h.assemble_dense().unwrap()) == 0.0);
        assert!(b.interaction_strength().unwrap() <= h.interaction_strength().unwrap());
        assert!(h.difference_support(&h).unwrap().is_empty());
    }

    #[test]
    fn changed_bond_is_the_difference_support() {
        let g = chain(4);
        let h = build_model(ModelKind::Ising, &g, &couplings(&[("j_zz", 1.0)])).unwrap();
        let mut terms = h.terms().to_vec();
        terms[1] = LocalTerm::new(Region::new([1, 2]), pauli::kron(&pauli::z(), &pauli::z()), 2).unwrap();
        terms[1].matrix = Mat::from_fn(4, 4, |i, j| terms[1].matrix[(i, j)] * 0.5);
        let h0 = LocalHamiltonian::new(g, 2, terms).unwrap();
        assert_eq!(h.difference_support(&h0).unwrap(), Region::new([1, 2]));
    }

    #[test]
    fn restriction_relabels_sites() {
        let h = build_model(ModelKind::TransverseIsing, &chain(5), &couplings(&[("j_zz", 1.0), ("h_x", 0.5)])).unwrap();
        let sub = h.restrict_to_sites(&Region::new([2, 3, 4])).unwrap();
        assert_eq!(sub.num_sites(), 3);
        let direct = build_model(ModelKind::TransverseIsing, &chain(3), &couplings(&[("j_zz", 1.0), ("h_x", 0.5)])).unwrap();
        assert!(sub.assemble_dense().unwrap().max_abs_diff(&direct.assemble_dense().unwrap()) < 1e-15);
    }

    #[test]
    fn field_folding_splits_by_degree() {
        let h = build_model(ModelKind::TransverseIsing, &chain(3), &couplings(&[("j_zz", 1.0), ("h_x", 1.0)])).unwrap();
        let folded = h.folded_edge_terms().unwrap();
        assert_eq!(folded.len(), 2);
        // edge (0,1): ZZ + X⊗1 + (1⊗X)/2
        let [x, _, z] = pauli::basis();
        let id = pauli::identity();
        let want = &(&pauli::kron(&z, &z) + &pauli::kron(&x, &id)) + &Mat::from_fn(4, 4, |i, j| pauli::kron(&id, &x)[(i, j)] * 0.5);
        let diff = &want - folded[0].matrix();
        assert!(max_abs(&diff) < 1e-15);
        // folded terms sum to H
        let g = h.graph().clone();
        let refolded = LocalHamiltonian::new(g, 2, folded).unwrap();
        assert!(refolded.assemble_dense().unwrap().max_abs_diff(&h.assemble_dense().unwrap()) < 1e-14);
        // ‖ZZ + X⊗1 + 1⊗X/2‖ = sqrt(1 + 1.5^2)... checked against dense eigenvalues
        let ev = eigvalsh_mat(&want).unwrap();
        let expect = ev.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        assert!((h.interaction_strength().unwrap() - expect).abs() < 1e-14);
        assert!((expect - 1.8027756377319946).abs() < 1e-12);
    }

    #[test]
    fn isolated_sites_keep_their_field() {
        let g = InteractionGraph::from_edges(2, [], 0).unwrap();
        let h = build_model(ModelKind::TransverseIsing, &g, &couplings(&[("j_zz", 1.0), ("h_x", 0.3)])).unwrap();
        let folded = h.folded_edge_terms().unwrap();
        assert_eq!(folded.len(), 2);
        assert!((h.interaction_strength().unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn reflection_preserves_the_spectrum() {
        let n = 5;
        let c = couplings(&[("j_zz", 1.0), ("h_x", 0.6), ("h_z", 0.2)]);
        let h = build_model(ModelKind::TransverseIsing, &chain(n), &c).unwrap();
        let swap = Mat::from_fn(4, 4, |i, j| c64::new(if j == ((i & 1) << 1 | i >> 1) { 1.0 } else { 0.0 }, 0.0));
        let reflected: Vec<LocalTerm> = h
            .terms()
            .iter()
            .map(|t| {
                let sites: Region = t.support().sites().iter().map(|&v| n - 1 - v).collect();
                let m = if sites.len() == 2 { &(&swap * t.matrix()) * &swap } else { t.matrix().clone() };
                LocalTerm::new(sites, m, 2).unwrap()
            })
            .collect();
        let r = LocalHamiltonian::new(chain(n), 2, reflected).unwrap();
        let a = eigvalsh(&h.assemble_dense().unwrap()).unwrap();
        let b = eigvalsh(&r.assemble_dense().unwrap()).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(r.assemble_dense().unwrap().is_hermitian());
    }
}
