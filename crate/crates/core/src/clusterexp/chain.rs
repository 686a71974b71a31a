//! Truncated series on a chain as an MPO, and positivity by squaring.
//!
//! An allowed letter set on a chain splits uniquely into polymers: runs of
//! consecutive edges, or the single-site letter of an isolated site, each
//! covering fewer than `L` sites. Because distinct polymers act on disjoint
//! sites they commute, and the kept words of total order `j` factor as
//!
//! `Σ_{polymers} Σ_{j_1 + … + j_m ≤ j_max} Π_p G_{j_p}(p)`
//!
//! where `G_j(p)` sums `(−β)^j / j! h(w)` over words using exactly the
//! letters of `p`. The MPO is the automaton reading sites left to right
//! whose bond state is either "between polymers, order spent so far k" or
//! "inside polymer p entered with order k, internal index t"; each `G(p)`
//! is split into site cores by SVD with the order `j` as an extra index on
//! its last core.

use faer::{c64, Mat};
use serde::Serialize;

use super::mpo::{Mpo, SiteTensor, LOSSLESS_FLOOR};
use super::series::{exact_letter_set_series, ClusterAlphabet};
use crate::densequantum::{eigvalsh, trace_distance, DenseOperator};
use crate::error::{domain, LabError, Result};
use crate::hamiltonian::LocalHamiltonian;

/// MPO for the truncated series together with its raw bond dimensions.
#[derive(Clone, Debug)]
pub struct SeriesMpo {
    pub mpo: Mpo,
    /// Bond dimensions of the automaton before lossless compression.
    pub automaton_bond_dims: Vec<usize>,
    pub compression_error: f64,
}

struct Polymer {
    start: usize,
    end: usize,
    letters: usize,
    cores: Vec<SiteTensor>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum State {
    Free(usize),
    Inside { polymer: usize, spent: usize, t: usize },
}

fn check_chain(h: &LocalHamiltonian) -> Result<()> {
    if h.graph().edges().iter().any(|&[u, v]| v != u + 1) {
        return Err(LabError::Unsupported("the MPO construction needs a chain graph with nearest-neighbour edges only".into()));
    }
    Ok(())
}

/// Splits `series[j]` (operators on `s` sites) into `s` cores, the last one
/// carrying `j` as its right index.
fn split_into_cores(series: &[Mat<c64>], s: usize, d: usize) -> Result<Vec<SiteTensor>> {
    let orders = series.len();
    let dd = d * d;
    let dim = series[0].nrows();
    // entries ordered as (o_1, i_1, …, o_s, i_s, j)
    let mut flat = vec![c64::new(0.0, 0.0); dd.pow(s as u32) * orders];
    for (j, g) in series.iter().enumerate() {
        for o in 0..dim {
            for i in 0..dim {
                let mut pos = 0;
                for t in 0..s {
                    let shift = d.pow((s - 1 - t) as u32);
                    pos = pos * dd + (o / shift % d) * d + i / shift % d;
                }
                flat[pos * orders + j] = g[(o, i)];
            }
        }
    }
    let mut cores = Vec::with_capacity(s);
    let mut rank = 1;
    let mut rest = flat;
    for _ in 1..s {
        let rows = rank * dd;
        let cols = rest.len() / rows;
        let m = Mat::from_fn(rows, cols, |r, c| rest[r * cols + c]);
        let svd = m.thin_svd().map_err(|e| LabError::Numerical(format!("SVD failed splitting a polymer: {e:?}")))?;
        let sv: Vec<f64> = (0..rows.min(cols)).map(|k| svd.S()[k].re).collect();
        let keep = sv.iter().take_while(|&&x| x > LOSSLESS_FLOOR * sv[0]).count().max(1);
        let u = svd.U();
        let core = (0..rows).flat_map(|r| (0..keep).map(move |k| u[(r, k)])).collect();
        cores.push(SiteTensor::new(rank, d, keep, core)?);
        let v = svd.V();
        rest = (0..keep).flat_map(|k| (0..cols).map(move |c| (k, c))).map(|(k, c)| v[(c, k)].conj() * sv[k]).collect();
        rank = keep;
    }
    cores.push(SiteTensor::new(rank, d, orders, rest)?);
    Ok(cores)
}

fn polymers(h: &LocalHamiltonian, beta: f64, max_cluster: usize, max_order: usize) -> Result<Vec<Polymer>> {
    let alphabet = ClusterAlphabet::new(h)?;
    let d = h.local_dim();
    let n = h.num_sites();
    // edge letter starting at site v, or single-site letter at v
    let mut edge_at = vec![None; n];
    let mut single_at = vec![None; n];
    for (k, t) in alphabet.letters().iter().enumerate() {
        match *t.support().sites() {
            [u, _] => edge_at[u] = Some(k),
            [v] => single_at[v] = Some(k),
            _ => unreachable!("letters have one or two sites"),
        }
    }
    let mut out = Vec::new();
    let mut push = |start: usize, end: usize, letters: Vec<(usize, usize)>| -> Result<()> {
        let s = end - start + 1;
        let dims = vec![d; s];
        let mats: Vec<Mat<c64>> = letters
            .iter()
            .map(|&(k, local)| {
                let sites: Vec<usize> = (local..local + alphabet.letters()[k].support().len()).collect();
                DenseOperator::embed(&dims, alphabet.letters()[k].matrix(), &sites).map(DenseOperator::into_mat)
            })
            .collect::<Result<_>>()?;
        let series = exact_letter_set_series(&mats, beta, max_order);
        out.push(Polymer { start, end, letters: letters.len(), cores: split_into_cores(&series, s, d)? });
        Ok(())
    };
    for v in 0..n {
        if let Some(k) = single_at[v] {
            if max_cluster > 1 {
                push(v, v, vec![(k, 0)])?;
            }
        }
        let mut letters = Vec::new();
        let mut end = v;
        while let Some(k) = edge_at.get(end).copied().flatten() {
            letters.push((k, end - v));
            end += 1;
            if end - v + 1 >= max_cluster || letters.len() > max_order {
                break;
            }
            push(v, end, letters.clone())?;
        }
    }
    Ok(out)
}

/// Enumerated states on every bond, left boundary first.
fn bond_states(polymers: &[Polymer], n: usize, max_order: usize) -> Vec<Vec<State>> {
    let mut bonds = vec![vec![State::Free(0)]];
    for b in 1..n {
        let mut states: Vec<State> = (0..=max_order).map(State::Free).collect();
        for (p, poly) in polymers.iter().enumerate() {
            if poly.start < b && b <= poly.end {
                let rank = poly.cores[b - poly.start - 1].shape().3;
                for spent in 0..=max_order - poly.letters {
                    states.extend((0..rank).map(|t| State::Inside { polymer: p, spent, t }));
                }
            }
        }
        bonds.push(states);
    }
    bonds.push(vec![State::Free(0)]);
    bonds
}

/// Adds the `(cl, cr)` slice of `core` to the `(l, r)` slice of `x`.
fn put(x: &mut SiteTensor, l: usize, r: usize, core: &SiteTensor, cl: usize, cr: usize) {
    let d = core.shape().1;
    for o in 0..d {
        for i in 0..d {
            x.add_at(l, o, i, r, core.get(cl, o, i, cr));
        }
    }
}

/// MPO of `Σ_{j ≤ j_max} Σ_{w kept} (−β)^j / j! h(w)` on a chain.
pub fn mpo_from_truncation(h: &LocalHamiltonian, beta: f64, max_cluster: usize, max_order: usize) -> Result<SeriesMpo> {
    check_chain(h)?;
    if !beta.is_finite() {
        return domain("inverse temperature must be finite");
    }
    if max_cluster == 0 {
        return domain("cluster size cap L must be at least 1");
    }
    let (n, d) = (h.num_sites(), h.local_dim());
    if n == 0 {
        return domain("the chain has no sites");
    }
    if beta == 0.0 || max_order == 0 {
        let mpo = Mpo::identity(n, d)?;
        return Ok(SeriesMpo { automaton_bond_dims: mpo.bond_dims(), mpo, compression_error: 0.0 });
    }
    let polys = polymers(h, beta, max_cluster, max_order)?;
    let bonds = bond_states(&polys, n, max_order);
    let index: Vec<std::collections::HashMap<State, usize>> =
        bonds.iter().map(|states| states.iter().enumerate().map(|(k, &s)| (s, k)).collect()).collect();
    let target = |bond: usize, s: State| -> Option<usize> {
        if bond == n {
            return matches!(s, State::Free(_)).then_some(0);
        }
        index[bond].get(&s).copied()
    };
    let mut sites = Vec::with_capacity(n);
    for v in 0..n {
        let mut x = SiteTensor::zeros(bonds[v].len(), d, bonds[v + 1].len());
        for (l, &state) in bonds[v].iter().enumerate() {
            match state {
                State::Free(spent) => {
                    if let Some(r) = target(v + 1, State::Free(spent)) {
                        for o in 0..d {
                            x.add_at(l, o, o, r, c64::new(1.0, 0.0));
                        }
                    }
                    for (p, poly) in polys.iter().enumerate().filter(|(_, q)| q.start == v) {
                        if spent + poly.letters > max_order {
                            continue;
                        }
                        let core = &poly.cores[0];
                        if poly.end == v {
                            for j in poly.letters..=max_order - spent {
                                if let Some(r) = target(v + 1, State::Free(spent + j)) {
                                    put(&mut x, l, r, core, 0, j);
                                }
                            }
                        } else {
                            for t in 0..core.shape().3 {
                                if let Some(r) = target(v + 1, State::Inside { polymer: p, spent, t }) {
                                    put(&mut x, l, r, core, 0, t);
                                }
                            }
                        }
                    }
                }
                State::Inside { polymer: p, spent, t } => {
                    let poly = &polys[p];
                    let core = &poly.cores[v - poly.start];
                    if poly.end == v {
                        for j in poly.letters..=max_order - spent {
                            if let Some(r) = target(v + 1, State::Free(spent + j)) {
                                put(&mut x, l, r, core, t, j);
                            }
                        }
                    } else {
                        for t2 in 0..core.shape().3 {
                            if let Some(r) = target(v + 1, State::Inside { polymer: p, spent, t: t2 }) {
                                put(&mut x, l, r, core, t, t2);
                            }
                        }
                    }
                }
            }
        }
        sites.push(x);
    }
    let raw = Mpo::new(sites)?;
    let automaton_bond_dims = raw.bond_dims();
    let c = raw.compress(usize::MAX, LOSSLESS_FLOOR)?;
    Ok(SeriesMpo { mpo: c.mpo, automaton_bond_dims, compression_error: c.error })
}

/// `M†M` with `M ≈ e^{−βH/2}`, positive semidefinite by construction.
#[derive(Clone, Debug)]
pub struct PositiveMpo {
    pub mpo: Mpo,
    /// Bond dimensions of `M` after compression to `max_bond`.
    pub half_bond_dims: Vec<usize>,
    /// Frobenius error of compressing `M`.
    pub half_error: f64,
    /// Frobenius error of the lossless compression of `M†M`.
    pub square_error: f64,
}

pub fn positivity_by_squaring(
    h: &LocalHamiltonian,
    beta: f64,
    max_cluster: usize,
    max_order: usize,
    max_bond: usize,
) -> Result<PositiveMpo> {
    check_chain(h)?;
    if beta == 0.0 {
        let mpo = Mpo::identity(h.num_sites(), h.local_dim())?;
        return Ok(PositiveMpo { half_bond_dims: mpo.bond_dims(), mpo, half_error: 0.0, square_error: 0.0 });
    }
    let half = mpo_from_truncation(h, beta / 2.0, max_cluster, max_order)?;
    let m = half.mpo.compress(max_bond, LOSSLESS_FLOOR)?;
    let square = m.mpo.adjoint().compose(&m.mpo)?.compress(usize::MAX, LOSSLESS_FLOOR)?;
    Ok(PositiveMpo { half_bond_dims: m.mpo.bond_dims(), half_error: half.compression_error + m.error, square_error: square.error, mpo: square.mpo })
}

/// One cluster size of the positivity sweep.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityRow {
    pub max_cluster: usize,
    pub max_bond: usize,
    pub half_max_bond: usize,
    pub min_eigenvalue: f64,
    /// `‖P / Tr P − g(β)‖_1` against the exact Gibbs state.
    pub trace_distance: f64,
    pub half_error: f64,
}

/// Positivity-by-squaring over several cluster sizes, checked densely.
pub fn positivity_sweep(
    h: &LocalHamiltonian,
    beta: f64,
    clusters: &[usize],
    max_order: usize,
    max_bond: usize,
) -> Result<Vec<PositivityRow>> {
    let gibbs = crate::densequantum::gibbs_state(&h.assemble_dense()?, beta)?.state;
    clusters
        .iter()
        .map(|&l| {
            let p = positivity_by_squaring(h, beta, l, max_order, max_bond)?;
            let dense = p.mpo.contract()?;
            let tr = dense.trace().re;
            if tr <= 0.0 {
                return Err(LabError::Numerical(format!("squared MPO has trace {tr:e}")));
            }
            let herm = DenseOperator::new(dense.dims(), Mat::from_fn(dense.dim(), dense.dim(), |i, j| {
                (dense.mat()[(i, j)] + dense.mat()[(j, i)].conj()) * 0.5
            }))?;
            let min_eigenvalue = eigvalsh(&herm)?[0];
            let normalized = herm.scale(c64::new(1.0 / tr, 0.0));
            Ok(PositivityRow {
                max_cluster: l,
                max_bond: p.mpo.max_bond(),
                half_max_bond: p.half_bond_dims.iter().copied().max().unwrap_or(1),
                min_eigenvalue,
                trace_distance: trace_distance(&normalized, gibbs.operator())?,
                half_error: p.half_error,
            })
        })
        .collect()
}
