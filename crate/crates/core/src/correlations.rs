//! Generalized covariance, its Duhamel average, the high-temperature
//! clustering bound and decay fits.

use faer::linalg::solvers::SolveLstsq;
use faer::{c64, Mat};
use serde::Serialize;

use crate::densequantum::{fractional_power, pauli, power_weight, DenseOperator, DensityMatrix};
use crate::error::{domain, LabError, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::lattice::{growth_constant_bound, Region};
use crate::quadrature::UnitRule;
use crate::sectors::{SectorSpectrum, SpectralWeights};

/// Magnitudes at or below this are excluded from logarithmic fits.
pub const COVARIANCE_FLOOR: f64 = 1e-14;

/// Ground-state gaps at or below this count as degenerate.
pub const GROUND_GAP_TOLERANCE: f64 = 1e-10;

/// `Tr(ρ^τ A ρ^{1−τ} B) − Tr(ρA) Tr(ρB)` through explicit matrix powers.
pub fn generalized_covariance(rho: &DensityMatrix, a: &DenseOperator, b: &DenseOperator, tau: f64) -> Result<c64> {
    rho.operator().check_same_space(a)?;
    rho.operator().check_same_space(b)?;
    let left = fractional_power(rho, tau)?;
    let right = fractional_power(rho, 1.0 - tau)?;
    let pa = left.mat() * a.mat();
    let qb = right.mat() * b.mat();
    Ok(trace_of_product(&pa, &qb) - rho.expectation(a) * rho.expectation(b))
}

fn trace_of_product(x: &Mat<c64>, y: &Mat<c64>) -> c64 {
    let n = x.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += x[(i, j)] * y[(j, i)];
        }
    }
    acc
}

/// An operator written in the eigenbasis of a fixed state, with its mean.
#[derive(Clone, Debug)]
pub struct EigenbasisOperator {
    mat: Mat<c64>,
    mean: c64,
    hermitian: bool,
}

impl EigenbasisOperator {
    pub fn mean(&self) -> c64 {
        self.mean
    }
}

/// Generalized covariances against one state, evaluated as eigenbasis double
/// sums `Σ_jk λ_j^τ λ_k^{1−τ} A_jk B_kj`. Each operator is rotated once and
/// then reused for every `τ`.
pub struct CovarianceSweep<'a> {
    rho: &'a DensityMatrix,
    real_vectors: Option<Mat<f64>>,
}

impl<'a> CovarianceSweep<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Self {
        let v = &rho.eigen().vectors;
        let real = (0..v.ncols()).all(|j| (0..v.nrows()).all(|i| v[(i, j)].im == 0.0));
        let real_vectors = real.then(|| Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)].re));
        CovarianceSweep { rho, real_vectors }
    }

    fn finish(&self, mat: Mat<c64>, hermitian: bool) -> EigenbasisOperator {
        let values = &self.rho.eigen().values;
        let mean = values.iter().enumerate().map(|(j, &l)| mat[(j, j)] * l).sum();
        EigenbasisOperator { mat, mean, hermitian }
    }

    /// `V^† A V` for a full-space operator.
    pub fn transform(&self, a: &DenseOperator) -> Result<EigenbasisOperator> {
        self.rho.operator().check_same_space(a)?;
        Ok(self.finish(self.rho.eigen().to_eigenbasis(a.mat()), a.is_hermitian()))
    }

    /// Rotates several single-site operators on `site` at once. Uses
    /// `V^† (L ⊗ 1) V = Σ_ab L_ab V_a^† V_b`, where `V_a` holds the rows of
    /// `V` whose digit on `site` is `a`.
    pub fn transform_site_operators(&self, site: usize, locals: &[Mat<c64>]) -> Result<Vec<EigenbasisOperator>> {
        let layout = self.rho.operator().layout();
        if site >= layout.dims().len() {
            return domain(format!("site {site} outside the system"));
        }
        let d = layout.dims()[site];
        if locals.iter().any(|l| l.nrows() != d || l.ncols() != d) {
            return domain("single-site operator has the wrong dimension");
        }
        let rows: Vec<Vec<usize>> =
            (0..d).map(|a| (0..layout.total()).filter(|&i| layout.digit(i, site) == a).collect()).collect();
        let n = layout.total();
        let mut blocks: Vec<Vec<Option<Mat<c64>>>> = vec![vec![None; d]; d];
        match &self.real_vectors {
            Some(v) => {
                let parts: Vec<Mat<f64>> =
                    rows.iter().map(|r| Mat::from_fn(r.len(), n, |p, k| v[(r[p], k)])).collect();
                for a in 0..d {
                    for b in a..d {
                        let m = parts[a].transpose() * &parts[b];
                        let m = Mat::from_fn(n, n, |i, j| c64::new(m[(i, j)], 0.0));
                        if a != b {
                            blocks[b][a] = Some(m.adjoint().to_owned());
                        }
                        blocks[a][b] = Some(m);
                    }
                }
            }
            None => {
                let v = &self.rho.eigen().vectors;
                let parts: Vec<Mat<c64>> =
                    rows.iter().map(|r| Mat::from_fn(r.len(), n, |p, k| v[(r[p], k)])).collect();
                for a in 0..d {
                    for b in a..d {
                        let m = parts[a].adjoint() * &parts[b];
                        if a != b {
                            blocks[b][a] = Some(m.adjoint().to_owned());
                        }
                        blocks[a][b] = Some(m);
                    }
                }
            }
        }
        Ok(locals
            .iter()
            .map(|l| {
                let mut out = Mat::<c64>::zeros(n, n);
                for a in 0..d {
                    for b in 0..d {
                        let c = l[(a, b)];
                        if c != c64::new(0.0, 0.0) {
                            let m = blocks[a][b].as_ref().expect("filled above");
                            out += Mat::from_fn(n, n, |i, j| m[(i, j)] * c);
                        }
                    }
                }
                let hermitian = (0..d).all(|a| (0..d).all(|b| l[(a, b)] == l[(b, a)].conj()));
                self.finish(out, hermitian)
            })
            .collect())
    }

    pub fn covariance(&self, a: &EigenbasisOperator, b: &EigenbasisOperator, tau: f64) -> c64 {
        let values = &self.rho.eigen().values;
        let p: Vec<f64> = values.iter().map(|&l| power_weight(l, tau)).collect();
        let q: Vec<f64> = values.iter().map(|&l| power_weight(l, 1.0 - tau)).collect();
        let n = values.len();
        let mut acc = c64::new(0.0, 0.0);
        // B_kj = conj(B_jk) for Hermitian B keeps the inner loop on one column
        for k in 0..n {
            let mut col = c64::new(0.0, 0.0);
            if b.hermitian {
                for j in 0..n {
                    col += a.mat[(j, k)] * b.mat[(j, k)].conj() * p[j];
                }
            } else {
                for j in 0..n {
                    col += a.mat[(j, k)] * b.mat[(k, j)] * p[j];
                }
            }
            acc += col * q[k];
        }
        acc - a.mean * b.mean
    }

    /// Gauss-Legendre average over `τ` with `nodes` points, checked against
    /// `2 nodes`; doubles further until the change is below `tolerance` or
    /// `max_nodes` is reached.
    pub fn duhamel(
        &self,
        a: &EigenbasisOperator,
        b: &EigenbasisOperator,
        nodes: usize,
        tolerance: f64,
        max_nodes: usize,
    ) -> Result<DuhamelEstimate> {
        if nodes < 2 {
            return domain("Duhamel quadrature needs at least 2 nodes");
        }
        let eval = |n: usize| -> Result<c64> {
            let rule = UnitRule::gauss_legendre(n)?;
            Ok(rule.integrate(|t| self.covariance(a, b, t)))
        };
        let mut n = nodes;
        let mut coarse = eval(n)?;
        loop {
            let fine = eval(2 * n)?;
            let error = (fine - coarse).norm();
            if error <= tolerance {
                return Ok(DuhamelEstimate { value: fine.re, imaginary: fine.im, error, nodes: 2 * n });
            }
            if 4 * n > max_nodes {
                return Err(LabError::Convergence { best: fine.re, error });
            }
            n *= 2;
            coarse = fine;
        }
    }
}

/// τ-averaged generalized covariance with a node-doubling error estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DuhamelEstimate {
    pub value: f64,
    /// Imaginary part of the quadrature; zero up to rounding for Hermitian pairs.
    pub imaginary: f64,
    pub error: f64,
    pub nodes: usize,
}

/// `∫_0^1 cov^τ_ρ(A, B) dτ` with default tolerance `1e-9` and at most 512 nodes.
pub fn duhamel_covariance(rho: &DensityMatrix, a: &DenseOperator, b: &DenseOperator, nodes: usize) -> Result<DuhamelEstimate> {
    let sweep = CovarianceSweep::new(rho);
    sweep.duhamel(&sweep.transform(a)?, &sweep.transform(b)?, nodes, 1e-9, 512)
}

/// Critical inverse temperature `ln[(1 + √(1 + 4/α))/2] / (2J)`.
pub fn beta_star(alpha: f64, coupling: f64) -> Result<f64> {
    if !(alpha > 0.0 && coupling > 0.0) || !alpha.is_finite() || !coupling.is_finite() {
        return domain("critical inverse temperature needs alpha > 0 and J > 0");
    }
    Ok(((1.0 + (1.0 + 4.0 / alpha).sqrt()) / 2.0).ln() / (2.0 * coupling))
}

/// Correlation length `|ln[α e^{2|β|J}(e^{2|β|J} − 1)]|^{-1}`; zero at `β = 0`.
pub fn xi_of_beta(alpha: f64, coupling: f64, beta: f64) -> Result<f64> {
    let critical = beta_star(alpha, coupling)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    if beta.abs() >= critical {
        return Err(LabError::Regime(format!(
            "bound inapplicable above critical temperature: |beta| = {} >= {critical}",
            beta.abs()
        )));
    }
    let x = (2.0 * beta.abs() * coupling).exp();
    Ok(1.0 / (alpha * x * (x - 1.0)).ln().abs())
}

/// `e^{-r/ξ}` with the `ξ = 0` limit.
fn decay_factor(distance: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        if distance == 0.0 { 1.0 } else { 0.0 }
    } else {
        (-distance / xi).exp()
    }
}

/// Inputs of the high-temperature clustering bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClusteringBoundParams {
    pub alpha: f64,
    pub coupling: f64,
    pub beta: f64,
    /// Minimal distance below which the bound is not asserted.
    pub min_distance: usize,
}

impl ClusteringBoundParams {
    /// `α = 2De` for a `D`-dimensional lattice and `L0 = 1`.
    pub fn for_lattice(spatial_dim: usize, coupling: f64, beta: f64) -> Self {
        ClusteringBoundParams { alpha: growth_constant_bound(spatial_dim.max(1)), coupling, beta, min_distance: 1 }
    }

    pub fn beta_star(&self) -> Result<f64> {
        beta_star(self.alpha, self.coupling)
    }

    pub fn xi(&self) -> Result<f64> {
        xi_of_beta(self.alpha, self.coupling, self.beta)
    }
}

/// Norm and support-boundary size of an observable.
#[derive(Clone, Copy, Debug)]
pub struct ObservableExtent {
    pub norm: f64,
    pub boundary_size: usize,
}

/// A bound value and whether it is asserted at this distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub binding: bool,
}

/// `4a / (ln 3 (1 − e^{−1/ξ})) e^{−dist/ξ}` with `a = ‖A‖‖B‖ min(|∂A|, |∂B|)`.
/// Distances below `L0` give a value flagged non-binding.
pub fn clustering_bound(
    params: &ClusteringBoundParams,
    a: ObservableExtent,
    b: ObservableExtent,
    distance: usize,
) -> Result<BoundValue> {
    let xi = params.xi()?;
    let prefactor = a.norm * b.norm * a.boundary_size.min(b.boundary_size) as f64;
    let value = 4.0 * prefactor / (3f64.ln() * (1.0 - decay_factor(1.0, xi))) * decay_factor(distance as f64, xi);
    Ok(BoundValue { value, binding: distance >= params.min_distance })
}

/// One `(distance, |cov|)` sample from a system of `n_sites` sites.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayPoint {
    pub distance: f64,
    pub magnitude: f64,
    pub n_sites: usize,
}

/// Least-squares fit of `ln|cov| = c + z ln N − dist/ξ`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub xi: f64,
    pub z: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln|cov|`.
    pub residual: f64,
    pub points: Vec<DecayPoint>,
}

/// Fits exponential decay. With `z = Some(_)` the exponent is held fixed;
/// with `None` it is fitted jointly, which needs at least two system sizes.
pub fn fit_decay(points: &[DecayPoint], z: Option<f64>) -> Result<DecayFit> {
    let used: Vec<DecayPoint> = points.iter().copied().filter(|p| p.magnitude > COVARIANCE_FLOOR).collect();
    if used.len() < 3 {
        return domain(format!("decay fit needs at least 3 points above {COVARIANCE_FLOOR:e}, got {}", used.len()));
    }
    let joint = z.is_none();
    if joint {
        let first = used[0].n_sites;
        if used.iter().all(|p| p.n_sites == first) {
            return domain("fitting z needs points from at least two system sizes");
        }
    }
    let cols = if joint { 3 } else { 2 };
    let design = Mat::<f64>::from_fn(used.len(), cols, |i, c| match c {
        0 => 1.0,
        1 => -used[i].distance,
        _ => (used[i].n_sites as f64).ln(),
    });
    let fixed_z = z.unwrap_or(0.0);
    let rhs = Mat::<f64>::from_fn(used.len(), 1, |i, _| used[i].magnitude.ln() - fixed_z * (used[i].n_sites as f64).ln());
    let sol = design.qr().solve_lstsq(&rhs);
    let (intercept, inv_xi) = (sol[(0, 0)], sol[(1, 0)]);
    let z = if joint { sol[(2, 0)] } else { fixed_z };
    if inv_xi <= 0.0 {
        return domain("covariances do not decay with distance");
    }
    let fitted = &design * &sol;
    let sse: f64 = (0..used.len()).map(|i| (rhs[(i, 0)] - fitted[(i, 0)]).powi(2)).sum();
    Ok(DecayFit { xi: 1.0 / inv_xi, z, intercept, residual: (sse / used.len() as f64).sqrt(), points: used })
}

/// One row of a thermal clustering sweep over a site pair at one `τ`.
#[derive(Clone, Debug, Serialize)]
pub struct ClusteringRow {
    pub site_a: usize,
    pub site_b: usize,
    pub distance: usize,
    pub tau: f64,
    /// Largest `|cov^τ(A, B)|` over single-site observables of unit norm.
    pub cov_abs: f64,
    pub bound: f64,
    pub binding: bool,
}

/// Result of [`thermal_clustering_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct ClusteringSweep {
    pub coupling: f64,
    pub beta_star: f64,
    pub xi: f64,
    pub rows: Vec<ClusteringRow>,
}

impl ClusteringSweep {
    /// Binding rows whose covariance exceeds the bound.
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.binding && r.cov_abs > r.bound).count()
    }
}

/// For every pair of distinct qubit sites and every `τ`, the largest
/// `|cov^τ_g(A, B)|` over unit-norm single-site Hermitian `A`, `B`, compared
/// with the clustering bound.
///
/// The identity part of a single-qubit observable drops out of the
/// covariance, and a traceless unit-norm observable is `n·σ` with `|n| = 1`,
/// so the maximum is the largest singular value of the 3×3 Pauli covariance
/// matrix. Pairs are taken with `a < b`; the swapped order is covered when
/// the τ-grid is symmetric under `τ → 1 − τ`.
pub fn thermal_clustering_sweep(
    h: &LocalHamiltonian,
    params: &ClusteringBoundParams,
    taus: &[f64],
) -> Result<ClusteringSweep> {
    if h.local_dim() != 2 {
        return Err(LabError::Unsupported("clustering sweep is implemented for qubits".into()));
    }
    if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return domain("tau values must lie in [0, 1]");
    }
    let xi = params.xi()?;
    let critical = params.beta_star()?;
    let dense = h.assemble_dense()?;
    let gibbs = crate::densequantum::gibbs_state(&dense, params.beta)?;
    let sweep = CovarianceSweep::new(&gibbs.state);
    let graph = h.graph();
    let n = h.num_sites();
    let paulis: Vec<Vec<EigenbasisOperator>> =
        (0..n).map(|v| sweep.transform_site_operators(v, &pauli::basis())).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let Some(distance) = graph.vertex_distance(a, b) else { continue };
            let ext = |v: usize| ObservableExtent { norm: 1.0, boundary_size: graph.boundary(&Region::new([v])).len() };
            let bound = clustering_bound(params, ext(a), ext(b), distance)?;
            for &tau in taus {
                let c = Mat::<c64>::from_fn(3, 3, |i, j| sweep.covariance(&paulis[a][i], &paulis[b][j], tau));
                let sigma = c
                    .singular_values()
                    .map_err(|e| LabError::Numerical(format!("3x3 singular values failed: {e:?}")))?
                    .into_iter()
                    .fold(0.0, f64::max);
                rows.push(ClusteringRow {
                    site_a: a,
                    site_b: b,
                    distance,
                    tau,
                    cov_abs: sigma,
                    bound: bound.value,
                    binding: bound.binding,
                });
            }
        }
    }
    Ok(ClusteringSweep { coupling: params.coupling, beta_star: critical, xi, rows })
}

/// Ground-state covariances of one single-site observable over site pairs.
#[derive(Clone, Debug, Serialize)]
pub struct GroundStateDecay {
    pub ground_energy: f64,
    pub gap: f64,
    /// `(site_a, site_b, distance, cov)`.
    pub rows: Vec<(usize, usize, usize, f64)>,
    /// `None` when fewer than three covariances exceed the floor.
    pub fit: Option<DecayFit>,
}

/// `cov_ψ(A_a, B_b) = <ψ|A_a B_b|ψ> − <ψ|A_a|ψ><ψ|B_b|ψ>` for a unique
/// ground state `ψ`, for each requested pair, with an exponential fit.
pub fn ground_state_covariance_experiment(
    h: &LocalHamiltonian,
    observable: &Mat<c64>,
    pairs: &[(usize, usize)],
) -> Result<GroundStateDecay> {
    let spectrum = SectorSpectrum::new(h)?;
    let (ground, gap) = ground_weights(&spectrum)?;
    let ground_energy = spectrum.mean_energy(&ground);
    let n = h.num_sites();
    let mut rows = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        if a == b || a >= n || b >= n {
            return domain(format!("pair ({a}, {b}) is not two distinct sites"));
        }
        let Some(distance) = h.graph().vertex_distance(a, b) else { continue };
        let keep = Region::new([a, b]);
        let rho = spectrum.reduced_state(&ground, &keep)?;
        let local = |v: usize| DenseOperator::embed(rho.dims(), observable, &[keep.sites().binary_search(&v).expect("in pair")]);
        let (oa, ob) = (local(a)?, local(b)?);
        let joint = oa.matmul(&ob)?.expectation(&rho);
        let cov = joint - oa.expectation(&rho) * ob.expectation(&rho);
        rows.push((a, b, distance, cov.re));
    }
    let points: Vec<DecayPoint> =
        rows.iter().map(|&(_, _, d, c)| DecayPoint { distance: d as f64, magnitude: c.abs(), n_sites: n }).collect();
    let fit = fit_decay(&points, Some(0.0)).ok();
    Ok(GroundStateDecay { ground_energy, gap, rows, fit })
}

/// Indicator weights of the unique ground state and the spectral gap.
pub(crate) fn ground_weights(spectrum: &SectorSpectrum) -> Result<(SpectralWeights, f64)> {
    let mut best = (f64::INFINITY, 0, 0);
    for (bi, b) in spectrum.blocks().iter().enumerate() {
        if let Some(&e) = b.energies().first() {
            if e < best.0 {
                best = (e, bi, 0);
            }
        }
    }
    let energies = spectrum.energies();
    let gap = if energies.len() > 1 { energies[1] - energies[0] } else { f64::INFINITY };
    if gap <= GROUND_GAP_TOLERANCE {
        return Err(LabError::DegenerateGroundState { gap, tolerance: GROUND_GAP_TOLERANCE });
    }
    let mut w = spectrum.weights_from(|_| 0.0);
    w.0[best.1][best.2] = 1.0;
    Ok((w, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densequantum::{gibbs_state, DenseOperator};
    use crate::hamiltonian::{build_model, Couplings, ModelKind};
    use crate::lattice::InteractionGraph;
    use crate::rng::{lab_rng, random_hermitian};

    fn model(kind: ModelKind, n: usize, pairs: &[(&str, f64)]) -> LocalHamiltonian {
        let c: Couplings = pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        build_model(kind, &InteractionGraph::chain(n).unwrap(), &c).unwrap()
    }

    /// Independent oracle: explicit loops over eigenvector components.
    fn double_sum_oracle(rho: &DensityMatrix, a: &DenseOperator, b: &DenseOperator, tau: f64) -> c64 {
        let e = rho.eigen();
        let n = e.dim();
        let elem = |m: &DenseOperator, j: usize, k: usize| -> c64 {
            let mut s = c64::new(0.0, 0.0);
            for x in 0..n {
                for y in 0..n {
                    s += e.vectors[(x, j)].conj() * m.mat()[(x, y)] * e.vectors[(y, k)];
                }
            }
            s
        };
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                acc += elem(a, j, k) * elem(b, k, j) * power_weight(e.values[j], tau) * power_weight(e.values[k], 1.0 - tau);
            }
        }
        let mean = |m: &DenseOperator| (0..n).map(|j| elem(m, j, j) * e.values[j]).sum::<c64>();
        acc - mean(a) * mean(b)
    }

    #[test]
    fn heisenberg_dimer_matches_double_sum() {
        let h = model(ModelKind::Heisenberg, 2, &[("j", 1.0)]).assemble_dense().unwrap();
        let g = gibbs_state(&h, 0.5).unwrap().state;
        let a = DenseOperator::embed(&[2, 2], &pauli::z(), &[0]).unwrap();
        let b = DenseOperator::embed(&[2, 2], &pauli::z(), &[1]).unwrap();
        let fast = generalized_covariance(&g, &a, &b, 0.5).unwrap();
        let oracle = double_sum_oracle(&g, &a, &b, 0.5);
        assert!((fast - oracle).norm() < 1e-13);
        assert!(fast.im.abs() < 1e-10);
        let sweep = CovarianceSweep::new(&g);
        let via_sweep = sweep.covariance(&sweep.transform(&a).unwrap(), &sweep.transform(&b).unwrap(), 0.5);
        assert!((via_sweep - oracle).norm() < 1e-13);
    }

    #[test]
    fn routes_agree_on_random_complex_states() {
        let mut rng = lab_rng(11, 0);
        let dims = [2, 2, 2];
        let h = random_hermitian(&mut rng, &dims, 1.5).unwrap();
        let g = gibbs_state(&h, 0.8).unwrap().state;
        let a = random_hermitian(&mut rng, &dims, 1.0).unwrap();
        let locals = [pauli::x(), pauli::y(), pauli::z()];
        let sweep = CovarianceSweep::new(&g);
        let site_ops = sweep.transform_site_operators(1, &locals).unwrap();
        let ta = sweep.transform(&a).unwrap();
        for (l, tb) in locals.iter().zip(&site_ops) {
            let b = DenseOperator::embed(&dims, l, &[1]).unwrap();
            for tau in [0.0, 0.3, 0.5, 1.0] {
                let oracle = double_sum_oracle(&g, &a, &b, tau);
                assert!((generalized_covariance(&g, &a, &b, tau).unwrap() - oracle).norm() < 1e-12);
                assert!((sweep.covariance(&ta, tb, tau) - oracle).norm() < 1e-12);
            }
            // swap and conjugation symmetries, shift invariance
            let x = generalized_covariance(&g, &a, &b, 0.3).unwrap();
            let swapped = generalized_covariance(&g, &b, &a, 0.7).unwrap();
            let conjugate = generalized_covariance(&g, &b, &a, 0.3).unwrap();
            assert!((x - swapped).norm() < 1e-12);
            assert!((x - conjugate.conj()).norm() < 1e-12);
            let shifted = a.add(&DenseOperator::identity(&dims).scale(c64::new(2.5, 0.0))).unwrap();
            assert!((generalized_covariance(&g, &shifted, &b, 0.3).unwrap() - x).norm() < 1e-12);
        }
    }

    #[test]
    fn product_and_commuting_cases() {
        let ra = DensityMatrix::new(DenseOperator::new(&[2], Mat::from_fn(2, 2, |i, j| {
            c64::new([[0.6, 0.1], [0.1, 0.4]][i][j], 0.0)
        })).unwrap()).unwrap();
        let rb = DensityMatrix::maximally_mixed(&[2]);
        let rho = DensityMatrix::new(ra.operator().kron(rb.operator())).unwrap();
        let a = DenseOperator::embed(&[2, 2], &pauli::x(), &[0]).unwrap();
        let b = DenseOperator::embed(&[2, 2], &pauli::z(), &[1]).unwrap();
        for tau in [0.0, 0.25, 0.5, 1.0] {
            assert!(generalized_covariance(&rho, &a, &b, tau).unwrap().norm() < 1e-15);
        }
        assert!(duhamel_covariance(&rho, &a, &b, 16).unwrap().value.abs() < 1e-15);

        let h = model(ModelKind::Ising, 2, &[("j_zz", 1.0), ("h_z", 0.3)]).assemble_dense().unwrap();
        let g = gibbs_state(&h, 0.9).unwrap().state;
        let za = DenseOperator::embed(&[2, 2], &pauli::z(), &[0]).unwrap();
        let zb = DenseOperator::embed(&[2, 2], &pauli::z(), &[1]).unwrap();
        let standard = za.matmul(&zb).unwrap().expectation(g.operator()) - g.expectation(&za) * g.expectation(&zb);
        for tau in [0.0, 0.4, 1.0] {
            assert!((generalized_covariance(&g, &za, &zb, tau).unwrap() - standard).norm() < 1e-14);
        }
        let d = duhamel_covariance(&g, &za, &zb, 16).unwrap();
        assert!((d.value - standard.re).abs() < 1e-14);
    }

    #[test]
    fn duhamel_converges_under_node_doubling() {
        let mut rng = lab_rng(5, 2);
        let dims = [2, 2];
        let h = random_hermitian(&mut rng, &dims, 2.0).unwrap();
        let g = gibbs_state(&h, 1.3).unwrap().state;
        let a = random_hermitian(&mut rng, &dims, 1.0).unwrap();
        let b = random_hermitian(&mut rng, &dims, 1.0).unwrap();
        let sweep = CovarianceSweep::new(&g);
        let (ta, tb) = (sweep.transform(&a).unwrap(), sweep.transform(&b).unwrap());
        let r16 = UnitRule::gauss_legendre(16).unwrap().integrate(|t| sweep.covariance(&ta, &tb, t));
        let r32 = UnitRule::gauss_legendre(32).unwrap().integrate(|t| sweep.covariance(&ta, &tb, t));
        assert!((r16 - r32).norm() < 1e-10);
        assert!(r32.im.abs() < 1e-12);
        let est = sweep.duhamel(&ta, &tb, 16, 1e-9, 512).unwrap();
        let grid: Vec<f64> = (0..=64).map(|k| sweep.covariance(&ta, &tb, k as f64 / 64.0).re).collect();
        let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(est.value >= lo - 1e-12 && est.value <= hi + 1e-12);
    }

    #[test]
    fn critical_temperature_and_correlation_length() {
        let alpha = 2.0 * std::f64::consts::E;
        let bs = beta_star(alpha, 1.0).unwrap();
        // oracle: bisection for the root of α x (x − 1) = 1 with x = e^{2β}
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let x = (2.0 * mid).exp();
            if alpha * x * (x - 1.0) < 1.0 { lo = mid } else { hi = mid }
        }
        assert!((bs - lo).abs() < 1e-14);
        assert!((bs - 0.0736670).abs() < 1e-7);
        let xi = xi_of_beta(alpha, 1.0, bs / 2.0).unwrap();
        let x = bs.exp();
        assert!((xi - 1.0 / (alpha * x * (x - 1.0)).ln().abs()).abs() < 1e-14);
        assert!((xi - 1.243277).abs() < 1e-6);
        assert_eq!(xi_of_beta(alpha, 1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(xi_of_beta(alpha, 1.0, bs), Err(LabError::Regime(_))));
        assert!(matches!(xi_of_beta(alpha, 1.0, -1.01 * bs), Err(LabError::Regime(_))));
        // argument of the logarithm is exactly one at the critical point
        let x = (2.0 * bs).exp();
        assert!((alpha * x * (x - 1.0) - 1.0).abs() < 1e-12);
        assert!(beta_star(0.0, 1.0).is_err());
    }

    #[test]
    fn bound_plug_in_values() {
        // choose alpha, J, beta so that e^{-1/xi} = 1/2
        let params = ClusteringBoundParams { alpha: 2.0 * std::f64::consts::E, coupling: 1.0, beta: 0.0, min_distance: 1 };
        let unit = ObservableExtent { norm: 1.0, boundary_size: 1 };
        // beta with xi = 1/ln 2: α x (x−1) = 1/2 → x = (1 + √(1 + 2/α))/2
        let x = (1.0 + (1.0 + 2.0 / params.alpha).sqrt()) / 2.0;
        let params = ClusteringBoundParams { beta: x.ln() / 2.0, ..params };
        let xi = params.xi().unwrap();
        assert!((xi - 1.0 / 2f64.ln()).abs() < 1e-12);
        let b2 = clustering_bound(&params, unit, unit, 2).unwrap();
        assert!((b2.value - 4.0 / (3f64.ln() * 0.5) * 0.25).abs() < 1e-12);
        assert!((b2.value - 1.8205).abs() < 5e-5);
        let b4 = clustering_bound(&params, unit, unit, 4).unwrap();
        assert!((b4.value / b2.value - 0.25).abs() < 1e-12);
        let b0 = clustering_bound(&params, unit, unit, 0).unwrap();
        assert!(!b0.binding && b2.binding);
    }

    #[test]
    fn decay_fit_recovers_exact_exponentials() {
        let pts: Vec<DecayPoint> =
            (1..6).map(|r| DecayPoint { distance: r as f64, magnitude: 3.0 * (-(r as f64) / 2.0).exp(), n_sites: 10 }).collect();
        let fit = fit_decay(&pts, Some(0.0)).unwrap();
        assert!((fit.xi - 2.0).abs() < 1e-9);
        assert!(fit.residual < 1e-12);

        let mut joint = Vec::new();
        for n in [8usize, 12] {
            for r in 1..5 {
                let m = (n as f64).powf(0.5) * (-(r as f64) / 1.5).exp();
                joint.push(DecayPoint { distance: r as f64, magnitude: m, n_sites: n });
            }
        }
        let fit = fit_decay(&joint, None).unwrap();
        assert!((fit.xi - 1.5).abs() < 1e-9 && (fit.z - 0.5).abs() < 1e-9);

        let mut low = pts.clone();
        low[0].magnitude = 1e-15;
        assert_eq!(fit_decay(&low, Some(0.0)).unwrap().points.len(), 4);
        let tiny: Vec<DecayPoint> = pts.iter().map(|p| DecayPoint { magnitude: 1e-16, ..*p }).collect();
        assert!(fit_decay(&tiny, Some(0.0)).is_err());
        assert!(fit_decay(&pts, None).is_err());
    }

    #[test]
    fn thermal_sweep_respects_the_bound_and_fit_is_below_xi() {
        let h = model(ModelKind::TransverseIsing, 8, &[("j_zz", 1.0), ("h_x", 1.0)]);
        let j = h.interaction_strength().unwrap();
        let mut params = ClusteringBoundParams::for_lattice(1, j, 0.0);
        params.beta = params.beta_star().unwrap() / 2.0;
        let taus: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let sweep = thermal_clustering_sweep(&h, &params, &taus).unwrap();
        assert_eq!(sweep.rows.len(), 28 * 9);
        assert_eq!(sweep.violations(), 0);
        // decay of the largest covariance per distance, from a site pair
        // anchored at the chain end
        let points: Vec<DecayPoint> = sweep
            .rows
            .iter()
            .filter(|r| r.site_a == 0 && r.tau == 0.5 && r.distance <= 4)
            .map(|r| DecayPoint { distance: r.distance as f64, magnitude: r.cov_abs, n_sites: 8 })
            .collect();
        let fit = fit_decay(&points, Some(0.0)).unwrap();
        assert!(fit.xi <= sweep.xi, "fit {} vs bound {}", fit.xi, sweep.xi);
    }

    #[test]
    fn ground_state_decay() {
        let pairs: Vec<(usize, usize)> = (1..8).map(|v| (0, v)).collect();
        let decoupled = model(ModelKind::TransverseIsing, 8, &[("j_zz", 0.0), ("h_x", 1.0)]);
        let r = ground_state_covariance_experiment(&decoupled, &pauli::z(), &pairs).unwrap();
        assert!(r.rows.iter().all(|row| row.3.abs() < 1e-14));
        assert!(r.fit.is_none());
        assert!((r.gap - 2.0).abs() < 1e-12);

        let para = model(ModelKind::TransverseIsing, 10, &[("j_zz", 1.0), ("h_x", 3.0)]);
        let pairs: Vec<(usize, usize)> = (1..7).map(|v| (2, 2 + v)).collect();
        let off = ground_state_covariance_experiment(&para, &pauli::z(), &pairs).unwrap();
        let fit_off = off.fit.clone().unwrap();
        assert!(fit_off.xi.is_finite() && fit_off.xi > 0.0 && fit_off.residual < 0.2);

        let crit = model(ModelKind::TransverseIsing, 10, &[("j_zz", 1.0), ("h_x", 1.0)]);
        let on = ground_state_covariance_experiment(&crit, &pauli::z(), &pairs).unwrap();
        let fit_on = on.fit.unwrap();
        assert!(fit_on.xi > fit_off.xi);

        let degenerate = model(ModelKind::Ising, 4, &[("j_zz", 1.0)]);
        assert!(matches!(
            ground_state_covariance_experiment(&degenerate, &pauli::z(), &[(0, 1)]),
            Err(LabError::DegenerateGroundState { .. })
        ));
    }
}
