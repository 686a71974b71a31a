//! Perturbation identity, thermal Lieb-Robinson bound and the buffer-region
//! locality-of-temperature experiment.

use faer::c64;
use serde::Serialize;

use crate::correlations::{xi_of_beta, BoundValue, CovarianceSweep};
use crate::densequantum::{gibbs_state, spectral_norm, trace_distance, DenseOperator};
use crate::error::{domain, LabError, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::lattice::{InteractionGraph, Region};
use crate::quadrature::UnitRule;
use crate::sectors::SectorSpectrum;

/// Largest accepted `|β| max(‖H‖, ‖H0‖)`.
pub const DEFAULT_BETA_NORM_CAP: f64 = 200.0;

/// Quadrature settings for the double integral over `(s, τ)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathQuadrature {
    pub s_nodes: usize,
    pub tau_nodes: usize,
    /// Accepted `|I(2n_s) − I(n_s)|`.
    pub tolerance: f64,
    pub max_s_nodes: usize,
    pub beta_norm_cap: f64,
}

impl Default for PathQuadrature {
    fn default() -> Self {
        PathQuadrature { s_nodes: 12, tau_nodes: 16, tolerance: 1e-8, max_s_nodes: 96, beta_norm_cap: DEFAULT_BETA_NORM_CAP }
    }
}

/// `H(s) = H0 + s (H − H0)` on `s ∈ [0, 1]`.
#[derive(Clone, Debug)]
pub struct InterpolationPath {
    h0: DenseOperator,
    h: DenseOperator,
    perturbation: DenseOperator,
}

impl InterpolationPath {
    pub fn new(h0: DenseOperator, h: DenseOperator) -> Result<Self> {
        h0.check_same_space(&h)?;
        if !h0.is_hermitian() || !h.is_hermitian() {
            return domain("interpolation endpoints must be Hermitian");
        }
        let perturbation = h.sub(&h0)?;
        Ok(InterpolationPath { h0, h, perturbation })
    }

    pub fn from_local(h0: &LocalHamiltonian, h: &LocalHamiltonian) -> Result<Self> {
        Self::new(h0.assemble_dense()?, h.assemble_dense()?)
    }

    pub fn start(&self) -> &DenseOperator {
        &self.h0
    }

    pub fn end(&self) -> &DenseOperator {
        &self.h
    }

    /// `H − H0`.
    pub fn perturbation(&self) -> &DenseOperator {
        &self.perturbation
    }

    pub fn at(&self, s: f64) -> DenseOperator {
        self.h0.add(&self.perturbation.scale(c64::new(s, 0.0))).expect("same dimensions")
    }
}

/// Value of the double integral with its node-doubling error estimate.
#[derive(Clone, Copy, Debug)]
pub struct PathEstimate {
    pub value: c64,
    /// `|I(2 n_s) − I(n_s)|`.
    pub error: f64,
    pub s_nodes: usize,
    pub tau_nodes: usize,
}

fn check_beta_cap(path: &InterpolationPath, beta: f64, cap: f64) -> Result<()> {
    if !beta.is_finite() {
        return domain("inverse temperature must be finite");
    }
    let norm = spectral_norm(&path.h)?.max(spectral_norm(&path.h0)?);
    if beta.abs() * norm > cap {
        return Err(LabError::Regime(format!(
            "|beta| ||H|| = {} exceeds the cap {cap}; the identity is not evaluated near the ground-state limit",
            beta.abs() * norm
        )));
    }
    Ok(())
}

fn path_integral(path: &InterpolationPath, a: &DenseOperator, beta: f64, s_rule: &UnitRule, tau_rule: &UnitRule) -> Result<c64> {
    let mut total = c64::new(0.0, 0.0);
    // s-nodes in a fixed order so sums are reproducible bit for bit
    for (&s, &w) in s_rule.nodes().iter().zip(s_rule.weights()) {
        let g = gibbs_state(&path.at(s), beta)?.state;
        let sweep = CovarianceSweep::new(&g);
        let (v, ta) = (sweep.transform(&path.perturbation)?, sweep.transform(a)?);
        total += tau_rule.integrate(|t| sweep.covariance(&v, &ta, t)) * w;
    }
    Ok(total * beta)
}

/// `β ∫_0^1 dτ ∫_0^1 ds cov^τ_{g_s}(H − H0, A)` by tensor-product
/// Gauss-Legendre quadrature. The `s` rule doubles until the change drops
/// below the tolerance; the reported value is the coarser of the accepted
/// pair, so the default settings return the 12×16 rule.
pub fn perturbation_rhs(path: &InterpolationPath, a: &DenseOperator, beta: f64, q: &PathQuadrature) -> Result<PathEstimate> {
    path.h0.check_same_space(a)?;
    if q.s_nodes == 0 || q.tau_nodes == 0 {
        return domain("quadrature needs at least one node per direction");
    }
    check_beta_cap(path, beta, q.beta_norm_cap)?;
    let tau_rule = UnitRule::gauss_legendre(q.tau_nodes)?;
    if beta == 0.0 {
        return Ok(PathEstimate { value: c64::new(0.0, 0.0), error: 0.0, s_nodes: q.s_nodes, tau_nodes: q.tau_nodes });
    }
    let mut n = q.s_nodes;
    let mut coarse = path_integral(path, a, beta, &UnitRule::gauss_legendre(n)?, &tau_rule)?;
    loop {
        let fine = path_integral(path, a, beta, &UnitRule::gauss_legendre(2 * n)?, &tau_rule)?;
        let error = (fine - coarse).norm();
        if error <= q.tolerance {
            return Ok(PathEstimate { value: coarse, error, s_nodes: n, tau_nodes: q.tau_nodes });
        }
        if 2 * n >= q.max_s_nodes {
            return Err(LabError::Convergence { best: fine.re, error });
        }
        n *= 2;
        coarse = fine;
    }
}

/// `Tr[A g0(β)] − Tr[A g(β)]` from two Gibbs states.
pub fn perturbation_lhs(h0: &DenseOperator, h: &DenseOperator, a: &DenseOperator, beta: f64) -> Result<c64> {
    h0.check_same_space(h)?;
    h0.check_same_space(a)?;
    let g0 = gibbs_state(h0, beta)?.state;
    let g = gibbs_state(h, beta)?.state;
    Ok(g0.expectation(a) - g.expectation(a))
}

/// Parameters of the thermal Lieb-Robinson bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LrBoundParams {
    pub xi: f64,
    pub beta: f64,
    pub coupling: f64,
    pub min_distance: usize,
}

/// `w |β| J / (1 − e^{−1/ξ}) e^{−dist(S,E)/ξ}` with
/// `w = 4 min(|∂S|, |∂E|) |E| / ln 3`. Empty or unreachable `E` gives 0.
pub fn thermal_lr_bound(graph: &InteractionGraph, s: &Region, e: &Region, p: &LrBoundParams) -> Result<BoundValue> {
    if s.is_empty() {
        return domain("subsystem S must be nonempty");
    }
    graph.check_region(s)?;
    if e.is_empty() {
        return Ok(BoundValue { value: 0.0, binding: true });
    }
    let Some(distance) = graph.distance(s, e)? else {
        return Ok(BoundValue { value: 0.0, binding: true });
    };
    let w = 4.0 * graph.boundary(s).len().min(graph.boundary(e).len()) as f64 * e.len() as f64 / 3f64.ln();
    let (near, far) = if p.xi == 0.0 {
        (1.0, if distance == 0 { 1.0 } else { 0.0 })
    } else {
        (1.0 - (-1.0 / p.xi).exp(), (-(distance as f64) / p.xi).exp())
    };
    Ok(BoundValue { value: w * p.beta.abs() * p.coupling / near * far, binding: distance >= p.min_distance })
}

/// `V = B ∪ E ∪ F` with `B` the open ball of radius `r` around `S`, `E` the
/// sphere of radius `r` and `F` the rest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BufferPartition {
    pub s: Region,
    pub buffer: Region,
    pub ring: Region,
    pub rest: Region,
    pub radius: usize,
}

impl BufferPartition {
    pub fn new(graph: &InteractionGraph, s: &Region, radius: usize) -> Result<Self> {
        if s.is_empty() || radius == 0 {
            return domain("buffer partition needs a nonempty S and radius >= 1");
        }
        let dist = graph.distances_to(s)?;
        let pick = |f: &dyn Fn(Option<usize>) -> bool| -> Region { (0..dist.len()).filter(|&v| f(dist[v])).collect() };
        let buffer = pick(&|d| d.is_some_and(|d| d < radius));
        let ring = pick(&|d| d == Some(radius));
        let rest = pick(&|d| d.is_none_or(|d| d > radius));
        Ok(BufferPartition { s: s.clone(), buffer, ring, rest, radius })
    }
}

/// Settings of the locality-of-temperature sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LocalityParams {
    pub alpha: f64,
    pub beta: f64,
    pub min_distance: usize,
}

/// One radius of the locality-of-temperature sweep.
#[derive(Clone, Debug, Serialize)]
pub struct LocalityRow {
    pub radius: usize,
    /// Sites where `H − H0` acts: the ring plus the endpoints of cut bonds.
    pub support_size: usize,
    /// `dist(S, supp(H − H0))`, the distance entering the bound.
    pub distance_to_support: Option<usize>,
    /// `‖g_H^S − g_{H_B}^S‖_1`.
    pub trace_distance: f64,
    pub bound: f64,
    pub binding: bool,
    /// Largest interaction strength over `H`, `H0` and `H − H0`.
    pub coupling: f64,
    pub xi: f64,
    /// `F` is empty, so `H0 = H_B`.
    pub rest_empty: bool,
}

/// For each radius `r`: `H0 = H_B + H_F`, the trace distance between the
/// reductions to `S` of `g(H)` and `g(H_B)`, and the thermal Lieb-Robinson
/// bound evaluated on the actual support of `H − H0`.
pub fn locality_of_temperature_experiment(
    h: &LocalHamiltonian,
    s: &Region,
    radii: &[usize],
    params: &LocalityParams,
) -> Result<Vec<LocalityRow>> {
    let graph = h.graph();
    graph.check_region(s)?;
    let global = SectorSpectrum::new(h)?;
    let (weights, _) = global.gibbs_weights(params.beta)?;
    let reduced_global = global.reduced_state(&weights, s)?;
    let j_h = h.interaction_strength()?;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let part = BufferPartition::new(graph, s, r)?;
        let h_b = h.truncate_to_region(&part.buffer)?;
        let h0 = h_b.union(&h.truncate_to_region(&part.rest)?)?;
        let diff = h.difference(&h0)?;
        let support = h.difference_support(&h0)?;
        let coupling = j_h.max(h0.interaction_strength()?).max(diff.interaction_strength()?);
        let xi = xi_of_beta(params.alpha, coupling.max(f64::MIN_POSITIVE), params.beta)?;

        let local = h.restrict_to_sites(&part.buffer)?;
        let local_spectrum = SectorSpectrum::new(&local)?;
        let (local_weights, _) = local_spectrum.gibbs_weights(params.beta)?;
        let s_in_b: Region = s.sites().iter().map(|v| part.buffer.sites().binary_search(v).expect("S inside B")).collect();
        let reduced_local = local_spectrum.reduced_state(&local_weights, &s_in_b)?;
        let distance = trace_distance(&reduced_global, &reduced_local)?;

        let lr = LrBoundParams { xi, beta: params.beta, coupling, min_distance: params.min_distance };
        let bound = thermal_lr_bound(graph, s, &support, &lr)?;
        let distance_to_support = if support.is_empty() { None } else { graph.distance(s, &support)? };
        rows.push(LocalityRow {
            radius: r,
            support_size: support.len(),
            distance_to_support,
            trace_distance: distance,
            bound: bound.value,
            binding: bound.binding,
            coupling,
            xi,
            rest_empty: part.rest.is_empty(),
        });
    }
    Ok(rows)
}

/// Result of comparing the reduced Gibbs states of `H` and a perturbed `H0`.
#[derive(Clone, Debug, Serialize)]
pub struct ThermalLrRow {
    pub distance: Option<usize>,
    pub support_size: usize,
    pub trace_distance: f64,
    pub bound: f64,
    pub binding: bool,
    pub coupling: f64,
    pub xi: f64,
}

/// `‖g^S − g0^S‖_1` against the thermal Lieb-Robinson bound for a given
/// pair of Hamiltonians on the same graph.
pub fn thermal_lr_experiment(
    h: &LocalHamiltonian,
    h0: &LocalHamiltonian,
    s: &Region,
    params: &LocalityParams,
) -> Result<ThermalLrRow> {
    let diff = h.difference(h0)?;
    let support = h.difference_support(h0)?;
    let coupling = h.interaction_strength()?.max(h0.interaction_strength()?).max(diff.interaction_strength()?);
    let xi = xi_of_beta(params.alpha, coupling.max(f64::MIN_POSITIVE), params.beta)?;
    let reduce = |ham: &LocalHamiltonian| -> Result<DenseOperator> {
        let spectrum = SectorSpectrum::new(ham)?;
        let (w, _) = spectrum.gibbs_weights(params.beta)?;
        spectrum.reduced_state(&w, s)
    };
    let distance = trace_distance(&reduce(h)?, &reduce(h0)?)?;
    let lr = LrBoundParams { xi, beta: params.beta, coupling, min_distance: params.min_distance };
    let bound = thermal_lr_bound(h.graph(), s, &support, &lr)?;
    let dist = if support.is_empty() { None } else { h.graph().distance(s, &support)? };
    Ok(ThermalLrRow { distance: dist, support_size: support.len(), trace_distance: distance, bound: bound.value, binding: bound.binding, coupling, xi })
}
