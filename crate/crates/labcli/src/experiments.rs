//! Registered experiments. Each one turns a config into a list of independent
//! grid-point jobs and a CSV header.

use std::sync::Arc;

use rand::Rng;
use serde_json::{json, Value};

use gibbslab::clusterexp::{mpo_from_truncation, positivity_sweep, truncated_series_dense};
use gibbslab::correlations::{ground_state_covariance_experiment, thermal_clustering_sweep, ClusteringBoundParams};
use gibbslab::densequantum::{c64, eigh, pauli, trace_norm, DenseOperator, Mat};
use gibbslab::error::{LabError, Result};
use gibbslab::hamiltonian::{LocalHamiltonian, LocalTerm};
use gibbslab::lattice::{growth_constant_bound, Region};
use gibbslab::rng::{lab_rng, random_hermitian};
use gibbslab::stability::{
    locality_of_temperature_experiment, perturbation_lhs, perturbation_rhs, thermal_lr_experiment, InterpolationPath,
    LocalityParams, PathQuadrature,
};
use gibbslab::statmech::{
    eoe_experiment, fit_log_power, product_state_gaussianity, EnergyLevels, EoeSettings, WindowWidth,
};

use crate::config::ExperimentConfig;
use crate::row;
use crate::table::{Cell, Row};

/// Rows and warnings of one grid point.
#[derive(Debug, Default)]
pub struct PointResult {
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
}

pub type Job = Box<dyn FnOnce() -> Result<PointResult> + Send>;
pub type Summarize = Box<dyn FnOnce(&[Row]) -> (Value, Vec<String>) + Send>;

pub struct Plan {
    pub header: Vec<&'static str>,
    pub jobs: Vec<Job>,
    pub summarize: Option<Summarize>,
}

pub struct Experiment {
    pub name: &'static str,
    /// What the experiment checks.
    pub anchor: &'static str,
    pub description: &'static str,
    pub plan: fn(&ExperimentConfig) -> Result<Plan>,
}

pub const REGISTRY: [Experiment; 10] = [
    Experiment {
        name: "clustering_sweep",
        anchor: "exponential clustering bound on thermal covariances",
        description: "max |cov^tau| of single-site pairs against the high-temperature clustering bound",
        plan: clustering_sweep,
    },
    Experiment {
        name: "ground_state_decay",
        anchor: "ground-state correlation decay with fitted length",
        description: "ground-state covariances versus distance with an exponential fit",
        plan: ground_state_decay,
    },
    Experiment {
        name: "perturbation_identity",
        anchor: "integral formula for perturbed thermal expectations",
        description: "Tr[A g0] - Tr[A g] against the path and tau quadrature on random instances",
        plan: perturbation_identity,
    },
    Experiment {
        name: "thermal_lr",
        anchor: "thermal Lieb-Robinson bound for distant perturbations",
        description: "local trace distance after perturbing one distant bond, against the bound",
        plan: thermal_lr,
    },
    Experiment {
        name: "local_temperature",
        anchor: "locality of temperature with a buffer region",
        description: "reduced Gibbs state of the buffered Hamiltonian versus the global one",
        plan: local_temperature,
    },
    Experiment {
        name: "cluster_truncation",
        anchor: "truncated cluster expansion of exp(-beta H)",
        description: "cluster-size truncated series: word counts, error against exp(-beta H), MPO size",
        plan: cluster_truncation,
    },
    Experiment {
        name: "mpo_positivity",
        anchor: "positivity by squaring a half-temperature MPO",
        description: "compressed M^dagger M: minimum eigenvalue and distance to the Gibbs state",
        plan: mpo_positivity,
    },
    Experiment {
        name: "energy_gaussianity",
        anchor: "Berry-Esseen distance of product-state energy distributions",
        description: "sup |F - G| of the energy distribution of a product state, with a ln^p(N)/sqrt(N) fit",
        plan: energy_gaussianity,
    },
    Experiment {
        name: "heat_capacity",
        anchor: "heat capacity fluctuation identity C = dE^2 / T^2",
        description: "finite-difference dU/dT against the energy variance over a temperature grid",
        plan: heat_capacity,
    },
    Experiment {
        name: "eoe_sweep",
        anchor: "equivalence of microcanonical and canonical ensembles",
        description: "translate-averaged local trace distance between the window state and the Gibbs state",
        plan: eoe_sweep,
    },
];

pub fn find(name: &str) -> Result<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        LabError::Config(format!("unknown experiment `{name}`; valid names: {}", names.join(", ")))
    })
}

fn config_error(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn single_site(name: &str) -> Result<Mat<c64>> {
    match name {
        "x" => Ok(pauli::x()),
        "y" => Ok(pauli::y()),
        "z" => Ok(pauli::z()),
        _ => Err(config_error(format!("unknown observable `{name}`; use x, y or z"))),
    }
}

fn product_local(name: &str) -> Result<Mat<c64>> {
    let half = c64::new(0.5, 0.0);
    match name {
        "plus" => Ok(Mat::from_fn(2, 2, |_, _| half)),
        "zero" => Ok(Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })),
        "mixed" => Ok(Mat::from_fn(2, 2, |i, j| if i == j { half } else { c64::new(0.0, 0.0) })),
        _ => Err(config_error(format!("unknown product state `{name}`; use plus, zero or mixed"))),
    }
}

fn count_warning(count: usize, what: &str) -> Vec<String> {
    if count == 0 { Vec::new() } else { vec![format!("{count} {what}")] }
}

fn alpha_of(h: &LocalHamiltonian) -> f64 {
    growth_constant_bound(h.graph().spatial_dim().max(1))
}

fn center(h: &LocalHamiltonian) -> usize {
    h.num_sites() / 2
}

fn clustering_sweep(cfg: &ExperimentConfig) -> Result<Plan> {
    let h = Arc::new(cfg.model.build(cfg.model.n)?);
    let taus = Arc::new(cfg.grid.tau.clone().unwrap_or_else(|| (0..9).map(|k| k as f64 / 8.0).collect()));
    let coupling = h.interaction_strength()?;
    let dim = h.graph().spatial_dim();
    let jobs = cfg
        .betas(&h, 0.5)?
        .into_iter()
        .map(|beta| {
            let (h, taus) = (h.clone(), taus.clone());
            Box::new(move || {
                let params = ClusteringBoundParams::for_lattice(dim, coupling, beta);
                let sweep = thermal_clustering_sweep(&h, &params, &taus)?;
                let rows = sweep
                    .rows
                    .iter()
                    .map(|r| {
                        row![beta, sweep.beta_star, sweep.xi, r.site_a, r.site_b, r.distance, r.tau, r.cov_abs, r.bound, r.binding]
                    })
                    .collect();
                let mut warnings = count_warning(sweep.violations(), &format!("bound violations at beta = {beta}"));
                warnings.extend(count_warning(
                    sweep.rows.iter().filter(|r| !r.binding).count(),
                    &format!("non-binding bound values at beta = {beta}"),
                ));
                Ok(PointResult { rows, warnings })
            }) as Job
        })
        .collect();
    Ok(Plan {
        header: vec!["beta", "beta_star", "xi", "site_a", "site_b", "distance", "tau", "cov_abs", "bound", "binding"],
        jobs,
        summarize: Some(Box::new(|rows| {
            let violations = rows.iter().filter(|r| matches!((&r[7], &r[8]), (Cell::Float(c), Cell::Float(b)) if c > b)).count();
            (json!({ "violations": violations }), Vec::new())
        })),
    })
}

fn ground_state_decay(cfg: &ExperimentConfig) -> Result<Plan> {
    let observable = single_site(cfg.params.observable.as_deref().unwrap_or("z"))?;
    let site = cfg.params.site.unwrap_or(0);
    let mut jobs: Vec<Job> = Vec::new();
    for n in cfg.sizes(&[6, 8, 10]) {
        let h = cfg.model.build(n)?;
        let observable = observable.clone();
        jobs.push(Box::new(move || {
            let sites = h.num_sites();
            if site >= sites {
                return Err(config_error(format!("params.site = {site} outside a lattice of {sites} sites")));
            }
            let pairs: Vec<(usize, usize)> = (0..sites).filter(|&b| b != site).map(|b| (site, b)).collect();
            let decay = ground_state_covariance_experiment(&h, &observable, &pairs)?;
            let (xi, intercept) = decay.fit.as_ref().map_or((None, None), |f| (Some(f.xi), Some(f.intercept)));
            let rows = decay
                .rows
                .iter()
                .map(|&(a, b, d, c)| row![sites, a, b, d, c, decay.ground_energy, decay.gap, xi, intercept])
                .collect();
            let warnings = if decay.fit.is_none() { vec![format!("N = {sites}: too few covariances above the floor to fit")] } else { Vec::new() };
            Ok(PointResult { rows, warnings })
        }));
    }
    Ok(Plan {
        header: vec!["n_sites", "site_a", "site_b", "distance", "covariance", "ground_energy", "gap", "fit_xi", "fit_intercept"],
        jobs,
        summarize: None,
    })
}

fn perturbation_identity(cfg: &ExperimentConfig) -> Result<Plan> {
    let instances = cfg.params.instances.unwrap_or(50);
    let qubits = cfg.params.qubits.clone().unwrap_or_else(|| vec![2, 3]);
    if instances == 0 || qubits.is_empty() || qubits.iter().any(|&q| !(1..=6).contains(&q)) {
        return Err(config_error("perturbation_identity needs instances >= 1 and qubit counts in 1..=6"));
    }
    let defaults = PathQuadrature::default();
    let quad = PathQuadrature {
        s_nodes: cfg.params.s_nodes.unwrap_or(defaults.s_nodes),
        tau_nodes: cfg.params.tau_nodes.unwrap_or(defaults.tau_nodes),
        tolerance: cfg.tolerances.quadrature,
        ..defaults
    };
    let seed = cfg.seed;
    let jobs = (0..instances)
        .map(|k| {
            let n = qubits[k % qubits.len()];
            Box::new(move || {
                let mut rng = lab_rng(seed, k as u64);
                let dims = vec![2; n];
                let mut h0 = DenseOperator::zeros(&dims);
                if n == 1 {
                    h0 = random_hermitian(&mut rng, &dims, 1.0)?;
                }
                for v in 0..n.saturating_sub(1) {
                    let term = random_hermitian(&mut rng, &[2, 2], 1.0)?;
                    h0 = h0.add(&DenseOperator::embed(&dims, term.mat(), &[v, v + 1])?)?;
                }
                let v_norm = rng.random_range(0.05..=1.0);
                let h = h0.add(&random_hermitian(&mut rng, &dims, v_norm)?)?;
                let a = random_hermitian(&mut rng, &dims, 1.0)?;
                let mut beta = 0.0;
                while beta == 0.0 {
                    beta = rng.random_range(-1.0..=1.0);
                }
                let lhs = perturbation_lhs(&h0, &h, &a, beta)?;
                let rhs = perturbation_rhs(&InterpolationPath::new(h0, h)?, &a, beta, &quad)?;
                let diff = (lhs - rhs.value).norm();
                Ok(PointResult {
                    rows: vec![row![k, n, beta, v_norm, lhs.re, lhs.im, rhs.value.re, rhs.value.im, diff, rhs.error, rhs.s_nodes, rhs.tau_nodes]],
                    warnings: Vec::new(),
                })
            }) as Job
        })
        .collect();
    let tol = cfg.tolerances.identity;
    Ok(Plan {
        header: vec![
            "instance", "n_qubits", "beta", "perturbation_norm", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff",
            "quadrature_error", "s_nodes", "tau_nodes",
        ],
        jobs,
        summarize: Some(Box::new(move |rows| {
            let worst = rows.iter().filter_map(|r| if let Cell::Float(d) = r[8] { Some(d) } else { None }).fold(0.0, f64::max);
            let warnings = if worst > tol { vec![format!("max |LHS - RHS| = {worst:e} exceeds {tol:e}")] } else { Vec::new() };
            (json!({ "max_abs_diff": worst, "tolerance": tol, "within_tolerance": worst <= tol }), warnings)
        })),
    })
}

/// `h` with the last two-site term at distance `d` from `site` scaled by `scale`.
fn perturb_bond(h: &LocalHamiltonian, site: usize, d: usize, scale: f64) -> Result<LocalHamiltonian> {
    let graph = h.graph();
    let dist = graph.distances_to(&Region::new([site]))?;
    let mut terms: Vec<LocalTerm> = h.terms().to_vec();
    let k = terms
        .iter()
        .rposition(|t| t.support().len() == 2 && t.support().sites().iter().filter_map(|&v| dist[v]).min() == Some(d))
        .ok_or_else(|| config_error(format!("no bond at distance {d} from site {site}")))?;
    let t = &terms[k];
    let scaled = Mat::from_fn(t.matrix().nrows(), t.matrix().ncols(), |i, j| t.matrix()[(i, j)] * scale);
    terms[k] = LocalTerm::new(t.support().clone(), scaled, h.local_dim())?;
    LocalHamiltonian::new(graph.clone(), h.local_dim(), terms)
}

fn thermal_lr(cfg: &ExperimentConfig) -> Result<Plan> {
    let h = Arc::new(cfg.model.build(cfg.model.n)?);
    let site = cfg.params.site.unwrap_or_else(|| center(&h));
    let scale = cfg.params.perturbation_scale.unwrap_or(0.5);
    let distances = cfg.grid.distance.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let alpha = alpha_of(&h);
    let mut jobs: Vec<Job> = Vec::new();
    for beta in cfg.betas(&h, 0.5)? {
        for &d in &distances {
            let h0 = perturb_bond(&h, site, d, scale)?;
            let h = h.clone();
            jobs.push(Box::new(move || {
                let params = LocalityParams { alpha, beta, min_distance: 1 };
                let r = thermal_lr_experiment(&h, &h0, &Region::new([site]), &params)?;
                let warnings = if r.binding { Vec::new() } else { vec![format!("non-binding bound at beta = {beta}, bond distance {d}")] };
                Ok(PointResult {
                    rows: vec![row![beta, d, r.distance, r.support_size, r.trace_distance, r.bound, r.binding, r.xi, r.coupling]],
                    warnings,
                })
            }));
        }
    }
    Ok(Plan {
        header: vec!["beta", "bond_distance", "support_distance", "support_size", "trace_distance", "bound", "binding", "xi", "coupling"],
        jobs,
        summarize: None,
    })
}

fn local_temperature(cfg: &ExperimentConfig) -> Result<Plan> {
    let h = Arc::new(cfg.model.build(cfg.model.n)?);
    let site = cfg.params.site.unwrap_or_else(|| center(&h));
    let radii = Arc::new(cfg.grid.radius.clone().unwrap_or_else(|| vec![1, 2, 3, 4]));
    let alpha = alpha_of(&h);
    let jobs = cfg
        .betas(&h, 0.5)?
        .into_iter()
        .map(|beta| {
            let (h, radii) = (h.clone(), radii.clone());
            Box::new(move || {
                let params = LocalityParams { alpha, beta, min_distance: 1 };
                let rows = locality_of_temperature_experiment(&h, &Region::new([site]), &radii, &params)?;
                let warnings = count_warning(rows.iter().filter(|r| !r.binding).count(), &format!("non-binding bound values at beta = {beta}"));
                Ok(PointResult {
                    rows: rows
                        .iter()
                        .map(|r| {
                            row![
                                beta, r.radius, r.support_size, r.distance_to_support, r.trace_distance, r.bound, r.binding,
                                r.xi, r.coupling, r.rest_empty
                            ]
                        })
                        .collect(),
                    warnings,
                })
            }) as Job
        })
        .collect();
    Ok(Plan {
        header: vec![
            "beta", "radius", "support_size", "support_distance", "trace_distance", "bound", "binding", "xi", "coupling", "rest_empty",
        ],
        jobs,
        summarize: None,
    })
}

fn explicit_betas(cfg: &ExperimentConfig, h: &LocalHamiltonian, default: &[f64]) -> Result<Vec<f64>> {
    let g = &cfg.grid;
    if g.beta.is_none() && g.temperature.is_none() && g.beta_fraction.is_none() {
        Ok(default.to_vec())
    } else {
        cfg.betas(h, 0.5)
    }
}

fn cluster_truncation(cfg: &ExperimentConfig) -> Result<Plan> {
    let h = Arc::new(cfg.model.build(cfg.model.n)?);
    let clusters = cfg.grid.cluster_size.clone().unwrap_or_else(|| vec![2, 3, 4, h.num_sites() + 1]);
    let orders = cfg.grid.order.clone().unwrap_or_else(|| vec![20]);
    let is_chain = h.graph().is_open_chain();
    let mut jobs: Vec<Job> = Vec::new();
    for beta in explicit_betas(cfg, &h, &[0.2])? {
        let h1 = h.clone();
        let exact = Arc::new(std::sync::OnceLock::new());
        for &l in &clusters {
            for &j in &orders {
                let (h, exact) = (h1.clone(), exact.clone());
                jobs.push(Box::new(move || {
                    let exact: &DenseOperator = match exact.get() {
                        Some(e) => e,
                        None => {
                            let dense = h.assemble_dense()?;
                            let eig = eigh(&dense)?;
                            let e = DenseOperator::new(dense.dims(), eig.reconstruct(|x| (-beta * x).exp()))?;
                            exact.get_or_init(|| e)
                        }
                    };
                    let series = truncated_series_dense(&h, beta, l, j)?;
                    let error = trace_norm(&series.operator.sub(exact)?)?;
                    let (bond, automaton, mpo_error) = if is_chain {
                        let m = mpo_from_truncation(&h, beta, l, j)?;
                        let diff = trace_norm(&m.mpo.contract()?.sub(&series.operator)?)?;
                        (Some(m.mpo.max_bond()), m.automaton_bond_dims.iter().copied().max(), Some(diff))
                    } else {
                        (None, None, None)
                    };
                    Ok(PointResult {
                        rows: vec![row![
                            beta, l, j, series.words.retained, series.words.dropped, series.letter_sets, error, bond, automaton, mpo_error
                        ]],
                        warnings: Vec::new(),
                    })
                }));
            }
        }
    }
    Ok(Plan {
        header: vec![
            "beta", "cluster_size", "order", "words_retained", "words_dropped", "letter_sets", "error_vs_exp", "mpo_max_bond",
            "automaton_max_bond", "mpo_vs_dense",
        ],
        jobs,
        summarize: None,
    })
}

fn mpo_positivity(cfg: &ExperimentConfig) -> Result<Plan> {
    let h = Arc::new(cfg.model.build(cfg.model.n)?);
    let clusters = Arc::new(cfg.grid.cluster_size.clone().unwrap_or_else(|| vec![2, 3, 4]));
    let order = cfg.grid.order.as_ref().map_or(12, |o| o[0]);
    let bonds = cfg.grid.max_bond.clone().unwrap_or_else(|| vec![16]);
    let mut jobs: Vec<Job> = Vec::new();
    for beta in explicit_betas(cfg, &h, &[0.2])? {
        for &bond in &bonds {
            let (h, clusters) = (h.clone(), clusters.clone());
            jobs.push(Box::new(move || {
                let rows = positivity_sweep(&h, beta, &clusters, order, bond)?;
                let negative = rows.iter().filter(|r| r.min_eigenvalue < -1e-12).count();
                Ok(PointResult {
                    rows: rows
                        .iter()
                        .map(|r| row![beta, order, bond, r.max_cluster, r.max_bond, r.half_max_bond, r.min_eigenvalue, r.trace_distance, r.half_error])
                        .collect(),
                    warnings: count_warning(negative, &format!("rows with a negative eigenvalue at beta = {beta}")),
                })
            }));
        }
    }
    Ok(Plan {
        header: vec!["beta", "order", "bond_cap", "cluster_size", "max_bond", "half_max_bond", "min_eigenvalue", "trace_distance", "half_error"],
        jobs,
        summarize: None,
    })
}

fn energy_gaussianity(cfg: &ExperimentConfig) -> Result<Plan> {
    let local = product_local(cfg.params.state.as_deref().unwrap_or("plus"))?;
    let mut jobs: Vec<Job> = Vec::new();
    for n in cfg.sizes(&[6, 8, 10, 12]) {
        let h = cfg.model.build(n)?;
        let local = local.clone();
        jobs.push(Box::new(move || {
            let r = product_state_gaussianity(&h, &local)?;
            Ok(PointResult { rows: vec![row![r.n_sites, r.mean, r.variance, r.distance]], warnings: Vec::new() })
        }));
    }
    Ok(Plan {
        header: vec!["n_sites", "mean", "variance", "distance"],
        jobs,
        summarize: Some(Box::new(|rows| {
            let points: Vec<(usize, f64)> = rows
                .iter()
                .filter_map(|r| match (&r[0], &r[3]) {
                    (Cell::Int(n), Cell::Float(d)) => Some((*n as usize, *d)),
                    _ => None,
                })
                .collect();
            let decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
            let mut warnings = Vec::new();
            if !decreasing {
                warnings.push("distance is not strictly decreasing in N".to_string());
            }
            let fit = match fit_log_power(&points) {
                Ok(f) => json!({ "constant": f.constant, "power": f.power, "residual": f.residual }),
                Err(e) => {
                    warnings.push(format!("no fit: {e}"));
                    Value::Null
                }
            };
            (json!({ "strictly_decreasing": decreasing, "fit": fit }), warnings)
        })),
    })
}

fn heat_capacity(cfg: &ExperimentConfig) -> Result<Plan> {
    let h = cfg.model.build(cfg.model.n)?;
    let temps: Vec<f64> = match (&cfg.grid.temperature, &cfg.grid.beta) {
        (Some(t), _) => t.clone(),
        (None, Some(b)) => b.iter().map(|b| 1.0 / b).collect(),
        _ if cfg.grid.beta_fraction.is_some() => cfg.betas(&h, 0.5)?.iter().map(|b| 1.0 / b).collect(),
        _ => (0..10).map(|k| 0.25 * 1.5f64.powi(k)).collect(),
    };
    let tol = cfg.tolerances.fluctuation;
    let job: Job = Box::new(move || {
        let levels = EnergyLevels::new(&h)?;
        let mut rows = Vec::new();
        let mut warnings = Vec::new();
        for t in temps {
            let o = levels.observables(t)?;
            let ok = o.relative_discrepancy <= tol;
            if !ok {
                warnings.push(format!("T = {t}: relative discrepancy {:e} exceeds {tol:e}", o.relative_discrepancy));
            }
            rows.push(row![
                t, o.mean_energy, o.energy_density, o.energy_variance, o.heat_capacity_difference, o.heat_capacity_fluctuation,
                o.specific_heat, o.relative_discrepancy, ok
            ]);
        }
        Ok(PointResult { rows, warnings })
    });
    Ok(Plan {
        header: vec![
            "temperature", "mean_energy", "energy_density", "energy_variance", "heat_capacity_difference", "heat_capacity_fluctuation",
            "specific_heat", "relative_discrepancy", "within_tolerance",
        ],
        jobs: vec![job],
        summarize: None,
    })
}

fn eoe_sweep(cfg: &ExperimentConfig) -> Result<Plan> {
    let length = cfg.params.length.unwrap_or(2);
    let lower_constant = cfg.params.lower_constant.unwrap_or(1.0);
    let thermal = match cfg.params.delta_mode.as_deref().unwrap_or("thermal") {
        "thermal" => true,
        "absolute" => false,
        other => return Err(config_error(format!("unknown delta_mode `{other}`; use thermal or absolute"))),
    };
    let deltas = cfg.grid.delta.clone().unwrap_or_else(|| vec![1.0]);
    let model = cfg.model.name.name();
    let mut jobs: Vec<Job> = Vec::new();
    for n in cfg.sizes(&[6, 8, 10]) {
        let h = Arc::new(cfg.model.build(n)?);
        for beta in cfg.betas(&h, 0.5)? {
            for &d in &deltas {
                let h = h.clone();
                let delta = if thermal { WindowWidth::Thermal(d) } else { WindowWidth::Absolute(d) };
                jobs.push(Box::new(move || {
                    let settings = EoeSettings { beta, delta, window_length: length, lower_constant };
                    let r = eoe_experiment(&h, &settings)?;
                    let stat = |name: String, value: Cell| -> Row {
                        vec!["eoe_sweep".into(), model.into(), r.n_sites.into(), beta.into(), r.delta.into(), length.into(), name.into(), value, r.in_regime.into()]
                    };
                    let mut rows = vec![
                        stat("mean_distance".into(), r.mean_distance.into()),
                        stat("relative_entropy_bits".into(), r.relative_entropy.into()),
                        stat("window_dim".into(), r.window_dim.into()),
                        stat("thermal_width".into(), r.thermal_width.into()),
                        stat("energy_density".into(), r.energy_density.into()),
                    ];
                    rows.extend(r.translate_distances.iter().enumerate().map(|(s, &v)| stat(format!("distance_at_{s}"), v.into())));
                    let warnings = if r.in_regime { Vec::new() } else { vec![format!("N = {}: outside the equivalence regime", r.n_sites)] };
                    Ok(PointResult { rows, warnings })
                }));
            }
        }
    }
    Ok(Plan {
        header: vec!["experiment", "model", "n_sites", "beta", "delta", "length", "statistic", "value", "in_regime"],
        jobs,
        summarize: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_unique() {
        assert!(REGISTRY.len() >= 10);
        let mut names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), REGISTRY.len());
        let err = find("nope").err().unwrap().to_string();
        assert!(err.contains("clustering_sweep") && err.contains("eoe_sweep"));
    }

    #[test]
    fn bond_perturbation_moves_one_term() {
        let cfg = ExperimentConfig::parse("experiment = \"thermal_lr\"\n[model]\nn = 7\n").unwrap();
        let h = cfg.model.build(7).unwrap();
        let h0 = perturb_bond(&h, 3, 2, 0.5).unwrap();
        let support = h.difference_support(&h0).unwrap();
        assert_eq!(support.sites(), &[5, 6]);
        assert!(perturb_bond(&h, 3, 9, 0.5).is_err());
    }
}
