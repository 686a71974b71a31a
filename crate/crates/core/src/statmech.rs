//! Energy statistics of thermal and product states, Gaussianity of the energy
//! distribution, microcanonical states and equivalence of ensembles.

use faer::{c64, Mat};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::densequantum::{eigh, trace_distance, DenseOperator, DensityMatrix};
use crate::error::{domain, LabError, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::lattice::Region;
use crate::sectors::{SectorSpectrum, SpectralWeights};

/// Eigenvalues closer than this are one level.
pub const LEVEL_MERGE_TOLERANCE: f64 = 1e-10;
/// Finite-difference step for `dU/dT`, relative to `T`.
pub const DEFAULT_RELATIVE_STEP: f64 = 1e-4;

/// Index ranges `[start, end)` of merged levels in an ascending list.
fn merged_levels(sorted: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=sorted.len() {
        if k == sorted.len() || sorted[k] - sorted[k - 1] > LEVEL_MERGE_TOLERANCE {
            out.push((start, k));
            start = k;
        }
    }
    out
}

/// Thermal energy statistics at one temperature.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyObservables {
    pub temperature: f64,
    /// `U(T) = Tr[H g(1/T)]`.
    pub mean_energy: f64,
    /// `u = U / N`.
    pub energy_density: f64,
    /// `ΔE² = Tr[H² g] − U²`.
    pub energy_variance: f64,
    /// Centered difference of `U` over `T`.
    pub heat_capacity_difference: f64,
    /// `ΔE² / T²`.
    pub heat_capacity_fluctuation: f64,
    /// `C / N` from the fluctuation route.
    pub specific_heat: f64,
    /// `|C_difference − C_fluctuation| / C_fluctuation`.
    pub relative_discrepancy: f64,
    pub step: f64,
}

/// Full spectrum of a Hamiltonian, ascending.
#[derive(Clone, Debug)]
pub struct EnergyLevels {
    energies: Vec<f64>,
    n_sites: usize,
}

impl EnergyLevels {
    pub fn new(h: &LocalHamiltonian) -> Result<Self> {
        Ok(EnergyLevels { energies: SectorSpectrum::new(h)?.energies(), n_sites: h.num_sites() })
    }

    pub fn from_operator(h: &DenseOperator) -> Result<Self> {
        Self::from_values(crate::densequantum::eigvalsh(h)?, h.num_sites())
    }

    pub fn from_values(mut energies: Vec<f64>, n_sites: usize) -> Result<Self> {
        if energies.is_empty() || n_sites == 0 || energies.iter().any(|e| !e.is_finite()) {
            return domain("energy levels must be a nonempty list of finite values on at least one site");
        }
        energies.sort_by(f64::total_cmp);
        Ok(EnergyLevels { energies, n_sites })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Thermal mean and variance of the energy at inverse temperature `beta`.
    pub fn moments(&self, beta: f64) -> (f64, f64) {
        let shift = if beta >= 0.0 { self.energies[0] } else { self.energies[self.energies.len() - 1] };
        let w: Vec<f64> = self.energies.iter().map(|&e| (-beta * (e - shift)).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean = w.iter().zip(&self.energies).map(|(w, e)| w * e).sum::<f64>() / z;
        let var = w.iter().zip(&self.energies).map(|(w, e)| w * (e - mean) * (e - mean)).sum::<f64>() / z;
        (mean, var)
    }

    pub fn observables(&self, temperature: f64) -> Result<EnergyObservables> {
        self.observables_with_step(temperature, DEFAULT_RELATIVE_STEP)
    }

    pub fn observables_with_step(&self, temperature: f64, relative_step: f64) -> Result<EnergyObservables> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return domain(format!("temperature must be positive and finite, got {temperature}"));
        }
        if !(relative_step > 0.0 && relative_step < 1.0) {
            return domain("relative finite-difference step must lie in (0, 1)");
        }
        let step = relative_step * temperature;
        let (mean, var) = self.moments(1.0 / temperature);
        let (up, _) = self.moments(1.0 / (temperature + step));
        let (down, _) = self.moments(1.0 / (temperature - step));
        let difference = (up - down) / (2.0 * step);
        let fluctuation = var / (temperature * temperature);
        let n = self.n_sites as f64;
        Ok(EnergyObservables {
            temperature,
            mean_energy: mean,
            energy_density: mean / n,
            energy_variance: var,
            heat_capacity_difference: difference,
            heat_capacity_fluctuation: fluctuation,
            specific_heat: fluctuation / n,
            relative_discrepancy: if fluctuation > 0.0 { (difference - fluctuation).abs() / fluctuation } else { difference.abs() },
            step,
        })
    }
}

/// `U, u, C, c, ΔE²` at temperature `T`.
pub fn energy_observables(h: &LocalHamiltonian, temperature: f64) -> Result<EnergyObservables> {
    EnergyLevels::new(h)?.observables(temperature)
}

/// Distribution of `H` in a state: `F(x) = Σ_{E_k ≤ x} ⟨k|ρ|k⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyDistribution {
    levels: Vec<f64>,
    weights: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl EnergyDistribution {
    /// From per-eigenvector energies and populations; degenerate levels
    /// within [`LEVEL_MERGE_TOLERANCE`] are merged.
    pub fn new(energies: &[f64], populations: &[f64]) -> Result<Self> {
        if energies.len() != populations.len() || energies.is_empty() {
            return domain("energies and populations must be nonempty and of equal length");
        }
        if populations.iter().any(|&w| w < -1e-12 || !w.is_finite()) {
            return domain("populations must be nonnegative");
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return domain(format!("populations sum to {total}, not 1"));
        }
        let mut order: Vec<usize> = (0..energies.len()).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
        let sorted: Vec<f64> = order.iter().map(|&k| energies[k]).collect();
        let pops: Vec<f64> = order.iter().map(|&k| populations[k].max(0.0)).collect();
        let mean: f64 = sorted.iter().zip(&pops).map(|(e, w)| e * w).sum();
        let variance: f64 = sorted.iter().zip(&pops).map(|(e, w)| w * (e - mean) * (e - mean)).sum();
        let (mut levels, mut weights) = (Vec::new(), Vec::new());
        for (a, b) in merged_levels(&sorted) {
            let w: f64 = pops[a..b].iter().sum();
            levels.push(sorted[a..b].iter().sum::<f64>() / (b - a) as f64);
            weights.push(w);
        }
        Ok(EnergyDistribution { levels, weights, mean, variance })
    }

    /// From sector-resolved populations.
    pub fn from_sectors(spectrum: &SectorSpectrum, populations: &SpectralWeights) -> Result<Self> {
        let energies: Vec<f64> = spectrum.blocks().iter().flat_map(|b| b.energies().iter().copied()).collect();
        let pops: Vec<f64> = populations.0.iter().flatten().copied().collect();
        Self::new(&energies, &pops)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Right-continuous `F(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.levels.partition_point(|&e| e <= x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// `F(x−)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.levels.partition_point(|&e| e < x);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }
}

/// Energy distribution of `rho` in the eigenbasis of `h`.
pub fn energy_cdf(rho: &DensityMatrix, h: &DenseOperator) -> Result<EnergyDistribution> {
    let eig = eigh(h)?;
    let rotated = eig.to_eigenbasis(rho.operator().mat());
    let pops: Vec<f64> = (0..eig.dim()).map(|k| rotated[(k, k)].re).collect();
    EnergyDistribution::new(&eig.values, &pops)
}

/// `|F − G|` on both sides of one jump of `F`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpGap {
    pub level: f64,
    /// `|F(x−) − G(x)|`.
    pub below: f64,
    /// `|F(x) − G(x)|`.
    pub above: f64,
}

/// One-sided gaps between `F` and the Gaussian CDF with the same mean and
/// variance at every jump of `F`.
pub fn jump_gaps(dist: &EnergyDistribution) -> Result<Vec<JumpGap>> {
    if !(dist.variance > 0.0) {
        return domain("degenerate energy distribution: zero variance");
    }
    let gauss = Normal::new(dist.mean, dist.variance.sqrt()).map_err(|e| LabError::Numerical(e.to_string()))?;
    let mut below = 0.0;
    Ok(dist
        .levels
        .iter()
        .zip(&dist.weights)
        .map(|(&x, &w)| {
            let g = gauss.cdf(x);
            let above = (below + w).min(1.0);
            let gap = JumpGap { level: x, below: (below - g).abs(), above: (above - g).abs() };
            below = above;
            gap
        })
        .collect())
}

/// `sup_x |F(x) − G(x)|`, attained at a one-sided limit of some jump.
pub fn berry_esseen_distance(dist: &EnergyDistribution) -> Result<f64> {
    Ok(jump_gaps(dist)?.iter().map(|g| g.below.max(g.above)).fold(0.0, f64::max))
}

/// Gaussianity statistic of one system size.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussianityRow {
    pub n_sites: usize,
    pub mean: f64,
    pub variance: f64,
    pub distance: f64,
}

/// Energy distribution of `⊗_v local` under `h`, compared with a Gaussian.
pub fn product_state_gaussianity(h: &LocalHamiltonian, local: &Mat<c64>) -> Result<GaussianityRow> {
    let spectrum = SectorSpectrum::new(h)?;
    let weights = spectrum.product_state_weights(&vec![local.clone(); h.num_sites()])?;
    let dist = EnergyDistribution::from_sectors(&spectrum, &weights)?;
    Ok(GaussianityRow { n_sites: h.num_sites(), mean: dist.mean, variance: dist.variance, distance: berry_esseen_distance(&dist)? })
}

/// `distance ≈ C ln^p(N) / √N`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogPowerFit {
    pub constant: f64,
    pub power: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
}

/// Least squares on `ln d + ln(N)/2 = ln C + p ln ln N`.
pub fn fit_log_power(points: &[(usize, f64)]) -> Result<LogPowerFit> {
    if points.len() < 2 || points.iter().any(|&(n, d)| n < 2 || !(d > 0.0)) {
        return domain("log-power fit needs two or more sizes >= 2 with positive distances");
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln().ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(n, d)| d.ln() + 0.5 * (n as f64).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return domain("log-power fit needs distinct sizes");
    }
    let p = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let c = my - p * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - c - p * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(LogPowerFit { constant: c.exp(), power: p, residual })
}

/// Eigenstates with `|E_k − E| ≤ Δ`, whole merged levels at a time.
#[derive(Clone, Debug, Serialize)]
pub struct MicrocanonicalWindow {
    pub center: f64,
    pub half_width: f64,
    /// Positions in the ascending spectrum.
    pub members: Vec<usize>,
    /// Lowest and highest member energies.
    pub energy_range: (f64, f64),
}

impl MicrocanonicalWindow {
    /// Window over an ascending spectrum; empty windows report the closest level.
    pub fn new(sorted: &[f64], center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !center.is_finite() {
            return domain("window needs a finite center and positive half-width");
        }
        let mut members = Vec::new();
        for (a, b) in merged_levels(sorted) {
            let level = sorted[a..b].iter().sum::<f64>() / (b - a) as f64;
            if (level - center).abs() <= half_width {
                members.extend(a..b);
            }
        }
        let (Some(&lo), Some(&hi)) = (members.first(), members.last()) else {
            let nearest = sorted.iter().copied().min_by(|x, y| (x - center).abs().total_cmp(&(y - center).abs()));
            return domain(format!(
                "empty microcanonical window around {center} with half-width {half_width}; nearest eigenvalue {}",
                nearest.unwrap_or(f64::NAN)
            ));
        };
        Ok(MicrocanonicalWindow { center, half_width, energy_range: (sorted[lo], sorted[hi]), members })
    }

    pub fn dim(&self) -> usize {
        self.members.len()
    }

    /// Membership by energy value, for spectra stored out of order.
    pub fn contains_energy(&self, e: f64) -> bool {
        e >= self.energy_range.0 && e <= self.energy_range.1
    }
}

/// `⊓_{E,Δ}`, the uniform mixture over the window's eigenvectors.
pub fn microcanonical_state(h: &DenseOperator, center: f64, half_width: f64) -> Result<(DensityMatrix, MicrocanonicalWindow)> {
    let eig = eigh(h)?;
    let window = MicrocanonicalWindow::new(&eig.values, center, half_width)?;
    let mut weights = vec![0.0; eig.dim()];
    let p = 1.0 / window.dim() as f64;
    for &k in &window.members {
        weights[k] = p;
    }
    let rho = DensityMatrix::from_spectrum(h.dims(), weights, eig.vectors)?;
    Ok((rho, window))
}

/// Microcanonical half-width per `√N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum WindowWidth {
    Absolute(f64),
    /// Multiple of the thermal width `√(c T²)`.
    Thermal(f64),
}

/// Settings of one equivalence-of-ensembles run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EoeSettings {
    /// Inverse temperature of the canonical state; 0 is allowed.
    pub beta: f64,
    pub delta: WindowWidth,
    /// Length of the contiguous subsystem.
    pub window_length: usize,
    /// Constant in the lower limit `C₁ ln(N)^{2D} / √N` on `δ / √(c T²)`.
    pub lower_constant: f64,
}

/// One system size of the equivalence-of-ensembles sweep.
#[derive(Clone, Debug, Serialize)]
pub struct EoeRow {
    pub n_sites: usize,
    pub beta: f64,
    pub energy_density: f64,
    /// `√(c T²) = ΔE / √N`.
    pub thermal_width: f64,
    pub delta: f64,
    pub window_dim: usize,
    /// `‖⊓^S − g^S‖_1` for each translate of the subsystem.
    pub translate_distances: Vec<f64>,
    pub mean_distance: f64,
    /// `S(⊓ ‖ g)` in bits.
    pub relative_entropy: f64,
    pub in_regime: bool,
}

/// Compares reductions of `⊓_{eN, δ√N}` and `g(β)` on every contiguous
/// window of `l` sites, with `e = u(T)`.
pub fn eoe_experiment(h: &LocalHamiltonian, settings: &EoeSettings) -> Result<EoeRow> {
    let n = h.num_sites();
    let l = settings.window_length;
    if l == 0 || l > n {
        return domain(format!("subsystem length {l} must lie in 1..={n}"));
    }
    let (WindowWidth::Absolute(width) | WindowWidth::Thermal(width)) = settings.delta;
    if !(width > 0.0) || !settings.beta.is_finite() {
        return domain("delta must be positive and beta finite");
    }
    let spectrum = SectorSpectrum::new(h)?;
    let sorted = spectrum.energies();
    let levels = EnergyLevels { energies: sorted.clone(), n_sites: n };
    let (mean, var) = levels.moments(settings.beta);
    let nf = n as f64;
    let thermal_width = (var / nf).sqrt();
    let delta = match settings.delta {
        WindowWidth::Absolute(d) => d,
        WindowWidth::Thermal(k) => k * thermal_width,
    };
    let window = MicrocanonicalWindow::new(&sorted, mean, delta * nf.sqrt())?;
    let p = 1.0 / window.dim() as f64;
    let micro = spectrum.weights_from(|e| if window.contains_energy(e) { p } else { 0.0 });
    let (gibbs, log_z) = spectrum.gibbs_weights(settings.beta)?;

    let mut distances = Vec::with_capacity(n - l + 1);
    for s in 0..=n - l {
        let keep = Region::new(s..s + l);
        distances.push(trace_distance(&spectrum.reduced_state(&micro, &keep)?, &spectrum.reduced_state(&gibbs, &keep)?)?);
    }
    let mean_distance = distances.iter().sum::<f64>() / distances.len() as f64;
    // S(⊓‖g) = −log m + β⟨H⟩_⊓ + ln Z, converted to bits
    let micro_energy = spectrum.mean_energy(&micro);
    let relative_entropy = (-(window.dim() as f64).ln() + settings.beta * micro_energy + log_z) / std::f64::consts::LN_2;

    let ratio = if thermal_width > 0.0 { delta / thermal_width } else { f64::INFINITY };
    let dim_exp = 2 * h.graph().spatial_dim().max(1) as i32;
    let lower = settings.lower_constant * nf.ln().powi(dim_exp) / nf.sqrt();
    Ok(EoeRow {
        n_sites: n,
        beta: settings.beta,
        energy_density: mean / nf,
        thermal_width,
        delta,
        window_dim: window.dim(),
        translate_distances: distances,
        mean_distance,
        relative_entropy,
        in_regime: ratio >= lower && ratio <= 1.0,
    })
}
