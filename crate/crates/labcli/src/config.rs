//! Experiment configuration files.
//!
//! Configs are TOML. Unknown keys are rejected so that a typo cannot silently
//! fall back to a default. The grammar is documented in the README.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gibbslab::correlations::beta_star;
use gibbslab::error::{LabError, Result};
use gibbslab::hamiltonian::{build_model, LocalHamiltonian, ModelKind};
use gibbslab::lattice::{growth_constant_bound, Boundary, InteractionGraph};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ParamConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_model")]
    pub name: ModelKind,
    /// Linear size of the lattice.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Spatial dimension.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub boundary: Boundary,
    /// Missing required couplings default to 1.
    #[serde(default)]
    pub couplings: BTreeMap<String, f64>,
}

fn default_model() -> ModelKind {
    ModelKind::TransverseIsing
}

fn default_n() -> usize {
    8
}

fn default_dim() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { name: default_model(), n: default_n(), dim: default_dim(), boundary: Boundary::Open, couplings: BTreeMap::new() }
    }
}

impl ModelConfig {
    pub fn couplings(&self) -> BTreeMap<String, f64> {
        let mut c = self.couplings.clone();
        let required: &[&str] = match self.name {
            ModelKind::Ising => &["j_zz"],
            ModelKind::TransverseIsing => &["j_zz", "h_x"],
            ModelKind::Heisenberg | ModelKind::Xx => &["j"],
        };
        for key in required {
            c.entry(key.to_string()).or_insert(1.0);
        }
        c
    }

    pub fn graph(&self, n: usize) -> Result<InteractionGraph> {
        if self.dim == 1 && self.boundary == Boundary::Open {
            InteractionGraph::chain(n)
        } else {
            InteractionGraph::cubic(n, self.dim, self.boundary)
        }
    }

    /// Hamiltonian on a lattice of linear size `n`.
    pub fn build(&self, n: usize) -> Result<LocalHamiltonian> {
        build_model(self.name, &self.graph(n)?, &self.couplings())
    }
}

/// Swept parameters. Every list that is present must be nonempty.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub beta: Option<Vec<f64>>,
    pub temperature: Option<Vec<f64>>,
    /// Inverse temperatures as fractions of the clustering threshold.
    pub beta_fraction: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub radius: Option<Vec<usize>>,
    pub distance: Option<Vec<usize>>,
    pub cluster_size: Option<Vec<usize>>,
    pub order: Option<Vec<usize>>,
    pub max_bond: Option<Vec<usize>>,
    pub n_sites: Option<Vec<usize>>,
    pub delta: Option<Vec<f64>>,
}

/// Scalar settings.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    pub site: Option<usize>,
    pub length: Option<usize>,
    pub instances: Option<usize>,
    pub qubits: Option<Vec<usize>>,
    /// `plus`, `zero` or `mixed`.
    pub state: Option<String>,
    /// `x`, `y` or `z`.
    pub observable: Option<String>,
    /// `thermal` (multiples of the thermal width) or `absolute`.
    pub delta_mode: Option<String>,
    pub lower_constant: Option<f64>,
    pub perturbation_scale: Option<f64>,
    pub s_nodes: Option<usize>,
    pub tau_nodes: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_identity_tol")]
    pub identity: f64,
    #[serde(default = "default_fluctuation_tol")]
    pub fluctuation: f64,
    #[serde(default = "default_quadrature_tol")]
    pub quadrature: f64,
}

fn default_identity_tol() -> f64 {
    1e-6
}

fn default_fluctuation_tol() -> f64 {
    1e-4
}

fn default_quadrature_tol() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity: default_identity_tol(), fluctuation: default_fluctuation_tol(), quadrature: default_quadrature_tol() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// File stem; defaults to the experiment name.
    pub stem: Option<String>,
}

fn config_error(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let lengths = [
            ("beta", g.beta.as_ref().map(Vec::len)),
            ("temperature", g.temperature.as_ref().map(Vec::len)),
            ("beta_fraction", g.beta_fraction.as_ref().map(Vec::len)),
            ("tau", g.tau.as_ref().map(Vec::len)),
            ("radius", g.radius.as_ref().map(Vec::len)),
            ("distance", g.distance.as_ref().map(Vec::len)),
            ("cluster_size", g.cluster_size.as_ref().map(Vec::len)),
            ("order", g.order.as_ref().map(Vec::len)),
            ("max_bond", g.max_bond.as_ref().map(Vec::len)),
            ("n_sites", g.n_sites.as_ref().map(Vec::len)),
            ("delta", g.delta.as_ref().map(Vec::len)),
        ];
        if let Some((name, _)) = lengths.iter().find(|(_, len)| *len == Some(0)) {
            return Err(config_error(format!("grid.{name} is empty")));
        }
        let temperature_sources = [g.beta.is_some(), g.temperature.is_some(), g.beta_fraction.is_some()];
        if temperature_sources.iter().filter(|&&b| b).count() > 1 {
            return Err(config_error("give at most one of grid.beta, grid.temperature, grid.beta_fraction"));
        }
        if g.temperature.iter().flatten().any(|&t| !(t > 0.0)) {
            return Err(config_error("temperatures must be positive"));
        }
        if self.model.n == 0 || self.model.dim == 0 {
            return Err(config_error("model.n and model.dim must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; keys are sorted, so the hash does
    /// not depend on the order of keys in the file.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(&serde_json::to_value(self)?)?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }

    /// Inverse temperatures of the run, resolving fractions of the threshold
    /// against `h`.
    pub fn betas(&self, h: &LocalHamiltonian, default_fraction: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        if let Some(b) = &g.beta {
            return Ok(b.clone());
        }
        if let Some(t) = &g.temperature {
            return Ok(t.iter().map(|t| 1.0 / t).collect());
        }
        let critical = beta_star(growth_constant_bound(h.graph().spatial_dim().max(1)), h.interaction_strength()?)?;
        Ok(g.beta_fraction.clone().unwrap_or_else(|| vec![default_fraction]).iter().map(|f| f * critical).collect())
    }

    pub fn sizes(&self, default: &[usize]) -> Vec<usize> {
        self.grid.n_sites.clone().unwrap_or_else(|| default.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a = ExperimentConfig::parse("experiment = \"heat_capacity\"\nseed = 3\n[model]\nn = 6\nname = \"ising\"\n").unwrap();
        let b = ExperimentConfig::parse("seed = 3\nexperiment = \"heat_capacity\"\n[model]\nname = \"ising\"\nn = 6\n").unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let c = ExperimentConfig::parse("seed = 4\nexperiment = \"heat_capacity\"\n[model]\nname = \"ising\"\nn = 6\n").unwrap();
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "experiment = \"x\"\n[grid]\nbeta = []\n",
            "experiment = \"x\"\ncolour = 1\n",
            "experiment = \"x\"\n[grid]\nbeta = [0.1]\ntemperature = [1.0]\n",
            "experiment = \"x\"\n[model]\nname = \"potts\"\n",
            "seed = 1\n",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(LabError::Config(_))), "{text}");
        }
    }

    #[test]
    fn resolves_temperatures() {
        let cfg = ExperimentConfig::parse("experiment = \"x\"\n[grid]\ntemperature = [2.0, 4.0]\n").unwrap();
        let h = cfg.model.build(4).unwrap();
        assert_eq!(cfg.betas(&h, 0.5).unwrap(), vec![0.5, 0.25]);
        let cfg = ExperimentConfig::parse("experiment = \"x\"\n").unwrap();
        let crit = beta_star(growth_constant_bound(1), h.interaction_strength().unwrap()).unwrap();
        assert_eq!(cfg.betas(&h, 0.5).unwrap(), vec![0.5 * crit]);
    }
}
