//! Run manifests: every command's inputs gathered in one JSON document.
//! Flags override manifest entries; the fully resolved manifest is hashed
//! into every output file for provenance.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    // paths
    pub network: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub scales: Option<PathBuf>,
    pub out: Option<PathBuf>,
    // scenario construction
    pub k: Option<usize>,
    pub kr: Option<f64>,
    pub power_factor: Option<f64>,
    // objective
    pub kl: Option<f64>,
    pub kv: Option<f64>,
    pub cl_max: Option<f64>,
    pub iv_max: Option<f64>,
    // search
    pub nmax: Option<usize>,
    pub evaluator: Option<String>,
    pub seed: Option<u64>,
    // solver
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    // enumeration / datasets
    pub cap: Option<usize>,
    pub configs: Option<usize>,
    pub pairs: Option<usize>,
    pub test_fraction: Option<f64>,
    // pf topology
    pub open: Option<Vec<usize>>,
    pub meshed: Option<bool>,
    pub list: Option<bool>,
    // training
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub dropout: Option<f64>,
    pub arch: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("manifest {} is not valid", path.display()))?;
        Ok(manifest)
    }

    /// Flags override manifest entries field by field.
    pub fn overridden_by(mut self, other: RunManifest) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            network, scenarios, model, dataset, scales, out, k, kr, power_factor, kl, kv,
            cl_max, iv_max, nmax, evaluator, seed, tolerance, max_iterations, cap, configs,
            pairs, test_fraction, open, meshed, list, epochs, batch_size, learning_rate,
            dropout, arch
        );
        self
    }

    /// SHA-256 of the resolved manifest's canonical JSON.
    pub fn sha256(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn require_network(&self) -> Result<&Path> {
        self.require_path(&self.network, "network")
    }

    pub fn require_scenarios(&self) -> Result<&Path> {
        self.require_path(&self.scenarios, "scenarios")
    }

    pub fn require_dataset(&self) -> Result<&Path> {
        self.require_path(&self.dataset, "dataset")
    }

    pub fn require_out(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("--out directory is required"),
        }
    }

    fn require_path<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        match field {
            Some(p) if p.exists() => Ok(p),
            Some(p) => bail!("{name} file not found: {}", p.display()),
            None => bail!("--{name} is required"),
        }
    }
}
