//! Run configuration: defaults, optional TOML file, flag overrides and the
//! hash recorded in report headers.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sinai_core::dynamics::TOL_GRAZE;
use sinai_core::enriched::TOL_CERT;
use sinai_core::geometry::table::DEFAULT_LATTICE_BOUND;
use sinai_core::kourganoff::DEFAULT_EPS_LIST;
use sinai_core::spectrum::TOL_CRIT;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub q_max: usize,
    pub t_max: f64,
    pub tol_crit: f64,
    pub tol_graze: f64,
    pub tol_sub: f64,
    /// Largest accepted deviation in `compare`.
    pub compare_tol: f64,
    pub lattice_bound: i64,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            q_max: 4,
            t_max: 1.5,
            tol_crit: TOL_CRIT,
            tol_graze: TOL_GRAZE,
            tol_sub: TOL_CERT,
            compare_tol: 1e-9,
            lattice_bound: DEFAULT_LATTICE_BOUND,
            eps_list: DEFAULT_EPS_LIST.to_vec(),
            seed: 0,
            workers: 1,
            output: None,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub q_max: Option<usize>,
    pub t_max: Option<f64>,
    pub tol_crit: Option<f64>,
    pub tol_graze: Option<f64>,
    pub tol_sub: Option<f64>,
    pub compare_tol: Option<f64>,
    pub lattice_bound: Option<i64>,
    pub eps_list: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
}

/// Fields that determine report contents; worker count and output path are
/// left out so reports are identical across them.
#[derive(Serialize)]
struct HashedFields<'a> {
    q_max: usize,
    t_max: f64,
    tol_crit: f64,
    tol_graze: f64,
    tol_sub: f64,
    compare_tol: f64,
    lattice_bound: i64,
    eps_list: &'a [f64],
    seed: u64,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).map_err(|e| crate::Usage(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = flags.$f.clone() { cfg.$f = v; } )* };
        }
        take!(q_max, t_max, tol_crit, tol_graze, tol_sub, compare_tol, lattice_bound, eps_list, seed, workers);
        if flags.output.is_some() {
            cfg.output = flags.output.clone();
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("tol_crit", self.tol_crit), ("tol_graze", self.tol_graze), ("tol_sub", self.tol_sub), ("compare_tol", self.compare_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(crate::Usage(format!("{name} must be positive, got {v}")));
            }
        }
        // Classification and subgradient tolerances are compiled into the
        // library.
        if self.tol_graze != TOL_GRAZE {
            bail!(crate::Usage(format!("tol_graze is fixed at {TOL_GRAZE:e} in this build")));
        }
        if self.tol_sub != TOL_CERT {
            bail!(crate::Usage(format!("tol_sub is fixed at {TOL_CERT:e} in this build")));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            bail!(crate::Usage(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.lattice_bound < 1 {
            bail!(crate::Usage("lattice_bound must be at least 1".into()));
        }
        if self.workers == 0 {
            bail!(crate::Usage("workers must be at least 1".into()));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            bail!(crate::Usage("eps_list must be non-empty with entries in (0, 1]".into()));
        }
        Ok(())
    }

    /// Period bound used by spectrum commands.
    pub fn require_q_max(&self) -> Result<()> {
        if self.q_max < 2 {
            bail!(crate::Usage(format!("q_max must be at least 2, got {}", self.q_max)));
        }
        Ok(())
    }

    /// SHA-256 over the hashed fields and a description of the job.
    pub fn hash(&self, job: &[String]) -> String {
        let fields = HashedFields {
            q_max: self.q_max,
            t_max: self.t_max,
            tol_crit: self.tol_crit,
            tol_graze: self.tol_graze,
            tol_sub: self.tol_sub,
            compare_tol: self.compare_tol,
            lattice_bound: self.lattice_bound,
            eps_list: &self.eps_list,
            seed: self.seed,
        };
        let mut h = Sha256::new();
        h.update(toml::to_string(&fields).expect("config serialises").as_bytes());
        for line in job {
            h.update(b"\n");
            h.update(line.as_bytes());
        }
        hex(&h.finalize())
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "q_max = 3\nt_max = 2.0\nseed = 11\n").unwrap();
        let cfg = RunConfig::load(Some(&p), &Overrides { t_max: Some(1.25), ..Default::default() }).unwrap();
        assert_eq!((cfg.q_max, cfg.t_max, cfg.seed), (3, 1.25, 11));
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = RunConfig::default();
        let b = RunConfig { workers: 8, output: Some("x".into()), ..RunConfig::default() };
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        let job = vec!["spectrum".to_string()];
        assert_eq!(a.hash(&job), b.hash(&job));
        assert_ne!(a.hash(&job), c.hash(&job));
        assert_eq!(a.hash(&job).len(), 64);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let bad = Overrides { tol_crit: Some(0.0), ..Default::default() };
        let e = RunConfig::load(None, &bad).unwrap_err();
        assert!(e.downcast_ref::<crate::Usage>().is_some());
        let unknown = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(unknown.path(), "qmax = 3\n").unwrap();
        assert!(RunConfig::load(Some(unknown.path()), &Overrides::default()).is_err());
    }
}
