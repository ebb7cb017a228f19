use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auxiliary::{schedule_params_unchecked, secondary_constant, AuxParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hamiltonian::{DisorderSpec, Ensemble, Family};
use crate::localization::default_mu;
use crate::poisson::default_t_grid;
use crate::spectral::{Interval, RescaledWindow};

/// Environment variable overriding the output directory.
pub const ENV_OUTPUT_DIR: &str = "REGSPEC_OUTPUT_DIR";
/// Environment variable overriding the worker count.
pub const ENV_WORKERS: &str = "REGSPEC_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Regular { n: usize, degree: usize, seed: u64 },
    RegularTree { branching: usize, depth: usize },
    Cycle { n: usize },
    Path { n: usize },
    Complete { n: usize },
    EdgeList { path: PathBuf },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphSpec::Regular { n, degree, seed } => Graph::random_regular(*n, *degree, *seed),
            GraphSpec::RegularTree { branching, depth } => Graph::regular_tree(*branching, *depth),
            GraphSpec::Cycle { n } => Graph::cycle(*n),
            GraphSpec::Path { n } => Graph::path(*n),
            GraphSpec::Complete { n } => Graph::complete(*n),
            GraphSpec::EdgeList { path } => Graph::from_edge_list(&std::fs::read_to_string(path)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    #[serde(default)]
    pub family: Family,
    pub rho0: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub energy: f64,
    /// The window `I = [lo, hi)` in rescaled units.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AuxConfig {
    Schedule {
        mu_s: f64,
        a: f64,
    },
    Manual {
        radius: usize,
        tau: f64,
        /// Envelope budget; defaults to `τ² e^{(μ - ln K) R}`.
        #[serde(default)]
        c: Option<f64>,
    },
}

/// Intervals `J` of the given lengths centred at `center`, used for the
/// Wegner and Minami checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    pub center: f64,
    #[serde(default)]
    pub wegner_lengths: Vec<f64>,
    #[serde(default)]
    pub minami_lengths: Vec<f64>,
    #[serde(default = "default_minami_order")]
    pub minami_k: usize,
}

fn default_minami_order() -> usize {
    2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Include per-vertex auxiliary records and localization profiles.
    #[serde(default)]
    pub verbose: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub disorder: DisorderConfig,
    pub window: WindowConfig,
    #[serde(default)]
    pub aux: Option<AuxConfig>,
    /// Localization rate `μ` for the envelope `X_n`.
    #[serde(default)]
    pub mu: Option<f64>,
    pub realizations: usize,
    pub base_seed: u64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub checks: Option<ChecksConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker threads; `None` uses the global rayon pool. Not part of the
    /// config hash, since results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Apply [`ENV_OUTPUT_DIR`] and [`ENV_WORKERS`] when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            self.output.dir = Some(PathBuf::from(dir));
        }
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            let w: usize = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_WORKERS}={w} is not a count")))?;
            self.workers = Some(w);
        }
        Ok(())
    }

    /// The config with the output location cleared.
    pub fn canonical(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.output.dir = None;
        c
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output location
    /// and worker count are excluded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn disorder_spec(&self) -> Result<DisorderSpec> {
        DisorderSpec::new(self.disorder.family, self.disorder.rho0)
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        Ok(Ensemble {
            spec: self.disorder_spec()?,
            alpha: self.disorder.alpha,
            base_seed: self.base_seed,
        })
    }

    /// Sup of the density of the diagonal entries `α ω_x`.
    pub fn effective_density(&self) -> Result<f64> {
        Ok(self.disorder_spec()?.effective_density(self.disorder.alpha))
    }

    pub fn base_interval(&self) -> Result<Interval> {
        Interval::new(self.window.lo, self.window.hi)
    }

    /// Auxiliary parameters for a graph with `n` vertices and branching `k`.
    pub fn aux_params(&self, n: usize, k: usize) -> Result<Option<AuxParams>> {
        let Some(aux) = &self.aux else { return Ok(None) };
        let p = match aux {
            AuxConfig::Schedule { mu_s, a } => schedule_params_unchecked(n, k, *mu_s, *a)?,
            AuxConfig::Manual { radius, tau, c } => {
                let c = match c {
                    Some(c) => *c,
                    None => secondary_constant(k, *tau, self.rate(k)?, *radius),
                };
                AuxParams::manual(k, *radius, *tau, c)?
            }
        };
        Ok(Some(p))
    }

    /// The localization rate `μ`, defaulting to the midpoint of
    /// `(ln K, μ_s - ln K)` under the schedule.
    pub fn rate(&self, k: usize) -> Result<f64> {
        match (self.mu, &self.aux) {
            (Some(mu), _) => Ok(mu),
            (None, Some(AuxConfig::Schedule { mu_s, .. })) => default_mu(k, *mu_s),
            _ => Err(Error::Config("manual parameters require `mu`".into())),
        }
    }

    pub fn window_for(&self, n: usize, epsilon: f64) -> Result<RescaledWindow> {
        RescaledWindow::new(self.window.energy, self.base_interval()?, n, epsilon)
    }

    /// The check intervals, Wegner lengths first.
    pub fn check_intervals(&self) -> Result<Vec<Interval>> {
        let Some(c) = &self.checks else { return Ok(Vec::new()) };
        c.wegner_lengths
            .iter()
            .chain(&c.minami_lengths)
            .map(|&l| {
                if !(l > 0.0) {
                    return Err(Error::Config(format!("check length {l} must be positive")));
                }
                Interval::centered(c.center, l / 2.0)
            })
            .collect()
    }

    /// Check every module-level precondition that does not need the graph.
    pub fn validate(&self) -> Result<()> {
        self.disorder_spec()?;
        if !(self.disorder.alpha >= 0.0 && self.disorder.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha {} invalid", self.disorder.alpha)));
        }
        self.base_interval()?;
        self.check_intervals()?;
        if let Some(c) = &self.checks {
            if c.minami_k == 0 {
                return Err(Error::Config("minami_k must be at least 1".into()));
            }
        }
        if self.t_grid.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("t grid entries must be nonnegative".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("worker count must be positive".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) {
                return Err(Error::Config(format!("mu {mu} must be positive")));
            }
        }
        Ok(())
    }
}
