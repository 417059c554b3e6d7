use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::TestCase;
use crate::coeffs::{LowPenalty, Scheme, TauForm, DEFAULT_ALPHA0};
use crate::error::{Error, Result};
use crate::forms::SchemeSpec;
use crate::linalg::SolverOptions;
use crate::mesh::DiagonalSplit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub scheme: Scheme,
    #[serde(default = "default_epsilon")]
    pub epsilon: i8,
}

fn default_epsilon() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Subdivisions per side of the coarsest structured mesh.
    pub n0: usize,
    /// Number of uniform refinements after the coarsest level.
    pub refinements: usize,
    pub split: DiagonalSplit,
    /// Mesh file for `run`; overrides the structured mesh.
    pub file: Option<PathBuf>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n0: 8,
            refinements: 3,
            split: DiagonalSplit::Alternate,
            file: None,
        }
    }
}

impl MeshConfig {
    /// `n0, 2 n0, 4 n0, ...`
    pub fn levels(&self) -> Vec<usize> {
        (0..=self.refinements).map(|i| self.n0 << i).collect()
    }
}

/// Run configuration, read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub test: TestCase,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeEntry>,
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default)]
    pub tau_form: TauForm,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Seed of the randomized coercivity sampling.
    #[serde(default)]
    pub seed: u64,
    /// Write measured wall times; off by default so outputs are reproducible.
    #[serde(default)]
    pub record_timing: bool,
    /// Nodes per side of the sampling grid used for point values and the
    /// overshoot diagnostic.
    #[serde(default = "default_sample_grid")]
    pub sample_grid: usize,
    /// Random vectors used for the sampled coercivity constant in `run`.
    #[serde(default = "default_coercivity_samples")]
    pub coercivity_samples: usize,
    /// Largest accepted relative discrepancy in `equivalence`.
    #[serde(default = "default_equivalence_tol")]
    pub equivalence_tol: f64,
    /// Also write the system matrix of `run` in Matrix Market format.
    #[serde(default)]
    pub dump_matrix: bool,
    #[serde(skip)]
    pub low_penalty: LowPenalty,
}

fn default_schemes() -> Vec<SchemeEntry> {
    vec![SchemeEntry {
        scheme: Scheme::Uip,
        epsilon: 1,
    }]
}

fn default_degrees() -> Vec<usize> {
    vec![1]
}

fn default_alpha0() -> f64 {
    DEFAULT_ALPHA0
}

fn default_sample_grid() -> usize {
    256
}

fn default_coercivity_samples() -> usize {
    100
}

fn default_equivalence_tol() -> f64 {
    1e-8
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks everything that does not need a mesh.
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("`schemes` must not be empty".into()));
        }
        if self.degrees.is_empty() {
            return Err(Error::Config("`degrees` must not be empty".into()));
        }
        if self.mesh.n0 == 0 || !self.mesh.n0.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "mesh.n0 must be a positive even number, got {}",
                self.mesh.n0
            )));
        }
        if self.mesh.refinements > 8 {
            return Err(Error::Config(format!("mesh.refinements = {} is too large", self.mesh.refinements)));
        }
        if self.sample_grid < 2 {
            return Err(Error::Config("sample_grid must be at least 2".into()));
        }
        if !(self.equivalence_tol > 0.0) {
            return Err(Error::Config("equivalence_tol must be positive".into()));
        }
        if !(self.solver.rtol > 0.0 && self.solver.rtol < 1.0) {
            return Err(Error::Config(format!("solver.rtol must lie in (0, 1), got {}", self.solver.rtol)));
        }
        if let TestCase::Test1 { lambda } = self.test {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Config(format!("test.lambda must be positive, got {lambda}")));
            }
        }
        for spec in self.specs()? {
            spec.validate()?;
        }
        Ok(())
    }

    /// Every (scheme, degree) combination, schemes varying slowest.
    pub fn specs(&self) -> Result<Vec<SchemeSpec>> {
        let mut out = Vec::new();
        for entry in &self.schemes {
            for &k in &self.degrees {
                let spec = SchemeSpec {
                    scheme: entry.scheme,
                    epsilon: entry.epsilon,
                    alpha0: self.alpha0,
                    k,
                    tau_form: self.tau_form,
                    low_penalty: self.low_penalty,
                };
                spec.validate()?;
                out.push(spec);
            }
        }
        Ok(out)
    }
}
