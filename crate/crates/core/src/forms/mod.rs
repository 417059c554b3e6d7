//! Trace operators and assembly of the interior penalty systems.

mod assemble;
mod space;
mod traces;

use std::fmt;
use std::sync::Arc;

use nalgebra::{Point2, Vector2};

pub use assemble::{
    assemble, assemble_parts, assemble_rhs, assemble_with_coefficients, energy_matrix, FormParts, LinearSystem,
};
pub use space::{DgFunction, DgSpace};
pub(crate) use space::values_at;
pub(crate) use assemble::volume_block as volume_block_pub;
pub use traces::{
    consistency_decomposition, face_traces, identity_relation_check, side_fluxes, FaceTraces,
};

use crate::coeffs::{validate_alpha0, DiffusionField, LowPenalty, PenaltySpec, Scheme, TauForm, DEFAULT_ALPHA0};
use crate::error::{Error, Result};
use crate::mesh::SubdomainId;

/// Scalar function of position, evaluated with the subdomain id of the
/// element the point belongs to (exact solutions may be discontinuous in
/// their derivatives across subdomains).
pub type PointFn = Arc<dyn Fn(&Point2<f64>, SubdomainId) -> f64 + Send + Sync>;

/// Boundary flux data `g_N(x, n)` with `n` the outward unit normal.
pub type FluxFn = Arc<dyn Fn(&Point2<f64>, &Vector2<f64>, SubdomainId) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct BoundaryData {
    pub dirichlet: PointFn,
    /// Prescribed normal flux `sigma . n = -kappa grad u . n` on Neumann faces.
    pub neumann: FluxFn,
}

impl BoundaryData {
    pub fn homogeneous() -> Self {
        Self {
            dirichlet: Arc::new(|_, _| 0.0),
            neumann: Arc::new(|_, _, _| 0.0),
        }
    }

    pub fn dirichlet(g: PointFn) -> Self {
        Self {
            dirichlet: g,
            neumann: Arc::new(|_, _, _| 0.0),
        }
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData { .. }")
    }
}

/// `-div(kappa grad u) = f` with mixed boundary data.
#[derive(Clone)]
pub struct Problem {
    pub diffusion: DiffusionField,
    pub source: PointFn,
    pub bc: BoundaryData,
}

impl Problem {
    pub fn new(diffusion: DiffusionField, source: PointFn, bc: BoundaryData) -> Self {
        Self { diffusion, source, bc }
    }
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("diffusion", &self.diffusion).finish_non_exhaustive()
    }
}

/// Which discrete bilinear form to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    /// Symmetrization parameter: `+1` symmetric, `0` incomplete, `-1` nonsymmetric.
    pub epsilon: i8,
    pub alpha0: f64,
    pub k: usize,
    pub tau_form: TauForm,
    pub low_penalty: LowPenalty,
}

impl SchemeSpec {
    pub fn new(scheme: Scheme, epsilon: i8, k: usize) -> Result<Self> {
        let spec = Self {
            scheme,
            epsilon,
            alpha0: DEFAULT_ALPHA0,
            k,
            tau_form: TauForm::default(),
            low_penalty: LowPenalty::Reject,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uip(epsilon: i8, k: usize) -> Result<Self> {
        Self::new(Scheme::Uip, epsilon, k)
    }

    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.epsilon, -1..=1) {
            return Err(Error::Config(format!("epsilon must be -1, 0 or 1, got {}", self.epsilon)));
        }
        if self.scheme == Scheme::Swip && self.epsilon != 1 {
            return Err(Error::Config(format!(
                "the swip scheme is symmetric only (epsilon = 1), got epsilon = {}",
                self.epsilon
            )));
        }
        if !(1..=crate::refelem::MAX_BASIS_DEGREE).contains(&self.k) {
            return Err(Error::UnsupportedDegree(self.k));
        }
        validate_alpha0(self.alpha0, self.low_penalty)
    }

    pub fn eps(&self) -> f64 {
        self.epsilon as f64
    }

    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec {
            scheme: self.scheme,
            k: self.k,
            alpha0: self.alpha0,
            tau_form: self.tau_form,
            low_penalty: self.low_penalty,
        }
    }

    /// `SUIP`, `IUIP`, `NUIP`, `SWIP`, `SIPF`, ...
    pub fn label(&self) -> String {
        let prefix = match self.epsilon {
            1 => "S",
            0 => "I",
            _ => "N",
        };
        match self.scheme {
            Scheme::Uip => format!("{prefix}UIP"),
            Scheme::Swip => "SWIP".to_string(),
            Scheme::Ipf => format!("{prefix}IPF"),
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_validation() {
        assert_eq!(SchemeSpec::uip(1, 1).unwrap().label(), "SUIP");
        assert_eq!(SchemeSpec::uip(0, 2).unwrap().label(), "IUIP");
        assert_eq!(SchemeSpec::uip(-1, 3).unwrap().label(), "NUIP");
        assert_eq!(SchemeSpec::new(Scheme::Ipf, 0, 1).unwrap().label(), "IIPF");
        assert!(SchemeSpec::new(Scheme::Swip, 0, 1).is_err());
        assert!(SchemeSpec::uip(2, 1).is_err());
        assert!(SchemeSpec::uip(1, 5).is_err());
    }
}
