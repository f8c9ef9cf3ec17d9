//! Ontological models: a preparation distribution `ρ(x|ψ)` over ontic
//! states plus a response function `P(E_i|x, M)`.
//!
//! Densities of sphere-valued models are taken with respect to the surface
//! measure `dΩ` on S².

mod born;
mod equipartition;
mod ks;
mod overlap;
mod point_mass;
mod uniform;

pub use born::{verify_born, BornReport, BORN_QUADRATURE_AZIMUTHAL, BORN_QUADRATURE_POLAR};
pub use equipartition::{equipartition_diagnostic, EquipartitionReport, MIN_EQUIPARTITION_SAMPLES};
pub use ks::{ks_density, ks_response, ks_sample, KochenSpecker, KS_DENSITY_RATIO_BOUND};
pub use overlap::{
    classify_pairs, ks_overlap_analytic, overlap, Classification, OverlapMethod, OverlapReport,
    Verdict, DEFAULT_EPS_ONTO, DEFAULT_OVERLAP_RESOLUTION, MIN_OVERLAP_RESOLUTION,
    OVERLAP_REFINE_TOL,
};
pub use point_mass::{bb_evaluate, PointMass};
pub use uniform::UniformSphere;

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{Povm, PureState};
use crate::sphere::Vec3;

/// Ontic state: a point on S² or a quantum state itself.
#[derive(Debug, Clone, PartialEq)]
pub enum OnticState {
    Sphere(Vec3),
    Quantum(PureState),
}

impl OnticState {
    pub fn sphere(&self) -> Result<Vec3> {
        match self {
            OnticState::Sphere(x) => Ok(*x),
            OnticState::Quantum(_) => Err(Error::Unsupported(
                "expected a sphere-valued ontic state".into(),
            )),
        }
    }
}

/// Density of `ρ(·|ψ)` on S² for fixed ψ.
pub type SphereDensity = Box<dyn Fn(Vec3) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    KochenSpecker,
    PointMass,
    UniformSphere,
}

pub trait OntologicalModel: Send + Sync {
    fn kind(&self) -> ModelKind;

    /// True when `ρ(x|ψ)` is a delta distribution.
    fn is_point_mass(&self) -> bool {
        false
    }

    /// Errors unless ψ is a valid preparation for this model.
    fn supports(&self, psi: &PureState) -> Result<()>;

    /// `ρ(x|ψ)`; unavailable for point-mass models.
    fn density(&self, psi: &PureState, x: &OnticState) -> Result<f64>;

    /// Prepared density on S² for repeated evaluation.
    fn sphere_density(&self, psi: &PureState) -> Result<SphereDensity> {
        let _ = psi;
        Err(Error::Unsupported(format!(
            "{:?} has no density on the sphere",
            self.kind()
        )))
    }

    /// Draws `x ~ ρ(·|ψ)`.
    fn sample(&self, psi: &PureState, rng: &mut dyn RngCore) -> Result<OnticState>;

    /// Outcome probabilities `P(E_i|x, M)`.
    fn response(&self, x: &OnticState, povm: &Povm) -> Result<Vec<f64>>;

    /// `sup_x ρ(x|ψ) / (1/4π)` over all ψ, when finite and known.
    fn density_ratio_bound(&self) -> Option<f64> {
        None
    }

    /// Normals of great circles across which `ρ(·|ψ)` or the response to
    /// `povm` fails to be smooth. Used to align quadrature rules.
    fn kink_normals(&self, psi: &PureState, povm: Option<&Povm>) -> Result<Vec<Vec3>> {
        let _ = (psi, povm);
        Ok(Vec::new())
    }
}

pub(crate) fn check_unit(x: Vec3, what: &'static str) -> Result<Vec3> {
    let norm = x.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > crate::quantum::DIRECTION_TOL {
        return Err(Error::Normalization { what, norm });
    }
    Ok(x)
}
