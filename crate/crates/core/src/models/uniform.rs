//! Toy model with a ψ-independent uniform density on S².
//!
//! It ignores the preparation entirely and answers with `tr(E_i)/d`, so it
//! does not reproduce the Born rule. Useful as a flat-density reference for
//! diagnostics.

use std::f64::consts::PI;

use rand::RngCore;

use super::{check_unit, ModelKind, OnticState, OntologicalModel, SphereDensity};
use crate::error::{Error, Result};
use crate::quantum::{Povm, PureState};
use crate::sphere::uniform_on_sphere;

const UNIFORM_DENSITY: f64 = 1.0 / (4.0 * PI);

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSphere;

impl OntologicalModel for UniformSphere {
    fn kind(&self) -> ModelKind {
        ModelKind::UniformSphere
    }

    fn supports(&self, psi: &PureState) -> Result<()> {
        if psi.qubits() != 1 {
            return Err(Error::dimension("uniform sphere model is single-qubit"));
        }
        Ok(())
    }

    fn density(&self, psi: &PureState, x: &OnticState) -> Result<f64> {
        self.supports(psi)?;
        check_unit(x.sphere()?, "ontic state")?;
        Ok(UNIFORM_DENSITY)
    }

    fn sphere_density(&self, psi: &PureState) -> Result<SphereDensity> {
        self.supports(psi)?;
        Ok(Box::new(|_| UNIFORM_DENSITY))
    }

    fn sample(&self, psi: &PureState, rng: &mut dyn RngCore) -> Result<OnticState> {
        self.supports(psi)?;
        Ok(OnticState::Sphere(uniform_on_sphere(rng)))
    }

    fn response(&self, x: &OnticState, povm: &Povm) -> Result<Vec<f64>> {
        x.sphere()?;
        let d = povm.dim() as f64;
        Ok(povm
            .effects()
            .iter()
            .map(|e| e.matrix().trace().re / d)
            .collect())
    }

    fn density_ratio_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}
