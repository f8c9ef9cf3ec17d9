use rand::RngCore;
use serde::Serialize;

use super::OntologicalModel;
use crate::error::{Error, Result};
use crate::quantum::PureState;

pub const MIN_EQUIPARTITION_SAMPLES: u64 = 1000;

/// Statistics of `ln ρ(x|ψ)` under `x ~ ρ(·|ψ)`. No verdict is attached.
#[derive(Debug, Clone, Serialize)]
pub struct EquipartitionReport {
    pub samples: u64,
    pub point_mass: bool,
    pub mean_log_density: Option<f64>,
    pub std_log_density: Option<f64>,
}

pub fn equipartition_diagnostic(
    model: &dyn OntologicalModel,
    psi: &PureState,
    samples: u64,
    rng: &mut dyn RngCore,
) -> Result<EquipartitionReport> {
    if samples < MIN_EQUIPARTITION_SAMPLES {
        return Err(Error::invalid(format!(
            "equipartition diagnostic needs at least {MIN_EQUIPARTITION_SAMPLES} samples"
        )));
    }
    model.supports(psi)?;
    if model.is_point_mass() {
        return Ok(EquipartitionReport {
            samples,
            point_mass: true,
            mean_log_density: None,
            std_log_density: None,
        });
    }
    // Welford keeps constant inputs at exactly zero variance.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 1..=samples {
        let x = model.sample(psi, rng)?;
        let value = model.density(psi, &x)?.ln();
        let delta = value - mean;
        mean += delta / k as f64;
        m2 += delta * (value - mean);
    }
    Ok(EquipartitionReport {
        samples,
        point_mass: false,
        mean_log_density: Some(mean),
        std_log_density: Some((m2 / (samples - 1) as f64).max(0.0).sqrt()),
    })
}
