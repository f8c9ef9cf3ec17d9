use rand::RngCore;
use serde::Serialize;

use super::{OnticState, OntologicalModel};
use crate::error::{Error, Result};
use crate::models::DEFAULT_OVERLAP_RESOLUTION;
use crate::parallel::{map_chunks, CHUNK};
use crate::quantum::{born_probabilities, Povm, PureState};
use crate::rng::{child_stream, Domain};
use crate::sphere::SphereRule;
use crate::stats::z_score;

/// Polar nodes of the aligned Born quadrature rule.
pub const BORN_QUADRATURE_POLAR: usize = 96;
/// Azimuthal nodes per smooth sector of the aligned rule.
pub const BORN_QUADRATURE_AZIMUTHAL: usize = 64;

/// Simulated vs quantum outcome probabilities for one `(ψ, M)`.
#[derive(Debug, Clone, Serialize)]
pub struct BornReport {
    pub born: Vec<f64>,
    /// `∫ P(E_i|x) ρ(x|ψ) dΩ` by quadrature; absent for point-mass models.
    pub quadrature: Option<Vec<f64>>,
    pub quadrature_nodes: usize,
    pub max_quadrature_error: Option<f64>,
    pub samples: u64,
    pub monte_carlo: Vec<f64>,
    pub monte_carlo_std_error: Vec<f64>,
    pub z_scores: Vec<f64>,
}

impl BornReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().map(|z| z.abs()).fold(0.0, f64::max)
    }

    /// Quadrature error within `quad_tol` and every |z| within `z_max`.
    pub fn passes(&self, quad_tol: f64, z_max: f64) -> bool {
        self.max_quadrature_error.is_none_or(|e| e <= quad_tol) && self.max_abs_z() <= z_max
    }
}

/// Checks that the model reproduces the Born rule for `(ψ, M)`, both by
/// quadrature over the ontic sphere and by Monte Carlo over `samples` draws
/// of `ρ(·|ψ)`.
pub fn verify_born(
    model: &dyn OntologicalModel,
    psi: &PureState,
    povm: &Povm,
    samples: u64,
    rng: &mut dyn RngCore,
) -> Result<BornReport> {
    model.supports(psi)?;
    if samples < 2 {
        return Err(Error::invalid("Monte Carlo needs at least 2 samples"));
    }
    let born = born_probabilities(psi, povm)?;
    let k = born.len();

    let (quadrature, quadrature_nodes) = if model.is_point_mass() {
        (None, 0)
    } else {
        let density = model.sphere_density(psi)?;
        let normals = model.kink_normals(psi, Some(povm))?;
        let rule = SphereRule::aligned(&normals, BORN_QUADRATURE_POLAR, BORN_QUADRATURE_AZIMUTHAL)
            .unwrap_or_else(|| SphereRule::fibonacci(DEFAULT_OVERLAP_RESOLUTION));
        // Surface unsupported measurements before the parallel sweep.
        model.response(&OnticState::Sphere(rule.nodes[0]), povm)?;
        let q = rule.integrate_vec(k, |x| {
            let rho = density(x);
            let r = model
                .response(&OnticState::Sphere(x), povm)
                .unwrap_or_else(|_| vec![f64::NAN; k]);
            r.into_iter().map(|p| p * rho).collect()
        });
        (Some(q), rule.len())
    };
    let max_quadrature_error = quadrature.as_ref().map(|q| {
        q.iter()
            .zip(&born)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });

    let master = rng.next_u64();
    let partial = map_chunks(samples, CHUNK, |c, range| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut r = child_stream(master, Domain::Sampling, c);
        let mut sum = vec![0.0; k];
        let mut sum2 = vec![0.0; k];
        for _ in range {
            let x = model.sample(psi, &mut r)?;
            for (i, p) in model.response(&x, povm)?.into_iter().enumerate() {
                sum[i] += p;
                sum2[i] += p * p;
            }
        }
        Ok((sum, sum2))
    });
    let mut sum = vec![0.0; k];
    let mut sum2 = vec![0.0; k];
    for chunk in partial {
        let (s, s2) = chunk?;
        for i in 0..k {
            sum[i] += s[i];
            sum2[i] += s2[i];
        }
    }
    let n = samples as f64;
    let monte_carlo: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let monte_carlo_std_error: Vec<f64> = (0..k)
        .map(|i| {
            let var = (sum2[i] / n - monte_carlo[i] * monte_carlo[i]).max(0.0) * n / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let z_scores = (0..k)
        .map(|i| z_score(monte_carlo[i], born[i], monte_carlo_std_error[i]))
        .collect();

    Ok(BornReport {
        born,
        quadrature,
        quadrature_nodes,
        max_quadrature_error,
        samples,
        monte_carlo,
        monte_carlo_std_error,
        z_scores,
    })
}
