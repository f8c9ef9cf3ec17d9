use rand::Rng;
use serde::Serialize;

use super::{sample_outcome, SharedRandomness, Transcript, UniformSphereProposal, MAX_TRIALS};
use crate::error::{Error, Result};
use crate::models::{OnticState, OntologicalModel, SphereDensity};
use crate::parallel::{map_chunks, CHUNK};
use crate::quantum::{born_probabilities, Povm, PureState};
use crate::sphere::SPHERE_AREA;
use crate::stats::{chi_square_gof, z_score, ChiSquareTest};

/// Bounded-ratio rejection sampling of `ρ(x|ψ)` against uniform proposals.
///
/// Proposal `x_i` is accepted with probability `ρ(x_i|ψ)·4π / M` where `M`
/// bounds `ρ/(1/4π)`; the first accepted index is geometric with mean `M`.
pub struct PlainSimulator<'a> {
    model: &'a dyn OntologicalModel,
    povm: &'a Povm,
    density: SphereDensity,
    ratio_bound: f64,
}

impl<'a> PlainSimulator<'a> {
    pub fn new(model: &'a dyn OntologicalModel, psi: &PureState, povm: &'a Povm) -> Result<Self> {
        model.supports(psi)?;
        let ratio_bound = model
            .density_ratio_bound()
            .ok_or_else(|| Error::Unsupported("model has no known density ratio bound".into()))?;
        let density = model.sphere_density(psi)?;
        Ok(PlainSimulator {
            model,
            povm,
            density,
            ratio_bound,
        })
    }

    pub fn ratio_bound(&self) -> f64 {
        self.ratio_bound
    }

    pub fn run(
        &self,
        shared: &SharedRandomness<UniformSphereProposal>,
        round: u64,
    ) -> Result<Transcript> {
        let mut sender = shared.sender_rng(round);
        let scale = SPHERE_AREA / self.ratio_bound;
        for (i, x) in shared.stream(round).enumerate() {
            let index = i as u64 + 1;
            if index > MAX_TRIALS {
                return Err(Error::StreamExhausted { trials: MAX_TRIALS });
            }
            let u: f64 = sender.random();
            if u < (self.density)(x) * scale {
                let response = self.model.response(&OnticState::Sphere(x), self.povm)?;
                let outcome = sample_outcome(&response, &mut shared.receiver_rng(round));
                return Transcript::new(round, index, outcome, x, None);
            }
        }
        unreachable!("proposal streams are infinite")
    }
}

/// One round of the plain protocol for `(ψ, M)`.
pub fn run_round_plain(
    model: &dyn OntologicalModel,
    psi: &PureState,
    povm: &Povm,
    shared: &SharedRandomness<UniformSphereProposal>,
    round: u64,
) -> Result<Transcript> {
    PlainSimulator::new(model, psi, povm)?.run(shared, round)
}

/// Outcome statistics of many plain rounds for one `(ψ, M)`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub rounds: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub born: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub chi_square: ChiSquareTest,
    pub mean_trials: f64,
    pub average_bits: f64,
    pub worst_bits: u32,
}

impl SimulationReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// Runs rounds `0..rounds` of the plain protocol; transcripts are kept only
/// when `keep_transcripts` is set.
pub fn simulate_plain(
    model: &dyn OntologicalModel,
    psi: &PureState,
    povm: &Povm,
    rounds: u64,
    seed: u64,
    keep_transcripts: bool,
) -> Result<(SimulationReport, Option<Vec<Transcript>>)> {
    if rounds == 0 {
        return Err(Error::invalid("at least one round is required"));
    }
    let sim = PlainSimulator::new(model, psi, povm)?;
    let shared = SharedRandomness::new(seed, UniformSphereProposal);
    let k = povm.len();
    let chunks = map_chunks(rounds, CHUNK, |_, range| -> Result<_> {
        let mut counts = vec![0u64; k];
        let (mut trials, mut bits, mut worst) = (0u64, 0u64, 0u32);
        let mut kept = Vec::new();
        for round in range {
            let t = sim.run(&shared, round)?;
            counts[t.outcome] += 1;
            trials += t.trials;
            bits += t.bits_sent as u64;
            worst = worst.max(t.bits_sent);
            if keep_transcripts {
                kept.push(t);
            }
        }
        Ok((counts, trials, bits, worst, kept))
    });
    let mut counts = vec![0u64; k];
    let (mut trials, mut bits, mut worst) = (0u64, 0u64, 0u32);
    let mut transcripts = keep_transcripts.then(Vec::new);
    for chunk in chunks {
        let (c, t, b, w, kept) = chunk?;
        counts.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
        trials += t;
        bits += b;
        worst = worst.max(w);
        if let Some(all) = transcripts.as_mut() {
            all.extend(kept);
        }
    }
    let n = rounds as f64;
    let born = born_probabilities(psi, povm)?;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let z_scores = frequencies
        .iter()
        .zip(&born)
        .map(|(f, p)| z_score(*f, *p, (p * (1.0 - p) / n).sqrt()))
        .collect();
    let report = SimulationReport {
        rounds,
        chi_square: chi_square_gof(&counts, &born),
        counts,
        frequencies,
        born,
        z_scores,
        mean_trials: trials as f64 / n,
        average_bits: bits as f64 / n,
        worst_bits: worst,
    };
    Ok((report, transcripts))
}
