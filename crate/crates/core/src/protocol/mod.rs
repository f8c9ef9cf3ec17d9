//! Finite-communication simulation of a qubit prepare-and-measure channel.
//!
//! Sender and receiver share an iid proposal stream χ, generated from a
//! master seed and the round index only, so it cannot depend on the
//! prepared state. The sender scans the stream with a rejection rule that
//! makes the accepted proposal distributed as `ρ(x|ψ)` and transmits the
//! accepted index with an Elias-gamma code; the receiver looks the proposal
//! up and answers the measurement with the model's response function.

mod cost;
mod gamma;
mod greedy;
mod plain;

pub use cost::{
    estimate_cost_greedy, estimate_cost_plain, CostOptions, CostReport, MiEstimate, ProtocolKind,
    StateCost, MIN_COST_ROUNDS, MIN_MI_OCCUPANCY,
};
pub use gamma::{decode_index, encode_index, gamma_length};
pub use greedy::{run_round_greedy, GreedySimulator, ResponseTable};
pub use plain::{run_round_plain, simulate_plain, PlainSimulator, SimulationReport};

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{child_stream, Domain, StreamRng};
use crate::sphere::{uniform_on_sphere, Vec3};

/// Proposal stream length after which a round is aborted.
pub const MAX_TRIALS: u64 = 1_000_000;

/// Distribution of the iid shared proposals.
pub trait ProposalDistribution: Send + Sync {
    type Draw: Copy;

    fn draw(&self, rng: &mut StreamRng) -> Self::Draw;
}

/// Uniform proposals on S² (density `1/4π`).
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSphereProposal;

impl ProposalDistribution for UniformSphereProposal {
    type Draw = Vec3;

    fn draw(&self, rng: &mut StreamRng) -> Vec3 {
        uniform_on_sphere(rng)
    }
}

/// Proposals over the cells of a discretized channel.
#[derive(Debug, Clone)]
pub struct CellProposal {
    probabilities: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl CellProposal {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        let alias = WeightedAliasIndex::new(probabilities.clone())
            .map_err(|e| Error::invalid(format!("invalid proposal weights: {e}")))?;
        Ok(CellProposal {
            probabilities,
            alias,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

impl ProposalDistribution for CellProposal {
    type Draw = usize;

    fn draw(&self, rng: &mut StreamRng) -> usize {
        self.alias.sample(rng)
    }
}

/// Master seed plus proposal law; yields the proposal stream of any round.
#[derive(Debug, Clone)]
pub struct SharedRandomness<P> {
    seed: u64,
    proposal: P,
}

impl<P: ProposalDistribution> SharedRandomness<P> {
    pub fn new(seed: u64, proposal: P) -> Self {
        SharedRandomness { seed, proposal }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn proposal(&self) -> &P {
        &self.proposal
    }

    /// Lazy iid proposal sequence `x_1, x_2, …` of `round`.
    pub fn stream(&self, round: u64) -> ProposalStream<'_, P> {
        ProposalStream {
            proposal: &self.proposal,
            rng: child_stream(self.seed, Domain::Shared, round),
        }
    }

    pub(crate) fn sender_rng(&self, round: u64) -> StreamRng {
        child_stream(self.seed, Domain::Sender, round)
    }

    pub(crate) fn receiver_rng(&self, round: u64) -> StreamRng {
        child_stream(self.seed, Domain::Receiver, round)
    }
}

pub struct ProposalStream<'a, P> {
    proposal: &'a P,
    rng: StreamRng,
}

impl<P: ProposalDistribution> Iterator for ProposalStream<'_, P> {
    type Item = P::Draw;

    fn next(&mut self) -> Option<P::Draw> {
        Some(self.proposal.draw(&mut self.rng))
    }
}

/// One protocol round as seen on the wire.
#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    pub round: u64,
    /// 1-based position of the accepted proposal.
    pub accepted_index: u64,
    /// Elias-gamma codeword of `accepted_index`.
    pub message: String,
    pub bits_sent: u32,
    pub trials: u64,
    pub outcome: usize,
    /// The accepted ontic point (cell centre for discretized channels).
    pub ontic_point: Vec3,
    pub cell: Option<usize>,
}

impl Transcript {
    pub(crate) fn new(
        round: u64,
        accepted_index: u64,
        outcome: usize,
        ontic_point: Vec3,
        cell: Option<usize>,
    ) -> Result<Self> {
        let message = encode_index(accepted_index)?;
        Ok(Transcript {
            round,
            accepted_index,
            bits_sent: message.len() as u32,
            message,
            trials: accepted_index,
            outcome,
            ontic_point,
            cell,
        })
    }
}

/// Receiver-side draw of an outcome from a response vector.
pub(crate) fn sample_outcome(response: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in response.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    response.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
