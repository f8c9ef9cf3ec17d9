use serde::Serialize;

use super::{GreedySimulator, PlainSimulator, SharedRandomness, Transcript, UniformSphereProposal};
use crate::error::{Error, Result};
use crate::models::OntologicalModel;
use crate::parallel::{map_chunks, CHUNK};
use crate::quantum::{bloch_of_qubit, born_probabilities, haar_random_state, Povm, PureState};
use crate::rng::{child_stream, Domain};
use crate::sphere::Vec3;
use crate::stats::{z_score, JointCounts};

/// Fewest rounds accepted by the cost estimators.
pub const MIN_COST_ROUNDS: u64 = 10_000;
/// Minimum mean occupancy of the MI contingency table.
pub const MIN_MI_OCCUPANCY: f64 = 10.0;

/// Index buckets `⌊log₂ i⌋`, with the last one open-ended.
const INDEX_BUCKETS: usize = 8;
/// Octants of the sphere, used to coarsen both χ and ψ.
const OCTANTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Plain,
    Greedy,
}

#[derive(Debug, Clone)]
pub struct CostOptions {
    pub rounds: u64,
    pub seed: u64,
    /// Number of Haar-sampled states for the plain protocol; round `r`
    /// prepares state `r mod states`.
    pub states: usize,
}

impl Default for CostOptions {
    fn default() -> Self {
        CostOptions {
            rounds: 100_000,
            seed: crate::rng::DEFAULT_SEED,
            states: 64,
        }
    }
}

/// Plug-in estimate of `I(k,χ;ψ)` on octant-coarsened variables.
#[derive(Debug, Clone, Serialize)]
pub struct MiEstimate {
    pub bits: f64,
    pub bias_bound_bits: f64,
    pub cells: usize,
    pub mean_occupancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateCost {
    pub node: usize,
    pub bloch: Vec3,
    pub rounds: u64,
    pub average_bits: f64,
    pub mean_trials: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub protocol: ProtocolKind,
    pub rounds: u64,
    pub average_bits: f64,
    /// Largest per-state average over the sampled states only.
    pub max_state_average_bits: f64,
    pub worst_bits: u32,
    pub mean_trials: f64,
    pub mutual_information: Option<MiEstimate>,
    pub outcome_frequencies: Vec<f64>,
    pub born_expected: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub per_state: Vec<StateCost>,
    pub warnings: Vec<String>,
}

impl CostReport {
    /// `Î ≤ C̄ + bias`; `None` when the MI field was omitted.
    pub fn lemma_ordering_holds(&self) -> Option<bool> {
        self.mutual_information
            .as_ref()
            .map(|mi| mi.bits <= self.average_bits + mi.bias_bound_bits)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

fn octant(v: Vec3) -> usize {
    (v.x() >= 0.0) as usize | ((v.y() >= 0.0) as usize) << 1 | ((v.z() >= 0.0) as usize) << 2
}

fn index_bucket(index: u64) -> usize {
    (index.ilog2() as usize).min(INDEX_BUCKETS - 1)
}

/// Per-chunk accumulator; merged in chunk order.
struct Tally {
    bits: Vec<u64>,
    trials: Vec<u64>,
    visits: Vec<u64>,
    worst: u32,
    outcomes: Vec<u64>,
    joint: JointCounts,
}

impl Tally {
    fn new(nodes: usize, outcomes: usize) -> Self {
        Tally {
            bits: vec![0; nodes],
            trials: vec![0; nodes],
            visits: vec![0; nodes],
            worst: 0,
            outcomes: vec![0; outcomes],
            joint: JointCounts::new(OCTANTS, INDEX_BUCKETS * OCTANTS),
        }
    }

    fn record(&mut self, node: usize, psi_octant: usize, t: &Transcript) {
        self.bits[node] += t.bits_sent as u64;
        self.trials[node] += t.trials;
        self.visits[node] += 1;
        self.worst = self.worst.max(t.bits_sent);
        self.outcomes[t.outcome] += 1;
        let chi = index_bucket(t.accepted_index) * OCTANTS + octant(t.ontic_point);
        self.joint.add(psi_octant, chi);
    }

    fn merge(&mut self, other: Tally) {
        let add = |a: &mut Vec<u64>, b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.bits, &other.bits);
        add(&mut self.trials, &other.trials);
        add(&mut self.visits, &other.visits);
        add(&mut self.outcomes, &other.outcomes);
        self.worst = self.worst.max(other.worst);
        self.joint.merge(&other.joint);
    }
}

fn mi_estimate(joint: &JointCounts, warnings: &mut Vec<String>) -> Option<MiEstimate> {
    let mean_occupancy = joint.total() as f64 / joint.cells() as f64;
    if mean_occupancy < MIN_MI_OCCUPANCY {
        warnings.push(format!(
            "mutual information omitted: mean bin occupancy {mean_occupancy:.2} < {MIN_MI_OCCUPANCY}"
        ));
        return None;
    }
    Some(MiEstimate {
        bits: joint.mutual_information_bits(),
        bias_bound_bits: joint.bias_bound_bits(),
        cells: joint.cells(),
        mean_occupancy,
    })
}

fn run_rounds<F>(
    protocol: ProtocolKind,
    rounds: u64,
    nodes: &[(Vec3, Vec<f64>)],
    outcomes: usize,
    node_of: impl Fn(u64) -> usize + Sync + Send,
    round_fn: F,
) -> Result<CostReport>
where
    F: Fn(usize, u64) -> Result<Transcript> + Sync + Send,
{
    if rounds < MIN_COST_ROUNDS {
        return Err(Error::invalid(format!(
            "cost estimation needs at least {MIN_COST_ROUNDS} rounds, got {rounds}"
        )));
    }
    let octants: Vec<usize> = nodes.iter().map(|(b, _)| octant(*b)).collect();
    let partials = map_chunks(rounds, CHUNK, |_, range| -> Result<Tally> {
        let mut tally = Tally::new(nodes.len(), outcomes);
        for round in range {
            let node = node_of(round);
            let t = round_fn(node, round)?;
            tally.record(node, octants[node], &t);
        }
        Ok(tally)
    });
    let mut total = Tally::new(nodes.len(), outcomes);
    for p in partials {
        total.merge(p?);
    }

    let n = rounds as f64;
    let mut born_expected = vec![0.0; outcomes];
    let mut born_var = vec![0.0; outcomes];
    for ((_, born), &visits) in nodes.iter().zip(&total.visits) {
        for (j, &p) in born.iter().enumerate() {
            born_expected[j] += visits as f64 * p / n;
            born_var[j] += visits as f64 * p * (1.0 - p) / (n * n);
        }
    }
    let outcome_frequencies: Vec<f64> = total.outcomes.iter().map(|&c| c as f64 / n).collect();
    let z_scores = outcome_frequencies
        .iter()
        .zip(&born_expected)
        .zip(&born_var)
        .map(|((f, e), v)| z_score(*f, *e, v.sqrt()))
        .collect();

    let per_state: Vec<StateCost> = nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| total.visits[*i] > 0)
        .map(|(i, (bloch, _))| {
            let visits = total.visits[i] as f64;
            StateCost {
                node: i,
                bloch: *bloch,
                rounds: total.visits[i],
                average_bits: total.bits[i] as f64 / visits,
                mean_trials: total.trials[i] as f64 / visits,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    let mutual_information = mi_estimate(&total.joint, &mut warnings);

    Ok(CostReport {
        protocol,
        rounds,
        average_bits: total.bits.iter().sum::<u64>() as f64 / n,
        max_state_average_bits: per_state.iter().map(|s| s.average_bits).fold(0.0, f64::max),
        worst_bits: total.worst,
        mean_trials: total.trials.iter().sum::<u64>() as f64 / n,
        mutual_information,
        outcome_frequencies,
        born_expected,
        z_scores,
        per_state,
        warnings,
    })
}

/// Cost of the plain protocol over Haar-random qubit states measured by
/// `povm`.
pub fn estimate_cost_plain(
    model: &dyn OntologicalModel,
    povm: &Povm,
    options: &CostOptions,
) -> Result<CostReport> {
    if options.states == 0 {
        return Err(Error::invalid("at least one state is required"));
    }
    let mut rng = child_stream(options.seed, Domain::States, 0);
    let states = (0..options.states)
        .map(|_| haar_random_state(1, &mut rng))
        .collect::<Result<Vec<PureState>>>()?;
    let simulators = states
        .iter()
        .map(|psi| PlainSimulator::new(model, psi, povm))
        .collect::<Result<Vec<_>>>()?;
    let nodes = states
        .iter()
        .map(|psi| Ok((bloch_of_qubit(psi)?.vec(), born_probabilities(psi, povm)?)))
        .collect::<Result<Vec<_>>>()?;
    let shared = SharedRandomness::new(options.seed, UniformSphereProposal);
    let count = options.states as u64;
    run_rounds(
        ProtocolKind::Plain,
        options.rounds,
        &nodes,
        povm.len(),
        |round| (round % count) as usize,
        |node, round| simulators[node].run(&shared, round),
    )
}

/// Cost of the greedy protocol, cycling through the channel's input nodes.
pub fn estimate_cost_greedy(
    simulator: &GreedySimulator<'_>,
    povm: &Povm,
    options: &CostOptions,
) -> Result<CostReport> {
    let channel = simulator.channel();
    if channel.inputs().len() != channel.n_in() {
        return Err(Error::invalid("channel has no input-state geometry"));
    }
    if simulator.responses().outcomes() != povm.len() {
        return Err(Error::dimension(
            "response table does not match the measurement",
        ));
    }
    let nodes = (0..channel.n_in())
        .map(|i| {
            let psi = channel
                .input_state(i)
                .expect("input geometry checked above");
            Ok((channel.inputs()[i], born_probabilities(&psi, povm)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let shared = simulator.shared_randomness(options.seed)?;
    let count = channel.n_in() as u64;
    run_rounds(
        ProtocolKind::Greedy,
        options.rounds,
        &nodes,
        povm.len(),
        |round| (round % count) as usize,
        |node, round| simulator.run(node, &shared, round),
    )
}
