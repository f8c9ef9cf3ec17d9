//! Greedy rejection sampling on a discretized channel.
//!
//! With target row `q`, proposal `p` and accepted-so-far mass `p*_k`, the
//! step-`k` proposal `x` is accepted with probability
//! `(min(q(x), p(x)L_k) − p*_{k−1}(x)) / ((1 − s_{k−1}) p(x))`, where
//! `L_k = Σ_{m≤k} (1 − s_{m−1})` and `p*_k(x) = min(q(x), p(x)L_k)`.
//! Each row keeps its cells sorted by `q/p`, so `s_k` is a binary search.

use std::sync::OnceLock;

use rand::Rng;

use super::{sample_outcome, CellProposal, SharedRandomness, Transcript, MAX_TRIALS};
use crate::capacity::DiscretizedChannel;
use crate::error::{Error, Result};
use crate::models::{OnticState, OntologicalModel};
use crate::quantum::Povm;
use crate::sphere::Vec3;

/// Response vector of the measurement for every output cell.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    rows: Vec<Vec<f64>>,
}

impl ResponseTable {
    pub fn new(
        model: &dyn OntologicalModel,
        channel: &DiscretizedChannel,
        povm: &Povm,
    ) -> Result<Self> {
        if channel.outputs().is_empty() {
            return Err(Error::invalid("channel has no ontic cell geometry"));
        }
        let rows = channel
            .outputs()
            .iter()
            .map(|x| model.response(&OnticState::Sphere(*x), povm))
            .collect::<Result<Vec<_>>>()?;
        Ok(ResponseTable { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        ResponseTable { rows }
    }

    pub fn get(&self, cell: usize) -> &[f64] {
        &self.rows[cell]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn outcomes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Cells with `q > 0` sorted by ratio, with prefix sums of `q` and suffix
/// sums of `p` so that `s(L) = Σ min(q, pL)` is `O(log n)`.
#[derive(Debug)]
struct RowSchedule {
    ratios: Vec<f64>,
    q_prefix: Vec<f64>,
    p_suffix: Vec<f64>,
}

impl RowSchedule {
    fn build(q: &[f64], p: &[f64]) -> Result<Self> {
        let mut cells: Vec<(f64, f64, f64)> = Vec::new();
        for (cell, (&qj, &pj)) in q.iter().zip(p).enumerate() {
            if qj > 0.0 {
                if pj <= 0.0 {
                    return Err(Error::InfeasibleProposal { cell, target: qj });
                }
                cells.push((qj / pj, qj, pj));
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = cells.len();
        let mut q_prefix = vec![0.0; n + 1];
        let mut p_suffix = vec![0.0; n + 1];
        for k in 0..n {
            q_prefix[k + 1] = q_prefix[k] + cells[k].1;
        }
        for k in (0..n).rev() {
            p_suffix[k] = p_suffix[k + 1] + cells[k].2;
        }
        Ok(RowSchedule {
            ratios: cells.iter().map(|c| c.0).collect(),
            q_prefix,
            p_suffix,
        })
    }

    /// Accepted mass `s(L) = Σ_j min(q_j, p_j L)`.
    fn accepted_mass(&self, level: f64) -> f64 {
        let k = self.ratios.partition_point(|&r| r <= level);
        (self.q_prefix[k] + level * self.p_suffix[k]).min(1.0)
    }
}

/// Greedy simulator for all rows of a channel under one proposal marginal.
pub struct GreedySimulator<'a> {
    channel: &'a DiscretizedChannel,
    marginal: Vec<f64>,
    responses: ResponseTable,
    schedules: Vec<OnceLock<RowSchedule>>,
}

impl<'a> GreedySimulator<'a> {
    /// `prior` induces the proposal marginal `p = Σ_i prior_i T_i`.
    pub fn new(
        channel: &'a DiscretizedChannel,
        prior: &[f64],
        responses: ResponseTable,
    ) -> Result<Self> {
        if prior.len() != channel.n_in() {
            return Err(Error::dimension(
                "prior length does not match channel inputs",
            ));
        }
        if responses.len() != channel.n_out() {
            return Err(Error::dimension(
                "response table does not match channel outputs",
            ));
        }
        let marginal = channel.output_marginal(prior);
        Self::with_marginal(channel, marginal, responses)
    }

    /// Uses an explicit proposal distribution over cells.
    pub fn with_marginal(
        channel: &'a DiscretizedChannel,
        marginal: Vec<f64>,
        responses: ResponseTable,
    ) -> Result<Self> {
        if marginal.len() != channel.n_out() {
            return Err(Error::dimension(
                "proposal length does not match channel outputs",
            ));
        }
        for i in 0..channel.n_in() {
            for (cell, (&q, &p)) in channel.row(i).iter().zip(&marginal).enumerate() {
                if q > 0.0 && p <= 0.0 {
                    return Err(Error::InfeasibleProposal { cell, target: q });
                }
            }
        }
        Ok(GreedySimulator {
            channel,
            schedules: (0..channel.n_in()).map(|_| OnceLock::new()).collect(),
            marginal,
            responses,
        })
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn responses(&self) -> &ResponseTable {
        &self.responses
    }

    pub fn channel(&self) -> &DiscretizedChannel {
        self.channel
    }

    /// Shared randomness whose proposals follow this simulator's marginal.
    pub fn shared_randomness(&self, seed: u64) -> Result<SharedRandomness<CellProposal>> {
        Ok(SharedRandomness::new(
            seed,
            CellProposal::new(self.marginal.clone())?,
        ))
    }

    fn schedule(&self, row: usize) -> Result<&RowSchedule> {
        if let Some(s) = self.schedules[row].get() {
            return Ok(s);
        }
        let built = RowSchedule::build(self.channel.row(row), &self.marginal)?;
        Ok(self.schedules[row].get_or_init(|| built))
    }

    fn acceptance(
        &self,
        row: usize,
        cell: usize,
        prev_level: f64,
        level: f64,
        prev_mass: f64,
    ) -> f64 {
        let q = self.channel.row(row)[cell];
        let p = self.marginal[cell];
        let remaining = q - (p * prev_level).min(q);
        if remaining <= 0.0 {
            return 0.0;
        }
        let budget = (1.0 - prev_mass) * p;
        if budget <= 0.0 {
            return 1.0;
        }
        (((p * level).min(q) - (p * prev_level).min(q)) / budget).clamp(0.0, 1.0)
    }

    /// Acceptance probability of `cell` at 1-based `step` for input `row`.
    pub fn step_acceptance(&self, row: usize, step: u64, cell: usize) -> Result<f64> {
        if step == 0 {
            return Err(Error::invalid("steps are 1-based"));
        }
        let schedule = self.schedule(row)?;
        let (mut level, mut mass) = (0.0, 0.0);
        for _ in 1..step {
            level += 1.0 - mass;
            mass = schedule.accepted_mass(level);
        }
        let next = level + (1.0 - mass);
        Ok(self.acceptance(row, cell, level, next, mass))
    }

    pub fn run(
        &self,
        row: usize,
        shared: &SharedRandomness<CellProposal>,
        round: u64,
    ) -> Result<Transcript> {
        if row >= self.channel.n_in() {
            return Err(Error::invalid(format!("input node {row} out of range")));
        }
        if shared.proposal().probabilities().len() != self.marginal.len() {
            return Err(Error::dimension(
                "shared proposal does not match the channel",
            ));
        }
        let schedule = self.schedule(row)?;
        let mut sender = shared.sender_rng(round);
        let (mut level, mut mass) = (0.0f64, 0.0f64);
        for (i, cell) in shared.stream(round).enumerate() {
            let index = i as u64 + 1;
            if index > MAX_TRIALS {
                return Err(Error::StreamExhausted { trials: MAX_TRIALS });
            }
            let next_level = level + (1.0 - mass);
            let a = self.acceptance(row, cell, level, next_level, mass);
            let u: f64 = sender.random();
            if u < a {
                let outcome =
                    sample_outcome(self.responses.get(cell), &mut shared.receiver_rng(round));
                let point = self
                    .channel
                    .outputs()
                    .get(cell)
                    .copied()
                    .unwrap_or(Vec3::new(0.0, 0.0, 0.0));
                return Transcript::new(round, index, outcome, point, Some(cell));
            }
            level = next_level;
            mass = schedule.accepted_mass(level);
        }
        unreachable!("proposal streams are infinite")
    }
}

/// One greedy round for input node `row`.
pub fn run_round_greedy(
    simulator: &GreedySimulator<'_>,
    row: usize,
    shared: &SharedRandomness<CellProposal>,
    round: u64,
) -> Result<Transcript> {
    simulator.run(row, shared, round)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DiscretizedChannel, Vec<f64>) {
        let rows = vec![
            vec![0.30, 0.05, 0.00, 0.20, 0.10, 0.15, 0.15, 0.05],
            vec![0.02, 0.08, 0.40, 0.00, 0.25, 0.05, 0.10, 0.10],
            vec![0.125; 8],
        ];
        let p = vec![0.10, 0.15, 0.05, 0.20, 0.10, 0.10, 0.20, 0.10];
        (DiscretizedChannel::from_rows(&rows).unwrap(), p)
    }

    fn table(n: usize) -> ResponseTable {
        ResponseTable::from_rows(vec![vec![1.0, 0.0]; n])
    }

    /// Oracle: the accepted-mass recursion on full vectors,
    /// `α_k = min(q − p*_{k−1}, (1 − s_{k−1}) p)`.
    fn recursion_acceptance(q: &[f64], p: &[f64], steps: usize) -> Vec<Vec<f64>> {
        let mut accepted = vec![0.0; q.len()];
        let mut s = 0.0;
        let mut out = Vec::new();
        for _ in 0..steps {
            let alpha: Vec<f64> = q
                .iter()
                .zip(p)
                .zip(&accepted)
                .map(|((q, p), a)| (q - a).min((1.0 - s) * p).max(0.0))
                .collect();
            out.push(
                alpha
                    .iter()
                    .zip(p)
                    .map(|(a, p)| {
                        if (1.0 - s) * p > 0.0 {
                            a / ((1.0 - s) * p)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
            accepted.iter_mut().zip(&alpha).for_each(|(a, x)| *a += x);
            s = accepted.iter().sum();
        }
        out
    }

    #[test]
    fn acceptance_matches_full_vector_recursion() {
        let (ch, p) = toy();
        let sim = GreedySimulator::with_marginal(&ch, p.clone(), table(8)).unwrap();
        for row in 0..3 {
            let oracle = recursion_acceptance(ch.row(row), &p, 12);
            for (k, expected) in oracle.iter().enumerate() {
                for (cell, e) in expected.iter().enumerate() {
                    let a = sim.step_acceptance(row, k as u64 + 1, cell).unwrap();
                    assert!(
                        (a - e).abs() < 1e-12,
                        "row {row} step {} cell {cell}",
                        k + 1
                    );
                }
            }
        }
    }

    #[test]
    fn induced_distribution_equals_target_by_enumeration() {
        let (ch, p) = toy();
        let sim = GreedySimulator::with_marginal(&ch, p.clone(), table(8)).unwrap();
        for row in 0..3 {
            // Walk the proposal tree; rejected branches at one depth share
            // their future, so their masses are merged.
            let mut reach = 1.0;
            let mut induced = [0.0; 8];
            let mut step = 1u64;
            while reach > 1e-12 && step < 100_000 {
                let mut accept_mass = 0.0;
                for cell in 0..8 {
                    let m = reach * p[cell] * sim.step_acceptance(row, step, cell).unwrap();
                    induced[cell] += m;
                    accept_mass += m;
                }
                reach -= accept_mass;
                step += 1;
            }
            for (a, q) in induced.iter().zip(ch.row(row)) {
                assert!((a - q).abs() < 1e-9, "row {row}: {a} vs {q}");
            }
        }
    }

    #[test]
    fn equal_target_and_proposal_accepts_first_index() {
        let q = vec![0.1, 0.2, 0.3, 0.4];
        let ch = DiscretizedChannel::from_rows(std::slice::from_ref(&q)).unwrap();
        let sim = GreedySimulator::with_marginal(&ch, q, table(4)).unwrap();
        let shared = sim.shared_randomness(1).unwrap();
        for round in 0..1000 {
            let t = sim.run(0, &shared, round).unwrap();
            assert_eq!((t.accepted_index, t.bits_sent), (1, 1));
        }
    }

    #[test]
    fn infeasible_proposal_is_rejected() {
        let ch = DiscretizedChannel::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            GreedySimulator::with_marginal(&ch, vec![1.0, 0.0], table(2)),
            Err(Error::InfeasibleProposal { cell: 1, .. })
        ));
    }

    #[test]
    fn sampled_cells_follow_target() {
        let (ch, p) = toy();
        let sim = GreedySimulator::with_marginal(&ch, p, table(8)).unwrap();
        let shared = sim.shared_randomness(9).unwrap();
        let n = 200_000u64;
        let mut counts = [0u64; 8];
        for round in 0..n {
            counts[sim.run(1, &shared, round).unwrap().cell.unwrap()] += 1;
        }
        let t = crate::stats::chi_square_gof(&counts, ch.row(1));
        assert!(t.p_value > 1e-4, "{t:?}");
    }
}
