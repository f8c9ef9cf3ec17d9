//! Discretized ψ → x channels, mutual information and Blahut-Arimoto
//! capacity. All information quantities are in bits.
//!
//! Mutual information uses the standard orientation `I = H(x) − H(x|ψ)`.

mod refine;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::OntologicalModel;
use crate::quantum::{BlochVector, PureState};
use crate::sphere::{fibonacci_lattice, Vec3, SPHERE_AREA};

pub const MIN_INPUTS: usize = 64;
pub const MIN_OUTPUTS: usize = 256;
pub const DEFAULT_INPUTS: usize = 1000;
pub const DEFAULT_OUTPUTS: usize = 4000;
pub const DEFAULT_TOL_BITS: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Largest accepted `|row sum − 1|` before renormalization at default grids.
pub const ROW_DISTORTION_TOL: f64 = 1e-3;

const ROW_TOL: f64 = 1e-9;
const ROW_BLOCK: usize = 32;

/// Row-stochastic matrix `T[i][j] = P(cell j | input i)`.
#[derive(Debug, Clone)]
pub struct DiscretizedChannel {
    n_in: usize,
    n_out: usize,
    matrix: Vec<f64>,
    inputs: Vec<Vec3>,
    outputs: Vec<Vec3>,
    weights: Vec<f64>,
    row_factors: Vec<f64>,
}

impl DiscretizedChannel {
    /// Abstract channel from explicit rows; every row must be a probability
    /// vector of the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_in = rows.len();
        let n_out = rows.first().map_or(0, Vec::len);
        if n_in == 0 || n_out == 0 {
            return Err(Error::invalid("channel needs at least one row and column"));
        }
        let mut matrix = Vec::with_capacity(n_in * n_out);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_out {
                return Err(Error::dimension(format!(
                    "row {i} has length {}",
                    row.len()
                )));
            }
            if row.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::invalid(format!("row {i} sums to {sum}")));
            }
            matrix.extend_from_slice(row);
        }
        Ok(DiscretizedChannel {
            n_in,
            n_out,
            matrix,
            inputs: Vec::new(),
            outputs: Vec::new(),
            weights: vec![1.0; n_out],
            row_factors: vec![1.0; n_in],
        })
    }

    /// Attaches input Bloch vectors and output cell centres to an abstract
    /// channel.
    pub fn with_geometry(mut self, inputs: Vec<Vec3>, outputs: Vec<Vec3>) -> Result<Self> {
        if inputs.len() != self.n_in || outputs.len() != self.n_out {
            return Err(Error::dimension(
                "geometry does not match the channel shape",
            ));
        }
        self.inputs = inputs;
        self.outputs = outputs;
        Ok(self)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_out..(i + 1) * self.n_out]
    }

    /// Bloch vectors of the input nodes (empty for abstract channels).
    pub fn inputs(&self) -> &[Vec3] {
        &self.inputs
    }

    /// Centres of the ontic cells (empty for abstract channels).
    pub fn outputs(&self) -> &[Vec3] {
        &self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw quadrature row sums before renormalization.
    pub fn row_factors(&self) -> &[f64] {
        &self.row_factors
    }

    pub fn max_row_distortion(&self) -> f64 {
        self.row_factors
            .iter()
            .map(|f| (f - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Input node `i` as a qubit state.
    pub fn input_state(&self, i: usize) -> Option<PureState> {
        self.inputs
            .get(i)
            .map(|v| PureState::from_bloch(&BlochVector(*v)))
    }

    /// Output marginal `Σ_i p_i T_ij`.
    pub fn output_marginal(&self, prior: &[f64]) -> Vec<f64> {
        let partial: Vec<Vec<f64>> = prior
            .par_chunks(ROW_BLOCK)
            .enumerate()
            .map(|(b, ps)| {
                let mut acc = vec![0.0; self.n_out];
                for (k, &p) in ps.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (a, t) in acc.iter_mut().zip(self.row(b * ROW_BLOCK + k)) {
                        *a += p * t;
                    }
                }
                acc
            })
            .collect();
        partial
            .into_iter()
            .fold(vec![0.0; self.n_out], |mut acc, p| {
                acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
                acc
            })
    }

    /// Writes the matrix as CSV, one row per input node.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["input".to_string()];
        header.extend((0..self.n_out).map(|j| format!("cell_{j}")));
        w.write_record(&header)?;
        for i in 0..self.n_in {
            let mut record = vec![i.to_string()];
            record.extend(self.row(i).iter().map(|t| format!("{t:e}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    fn validate_prior(&self, prior: &[f64]) -> Result<()> {
        if prior.len() != self.n_in {
            return Err(Error::dimension(format!(
                "prior has {} entries, channel has {} inputs",
                prior.len(),
                self.n_in
            )));
        }
        if prior.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("prior has negative entries"));
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("prior sums to {sum}")));
        }
        Ok(())
    }

    /// `D_i = Σ_j T_ij log2(T_ij / q_j)` for every input.
    fn divergences(&self, q: &[f64], row_entropy: &[f64]) -> Vec<f64> {
        let log_q: Vec<f64> = q
            .iter()
            .map(|&v| if v > 0.0 { v.log2() } else { 0.0 })
            .collect();
        (0..self.n_in)
            .into_par_iter()
            .map(|i| {
                let cross: f64 = self
                    .row(i)
                    .iter()
                    .zip(&log_q)
                    .filter(|(t, _)| **t > 0.0)
                    .map(|(t, l)| t * l)
                    .sum();
                row_entropy[i] - cross
            })
            .collect()
    }

    fn row_neg_entropies(&self) -> Vec<f64> {
        (0..self.n_in)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .iter()
                    .filter(|t| **t > 0.0)
                    .map(|t| t * t.log2())
                    .sum()
            })
            .collect()
    }
}

/// Discretizes `ρ(x|ψ)` of a sphere-valued model: inputs and output cells
/// both on Fibonacci lattices, `T_ij ∝ ρ(x_j|ψ_i)·w_j` with each row
/// renormalized (raw sums kept in [`DiscretizedChannel::row_factors`]).
pub fn discretize_channel(
    model: &dyn OntologicalModel,
    n_in: usize,
    n_out: usize,
) -> Result<DiscretizedChannel> {
    if model.is_point_mass() {
        return Err(Error::Unsupported(
            "point-mass models have infinite capacity; no finite discretization exists".into(),
        ));
    }
    if n_in < MIN_INPUTS {
        return Err(Error::Resolution {
            got: n_in,
            min: MIN_INPUTS,
        });
    }
    if n_out < MIN_OUTPUTS {
        return Err(Error::Resolution {
            got: n_out,
            min: MIN_OUTPUTS,
        });
    }
    let inputs = fibonacci_lattice(n_in);
    let outputs = fibonacci_lattice(n_out);
    let w = SPHERE_AREA / n_out as f64;
    let weights = vec![w; n_out];

    let densities = inputs
        .iter()
        .map(|v| model.sphere_density(&PureState::from_bloch(&BlochVector(*v))))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(Vec<f64>, f64)> = densities
        .par_iter()
        .map(|density| {
            let mut row: Vec<f64> = outputs.iter().map(|x| density(*x) * w).collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|t| *t /= sum);
            }
            (row, sum)
        })
        .collect();
    let mut matrix = Vec::with_capacity(n_in * n_out);
    let mut row_factors = Vec::with_capacity(n_in);
    for (i, (row, sum)) in rows.into_iter().enumerate() {
        if !(sum > 0.0) {
            return Err(Error::invalid(format!("input node {i} has an empty row")));
        }
        matrix.extend(row);
        row_factors.push(sum);
    }
    Ok(DiscretizedChannel {
        n_in,
        n_out,
        matrix,
        inputs,
        outputs,
        weights,
        row_factors,
    })
}

/// `I(x;ψ) = Σ_ij p_i T_ij log2(T_ij / q_j)` in bits.
pub fn mutual_information(channel: &DiscretizedChannel, prior: &[f64]) -> Result<f64> {
    channel.validate_prior(prior)?;
    let q = channel.output_marginal(prior);
    let d = channel.divergences(&q, &channel.row_neg_entropies());
    Ok(prior
        .iter()
        .zip(&d)
        .map(|(p, d)| p * d)
        .sum::<f64>()
        .max(0.0))
}

/// `C + 2 log2(C + 1) + 2 log2 e`: the one-shot simulation cost ceiling.
pub fn oneshot_upper_bound(capacity_bits: f64) -> Result<f64> {
    if !(capacity_bits >= 0.0) {
        return Err(Error::invalid(format!(
            "capacity must be nonnegative, got {capacity_bits}"
        )));
    }
    Ok(capacity_bits + 2.0 * (capacity_bits + 1.0).log2() + 2.0 * std::f64::consts::LOG2_E)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityBounds {
    /// `log2 Σ p_i 2^{D_i}`, nondecreasing across iterations.
    pub lower: f64,
    /// `max_i D_i`.
    pub upper: f64,
}

/// Iterator state of the alternating maximization over input priors.
pub struct BlahutArimoto<'a> {
    channel: &'a DiscretizedChannel,
    prior: Vec<f64>,
    row_neg_entropy: Vec<f64>,
    iterations: usize,
}

impl<'a> BlahutArimoto<'a> {
    /// Starts from the uniform prior.
    pub fn new(channel: &'a DiscretizedChannel) -> Self {
        BlahutArimoto {
            channel,
            prior: vec![1.0 / channel.n_in as f64; channel.n_in],
            row_neg_entropy: channel.row_neg_entropies(),
            iterations: 0,
        }
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Bounds at the current prior without updating it.
    fn certify(&self) -> (Vec<f64>, CapacityBounds) {
        let q = self.channel.output_marginal(&self.prior);
        let d = self.channel.divergences(&q, &self.row_neg_entropy);
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = self
            .prior
            .iter()
            .zip(&d)
            .map(|(p, d)| p * (d - upper).exp2())
            .sum();
        (
            self.prior.clone(),
            CapacityBounds {
                lower: upper + z.log2(),
                upper,
            },
        )
    }

    /// Evaluates the bounds at the current prior, then applies one update.
    pub fn step(&mut self) -> CapacityBounds {
        let q = self.channel.output_marginal(&self.prior);
        let d = self.channel.divergences(&q, &self.row_neg_entropy);
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut scaled: Vec<f64> = self
            .prior
            .iter()
            .zip(&d)
            .map(|(p, d)| p * (d - upper).exp2())
            .collect();
        let z: f64 = scaled.iter().sum();
        scaled.iter_mut().for_each(|p| *p /= z);
        self.prior = scaled;
        self.iterations += 1;
        CapacityBounds {
            lower: upper + z.log2(),
            upper,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub lower_bound_bits: f64,
    pub upper_bound_bits: f64,
    pub gap_bits: f64,
    /// Blahut-Arimoto updates performed.
    pub iterations: usize,
    /// Newton steps of the active-set refinement (0 if not needed).
    pub newton_steps: usize,
    pub converged: bool,
    pub prior: Vec<f64>,
}

/// Blahut-Arimoto updates tried before switching to the Newton refinement.
pub const WARMUP_ITERATIONS: usize = 100;

/// Maximizes `I(x;ψ)` over input priors until the certificate
/// `max_i D_i − log2 Σ p_i 2^{D_i}` is at most `tol`.
///
/// Runs up to [`WARMUP_ITERATIONS`] Blahut-Arimoto updates; if the gap is
/// still open, an active-set Newton refinement takes over, and any
/// remaining budget of `max_iter` updates continues from its prior.
/// Non-convergence is reported through `converged = false`.
pub fn blahut_arimoto(
    channel: &DiscretizedChannel,
    tol: f64,
    max_iter: usize,
) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    let mut ba = BlahutArimoto::new(channel);
    let mut bounds = ba.step();
    while bounds.upper - bounds.lower > tol && ba.iterations() < max_iter.min(WARMUP_ITERATIONS) {
        bounds = ba.step();
    }
    let mut newton_steps = 0;
    if bounds.upper - bounds.lower > tol {
        let refined = refine::refine(channel, &ba.prior, tol);
        newton_steps = refined.newton_steps;
        ba.prior = refined.prior;
        let (prior, refined_bounds) = ba.certify();
        if refined_bounds.upper - refined_bounds.lower <= tol || ba.iterations() >= max_iter {
            return Ok(result(
                refined_bounds,
                prior,
                ba.iterations(),
                newton_steps,
                tol,
            ));
        }
        while ba.iterations() < max_iter {
            bounds = ba.step();
            if bounds.upper - bounds.lower <= tol {
                break;
            }
        }
    }
    let iterations = ba.iterations();
    Ok(result(bounds, ba.prior, iterations, newton_steps, tol))
}

fn result(
    bounds: CapacityBounds,
    prior: Vec<f64>,
    iterations: usize,
    newton_steps: usize,
    tol: f64,
) -> CapacityResult {
    let gap = (bounds.upper - bounds.lower).max(0.0);
    CapacityResult {
        capacity_bits: bounds.lower.max(0.0),
        lower_bound_bits: bounds.lower,
        upper_bound_bits: bounds.upper,
        gap_bits: gap,
        iterations,
        newton_steps,
        converged: gap <= tol,
        prior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{KochenSpecker, PointMass};

    fn bsc(flip: f64) -> DiscretizedChannel {
        DiscretizedChannel::from_rows(&[vec![1.0 - flip, flip], vec![flip, 1.0 - flip]]).unwrap()
    }

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn binary_symmetric_channel() {
        let r = blahut_arimoto(&bsc(0.0), 1e-12, 1000).unwrap();
        assert!((r.capacity_bits - 1.0).abs() < 1e-12);
        let r = blahut_arimoto(&bsc(0.11), 1e-12, 1000).unwrap();
        assert!((r.capacity_bits - (1.0 - h2(0.11))).abs() < 1e-6);
        assert!((r.capacity_bits - 0.5).abs() < 1e-3);
        assert!(r.converged);
    }

    #[test]
    fn asymmetric_channel_lower_bound_is_monotone() {
        // Z-channel: capacity log2(1 + (1-p) p^{p/(1-p)}) for crossover p.
        let p: f64 = 0.3;
        let ch = DiscretizedChannel::from_rows(&[vec![1.0, 0.0], vec![p, 1.0 - p]]).unwrap();
        let mut ba = BlahutArimoto::new(&ch);
        let mut last = f64::NEG_INFINITY;
        for _ in 0..200 {
            let b = ba.step();
            assert!(b.lower >= last - 1e-15);
            assert!(b.lower <= b.upper + 1e-15);
            last = b.lower;
        }
        let exact = (1.0 + (1.0 - p) * p.powf(p / (1.0 - p))).log2();
        assert!((last - exact).abs() < 1e-9, "{last} vs {exact}");
    }

    #[test]
    fn mutual_information_examples() {
        let product =
            DiscretizedChannel::from_rows(&[vec![0.2, 0.8], vec![0.2, 0.8], vec![0.2, 0.8]])
                .unwrap();
        assert!(
            mutual_information(&product, &[0.5, 0.25, 0.25])
                .unwrap()
                .abs()
                < 1e-12
        );

        let id: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let id = DiscretizedChannel::from_rows(&id).unwrap();
        assert!((mutual_information(&id, &[0.25; 4]).unwrap() - 2.0).abs() < 1e-12);

        assert!(mutual_information(&id, &[0.5; 4]).is_err());
        assert!(mutual_information(&id, &[0.5; 3]).is_err());
    }

    #[test]
    fn oneshot_bound_examples() {
        let e2 = 2.0 * std::f64::consts::LOG2_E;
        assert!((oneshot_upper_bound(0.0).unwrap() - 2.885_390_081_777_927).abs() < 1e-12);
        assert!((oneshot_upper_bound(3.0).unwrap() - (7.0 + e2)).abs() < 1e-12);
        let c = 1.2787;
        let plug = c + 2.0 * (c + 1.0f64).ln() / std::f64::consts::LN_2 + e2;
        assert!((oneshot_upper_bound(c).unwrap() - plug).abs() < 1e-12);
        assert!((plug - 6.536).abs() < 5e-3);
        assert!(oneshot_upper_bound(-0.1).is_err());
    }

    #[test]
    fn ks_discretization_properties() {
        let ch = discretize_channel(&KochenSpecker, 128, 1024).unwrap();
        for i in 0..ch.n_in() {
            let row = ch.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let v = ch.inputs()[i];
            for (t, x) in row.iter().zip(ch.outputs()) {
                assert!(*t >= 0.0);
                if v.dot(x) < 0.0 {
                    assert_eq!(*t, 0.0);
                }
            }
        }
        assert!((ch.weights().iter().sum::<f64>() - SPHERE_AREA).abs() < 1e-6);
    }

    #[test]
    fn ks_capacity_is_certified_on_a_coarse_grid() {
        let ch = discretize_channel(&KochenSpecker, 128, 512).unwrap();
        let r = blahut_arimoto(&ch, 1e-9, 100_000).unwrap();
        assert!(r.converged, "gap {}", r.gap_bits);
        assert!(r.newton_steps > 0);
        let continuum = 2.0 - 1.0 / (2.0 * std::f64::consts::LN_2);
        assert!((r.capacity_bits - continuum).abs() < 0.02);
        let uniform = vec![1.0 / 128.0; 128];
        let i = mutual_information(&ch, &uniform).unwrap();
        assert!(i <= r.upper_bound_bits && r.capacity_bits - i < 0.01);
        assert!((r.prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// The last two inputs are dominated, so the optimum is supported on the
    /// first two only.
    #[test]
    fn refinement_finds_sparse_optimum() {
        let rows = vec![
            vec![0.9, 0.1, 0.0],
            vec![0.0, 0.1, 0.9],
            vec![0.45, 0.1, 0.45],
            vec![0.3, 0.4, 0.3],
        ];
        let ch = DiscretizedChannel::from_rows(&rows).unwrap();
        let r = blahut_arimoto(&ch, 1e-12, 100_000).unwrap();
        assert!(r.converged);
        // Inputs 0 and 1 form a binary erasure channel with erasure 0.1.
        assert!((r.capacity_bits - 0.9).abs() < 1e-9, "{r:?}");
        assert!(r.prior[2] < 1e-6 && r.prior[3] < 1e-6);
    }

    #[test]
    fn discretization_rejects_point_mass_and_small_grids() {
        assert!(matches!(
            discretize_channel(&PointMass, 100, 300),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            discretize_channel(&KochenSpecker, 63, 300),
            Err(Error::Resolution { .. })
        ));
        assert!(matches!(
            discretize_channel(&KochenSpecker, 64, 255),
            Err(Error::Resolution { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn channel_and_prior() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
            (2usize..6, 2usize..6).prop_flat_map(|(n, m)| {
                (
                    prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), n),
                    prop::collection::vec(0.01f64..1.0, n),
                )
            })
        }

        fn normalize(v: &mut [f64]) {
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
        }

        proptest! {
            #[test]
            fn information_is_bounded((mut rows, mut prior) in channel_and_prior()) {
                rows.iter_mut().for_each(|r| normalize(r));
                normalize(&mut prior);
                let ch = DiscretizedChannel::from_rows(&rows).unwrap();
                let i = mutual_information(&ch, &prior).unwrap();
                let h: f64 = prior.iter().map(|p| -p * p.log2()).sum();
                prop_assert!(i >= 0.0);
                prop_assert!(i <= h.min((ch.n_out() as f64).log2()) + 1e-9);
                let c = blahut_arimoto(&ch, 1e-9, 100_000).unwrap();
                prop_assert!(i <= c.upper_bound_bits + 1e-9);
                prop_assert!(c.capacity_bits <= oneshot_upper_bound(c.capacity_bits).unwrap());
                prop_assert!((c.prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(c.converged);
                prop_assert!(i <= c.capacity_bits + 1e-9);
            }
        }
    }
}
