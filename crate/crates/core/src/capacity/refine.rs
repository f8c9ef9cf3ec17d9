//! Active-set Newton refinement of a capacity-achieving prior.
//!
//! Smooth kernels such as the KS channel make the capacity functional nearly
//! flat along high-frequency prior perturbations, and the Blahut-Arimoto gap
//! stalls far above `1e-9`. The discrete optimum is supported on few inputs,
//! so we solve the capacity problem restricted to a working set `W` with a
//! log-barrier Newton method, then add every input whose divergence exceeds
//! the restricted capacity (column generation) until none is left.

use nalgebra::{DMatrix, DVector};

use super::DiscretizedChannel;

const INITIAL_SET: usize = 64;
const MAX_ADDED: usize = 64;
const MAX_ROUNDS: usize = 50;
const MU_START: f64 = 1e-4;
const MU_MIN: f64 = 1e-18;
const MAX_NEWTON_PER_STAGE: usize = 60;

pub(super) struct Refinement {
    pub prior: Vec<f64>,
    pub newton_steps: usize,
}

/// Restricted problem in nats: rows of `W` and their `Σ T ln T`.
struct Restricted<'a> {
    channel: &'a DiscretizedChannel,
    set: Vec<usize>,
    neg_entropy: Vec<f64>,
}

impl Restricted<'_> {
    fn marginal(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.channel.n_out()];
        for (&i, &pi) in self.set.iter().zip(p) {
            for (a, t) in q.iter_mut().zip(self.channel.row(i)) {
                *a += pi * t;
            }
        }
        q
    }

    fn divergences(&self, q: &[f64]) -> Vec<f64> {
        let log_q: Vec<f64> = q
            .iter()
            .map(|&v| if v > 0.0 { v.ln() } else { 0.0 })
            .collect();
        self.set
            .iter()
            .zip(&self.neg_entropy)
            .map(|(&i, h)| {
                let cross: f64 = self
                    .channel
                    .row(i)
                    .iter()
                    .zip(&log_q)
                    .filter(|(t, _)| **t > 0.0)
                    .map(|(t, l)| t * l)
                    .sum();
                h - cross
            })
            .collect()
    }

    /// Barrier objective `I(p) + μ Σ ln p` and the divergences at `p`.
    fn objective(&self, p: &[f64], mu: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let q = self.marginal(p);
        let d = self.divergences(&q);
        let info: f64 = p.iter().zip(&d).map(|(p, d)| p * d).sum();
        let barrier: f64 = p.iter().map(|p| p.ln()).sum();
        (info + mu * barrier, d, q)
    }

    /// Certified gap `max D − ln Σ p 2^D` of the restricted problem, nats.
    fn gap(d: &[f64], p: &[f64]) -> f64 {
        let up = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = p.iter().zip(d).map(|(p, d)| p * (d - up).exp()).sum();
        -z.ln()
    }

    /// Barrier path-following; returns the restricted prior.
    fn solve(&self, tol_nats: f64, steps: &mut usize) -> Vec<f64> {
        let k = self.set.len();
        let mut p = vec![1.0 / k as f64; k];
        let mut mu = MU_START;
        loop {
            for _ in 0..MAX_NEWTON_PER_STAGE {
                let (f0, d, q) = self.objective(&p, mu);
                *steps += 1;
                let Some(dir) = self.newton_direction(&p, &d, &q, mu) else {
                    break;
                };
                let slope: f64 = dir
                    .iter()
                    .zip(p.iter().zip(&d))
                    .map(|(x, (p, d))| x * (d + mu / p))
                    .sum();
                if slope < 1e-22 {
                    break;
                }
                let mut t = 1.0f64;
                for (x, pi) in dir.iter().zip(&p) {
                    if *x < 0.0 {
                        t = t.min(0.99 * -pi / x);
                    }
                }
                let mut accepted = false;
                while t > 1e-12 {
                    let trial: Vec<f64> = p.iter().zip(&dir).map(|(p, x)| p + t * x).collect();
                    let (f1, _, _) = self.objective(&trial, mu);
                    if f1 >= f0 + 0.25 * t * slope {
                        let s: f64 = trial.iter().sum();
                        p = trial.into_iter().map(|v| v / s).collect();
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted || slope < 1e-20 {
                    break;
                }
            }
            let (_, d, _) = self.objective(&p, mu);
            if Self::gap(&d, &p) <= tol_nats || mu <= MU_MIN {
                return p;
            }
            mu /= 10.0;
        }
    }

    /// Solves `(S Sᵀ + μ P⁻²) Δ = g − ν 1` with `Σ Δ = 0`.
    fn newton_direction(&self, p: &[f64], d: &[f64], q: &[f64], mu: f64) -> Option<Vec<f64>> {
        let k = self.set.len();
        let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
        let scale: Vec<f64> = cols.iter().map(|&j| q[j].sqrt().recip()).collect();
        let s = DMatrix::from_fn(k, cols.len(), |r, c| {
            self.channel.row(self.set[r])[cols[c]] * scale[c]
        });
        let mut m = &s * s.transpose();
        for i in 0..k {
            m[(i, i)] += mu / (p[i] * p[i]);
        }
        let chol = m.cholesky()?;
        let g = DVector::from_iterator(k, d.iter().zip(p).map(|(d, p)| d + mu / p));
        let a = chol.solve(&g);
        let b = chol.solve(&DVector::from_element(k, 1.0));
        let nu = a.sum() / b.sum();
        Some((a - b * nu).iter().copied().collect())
    }
}

/// Column generation around the restricted Newton solver. `warm` ranks the
/// inputs for the first working set; `tol_bits` is the target certificate.
pub(super) fn refine(channel: &DiscretizedChannel, warm: &[f64], tol_bits: f64) -> Refinement {
    let n = channel.n_in();
    let neg_entropy_bits = channel.row_neg_entropies();
    let ln2 = std::f64::consts::LN_2;
    let tol_nats = 0.25 * tol_bits * ln2;

    let d_warm = channel.divergences(&channel.output_marginal(warm), &neg_entropy_bits);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d_warm[b].total_cmp(&d_warm[a]).then(a.cmp(&b)));
    let mut set: Vec<usize> = order.into_iter().take(INITIAL_SET.min(n)).collect();

    let mut newton_steps = 0;
    let mut prior = warm.to_vec();
    for _ in 0..MAX_ROUNDS {
        set.sort_unstable();
        let restricted = Restricted {
            channel,
            neg_entropy: set.iter().map(|&i| neg_entropy_bits[i] * ln2).collect(),
            set: set.clone(),
        };
        let p_set = restricted.solve(tol_nats, &mut newton_steps);
        prior = vec![0.0; n];
        for (&i, &p) in set.iter().zip(&p_set) {
            prior[i] = p;
        }
        let d = channel.divergences(&channel.output_marginal(&prior), &neg_entropy_bits);
        let lower = {
            let up = set.iter().map(|&i| d[i]).fold(f64::NEG_INFINITY, f64::max);
            up + set
                .iter()
                .zip(&p_set)
                .map(|(&i, p)| p * (d[i] - up).exp2())
                .sum::<f64>()
                .log2()
        };
        let mut violators: Vec<usize> = (0..n)
            .filter(|i| set.binary_search(i).is_err() && d[*i] > lower + 0.5 * tol_bits)
            .collect();
        if violators.is_empty() {
            break;
        }
        violators.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
        set.extend(violators.into_iter().take(MAX_ADDED));
    }
    Refinement {
        prior,
        newton_steps,
    }
}
