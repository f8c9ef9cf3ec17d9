//! Cap volumes, overlap bounds and collapse verdicts for `n`-qubit models.
//!
//! Bound values shrink like `2^(−n2ⁿ)`, far below the smallest double, so
//! everything is carried as a base-2 exponent ([`Pow2`]).

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::map_chunks;
use crate::quantum::haar_random_state;
use crate::rng::{child_stream, Domain};

/// Smallest angle accepted by the decay bound; `log₂ sin θ` diverges at 0.
pub const THETA_MIN: f64 = 1e-6;
const PAIR_CHUNK: u64 = 16_384;

/// A positive number `mantissa · 2^exponent` with `mantissa ∈ [1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pow2 {
    pub mantissa: f64,
    pub exponent: i64,
    pub log2: f64,
}

impl Pow2 {
    pub fn from_log2(log2: f64) -> Result<Self> {
        if !log2.is_finite() {
            return Err(Error::invalid(format!("exponent {log2} is not finite")));
        }
        let exponent = log2.floor();
        let mantissa = (log2 - exponent).exp2();
        // Rounding can push the mantissa to exactly 2.
        let (mantissa, exponent) = if mantissa >= 2.0 {
            (1.0, exponent + 1.0)
        } else {
            (mantissa, exponent)
        };
        Ok(Pow2 {
            mantissa,
            exponent: exponent as i64,
            log2,
        })
    }

    /// As a double; underflows to 0 below `2^−1074`.
    pub fn value(&self) -> f64 {
        self.log2.exp2()
    }

    pub fn underflows(&self) -> bool {
        self.value() == 0.0
    }
}

/// `C(n) = a · 2^(b·n) · n^c` bits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthModel {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GrowthModel {
    pub fn new(name: impl Into<String>, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite())
            || !(b >= 0.0 && b.is_finite())
            || !(c >= 0.0 && c.is_finite())
        {
            return Err(Error::invalid("growth model needs a > 0, b ≥ 0, c ≥ 0"));
        }
        Ok(GrowthModel {
            name: name.into(),
            a,
            b,
            c,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (a, b, c) = match name {
            "BCT" => (0.01, 1.0, 0.0),
            "0.293" => (0.293, 1.0, 0.0),
            "2^n" => (1.0, 1.0, 0.0),
            "n2^n" => (1.0, 1.0, 1.0),
            _ => {
                return Err(Error::invalid(format!(
                    "unknown growth preset {name:?} (expected BCT, 0.293, 2^n or n2^n)"
                )))
            }
        };
        GrowthModel::new(name, a, b, c)
    }

    pub fn presets() -> Vec<GrowthModel> {
        ["BCT", "0.293", "2^n", "n2^n"]
            .iter()
            .map(|p| GrowthModel::preset(p).expect("presets are valid"))
            .collect()
    }

    pub fn bits(&self, n: u32) -> f64 {
        self.a * (self.b * n as f64).exp2() * (n as f64).powf(self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapConvention {
    /// `(sin θ)^(2ⁿ−1)`: one power of `sin θ` per complex dimension beyond the first.
    #[default]
    SinExponent,
    /// `(sin² θ)^(2ⁿ−1)`, the Haar measure of `|⟨ψ|ψ′⟩|² ≥ cos² θ`.
    FubiniStudy,
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 || n > 1000 {
        return Err(Error::invalid(format!(
            "qubit number {n} outside [1, 1000]"
        )));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(Error::invalid(format!("θ = {theta} outside (0, π/2]")));
    }
    Ok(())
}

fn log2_sin(theta: f64) -> f64 {
    if theta == FRAC_PI_2 {
        0.0
    } else {
        theta.sin().log2()
    }
}

/// `2ⁿ − 1` as a double; exact up to `n = 53`.
fn dim_minus_one(n: u32) -> f64 {
    (n as f64).exp2() - 1.0
}

/// Volume fraction of the cap `S(θ)` around a state of `n` qubits.
pub fn cap_volume(n: u32, theta: f64, convention: CapConvention) -> Result<Pow2> {
    check_n(n)?;
    check_theta(theta)?;
    let power = match convention {
        CapConvention::SinExponent => 1.0,
        CapConvention::FubiniStudy => 2.0,
    };
    Pow2::from_log2(power * dim_minus_one(n) * log2_sin(theta))
}

/// `2^(−C)`, the bound on the prior-averaged overlap for capacity `C`.
pub fn average_overlap_bound(capacity_bits: f64) -> Result<Pow2> {
    if !(capacity_bits >= 0.0) {
        return Err(Error::invalid(format!(
            "capacity {capacity_bits} is negative"
        )));
    }
    Pow2::from_log2(-capacity_bits)
}

/// Bound on the cap-averaged overlap `ω̄(θ)`:
/// `E = −C(n) + (1 − 2ⁿ) log₂ sin θ` bits.
pub fn overlap_decay_bound(n: u32, theta: f64, growth: &GrowthModel) -> Result<Pow2> {
    check_n(n)?;
    check_theta(theta)?;
    if theta < THETA_MIN {
        return Err(Error::invalid(format!(
            "θ = {theta} below {THETA_MIN}: log₂ sin θ diverges as θ → 0"
        )));
    }
    Pow2::from_log2(-growth.bits(n) - dim_minus_one(n) * log2_sin(theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseVerdict {
    Collapse,
    Inconclusive,
}

impl CollapseVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            CollapseVerdict::Collapse => "collapse",
            CollapseVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Whether `2^(−n) C(n) → ∞`, read off the closed form.
pub fn growth_verdict(growth: &GrowthModel) -> CollapseVerdict {
    if growth.b > 1.0 || (growth.b == 1.0 && growth.c > 0.0) {
        CollapseVerdict::Collapse
    } else {
        CollapseVerdict::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundEvaluation {
    pub n: u32,
    pub theta: f64,
    pub growth_bits: f64,
    pub cap_sin_exponent: Pow2,
    pub cap_fubini_study: Pow2,
    pub average_overlap_bound: Pow2,
    pub decay_bound: Pow2,
    pub verdict: CollapseVerdict,
}

impl BoundEvaluation {
    pub fn decay_exponent_bits(&self) -> f64 {
        self.decay_bound.log2
    }
}

pub fn evaluate_bound(n: u32, theta: f64, growth: &GrowthModel) -> Result<BoundEvaluation> {
    let growth_bits = growth.bits(n);
    Ok(BoundEvaluation {
        n,
        theta,
        growth_bits,
        cap_sin_exponent: cap_volume(n, theta, CapConvention::SinExponent)?,
        cap_fubini_study: cap_volume(n, theta, CapConvention::FubiniStudy)?,
        average_overlap_bound: average_overlap_bound(growth_bits)?,
        decay_bound: overlap_decay_bound(n, theta, growth)?,
        verdict: growth_verdict(growth),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub growth: GrowthModel,
    pub verdict: CollapseVerdict,
    pub evaluations: Vec<BoundEvaluation>,
}

/// Symbolic verdict plus the decay bound tabulated over `ns × thetas`.
pub fn collapse_verdict(
    growth: &GrowthModel,
    thetas: &[f64],
    ns: &[u32],
) -> Result<CollapseReport> {
    if thetas.is_empty() || ns.is_empty() {
        return Err(Error::invalid("θ grid and n range must be nonempty"));
    }
    let mut evaluations = Vec::with_capacity(thetas.len() * ns.len());
    for &n in ns {
        for &theta in thetas {
            evaluations.push(evaluate_bound(n, theta, growth)?);
        }
    }
    Ok(CollapseReport {
        growth: growth.clone(),
        verdict: growth_verdict(growth),
        evaluations,
    })
}

/// One CSV row per evaluation; cap volumes as base-2 logarithms.
pub fn write_bounds_csv<W: Write>(evaluations: &[BoundEvaluation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "n",
        "theta",
        "growth_bits",
        "omega_s_sin_log2",
        "omega_s_fs_log2",
        "bound_exponent_bits",
        "verdict",
    ])?;
    for e in evaluations {
        w.write_record([
            e.n.to_string(),
            e.theta.to_string(),
            e.growth_bits.to_string(),
            e.cap_sin_exponent.log2.to_string(),
            e.cap_fubini_study.log2.to_string(),
            e.decay_exponent_bits().to_string(),
            e.verdict.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Haar estimate of `P(|⟨ψ|ψ′⟩|² ≥ cos² θ)` next to both cap conventions.
#[derive(Debug, Clone, Serialize)]
pub struct CapFractionEstimate {
    pub n: u32,
    pub theta: f64,
    pub pairs: u64,
    pub fraction: f64,
    pub std_error: f64,
    pub sin_exponent: f64,
    pub fubini_study: f64,
    pub z_sin_exponent: f64,
    pub z_fubini_study: f64,
    /// The convention within 4σ of the estimate, if exactly one is.
    pub supported: Option<CapConvention>,
}

pub fn haar_cap_fraction(n: u32, theta: f64, pairs: u64, seed: u64) -> Result<CapFractionEstimate> {
    check_n(n)?;
    check_theta(theta)?;
    if n > crate::quantum::DEFAULT_MAX_QUBITS as u32 {
        return Err(Error::invalid(format!(
            "Haar sampling limited to {} qubits",
            crate::quantum::DEFAULT_MAX_QUBITS
        )));
    }
    if pairs == 0 {
        return Err(Error::invalid("at least one pair is required"));
    }
    let threshold = theta.cos().powi(2);
    let hits = map_chunks(pairs, PAIR_CHUNK, |chunk, range| -> Result<u64> {
        let mut rng = child_stream(seed, Domain::States, chunk);
        let mut hits = 0;
        for _ in range {
            let a = haar_random_state(n as usize, &mut rng)?;
            let b = haar_random_state(n as usize, &mut rng)?;
            hits += (a.fidelity(&b)? >= threshold) as u64;
        }
        Ok(hits)
    })
    .into_iter()
    .sum::<Result<u64>>()?;
    let fraction = hits as f64 / pairs as f64;
    let std_error = (fraction * (1.0 - fraction) / pairs as f64)
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let sin_exponent = cap_volume(n, theta, CapConvention::SinExponent)?.value();
    let fubini_study = cap_volume(n, theta, CapConvention::FubiniStudy)?.value();
    let z_sin_exponent = (fraction - sin_exponent) / std_error;
    let z_fubini_study = (fraction - fubini_study) / std_error;
    let supported = match (z_sin_exponent.abs() <= 4.0, z_fubini_study.abs() <= 4.0) {
        (true, false) => Some(CapConvention::SinExponent),
        (false, true) => Some(CapConvention::FubiniStudy),
        _ => None,
    };
    Ok(CapFractionEstimate {
        n,
        theta,
        pairs,
        fraction,
        std_error,
        sin_exponent,
        fubini_study,
        z_sin_exponent,
        z_fubini_study,
        supported,
    })
}
