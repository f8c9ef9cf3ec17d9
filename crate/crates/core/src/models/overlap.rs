//! Overlap `ω(ψ,ψ′) = ∫ min[ρ(x|ψ), ρ(x|ψ′)] dx` and ψ-ontic/ψ-epistemic
//! classification over a supplied set of state pairs.

use serde::Serialize;

use super::OntologicalModel;
use crate::error::{Error, Result};
use crate::quantum::{bloch_of_qubit, PureState};
use crate::sphere::SphereRule;

pub const DEFAULT_OVERLAP_RESOLUTION: usize = 200_000;
pub const MIN_OVERLAP_RESOLUTION: usize = 100;
/// Refinement stops once doubling moves the value by less than this.
pub const OVERLAP_REFINE_TOL: f64 = 1e-4;
/// Refinement never exceeds `64 ×` the starting resolution.
const MAX_DOUBLINGS: u32 = 6;
pub const DEFAULT_EPS_ONTO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMethod {
    Quadrature,
    Analytic,
    PointMassRule,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    pub omega: f64,
    pub method: OverlapMethod,
    /// Nodes of the finest grid used (0 for the point-mass rule).
    pub resolution: usize,
    /// `|ω(2R) − ω(R)|` at the final refinement step.
    pub error_estimate: f64,
}

fn fibonacci_min(
    rule: &SphereRule,
    a: &(dyn Fn(crate::sphere::Vec3) -> f64 + Sync),
    b: &(dyn Fn(crate::sphere::Vec3) -> f64 + Sync),
) -> f64 {
    rule.integrate(|x| a(x).min(b(x)))
}

/// Overlap of the preparation distributions of ψ and ψ′.
///
/// Proper densities are integrated on a Fibonacci lattice starting at
/// `resolution` nodes and doubled until the value moves by less than
/// [`OVERLAP_REFINE_TOL`]. Point-mass models use the exact rule: 1 for equal
/// rays, 0 otherwise.
pub fn overlap(
    model: &dyn OntologicalModel,
    psi: &PureState,
    other: &PureState,
    resolution: usize,
) -> Result<OverlapReport> {
    model.supports(psi)?;
    model.supports(other)?;
    if resolution < MIN_OVERLAP_RESOLUTION {
        return Err(Error::Resolution {
            got: resolution,
            min: MIN_OVERLAP_RESOLUTION,
        });
    }
    if model.is_point_mass() {
        let same = psi.same_ray(other)?;
        return Ok(OverlapReport {
            omega: if same { 1.0 } else { 0.0 },
            method: OverlapMethod::PointMassRule,
            resolution: 0,
            error_estimate: 0.0,
        });
    }
    let a = model.sphere_density(psi)?;
    let b = model.sphere_density(other)?;
    let mut m = resolution;
    let mut coarse = fibonacci_min(&SphereRule::fibonacci(m), &a, &b);
    let mut fine = coarse;
    let mut error = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        m *= 2;
        fine = fibonacci_min(&SphereRule::fibonacci(m), &a, &b);
        error = (fine - coarse).abs();
        if error < OVERLAP_REFINE_TOL {
            break;
        }
        coarse = fine;
    }
    Ok(OverlapReport {
        omega: fine.clamp(0.0, 1.0),
        method: OverlapMethod::Quadrature,
        resolution: m,
        error_estimate: error,
    })
}

/// Closed-form KS overlap `1 − sin(γ/2)` for Bloch angle γ.
///
/// In a frame whose polar axis is `v × v′` both densities depend only on the
/// azimuth, and the minimum integrates to `2(1 − sin(γ/2))·½`.
pub fn ks_overlap_analytic(psi: &PureState, other: &PureState) -> Result<OverlapReport> {
    let a = bloch_of_qubit(psi)?.vec();
    let b = bloch_of_qubit(other)?.vec();
    let gamma = a.angle_to(&b);
    Ok(OverlapReport {
        omega: (1.0 - (0.5 * gamma).sin()).clamp(0.0, 1.0),
        method: OverlapMethod::Analytic,
        resolution: 0,
        error_estimate: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "psi-ontic-weak")]
    PsiOnticWeak,
    #[serde(rename = "psi-epistemic")]
    PsiEpistemic,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub eps_onto: f64,
    pub overlaps: Vec<OverlapReport>,
}

/// Weak-sense classification relative to the supplied pairs: ψ-ontic if
/// every overlap is at most `eps_onto`, ψ-epistemic if some overlap exceeds
/// `eps_onto` by more than its error estimate, inconclusive otherwise.
pub fn classify_pairs(
    model: &dyn OntologicalModel,
    pairs: &[(PureState, PureState)],
    eps_onto: f64,
    resolution: usize,
) -> Result<Classification> {
    if pairs.is_empty() {
        return Err(Error::invalid("classification needs at least one pair"));
    }
    if !(eps_onto >= 0.0) {
        return Err(Error::invalid("eps_onto must be nonnegative"));
    }
    let mut overlaps = Vec::with_capacity(pairs.len());
    for (i, (a, b)) in pairs.iter().enumerate() {
        if a.same_ray(b)? {
            return Err(Error::invalid(format!(
                "pair {i} consists of identical states"
            )));
        }
        overlaps.push(overlap(model, a, b, resolution)?);
    }
    let verdict = if overlaps
        .iter()
        .any(|o| o.omega > eps_onto + o.error_estimate)
    {
        Verdict::PsiEpistemic
    } else if overlaps.iter().all(|o| o.omega <= eps_onto) {
        Verdict::PsiOnticWeak
    } else {
        Verdict::Inconclusive
    };
    Ok(Classification {
        verdict,
        eps_onto,
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{KochenSpecker, PointMass};
    use crate::quantum::{haar_random_state, BlochVector};
    use crate::rng::seeded;
    use crate::sphere::{uniform_on_sphere, Vec3};
    use std::f64::consts::PI;

    fn at_angle(gamma: f64) -> (PureState, PureState) {
        let a = PureState::from_bloch(&BlochVector::new(Vec3::Z).unwrap());
        let b = PureState::from_bloch(
            &BlochVector::new(Vec3::new(gamma.sin(), 0.0, gamma.cos())).unwrap(),
        );
        (a, b)
    }

    /// Oracle: plain Monte Carlo of `4π · E_uniform[min(ρ_a, ρ_b)]`.
    fn mc_overlap(va: Vec3, vb: Vec3, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded(seed);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = uniform_on_sphere(&mut rng);
            let f = 4.0 * PI * (va.dot(&x).max(0.0).min(vb.dot(&x).max(0.0)) / PI);
            s += f;
            s2 += f * f;
        }
        let mean = s / n as f64;
        (mean, ((s2 / n as f64 - mean * mean) / n as f64).sqrt())
    }

    #[test]
    fn identical_and_antipodal() {
        let (a, _) = at_angle(0.0);
        let same = overlap(&KochenSpecker, &a, &a, DEFAULT_OVERLAP_RESOLUTION).unwrap();
        assert!((same.omega - 1.0).abs() < 1e-6);
        let (a, b) = at_angle(PI);
        let anti = overlap(&KochenSpecker, &a, &b, DEFAULT_OVERLAP_RESOLUTION).unwrap();
        assert_eq!(anti.omega, 0.0);
        assert_eq!(anti.error_estimate, 0.0);
    }

    #[test]
    fn right_angle_matches_monte_carlo_oracle() {
        let (a, b) = at_angle(PI / 2.0);
        let report = overlap(&KochenSpecker, &a, &b, DEFAULT_OVERLAP_RESOLUTION).unwrap();
        assert!(report.error_estimate < 1e-4);
        let (mc, se) = mc_overlap(Vec3::Z, Vec3::X, 1_000_000, 8);
        assert!(
            (report.omega - mc).abs() < 4.0 * se,
            "{} vs {mc}",
            report.omega
        );
        // Closed form for the KS pair at Bloch angle γ: 1 − sin(γ/2).
        assert!((report.omega - (1.0 - (PI / 4.0).sin())).abs() < 1e-5);
    }

    #[test]
    fn low_resolution_is_rejected() {
        let (a, b) = at_angle(1.0);
        assert!(matches!(
            overlap(&KochenSpecker, &a, &b, 99),
            Err(Error::Resolution { got: 99, min: 100 })
        ));
    }

    #[test]
    fn point_mass_rule() {
        let (a, b) = at_angle(0.3);
        assert_eq!(overlap(&PointMass, &a, &b, 100).unwrap().omega, 0.0);
        assert_eq!(overlap(&PointMass, &a, &a, 100).unwrap().omega, 1.0);
    }

    #[test]
    fn classification_examples() {
        let mut rng = seeded(12);
        let pairs: Vec<_> = (0..10)
            .map(|_| {
                (
                    haar_random_state(2, &mut rng).unwrap(),
                    haar_random_state(2, &mut rng).unwrap(),
                )
            })
            .collect();
        let c = classify_pairs(&PointMass, &pairs, DEFAULT_EPS_ONTO, 1000).unwrap();
        assert_eq!(c.verdict, Verdict::PsiOnticWeak);

        let c = classify_pairs(&KochenSpecker, &[at_angle(2.0)], DEFAULT_EPS_ONTO, 20_000).unwrap();
        assert_eq!(c.verdict, Verdict::PsiEpistemic);

        let c = classify_pairs(&KochenSpecker, &[at_angle(PI)], DEFAULT_EPS_ONTO, 20_000).unwrap();
        assert_eq!(c.verdict, Verdict::PsiOnticWeak);

        let (a, _) = at_angle(0.0);
        assert!(classify_pairs(&KochenSpecker, &[(a.clone(), a)], DEFAULT_EPS_ONTO, 1000).is_err());
        assert!(classify_pairs(&KochenSpecker, &[], DEFAULT_EPS_ONTO, 1000).is_err());
    }

    #[test]
    fn symmetry_and_monotonicity() {
        let mut rng = seeded(21);
        for _ in 0..50 {
            let a = haar_random_state(1, &mut rng).unwrap();
            let b = haar_random_state(1, &mut rng).unwrap();
            let ab = overlap(&KochenSpecker, &a, &b, 20_000).unwrap();
            let ba = overlap(&KochenSpecker, &b, &a, 20_000).unwrap();
            assert!(
                (ab.omega - ba.omega).abs() <= ab.error_estimate.max(ba.error_estimate) + 1e-12
            );
        }
        let values: Vec<OverlapReport> = (0..20)
            .map(|i| {
                let (a, b) = at_angle(PI * i as f64 / 19.0);
                overlap(&KochenSpecker, &a, &b, 20_000).unwrap()
            })
            .collect();
        for w in values.windows(2) {
            let tol = 2.0 * (w[0].error_estimate + w[1].error_estimate);
            assert!(w[0].omega >= w[1].omega - tol);
        }
    }
}
