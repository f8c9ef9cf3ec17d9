//! Kochen-Specker model of a qubit.
//!
//! Ontic states are unit vectors `x ∈ S²`. Given the Bloch vector `v`,
//! `ρ(x|v) = π⁻¹ (v·x) Θ(v·x)`; a projective measurement along `m` answers
//! `+1` iff `m·x > 0`.

use std::f64::consts::{FRAC_1_PI, PI};

use rand::{Rng, RngCore};

use super::{check_unit, ModelKind, OnticState, OntologicalModel, SphereDensity};
use crate::error::{Error, Result};
use crate::quantum::{bloch_of_qubit, BlochVector, Povm, PureState};
use crate::sphere::Vec3;

/// `max ρ / (1/4π) = (1/π)·4π`.
pub const KS_DENSITY_RATIO_BOUND: f64 = 4.0;

/// `π⁻¹ (v·x) Θ(v·x)`.
pub fn ks_density(v: &BlochVector, x: Vec3) -> Result<f64> {
    let x = check_unit(x, "ontic state")?;
    Ok(density_unchecked(v.vec(), x))
}

#[inline]
fn density_unchecked(v: Vec3, x: Vec3) -> f64 {
    let c = v.dot(&x);
    if c > 0.0 {
        c * FRAC_1_PI
    } else {
        0.0
    }
}

/// Exact sampler: `cos α = √u` about `v`, uniform azimuth.
pub fn ks_sample<R: Rng + ?Sized>(v: &BlochVector, rng: &mut R) -> Vec3 {
    let v = v.vec();
    let (e1, e2) = v.orthonormal_frame();
    let u: f64 = rng.random();
    let cos_a = u.sqrt();
    let sin_a = (1.0 - u).max(0.0).sqrt();
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let (s, c) = phi.sin_cos();
    v * cos_a + e1 * (sin_a * c) + e2 * (sin_a * s)
}

/// Deterministic response `(Θ(m·x), 1 − Θ(m·x))`.
pub fn ks_response(x: Vec3, povm: &Povm) -> Result<[f64; 2]> {
    let m = povm.qubit_projective_axis().ok_or_else(|| {
        Error::Unsupported("KS response needs a projective qubit measurement".into())
    })?;
    Ok(if m.dot(&x) > 0.0 {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KochenSpecker;

impl OntologicalModel for KochenSpecker {
    fn kind(&self) -> ModelKind {
        ModelKind::KochenSpecker
    }

    fn supports(&self, psi: &PureState) -> Result<()> {
        bloch_of_qubit(psi).map(|_| ())
    }

    fn density(&self, psi: &PureState, x: &OnticState) -> Result<f64> {
        ks_density(&bloch_of_qubit(psi)?, x.sphere()?)
    }

    fn sphere_density(&self, psi: &PureState) -> Result<SphereDensity> {
        let v = bloch_of_qubit(psi)?.vec();
        Ok(Box::new(move |x| density_unchecked(v, x)))
    }

    fn sample(&self, psi: &PureState, rng: &mut dyn RngCore) -> Result<OnticState> {
        let v = bloch_of_qubit(psi)?;
        Ok(OnticState::Sphere(ks_sample(&v, rng)))
    }

    fn response(&self, x: &OnticState, povm: &Povm) -> Result<Vec<f64>> {
        Ok(ks_response(x.sphere()?, povm)?.to_vec())
    }

    fn density_ratio_bound(&self) -> Option<f64> {
        Some(KS_DENSITY_RATIO_BOUND)
    }

    fn kink_normals(&self, psi: &PureState, povm: Option<&Povm>) -> Result<Vec<Vec3>> {
        let mut normals = vec![bloch_of_qubit(psi)?.vec()];
        if let Some(povm) = povm {
            if let Some(m) = povm.qubit_projective_axis() {
                normals.push(m);
            }
        }
        Ok(normals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::make_projective_povm;
    use crate::rng::seeded;
    use crate::sphere::SphereRule;

    fn bloch(x: f64, y: f64, z: f64) -> BlochVector {
        BlochVector::from_components(x, y, z).unwrap()
    }

    #[test]
    fn density_examples() {
        let v = bloch(0.0, 0.0, 1.0);
        assert!((ks_density(&v, Vec3::Z).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-10);
        assert_eq!(ks_density(&v, -Vec3::Z).unwrap(), 0.0);
        let x = Vec3::new(0.75f64.sqrt(), 0.0, 0.5);
        assert!((ks_density(&v, x).unwrap() - 0.159_154_943_09).abs() < 1e-10);
        assert!(matches!(
            ks_density(&v, Vec3::new(0.0, 0.0, 2.0)),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn sampler_stays_in_hemisphere_and_matches_moments() {
        let v = bloch(0.3, -0.4, 0.75f64.sqrt());
        let (e1, _) = v.vec().orthonormal_frame();
        let mut rng = seeded(5);
        let n = 1_000_000;
        let (mut s, mut s2, mut perp) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = ks_sample(&v, &mut rng);
            let c = v.vec().dot(&x);
            assert!(c > 0.0 || c == 0.0 && x.norm() > 0.0);
            s += c;
            s2 += c * c;
            perp += e1.dot(&x);
        }
        let nf = n as f64;
        let mean = s / nf;
        let se = ((s2 / nf - mean * mean) / nf).sqrt();
        // Oracle: quadrature of (v·x)·ρ(x|v) over the sphere.
        let rule = SphereRule::aligned(&[v.vec()], 64, 64).unwrap();
        let oracle = rule.integrate(|x| v.vec().dot(&x) * ks_density(&v, x).unwrap());
        assert!((oracle - 2.0 / 3.0).abs() < 1e-12);
        assert!((mean - oracle).abs() < 4.0 * se, "{mean}");
        // Perpendicular component: variance of sin α cos φ is 1/4 under this law.
        assert!((perp / nf).abs() < 4.0 * (0.25 / nf).sqrt());
    }

    #[test]
    fn response_examples() {
        let m = bloch(0.6, 0.0, 0.8);
        let povm = make_projective_povm(&m);
        assert_eq!(ks_response(m.vec(), &povm).unwrap(), [1.0, 0.0]);
        assert_eq!(ks_response(-m.vec(), &povm).unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn response_rejects_multi_qubit() {
        let psi = PureState::basis(2, 0).unwrap();
        let proj = psi.projector().matrix().clone();
        let rest = nalgebra::DMatrix::identity(4, 4) - &proj;
        let povm = Povm::new(vec![proj, rest], vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(
            ks_response(Vec3::Z, &povm),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn orthogonal_measurement_averages_to_one_half() {
        let v = bloch(0.0, 0.0, 1.0);
        let povm = make_projective_povm(&bloch(1.0, 0.0, 0.0));
        let mut rng = seeded(77);
        let n = 400_000;
        let plus: f64 = (0..n)
            .map(|_| ks_response(ks_sample(&v, &mut rng), &povm).unwrap()[0])
            .sum();
        let se = (0.25 / n as f64).sqrt();
        assert!((plus / n as f64 - 0.5).abs() < 4.0 * se);
    }
}
