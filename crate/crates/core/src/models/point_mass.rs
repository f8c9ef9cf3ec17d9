//! The trivial ψ-ontic model: the ontic state is the quantum state itself
//! and the response is the Born rule.

use rand::RngCore;

use super::{ModelKind, OnticState, OntologicalModel};
use crate::error::{Error, Result};
use crate::quantum::{born_probabilities, Povm, PureState};

/// Point-mass preparation plus Born response, for any qubit count.
pub fn bb_evaluate(psi: &PureState, povm: &Povm) -> Result<(OnticState, Vec<f64>)> {
    let response = born_probabilities(psi, povm)?;
    Ok((OnticState::Quantum(psi.clone()), response))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PointMass;

impl OntologicalModel for PointMass {
    fn kind(&self) -> ModelKind {
        ModelKind::PointMass
    }

    fn is_point_mass(&self) -> bool {
        true
    }

    fn supports(&self, _psi: &PureState) -> Result<()> {
        Ok(())
    }

    fn density(&self, _psi: &PureState, _x: &OnticState) -> Result<f64> {
        Err(Error::Unsupported(
            "point-mass model has a delta distribution, not a density".into(),
        ))
    }

    fn sample(&self, psi: &PureState, _rng: &mut dyn RngCore) -> Result<OnticState> {
        Ok(OnticState::Quantum(psi.clone()))
    }

    fn response(&self, x: &OnticState, povm: &Povm) -> Result<Vec<f64>> {
        match x {
            OnticState::Quantum(state) => born_probabilities(state, povm),
            OnticState::Sphere(_) => Err(Error::Unsupported(
                "point-mass model expects a quantum ontic state".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{haar_random_state, make_projective_povm, BlochVector};
    use crate::rng::seeded;
    use crate::sphere::Vec3;

    #[test]
    fn evaluate_examples() {
        let zero = PureState::basis(1, 0).unwrap();
        let povm = make_projective_povm(&BlochVector::new(Vec3::Z).unwrap());
        let (x, r) = bb_evaluate(&zero, &povm).unwrap();
        assert_eq!(x, OnticState::Quantum(zero));
        assert_eq!(r, vec![1.0, 0.0]);

        let psi = haar_random_state(3, &mut seeded(3)).unwrap();
        let proj = psi.projector().matrix().clone();
        let rest = nalgebra::DMatrix::identity(8, 8) - &proj;
        let povm = Povm::new(vec![proj, rest], vec!["psi".into(), "rest".into()]).unwrap();
        let (_, r) = bb_evaluate(&psi, &povm).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let psi = PureState::basis(2, 0).unwrap();
        let povm = make_projective_povm(&BlochVector::new(Vec3::Z).unwrap());
        assert!(bb_evaluate(&psi, &povm).is_err());
    }
}
