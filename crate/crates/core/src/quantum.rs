//! Pure states, POVMs and Born probabilities on n-qubit Hilbert spaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::Vec3;

/// Largest qubit count accepted by default (dense vectors only).
pub const DEFAULT_MAX_QUBITS: usize = 14;

/// Tolerance on the state norm.
pub const NORM_TOL: f64 = 1e-12;

/// Tolerance for PSD and completeness checks on effects.
pub const EFFECT_TOL: f64 = 1e-10;

/// Tolerance on the norm of user-supplied Bloch and measurement directions.
pub const DIRECTION_TOL: f64 = 1e-9;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
    qubits: usize,
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::dimension(format!(
            "state dimension {dim} is not a power of two >= 2"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl PureState {
    /// Wraps an amplitude vector that must already be normalized.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let qubits = qubits_for_dim(amplitudes.len())?;
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization {
                what: "state",
                norm,
            });
        }
        Ok(PureState {
            amplitudes: v,
            qubits,
        })
    }

    /// Normalizes an arbitrary nonzero amplitude vector.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let qubits = qubits_for_dim(amplitudes.len())?;
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Normalization {
                what: "state",
                norm,
            });
        }
        Ok(PureState {
            amplitudes: v / Complex64::new(norm, 0.0),
            qubits,
        })
    }

    /// Computational basis state `|index⟩` on `qubits` qubits.
    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        if qubits == 0 || qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::dimension(format!(
                "unsupported qubit count {qubits}"
            )));
        }
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(Error::dimension(format!("basis index {index} >= {dim}")));
        }
        let mut a = vec![C0; dim];
        a[index] = C1;
        PureState::new(a)
    }

    /// Qubit state with the given Bloch vector,
    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    pub fn from_bloch(v: &BlochVector) -> Self {
        let [x, y, z] = v.0 .0;
        let theta = (x * x + y * y).sqrt().atan2(z);
        let phi = y.atan2(x);
        let (s, c) = (0.5 * theta).sin_cos();
        let amplitudes =
            DVector::from_vec(vec![Complex64::new(c, 0.0), Complex64::from_polar(s, phi)]);
        PureState {
            amplitudes,
            qubits: 1,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::dimension(format!(
                "inner product of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().min(1.0))
    }

    /// True when the states coincide up to a global phase.
    pub fn same_ray(&self, other: &PureState) -> Result<bool> {
        Ok(self.fidelity(other)? >= 1.0 - 1e-12)
    }

    /// `|ψ⟩⟨ψ|` as an effect.
    pub fn projector(&self) -> Effect {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        Effect { matrix: m }
    }
}

/// Unit Bloch vector of a qubit pure state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub(crate) Vec3);

impl BlochVector {
    /// Accepts vectors within [`DIRECTION_TOL`] of unit length and rescales
    /// them exactly onto the sphere.
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > DIRECTION_TOL {
            return Err(Error::Normalization {
                what: "Bloch vector",
                norm,
            });
        }
        Ok(BlochVector(v * (1.0 / norm)))
    }

    pub fn from_components(x: f64, y: f64, z: f64) -> Result<Self> {
        BlochVector::new(Vec3::new(x, y, z))
    }

    pub fn vec(&self) -> Vec3 {
        self.0
    }
}

/// A validated Hermitian positive-semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    matrix: DMatrix<Complex64>,
}

impl Effect {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() {
            return Err(Error::dimension("effect is not square"));
        }
        qubits_for_dim(d)?;
        let herm_dev = (&matrix - matrix.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if herm_dev > EFFECT_TOL {
            return Err(Error::invalid(format!(
                "effect is not Hermitian (deviation {herm_dev:e})"
            )));
        }
        let min_eigenvalue = min_eigenvalue(&matrix);
        if min_eigenvalue < -EFFECT_TOL {
            return Err(Error::NotPsd {
                index: 0,
                min_eigenvalue,
            });
        }
        Ok(Effect { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<Effect>,
    labels: Vec<String>,
}

impl Povm {
    pub fn new(effects: Vec<DMatrix<Complex64>>, labels: Vec<String>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::invalid("POVM needs at least one effect"));
        }
        if effects.len() != labels.len() {
            return Err(Error::invalid("one label per effect is required"));
        }
        let d = effects[0].nrows();
        let mut validated = Vec::with_capacity(effects.len());
        for (index, m) in effects.into_iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::dimension("effects have different dimensions"));
            }
            match Effect::new(m) {
                Err(Error::NotPsd { min_eigenvalue, .. }) => {
                    return Err(Error::NotPsd {
                        index,
                        min_eigenvalue,
                    })
                }
                other => validated.push(other?),
            }
        }
        let mut sum = DMatrix::<Complex64>::zeros(d, d);
        for e in &validated {
            sum += &e.matrix;
        }
        let deviation = (sum - DMatrix::<Complex64>::identity(d, d))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if deviation > EFFECT_TOL {
            return Err(Error::NotComplete { deviation });
        }
        Ok(Povm {
            effects: validated,
            labels,
        })
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    /// For a two-outcome projective qubit measurement `{(1 ± m·σ)/2}`,
    /// returns `m`.
    pub fn qubit_projective_axis(&self) -> Option<Vec3> {
        if self.dim() != 2 || self.len() != 2 {
            return None;
        }
        let e = &self.effects[0].matrix;
        let trace = (e[(0, 0)] + e[(1, 1)]).re;
        let m = Vec3::new(
            2.0 * e[(1, 0)].re,
            2.0 * e[(1, 0)].im,
            (e[(0, 0)] - e[(1, 1)]).re,
        );
        ((trace - 1.0).abs() < EFFECT_TOL && (m.norm() - 1.0).abs() < 1e-8).then_some(m)
    }
}

fn pauli_combination(m: Vec3, sign: f64) -> DMatrix<Complex64> {
    let [x, y, z] = m.0;
    let half = 0.5;
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(half * (1.0 + sign * z), 0.0),
            Complex64::new(half * sign * x, -half * sign * y),
            Complex64::new(half * sign * x, half * sign * y),
            Complex64::new(half * (1.0 - sign * z), 0.0),
        ],
    )
}

/// Two-outcome projective measurement along `m`: effects `(1 ± m·σ)/2`
/// labelled `+1` and `-1`.
pub fn make_projective_povm(m: &BlochVector) -> Povm {
    Povm::new(
        vec![pauli_combination(m.0, 1.0), pauli_combination(m.0, -1.0)],
        vec!["+1".into(), "-1".into()],
    )
    .expect("projective qubit effects are valid by construction")
}

/// Validating variant of [`make_projective_povm`] for raw directions.
pub fn projective_povm_along(m: Vec3) -> Result<Povm> {
    Ok(make_projective_povm(&BlochVector::new(m)?))
}

/// Haar-random pure state on `n` qubits, capped at [`DEFAULT_MAX_QUBITS`].
pub fn haar_random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    haar_random_state_capped(n, DEFAULT_MAX_QUBITS, rng)
}

pub fn haar_random_state_capped<R: Rng + ?Sized>(
    n: usize,
    max_qubits: usize,
    rng: &mut R,
) -> Result<PureState> {
    if n == 0 || n > max_qubits || n >= usize::BITS as usize {
        return Err(Error::dimension(format!(
            "qubit count {n} outside 1..={max_qubits}"
        )));
    }
    let dim = 1usize << n;
    let amplitudes: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::normalized(amplitudes)
}

/// Bloch vector `v_i = ⟨ψ|σ_i|ψ⟩` of a single-qubit state.
pub fn bloch_of_qubit(psi: &PureState) -> Result<BlochVector> {
    if psi.qubits() != 1 {
        return Err(Error::dimension(format!(
            "Bloch vector needs one qubit, got {}",
            psi.qubits()
        )));
    }
    let a = psi.amplitudes[0];
    let b = psi.amplitudes[1];
    let ab = a.conj() * b;
    let v = Vec3::new(2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr());
    BlochVector::new(v)
}

/// `⟨ψ|E|ψ⟩`, clamped to [0, 1].
pub fn born_probability(psi: &PureState, effect: &Effect) -> Result<f64> {
    if psi.dim() != effect.dim() {
        return Err(Error::dimension(format!(
            "state dimension {} vs effect dimension {}",
            psi.dim(),
            effect.dim()
        )));
    }
    let a = &psi.amplitudes;
    let value = a.dotc(&(&effect.matrix * a)).re;
    if !(-EFFECT_TOL..=1.0 + EFFECT_TOL).contains(&value) {
        return Err(Error::invalid(format!("Born value {value} outside [0, 1]")));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Born probabilities for every outcome of `povm`.
pub fn born_probabilities(psi: &PureState, povm: &Povm) -> Result<Vec<f64>> {
    povm.effects()
        .iter()
        .map(|e| born_probability(psi, e))
        .collect()
}

/// `θ = arccos |⟨ψ|ψ′⟩|` in `[0, π/2]`.
pub fn pair_angle(psi: &PureState, other: &PureState) -> Result<f64> {
    Ok(psi.inner(other)?.norm().min(1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn qubit(a: Complex64, b: Complex64) -> PureState {
        PureState::new(vec![a, b]).unwrap()
    }

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    /// The six Pauli eigenstates and their Bloch vectors.
    fn pauli_eigenstates() -> Vec<(PureState, Vec3)> {
        let h = FRAC_1_SQRT_2;
        vec![
            (qubit(r(1.0), r(0.0)), Vec3::Z),
            (qubit(r(0.0), r(1.0)), -Vec3::Z),
            (qubit(r(h), r(h)), Vec3::X),
            (qubit(r(h), r(-h)), -Vec3::X),
            (qubit(r(h), Complex64::new(0.0, h)), Vec3::Y),
            (qubit(r(h), Complex64::new(0.0, -h)), -Vec3::Y),
        ]
    }

    #[test]
    fn bloch_vectors_of_pauli_eigenstates() {
        for (psi, v) in pauli_eigenstates() {
            assert!(close(bloch_of_qubit(&psi).unwrap().vec(), v, 1e-12));
        }
    }

    #[test]
    fn bloch_round_trip_preserves_the_ray() {
        for (psi, _) in pauli_eigenstates() {
            let v = bloch_of_qubit(&psi).unwrap();
            let back = PureState::from_bloch(&v);
            assert!((psi.inner(&back).unwrap().norm() - 1.0).abs() < 1e-10);
            // The +1 eigenvector of the projective effect along v is ψ.
            let p = born_probability(&psi, &make_projective_povm(&v).effects()[0]).unwrap();
            assert!((p - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn bloch_requires_one_qubit() {
        let psi = PureState::basis(2, 0).unwrap();
        assert!(matches!(bloch_of_qubit(&psi), Err(Error::Dimension(_))));
    }

    #[test]
    fn born_examples() {
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        assert_eq!(born_probability(&zero, &zero.projector()).unwrap(), 1.0);
        assert_eq!(born_probability(&zero, &one.projector()).unwrap(), 0.0);

        // γ = 60° between v and m: analytic (1 + cos γ)/2.
        let v = BlochVector::new(Vec3::Z).unwrap();
        let g = PI / 3.0;
        let m = BlochVector::new(Vec3::new(g.sin(), 0.0, g.cos())).unwrap();
        let psi = PureState::from_bloch(&v);
        let p = born_probability(&psi, &make_projective_povm(&m).effects()[0]).unwrap();
        // Direct matrix evaluation of ⟨0|(1 + m·σ)/2|0⟩ = (1 + m_z)/2.
        assert!((p - 0.75).abs() < 1e-12);
        assert!((p - (1.0 + g.cos()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn born_dimension_mismatch() {
        let psi = PureState::basis(2, 0).unwrap();
        let povm = make_projective_povm(&BlochVector::new(Vec3::Z).unwrap());
        assert!(born_probability(&psi, &povm.effects()[0]).is_err());
    }

    #[test]
    fn pair_angle_examples() {
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        let plus = qubit(r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2));
        assert!(pair_angle(&zero, &zero).unwrap().abs() < 1e-7);
        assert!((pair_angle(&zero, &one).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!((pair_angle(&zero, &plus).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!(pair_angle(&zero, &PureState::basis(2, 0).unwrap()).is_err());
    }

    #[test]
    fn projective_povm_examples() {
        let z = make_projective_povm(&BlochVector::new(Vec3::Z).unwrap());
        let e0 = z.effects()[0].matrix();
        let e1 = z.effects()[1].matrix();
        assert_eq!(e0[(0, 0)], r(1.0));
        assert_eq!(e0[(1, 1)], r(0.0));
        assert_eq!(e1[(1, 1)], r(1.0));
        assert_eq!(z.labels(), ["+1", "-1"]);

        let x = make_projective_povm(&BlochVector::new(Vec3::X).unwrap());
        let eig = SymmetricEigen::new(x.effects()[0].matrix().clone());
        let mut ev: Vec<(f64, usize)> = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(ev[0].0.abs() < 1e-12 && (ev[1].0 - 1.0).abs() < 1e-12);
        let top = eig.eigenvectors.column(ev[1].1);
        let plus = qubit(r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2));
        let overlap = plus.amplitudes().dotc(&top.into_owned()).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
        assert!((x.qubit_projective_axis().unwrap() - Vec3::X).norm() < 1e-12);
    }

    #[test]
    fn projective_povm_rejects_non_unit_direction() {
        assert!(matches!(
            projective_povm_along(Vec3::new(0.0, 0.0, 1.1)),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn povm_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[r(1.5), r(0.0), r(0.0), r(-0.5)]);
        let good = DMatrix::from_row_slice(2, 2, &[r(-0.5), r(0.0), r(0.0), r(1.5)]);
        let err = Povm::new(vec![bad, good], vec!["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, Error::NotPsd { index: 0, .. }));

        let half = DMatrix::from_diagonal_element(2, 2, r(0.4));
        let err = Povm::new(vec![half.clone(), half], vec!["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, Error::NotComplete { .. }));
    }

    #[test]
    fn haar_state_errors_and_determinism() {
        let mut rng = seeded(1);
        assert!(haar_random_state(0, &mut rng).is_err());
        assert!(haar_random_state(15, &mut rng).is_err());
        assert!(haar_random_state_capped(3, 2, &mut rng).is_err());
        let a = haar_random_state(3, &mut seeded(9)).unwrap();
        let b = haar_random_state(3, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        assert!((a.amplitudes().norm() - 1.0).abs() < 1e-12);
    }

    /// Independent oracle: normalized complex Gaussian vectors built inline.
    fn oracle_moment(dim: usize, samples: usize, seed: u64) -> f64 {
        let mut rng = seeded(seed);
        let mut acc = 0.0;
        for _ in 0..samples {
            let v: Vec<f64> = (0..2 * dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            acc += (v[0] * v[0] + v[1] * v[1]) / norm2;
        }
        acc / samples as f64
    }

    #[test]
    fn haar_first_moment() {
        for (n, expected) in [(1usize, 0.5), (2, 0.25)] {
            let dim = 1usize << n;
            let samples = 100_000;
            let mut rng = seeded(100 + n as u64);
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..samples {
                let p = haar_random_state(n, &mut rng).unwrap().amplitudes()[0].norm_sqr();
                sum += p;
                sum2 += p * p;
            }
            let mean = sum / samples as f64;
            let sd = (sum2 / samples as f64 - mean * mean).sqrt();
            let se = sd / (samples as f64).sqrt();
            let oracle = oracle_moment(dim, samples, 200 + n as u64);
            assert!((oracle - expected).abs() < 4.0 * se, "oracle {oracle}");
            assert!((mean - expected).abs() < 4.0 * se, "n={n}: {mean}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit() -> impl Strategy<Value = Vec3> {
            (-1.0f64..1.0, 0.0f64..(2.0 * PI)).prop_map(|(z, phi)| {
                let r = (1.0 - z * z).sqrt();
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            })
        }

        proptest! {
            #[test]
            fn projective_povms_are_complete_and_born_sums_to_one(m in unit(), v in unit()) {
                let povm = make_projective_povm(&BlochVector::new(m).unwrap());
                let sum = povm.effects()[0].matrix() + povm.effects()[1].matrix();
                let dev = (sum - DMatrix::<Complex64>::identity(2, 2)).iter().map(|c| c.norm()).fold(0.0, f64::max);
                prop_assert!(dev < 1e-10);
                for e in povm.effects() {
                    prop_assert!(e.eigenvalues()[0] > -1e-10);
                }
                let psi = PureState::from_bloch(&BlochVector::new(v).unwrap());
                let p = born_probabilities(&psi, &povm).unwrap();
                prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-10);
                prop_assert!((p[0] - (1.0 + v.dot(&m)) / 2.0).abs() < 1e-10);
            }

            #[test]
            fn bloch_round_trip(v in unit()) {
                let b = BlochVector::new(v).unwrap();
                let back = bloch_of_qubit(&PureState::from_bloch(&b)).unwrap();
                prop_assert!((back.vec() - v).norm() < 1e-9);
            }

            #[test]
            fn haar_states_are_normalized(seed in any::<u64>(), n in 1usize..6) {
                let psi = haar_random_state(n, &mut seeded(seed)).unwrap();
                prop_assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-12);
                prop_assert_eq!(psi.dim(), 1usize << n);
            }
        }
    }
}
