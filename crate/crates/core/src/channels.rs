//! Eavesdropper models acting on the return lines: the phase-damping Kraus
//! channel and a projective intercept-resend attack.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::protocol_ops::{check_range, PartyRole};
use crate::quantum_core::{ComplexMatrix, DensityMatrix, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDampingParams<T> {
    pub p: T,
    /// Qubits damped in turn. Exactly one line is what the closed-form
    /// payoff and the decoding tables describe.
    pub targets: Vec<PartyRole>,
}

impl<T: Real> PhaseDampingParams<T> {
    pub fn new(p: T, targets: Vec<PartyRole>) -> Self {
        Self { p, targets }
    }

    pub fn single(p: T, target: PartyRole) -> Self {
        Self::new(p, vec![target])
    }

    pub fn validate(&self) -> Result<()> {
        check_range("p", self.p, T::zero(), T::one())?;
        if self.targets.is_empty() {
            return Err(Error::Config("phase damping needs at least one target qubit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttackKind<T> {
    #[default]
    None,
    PhaseDamping(PhaseDampingParams<T>),
    InterceptResend { target: PartyRole },
}

impl<T: Real> AttackKind<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            AttackKind::PhaseDamping(params) => params.validate(),
            _ => Ok(()),
        }
    }

    /// Applies the attack to an ensemble. Intercept-resend becomes full
    /// dephasing of the intercepted qubit, which is the average over Eve's
    /// measurement outcomes.
    pub fn apply_ensemble(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        match self {
            AttackKind::None => Ok(rho.clone()),
            AttackKind::PhaseDamping(params) => phase_damp(rho, params),
            AttackKind::InterceptResend { target } => Ok(full_dephase(rho, *target)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::PhaseDamping(_) => "phase-damping",
            AttackKind::InterceptResend { .. } => "intercept-resend",
        }
    }
}

/// `A₀ = √p|0⟩⟨0|`, `A₁ = √p|1⟩⟨1|`, `A₂ = √(1-p)·I`.
pub fn kraus_operators<T: Real>(p: T) -> [ComplexMatrix<T>; 3] {
    let sp = p.sqrt();
    let sq = (T::one() - p).sqrt();
    [
        ComplexMatrix::diagonal(&[sp, T::zero()]),
        ComplexMatrix::diagonal(&[T::zero(), sp]),
        ComplexMatrix::diagonal(&[sq, sq]),
    ]
}

/// Embeds a single-qubit operator on `qubit` of an `n`-qubit register.
fn embed<T: Real>(op: &ComplexMatrix<T>, qubit: usize, n: usize) -> ComplexMatrix<T> {
    let i2 = ComplexMatrix::identity(2);
    (0..n).fold(ComplexMatrix::identity(1), |acc, q| {
        acc.tensor(if q == qubit { op } else { &i2 })
    })
}

fn num_qubits<T: Real>(rho: &DensityMatrix<T>) -> usize {
    rho.dim().trailing_zeros() as usize
}

/// Applies `ρ ↦ Σᵢ Aᵢ ρ Aᵢ†` to each target qubit in turn.
pub fn phase_damp<T: Real>(rho: &DensityMatrix<T>, params: &PhaseDampingParams<T>) -> Result<DensityMatrix<T>> {
    params.validate()?;
    let n = num_qubits(rho);
    let kraus = kraus_operators(params.p);
    let mut current = rho.matrix().clone();
    for target in &params.targets {
        let q = target.qubit();
        if q >= n {
            return Err(Error::Dimension(format!("qubit {target} on a {n}-qubit state")));
        }
        current = kraus.iter().fold(ComplexMatrix::zeros(rho.dim(), rho.dim()), |acc, a| {
            let full = embed(a, q, n);
            &acc + &full.matmul(&current).matmul(&full.dagger())
        });
    }
    Ok(DensityMatrix::from_matrix_unchecked(current))
}

/// Phase damping with `p = 1`: every coherence between branches that differ
/// on `qubit` is removed.
pub fn full_dephase<T: Real>(rho: &DensityMatrix<T>, qubit: PartyRole) -> DensityMatrix<T> {
    phase_damp(rho, &PhaseDampingParams::single(T::one(), qubit)).expect("p = 1 is in range")
}

/// Eve measures `qubit` in the computational basis and resends a fresh qubit
/// in the state she observed. Returns the collapsed, renormalized state and
/// her outcome bit.
pub fn intercept_resend<T: Real, R: Rng + ?Sized>(
    state: &StateVector<T>,
    qubit: PartyRole,
    rng: &mut R,
) -> Result<(StateVector<T>, u8)> {
    let n = state.num_qubits();
    let q = qubit.qubit();
    if q >= n {
        return Err(Error::Dimension(format!("qubit {qubit} on a {n}-qubit state")));
    }
    let shift = n - 1 - q;
    let amps = state.amplitudes();
    let p1 = amps
        .iter()
        .enumerate()
        .filter(|(i, _)| (i >> shift) & 1 == 1)
        .map(|(_, z)| z.norm_sqr())
        .fold(T::zero(), |a, b| a + b);
    let draw = T::from_f64(rng.gen::<f64>()).expect("f64 converts to scalar");
    let bit: u8 = if draw < p1 { 1 } else { 0 };
    let collapsed: Vec<Complex<T>> = amps
        .iter()
        .enumerate()
        .map(|(i, &z)| if ((i >> shift) & 1) as u8 == bit { z } else { Complex::zero() })
        .collect();
    Ok((StateVector::normalized(collapsed)?, bit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol_ops::{build_unitary, ghz_initial_state, LocalUnitaryParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn ghz_rho() -> DensityMatrix<f64> {
        ghz_initial_state().outer()
    }

    #[test]
    fn kraus_completeness() {
        for p in [0.0, 0.1, 0.5, 0.93, 1.0] {
            let sum = kraus_operators::<f64>(p)
                .iter()
                .fold(ComplexMatrix::zeros(2, 2), |acc, a| &acc + &a.dagger().matmul(a));
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn zero_strength_is_identity() {
        let out = phase_damp(&ghz_rho(), &PhaseDampingParams::single(0.0, PartyRole::Bob)).unwrap();
        assert!(out.matrix().max_abs_diff(ghz_rho().matrix()) < 1e-15);
    }

    #[test]
    fn full_damping_kills_ghz_coherence() {
        let out = phase_damp(&ghz_rho(), &PhaseDampingParams::single(1.0, PartyRole::Bob)).unwrap();
        let mut want = ComplexMatrix::zeros(8, 8);
        want[(0, 0)] = C::new(0.5, 0.0);
        want[(7, 7)] = C::new(0.5, 0.0);
        assert!(out.matrix().max_abs_diff(&want) < 1e-12);
        out.validate().unwrap();
    }

    #[test]
    fn partial_damping_scales_branch_coherence() {
        let rho = ghz_rho();
        let out = phase_damp(&rho, &PhaseDampingParams::single(0.3, PartyRole::Bob)).unwrap();
        let before = rho.matrix()[(0, 7)];
        let after = out.matrix()[(0, 7)];
        assert!((after - before * 0.7).norm() < 1e-15);
        assert!((out.trace() - C::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(phase_damp(&ghz_rho(), &PhaseDampingParams::single(1.5, PartyRole::Bob)).is_err());
        assert!(phase_damp(&ghz_rho(), &PhaseDampingParams::new(0.5, vec![])).is_err());
    }

    fn frequency_of_one(state: &StateVector<f64>, qubit: PartyRole, draws: usize, seed: u64) -> (f64, Vec<StateVector<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ones = 0usize;
        let mut examples = vec![None, None];
        for _ in 0..draws {
            let (s, bit) = intercept_resend(state, qubit, &mut rng).unwrap();
            ones += bit as usize;
            examples[bit as usize].get_or_insert(s);
        }
        (ones as f64 / draws as f64, examples.into_iter().flatten().collect())
    }

    #[test]
    fn intercept_on_ghz_collapses_to_branches() {
        let draws = 100_000;
        let (f, _) = frequency_of_one(&ghz_initial_state(), PartyRole::Bob, draws, 7);
        let sigma = (0.25 / draws as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * sigma, "frequency {f}");

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (s, bit) = intercept_resend(&ghz_initial_state::<f64>(), PartyRole::Bob, &mut rng).unwrap();
            let idx = if bit == 0 { 0b000 } else { 0b111 };
            assert!((s.amplitudes()[idx].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_on_product_state_is_deterministic() {
        let s = StateVector::<f64>::basis(8, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (out, bit) = intercept_resend(&s, PartyRole::Bob, &mut rng).unwrap();
            assert_eq!(bit, 0);
            assert_eq!(out, s);
        }
    }

    #[test]
    fn intercept_after_bob_flip() {
        let i2 = ComplexMatrix::identity(2);
        let ub = build_unitary(PartyRole::Bob, &LocalUnitaryParams::rotation(std::f64::consts::PI)).unwrap();
        let s = ghz_initial_state().apply(&i2.tensor(&ub).tensor(&i2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (out, bit) = intercept_resend(&s, PartyRole::Bob, &mut rng).unwrap();
            let idx = if bit == 1 { 0b010 } else { 0b101 };
            assert!((out.amplitudes()[idx].norm() - 1.0).abs() < 1e-12);
        }
        let draws = 100_000;
        let (f, _) = frequency_of_one(&s, PartyRole::Bob, draws, 99);
        assert!((f - 0.5).abs() < 3.0 * (0.25 / draws as f64).sqrt());
    }

    #[test]
    fn ensemble_intercept_matches_full_dephasing() {
        let rho = ghz_rho();
        let a: AttackKind<f64> = AttackKind::InterceptResend { target: PartyRole::Charlie };
        let via_attack = a.apply_ensemble(&rho).unwrap();
        let via_damp = phase_damp(&rho, &PhaseDampingParams::single(1.0, PartyRole::Charlie)).unwrap();
        assert!(via_attack.matrix().max_abs_diff(via_damp.matrix()) < 1e-15);
    }

    #[test]
    fn attack_kind_json_shape() {
        let a: AttackKind<f64> = AttackKind::PhaseDamping(PhaseDampingParams::single(0.5, PartyRole::Bob));
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "phase-damping", "p": 0.5, "targets": ["B"]}));
        let back: AttackKind<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
        let ir: AttackKind<f64> =
            serde_json::from_value(serde_json::json!({"kind": "intercept-resend", "target": "C"})).unwrap();
        assert_eq!(ir, AttackKind::InterceptResend { target: PartyRole::Charlie });
    }
}
