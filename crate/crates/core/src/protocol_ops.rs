//! Protocol operators: the shared GHZ state, the parties' local unitaries,
//! the GHZ measurement basis, Alice's payoff operators and their
//! expectation values, plus the closed-form payoff used as an oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::channels::AttackKind;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::quantum_core::{ComplexMatrix, DensityMatrix, StateVector};

/// One of the three protocol parties. Each owns one qubit of the triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyRole {
    #[serde(rename = "A", alias = "Alice")]
    Alice,
    #[serde(rename = "B", alias = "Bob")]
    Bob,
    #[serde(rename = "C", alias = "Charlie")]
    Charlie,
}

impl PartyRole {
    pub const ALL: [PartyRole; 3] = [PartyRole::Alice, PartyRole::Bob, PartyRole::Charlie];

    /// Position of the party's qubit in the tensor product, A first.
    pub fn qubit(self) -> usize {
        match self {
            PartyRole::Alice => 0,
            PartyRole::Bob => 1,
            PartyRole::Charlie => 2,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            PartyRole::Alice => "A",
            PartyRole::Bob => "B",
            PartyRole::Charlie => "C",
        }
    }

    pub fn from_letter(s: &str) -> Option<Self> {
        match s {
            "A" | "a" => Some(PartyRole::Alice),
            "B" | "b" => Some(PartyRole::Bob),
            "C" | "c" => Some(PartyRole::Charlie),
            _ => None,
        }
    }
}

impl fmt::Display for PartyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

/// Angles of a local unitary `cos(θ/2)·R + sin(θ/2)·P`.
///
/// Only Alice's operators carry the phases `alpha` and `beta`; Bob's and
/// Charlie's must leave them at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalUnitaryParams<T> {
    pub theta: T,
    #[serde(default)]
    pub alpha: T,
    #[serde(default)]
    pub beta: T,
}

impl<T: Real> LocalUnitaryParams<T> {
    pub fn new(theta: T, alpha: T, beta: T) -> Self {
        Self { theta, alpha, beta }
    }

    /// Bob/Charlie operator with only a rotation angle.
    pub fn rotation(theta: T) -> Self {
        Self::new(theta, T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::rotation(T::zero())
    }

    /// `U(π)` for Bob/Charlie, `U_A(π, π, π)` for Alice.
    pub fn flip(role: PartyRole) -> Self {
        match role {
            PartyRole::Alice => Self::new(T::PI(), T::PI(), T::PI()),
            _ => Self::rotation(T::PI()),
        }
    }

    pub fn validate(&self, role: PartyRole) -> Result<()> {
        let pi = T::PI();
        check_range("theta", self.theta, T::zero(), pi)?;
        match role {
            PartyRole::Alice => {
                check_range("alpha", self.alpha, -pi, pi)?;
                check_range("beta", self.beta, -pi, pi)?;
            }
            PartyRole::Bob | PartyRole::Charlie => {
                check_range("alpha", self.alpha, T::zero(), T::zero())?;
                check_range("beta", self.beta, T::zero(), T::zero())?;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_range<T: Real>(name: &'static str, value: T, min: T, max: T) -> Result<()> {
    if value.is_nan() || value < min || value > max {
        return Err(Error::Range {
            name,
            value: value.to_f64().unwrap_or(f64::NAN),
            min: min.to_f64().unwrap_or(f64::NAN),
            max: max.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// `cos(θ/2)·R + sin(θ/2)·P` for the given party.
///
/// Alice: `R|0⟩ = e^{iα}|0⟩`, `R|1⟩ = e^{-iα}|1⟩`, `P|0⟩ = e^{i(π/2-β)}|1⟩`,
/// `P|1⟩ = e^{i(π/2+β)}|0⟩`. Bob and Charlie: `R = I`, `P|0⟩ = |1⟩`,
/// `P|1⟩ = -|0⟩`.
pub fn build_unitary<T: Real>(role: PartyRole, params: &LocalUnitaryParams<T>) -> Result<ComplexMatrix<T>> {
    params.validate(role)?;
    let half = params.theta / T::lit(2.0);
    let (c, s) = (half.cos(), half.sin());
    let rows = match role {
        PartyRole::Alice => {
            let half_pi = T::FRAC_PI_2();
            let r0 = Complex::from_polar(T::one(), params.alpha);
            let r1 = Complex::from_polar(T::one(), -params.alpha);
            let p10 = Complex::from_polar(T::one(), half_pi - params.beta);
            let p01 = Complex::from_polar(T::one(), half_pi + params.beta);
            // column j is the image of |j⟩
            vec![vec![r0 * c, p01 * s], vec![p10 * s, r1 * c]]
        }
        PartyRole::Bob | PartyRole::Charlie => {
            let cc = Complex::new(c, T::zero());
            let ss = Complex::new(s, T::zero());
            vec![vec![cc, -ss], vec![ss, cc]]
        }
    };
    Ok(ComplexMatrix::from_rows(&rows))
}

/// `(|000⟩ + i|111⟩)/√2`.
pub fn ghz_initial_state<T: Real>() -> StateVector<T> {
    let h = T::FRAC_1_SQRT_2();
    let mut amps = vec![Complex::zero(); 8];
    amps[0b000] = Complex::new(h, T::zero());
    amps[0b111] = Complex::new(T::zero(), h);
    StateVector::new(amps).expect("GHZ state is normalized")
}

/// A GHZ-basis measurement outcome, `rst` as a 3-bit index (A most significant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome(u8);

impl Outcome {
    pub const COUNT: usize = 8;

    pub fn new(index: usize) -> Self {
        assert!(index < Self::COUNT, "outcome index out of range");
        Outcome(index as u8)
    }

    pub fn all() -> impl Iterator<Item = Outcome> {
        (0..Self::COUNT).map(Outcome::new)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Bitwise complement `r̄s̄t̄`.
    pub fn complement(self) -> Self {
        Outcome(self.0 ^ 0b111)
    }

    pub fn bit(self, role: PartyRole) -> u8 {
        (self.0 >> (2 - role.qubit())) & 1
    }

    pub fn label(self) -> String {
        format!("{:03b}", self.0)
    }

    pub fn parse(label: &str) -> Option<Self> {
        if label.len() != 3 || !label.bytes().all(|b| b == b'0' || b == b'1') {
            return None;
        }
        u8::from_str_radix(label, 2).ok().map(Outcome)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03b}", self.0)
    }
}

/// The eight GHZ vectors `ψ_rst = (|rst⟩ + i·σ_rst·|r̄s̄t̄⟩)/√2` and their projectors.
///
/// The relative sign `σ_rst = (-1)^(s+t)` is the sign `|1⟩` picks up under
/// the Bob and Charlie flips, so the encoded GHZ state `U_B ⊗ U_C` maps
/// `ψ_000` exactly onto `ψ_0st`, and Alice's `U_A(π, π, π)` maps `ψ_0st` onto
/// a single basis vector as well.
#[derive(Debug, Clone)]
pub struct GhzBasis<T> {
    vectors: Vec<StateVector<T>>,
    projectors: Vec<ComplexMatrix<T>>,
}

impl<T: Real> GhzBasis<T> {
    pub fn new() -> Self {
        let h = T::FRAC_1_SQRT_2();
        let vectors: Vec<StateVector<T>> = Outcome::all()
            .map(|o| {
                let sign = if (o.bit(PartyRole::Bob) + o.bit(PartyRole::Charlie)) % 2 == 0 {
                    T::one()
                } else {
                    -T::one()
                };
                let mut amps = vec![Complex::zero(); 8];
                amps[o.index()] = Complex::new(h, T::zero());
                amps[o.complement().index()] = Complex::new(T::zero(), sign * h);
                StateVector::new(amps).expect("GHZ basis vector is normalized")
            })
            .collect();
        let projectors = vectors.iter().map(|v| v.outer().into_matrix()).collect();
        Self { vectors, projectors }
    }

    pub fn vector(&self, o: Outcome) -> &StateVector<T> {
        &self.vectors[o.index()]
    }

    pub fn projector(&self, o: Outcome) -> &ComplexMatrix<T> {
        &self.projectors[o.index()]
    }

    /// Born probabilities `Tr(π_rst ρ)`, computed as `⟨ψ|ρ|ψ⟩`.
    pub fn probabilities(&self, rho: &DensityMatrix<T>) -> [T; 8] {
        let mut out = [T::zero(); 8];
        for o in Outcome::all() {
            let psi = self.vector(o).amplitudes();
            let rho_psi = rho.matrix().apply(psi);
            let p: Complex<T> = psi
                .iter()
                .zip(&rho_psi)
                .fold(Complex::zero(), |acc, (a, &b)| acc + a.conj() * b);
            out[o.index()] = p.re;
        }
        out
    }
}

impl<T: Real> Default for GhzBasis<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Real payoffs `$^k_rst` for each party `k` and GHZ outcome `rst`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable<T> {
    payoff: [[T; 8]; 3],
}

impl<T: Real> CoefficientTable<T> {
    /// `rows[k][rst]`, with `k` in Alice/Bob/Charlie order and `rst` the outcome index.
    pub fn from_rows(rows: [[T; 8]; 3]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Coefficients("all payoffs must be finite".into()));
        }
        Ok(Self { payoff: rows })
    }

    /// The table agreed on by the three parties before any exchange.
    pub fn standard() -> Self {
        // index:            000 001 010 011 100 101 110 111
        let a = [3.0, 2.0, 2.0, 0.0, 5.0, 4.0, 4.0, 1.0];
        let b = [3.0, 2.0, 5.0, 4.0, 2.0, 0.0, 4.0, 1.0];
        let c = [3.0, 5.0, 2.0, 4.0, 2.0, 4.0, 0.0, 1.0];
        let conv = |r: [f64; 8]| r.map(T::lit);
        Self {
            payoff: [conv(a), conv(b), conv(c)],
        }
    }

    pub fn zeros() -> Self {
        Self {
            payoff: [[T::zero(); 8]; 3],
        }
    }

    #[inline]
    pub fn get(&self, role: PartyRole, outcome: Outcome) -> T {
        self.payoff[role.qubit()][outcome.index()]
    }

    pub fn row(&self, role: PartyRole) -> &[T; 8] {
        &self.payoff[role.qubit()]
    }

    /// Payoff triple credited for a single outcome.
    pub fn triple(&self, outcome: Outcome) -> PayoffTriple<T> {
        PayoffTriple(PartyRole::ALL.map(|k| self.get(k, outcome)))
    }

    /// Difference between the largest and smallest payoff in the table.
    pub fn spread(&self) -> T {
        let flat = self.payoff.iter().flatten();
        let max = flat.clone().fold(T::neg_infinity(), |a, &b| a.max(b));
        let min = flat.fold(T::infinity(), |a, &b| a.min(b));
        max - min
    }

    /// Parses `{"A": {"000": 3, …, "111": 1}, "B": {…}, "C": {…}}`.
    /// Every one of the 24 entries must be present; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, BTreeMap<String, f64>> =
            serde_json::from_str(text).map_err(|e| Error::Coefficients(e.to_string()))?;
        let mut payoff = [[T::zero(); 8]; 3];
        for key in raw.keys() {
            if !PartyRole::ALL.iter().any(|r| r.letter() == key) {
                return Err(Error::Coefficients(format!("unknown party key {key:?}")));
            }
        }
        for role in PartyRole::ALL {
            let entries = raw
                .get(role.letter())
                .ok_or_else(|| Error::Coefficients(format!("missing party {:?}", role.letter())))?;
            for key in entries.keys() {
                if Outcome::parse(key).is_none() {
                    return Err(Error::Coefficients(format!("unknown outcome key {key:?} for {role}")));
                }
            }
            for o in Outcome::all() {
                let v = entries
                    .get(&o.label())
                    .ok_or_else(|| Error::Coefficients(format!("missing {role}.{o}")))?;
                payoff[role.qubit()][o.index()] =
                    T::from_f64(*v).ok_or_else(|| Error::Coefficients(format!("{role}.{o} not representable")))?;
            }
        }
        Self::from_rows(payoff)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        for role in PartyRole::ALL {
            let inner: serde_json::Map<String, serde_json::Value> = Outcome::all()
                .map(|o| (o.label(), serde_json::json!(self.get(role, o).to_f64())))
                .collect();
            obj.insert(role.letter().to_string(), serde_json::Value::Object(inner));
        }
        serde_json::Value::Object(obj)
    }
}

impl<T: Real> Default for CoefficientTable<T> {
    fn default() -> Self {
        Self::standard()
    }
}

impl Serialize for CoefficientTable<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientTable<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Self::from_json(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

/// Expectation values for Alice, Bob and Charlie, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffTriple<T>(pub [T; 3]);

impl<T: Real> PayoffTriple<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self([a, b, c])
    }

    pub fn splat(v: T) -> Self {
        Self([v; 3])
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &Self) -> T {
        (0..3).fold(T::zero(), |acc, i| acc.max((self.0[i] - other.0[i]).abs()))
    }

    pub fn map(self, f: impl FnMut(T) -> T) -> Self {
        Self(self.0.map(f))
    }
}

impl<T> Index<PartyRole> for PayoffTriple<T> {
    type Output = T;

    fn index(&self, role: PartyRole) -> &T {
        &self.0[role.qubit()]
    }
}

impl<T: Real> fmt::Display for PayoffTriple<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

/// `P^k = Σ_rst $^k_rst · π_rst`.
pub fn payoff_operator<T: Real>(role: PartyRole, coeffs: &CoefficientTable<T>, basis: &GhzBasis<T>) -> ComplexMatrix<T> {
    Outcome::all().fold(ComplexMatrix::zeros(8, 8), |acc, o| {
        &acc + &basis.projector(o).scale_real(coeffs.get(role, o))
    })
}

/// `(U_A ⊗ U_B ⊗ U_C) ρ (U_A ⊗ U_B ⊗ U_C)†`.
pub fn evolve<T: Real>(
    rho_in: &DensityMatrix<T>,
    ua: &ComplexMatrix<T>,
    ub: &ComplexMatrix<T>,
    uc: &ComplexMatrix<T>,
) -> DensityMatrix<T> {
    rho_in.conjugate_by(&ua.tensor(ub).tensor(uc))
}

/// `Tr(P^k ρ)`; an imaginary residue at or above `1e-10` is reported as an
/// internal-consistency failure rather than silently dropped.
pub fn expected_payoff<T: Real>(
    role: PartyRole,
    rho_f: &DensityMatrix<T>,
    coeffs: &CoefficientTable<T>,
    basis: &GhzBasis<T>,
) -> Result<T> {
    let z = rho_f.expectation(&payoff_operator(role, coeffs, basis));
    real_part(z, "payoff expectation")
}

fn real_part<T: Real>(z: Complex<T>, what: &str) -> Result<T> {
    let limit = T::PSD_TOL.max(T::lit(1e-10));
    if z.im.abs() >= limit {
        return Err(Error::Consistency(format!("{what} has imaginary part {}", z.im)));
    }
    Ok(z.re)
}

/// Payoff triple `(Tr(P^A ρ), Tr(P^B ρ), Tr(P^C ρ))`.
pub fn expected_triple<T: Real>(
    rho_f: &DensityMatrix<T>,
    coeffs: &CoefficientTable<T>,
    basis: &GhzBasis<T>,
) -> Result<PayoffTriple<T>> {
    let mut out = [T::zero(); 3];
    for role in PartyRole::ALL {
        out[role.qubit()] = expected_payoff(role, rho_f, coeffs, basis)?;
    }
    Ok(PayoffTriple(out))
}

/// The canonical round pipeline on the ensemble level: Bob and Charlie
/// encode, the attack acts on the return lines, Alice applies her operator.
///
/// An intercept-resend attack is represented by its ensemble form, full
/// dephasing of the intercepted qubit.
pub fn pipeline<T: Real>(
    alice: &LocalUnitaryParams<T>,
    bob: &LocalUnitaryParams<T>,
    charlie: &LocalUnitaryParams<T>,
    attack: &AttackKind<T>,
) -> Result<DensityMatrix<T>> {
    let ua = build_unitary(PartyRole::Alice, alice)?;
    let ub = build_unitary(PartyRole::Bob, bob)?;
    let uc = build_unitary(PartyRole::Charlie, charlie)?;
    let i2 = ComplexMatrix::identity(2);
    let rho = ghz_initial_state::<T>().outer();
    let rho = evolve(&rho, &i2, &ub, &uc);
    let rho = attack.apply_ensemble(&rho)?;
    Ok(evolve(&rho, &ua, &i2, &i2))
}

/// Closed-form payoff for party `role` with Alice's operator `alice`, Bob and
/// Charlie rotations `theta_b`, `theta_c` and phase damping of strength `p`
/// on one return line.
///
/// Written directly from the analytic expression with
/// `c_i = cos²(θ_i/2)`, `s_i = sin²(θ_i/2)` and `μ = 1 - p`; it does not
/// touch any matrix code.
pub fn closed_form_payoff<T: Real>(
    role: PartyRole,
    alice: &LocalUnitaryParams<T>,
    theta_b: T,
    theta_c: T,
    p: T,
    coeffs: &CoefficientTable<T>,
) -> T {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let cos2 = |t: T| (t * half).cos().powi(2);
    let sin2 = |t: T| (t * half).sin().powi(2);
    let (ca, cb, cc) = (cos2(alice.theta), cos2(theta_b), cos2(theta_c));
    let (sa, sb, sc) = (sin2(alice.theta), sin2(theta_b), sin2(theta_c));
    let mu = T::one() - p;
    let cos_alpha = (two * alice.alpha).cos();
    let cos_beta = (two * alice.beta).cos();
    let k = |label: &str| coeffs.get(role, Outcome::parse(label).expect("valid label"));
    // ((x + y) ± (x - y)·μ·cos 2φ) / 2
    let term = |x: &str, y: &str, sign: T, cos_phase: T| {
        half * ((k(x) + k(y)) + sign * (k(x) - k(y)) * mu * cos_phase)
    };
    let plus = T::one();
    let minus = -T::one();

    ca * cb * cc * term("000", "111", plus, cos_alpha)
        + sa * sb * sc * term("000", "111", minus, cos_beta)
        + ca * cb * sc * term("001", "110", plus, cos_alpha)
        + sa * sb * cc * term("001", "110", minus, cos_beta)
        + sa * cb * cc * term("100", "011", plus, cos_beta)
        + ca * sb * sc * term("100", "011", minus, cos_alpha)
        + sa * cb * sc * term("101", "010", plus, cos_beta)
        + ca * sb * cc * term("101", "010", minus, cos_alpha)
}

/// Closed-form triple for all three parties.
pub fn closed_form_triple<T: Real>(
    alice: &LocalUnitaryParams<T>,
    theta_b: T,
    theta_c: T,
    p: T,
    coeffs: &CoefficientTable<T>,
) -> PayoffTriple<T> {
    PayoffTriple(PartyRole::ALL.map(|k| closed_form_payoff(k, alice, theta_b, theta_c, p, coeffs)))
}
