//! Alice's decoding matrix and the verdict logic that turns a measured
//! payoff triple into Bob's and Charlie's symbols or an eavesdropping alarm.

use serde::{Deserialize, Serialize};

use crate::channels::{AttackKind, PhaseDampingParams};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::protocol_ops::{
    check_range, expected_triple, pipeline, CoefficientTable, GhzBasis, LocalUnitaryParams, PartyRole, PayoffTriple,
};

/// Default matching tolerance when Alice knows exact expectation values.
pub const EXACT_TOLERANCE: f64 = 0.25;

/// Encoding operator with the classical symbol it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct SymbolOp<T> {
    pub label: String,
    pub params: LocalUnitaryParams<T>,
}

impl<T: Real> SymbolOp<T> {
    pub fn new(label: impl Into<String>, params: LocalUnitaryParams<T>) -> Self {
        Self {
            label: label.into(),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct OperatorAlphabet<T> {
    pub alice_ops: Vec<LocalUnitaryParams<T>>,
    pub bob_ops: Vec<SymbolOp<T>>,
    pub charlie_ops: Vec<SymbolOp<T>>,
}

impl<T: Real> OperatorAlphabet<T> {
    /// Alice: `U_A(0,0,0)`, `U_A(π,π,π)`. Bob: `U_B(0) → m1`, `U_B(π) → m2`.
    /// Charlie: `U_C(0) → m3`, `U_C(π) → m4`.
    pub fn standard() -> Self {
        Self {
            alice_ops: vec![LocalUnitaryParams::identity(), LocalUnitaryParams::flip(PartyRole::Alice)],
            bob_ops: vec![
                SymbolOp::new("m1", LocalUnitaryParams::identity()),
                SymbolOp::new("m2", LocalUnitaryParams::flip(PartyRole::Bob)),
            ],
            charlie_ops: vec![
                SymbolOp::new("m3", LocalUnitaryParams::identity()),
                SymbolOp::new("m4", LocalUnitaryParams::flip(PartyRole::Charlie)),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alice_ops.is_empty() || self.bob_ops.is_empty() || self.charlie_ops.is_empty() {
            return Err(Error::Config("every party needs at least one operator".into()));
        }
        for a in &self.alice_ops {
            a.validate(PartyRole::Alice)?;
        }
        for (role, ops) in [(PartyRole::Bob, &self.bob_ops), (PartyRole::Charlie, &self.charlie_ops)] {
            for (i, op) in ops.iter().enumerate() {
                op.params.validate(role)?;
                if ops[..i].iter().any(|o| o.label == op.label) {
                    return Err(Error::Config(format!("duplicate symbol label {:?} for {role}", op.label)));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.alice_ops.len(), self.bob_ops.len(), self.charlie_ops.len())
    }
}

impl<T: Real> Default for OperatorAlphabet<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// Cell address: indices into the alphabet's Alice, Bob and Charlie lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub alice: usize,
    pub bob: usize,
    pub charlie: usize,
}

impl Cell {
    pub fn new(alice: usize, bob: usize, charlie: usize) -> Self {
        Self { alice, bob, charlie }
    }
}

/// Expected payoff triple for every operator combination, at damping `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodingMatrix<T> {
    p: T,
    shape: (usize, usize, usize),
    entries: Vec<PayoffTriple<T>>,
}

impl<T: Real> DecodingMatrix<T> {
    pub fn p(&self) -> T {
        self.p
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn offset(&self, cell: Cell) -> usize {
        let (na, nb, nc) = self.shape;
        assert!(cell.alice < na && cell.bob < nb && cell.charlie < nc, "cell {cell:?} out of range");
        (cell.alice * nb + cell.bob) * nc + cell.charlie
    }

    pub fn get(&self, cell: Cell) -> PayoffTriple<T> {
        self.entries[self.offset(cell)]
    }

    /// Cells in (alice, bob, charlie) lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = (Cell, PayoffTriple<T>)> + '_ {
        let (_, nb, nc) = self.shape;
        self.entries.iter().enumerate().map(move |(i, &t)| {
            let cell = Cell::new(i / (nb * nc), (i / nc) % nb, i % nc);
            (cell, t)
        })
    }

    /// Smallest max-norm distance between two cells sharing an Alice operator.
    pub fn min_row_separation(&self) -> T {
        let (na, nb, nc) = self.shape;
        let mut best = T::infinity();
        for a in 0..na {
            let row: Vec<_> = (0..nb)
                .flat_map(|b| (0..nc).map(move |c| Cell::new(a, b, c)))
                .map(|cell| self.get(cell))
                .collect();
            for i in 0..row.len() {
                for j in (i + 1)..row.len() {
                    best = best.min(row[i].distance(&row[j]));
                }
            }
        }
        best
    }
}

/// Builds the decoding matrix through the density-matrix pipeline with phase
/// damping of strength `p` on Bob's return line.
pub fn build_decoding_matrix<T: Real>(
    coeffs: &CoefficientTable<T>,
    alphabet: &OperatorAlphabet<T>,
    p: T,
) -> Result<DecodingMatrix<T>> {
    check_range("p", p, T::zero(), T::one())?;
    let attack = AttackKind::PhaseDamping(PhaseDampingParams::single(p, PartyRole::Bob));
    build_decoding_matrix_under(coeffs, alphabet, p, &attack)
}

/// Builds the matrix under an arbitrary ensemble-level attack; `p` is only
/// recorded as the label of the result.
pub fn build_decoding_matrix_under<T: Real>(
    coeffs: &CoefficientTable<T>,
    alphabet: &OperatorAlphabet<T>,
    p: T,
    attack: &AttackKind<T>,
) -> Result<DecodingMatrix<T>> {
    alphabet.validate()?;
    attack.validate()?;
    let basis = GhzBasis::new();
    let shape = alphabet.shape();
    let mut entries = Vec::with_capacity(shape.0 * shape.1 * shape.2);
    for a in &alphabet.alice_ops {
        for b in &alphabet.bob_ops {
            for c in &alphabet.charlie_ops {
                let rho = pipeline(a, &b.params, &c.params, attack)?;
                entries.push(expected_triple(&rho, coeffs, &basis)?);
            }
        }
    }
    Ok(DecodingMatrix { p, shape, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum DecodeVerdict<T> {
    Decoded { bob: usize, charlie: usize, residual: T },
    EveDetected { best_residual: T },
    /// Several cells within tolerance; `(bob, charlie)` index pairs.
    Ambiguous { candidates: Vec<(usize, usize)> },
}

impl<T> DecodeVerdict<T> {
    pub fn is_decoded(&self) -> bool {
        matches!(self, DecodeVerdict::Decoded { .. })
    }
}

/// Compares a measured triple with the cells of Alice's own row only.
pub fn decode<T: Real>(measured: &PayoffTriple<T>, alice_index: usize, matrix: &DecodingMatrix<T>, tol: T) -> DecodeVerdict<T> {
    let (_, nb, nc) = matrix.shape();
    let mut best = T::infinity();
    let mut hits = Vec::new();
    for b in 0..nb {
        for c in 0..nc {
            let d = measured.distance(&matrix.get(Cell::new(alice_index, b, c)));
            best = best.min(d);
            if d <= tol {
                hits.push((b, c, d));
            }
        }
    }
    match hits.as_slice() {
        [] => DecodeVerdict::EveDetected { best_residual: best },
        [(b, c, d)] => DecodeVerdict::Decoded {
            bob: *b,
            charlie: *c,
            residual: *d,
        },
        _ => DecodeVerdict::Ambiguous {
            candidates: hits.iter().map(|&(b, c, _)| (b, c)).collect(),
        },
    }
}

/// Sampled-mode tolerance: payoff spread over `2√n`.
pub fn sampled_tolerance<T: Real>(coeffs: &CoefficientTable<T>, copies: usize) -> T {
    coeffs.spread() / (T::lit(2.0) * T::from_usize(copies).expect("count fits scalar").sqrt())
}

/// A payoff written as `constant + slope·(1-p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineForm<T> {
    pub constant: T,
    pub slope: T,
}

impl<T: Real> AffineForm<T> {
    pub fn eval(&self, p: T) -> T {
        self.constant + self.slope * (T::one() - p)
    }
}

/// Affine-in-`(1-p)` form of every cell, read off the pipeline at `p = 1`
/// (constant) and `p = 0` (constant + slope).
pub fn affine_forms<T: Real>(
    coeffs: &CoefficientTable<T>,
    alphabet: &OperatorAlphabet<T>,
) -> Result<Vec<(Cell, [AffineForm<T>; 3])>> {
    let clean = build_decoding_matrix(coeffs, alphabet, T::zero())?;
    let damped = build_decoding_matrix(coeffs, alphabet, T::one())?;
    Ok(clean
        .cells()
        .map(|(cell, at0)| {
            let at1 = damped.get(cell);
            let forms = [0, 1, 2].map(|i| AffineForm {
                constant: at1.0[i],
                slope: at0.0[i] - at1.0[i],
            });
            (cell, forms)
        })
        .collect())
}

/// Writes `x` as an integer or a fraction with denominator up to 12 when it
/// is one to within `1e-9`, otherwise as a decimal.
pub fn format_fraction(x: f64) -> String {
    for d in 1..=12u32 {
        let n = (x * d as f64).round();
        if (x * d as f64 - n).abs() < 1e-9 {
            let n = n as i64;
            return if d == 1 { n.to_string() } else { format!("{n}/{d}") };
        }
    }
    format!("{x}")
}

/// `c+s(1-p)` in the compact notation used for the damped decoding tables,
/// e.g. `2+(1-p)`, `3-(1-p)`, `5/2+5/2(1-p)`.
pub fn format_affine(form: &AffineForm<f64>) -> String {
    let slope = form.slope;
    if slope.abs() < 1e-9 {
        return format_fraction(form.constant);
    }
    let sign = if slope < 0.0 { "-" } else { "+" };
    let mag = slope.abs();
    let coeff = if (mag - 1.0).abs() < 1e-9 {
        String::new()
    } else {
        format_fraction(mag)
    };
    if form.constant.abs() < 1e-9 {
        let lead = if slope < 0.0 { "-" } else { "" };
        return format!("{lead}{coeff}(1-p)");
    }
    format!("{}{sign}{coeff}(1-p)", format_fraction(form.constant))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_matrix(p: f64) -> DecodingMatrix<f64> {
        build_decoding_matrix(&CoefficientTable::standard(), &OperatorAlphabet::standard(), p).unwrap()
    }

    fn close(t: PayoffTriple<f64>, want: [f64; 3]) -> bool {
        t.distance(&PayoffTriple(want)) < 1e-9
    }

    #[test]
    fn clean_matrix_cells() {
        let m = default_matrix(0.0);
        assert!(close(m.get(Cell::new(0, 0, 0)), [3.0, 3.0, 3.0]));
        assert!(close(m.get(Cell::new(1, 1, 0)), [4.0, 4.0, 0.0]));
        assert!(close(m.get(Cell::new(0, 1, 1)), [0.0, 4.0, 4.0]));
    }

    #[test]
    fn damped_matrix_cells() {
        let m = default_matrix(0.4);
        assert!(close(m.get(Cell::new(0, 0, 0)), [2.6, 2.6, 2.6]));
        let m = default_matrix(1.0);
        assert!(close(m.get(Cell::new(1, 0, 1)), [3.0, 2.5, 3.0]));
    }

    #[test]
    fn decode_examples() {
        let m = default_matrix(0.0);
        let v = decode(&PayoffTriple::splat(3.0), 0, &m, 0.25);
        assert!(matches!(v, DecodeVerdict::Decoded { bob: 0, charlie: 0, .. }));
        let v = decode(&PayoffTriple::new(4.0, 2.5, 2.5), 0, &m, 0.25);
        assert!(matches!(v, DecodeVerdict::EveDetected { .. }));
        let v = decode(&PayoffTriple::splat(1.0), 1, &m, 0.25);
        assert!(matches!(v, DecodeVerdict::Decoded { bob: 1, charlie: 1, .. }));
    }

    #[test]
    fn wide_tolerance_is_ambiguous() {
        let m = default_matrix(0.0);
        let v = decode(&PayoffTriple::new(2.5, 4.0, 2.5), 0, &m, 1.5);
        match v {
            DecodeVerdict::Ambiguous { candidates } => assert!(candidates.len() >= 2),
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn every_clean_cell_round_trips() {
        let m = default_matrix(0.0);
        for (cell, t) in m.cells() {
            match decode(&t, cell.alice, &m, EXACT_TOLERANCE) {
                DecodeVerdict::Decoded { bob, charlie, residual } => {
                    assert_eq!((bob, charlie), (cell.bob, cell.charlie));
                    assert!(residual < 1e-12);
                }
                other => panic!("{cell:?}: {other:?}"),
            }
        }
        assert!(m.min_row_separation() >= 1.0 - 1e-9);
    }

    #[test]
    fn alphabet_validation() {
        let mut a = OperatorAlphabet::<f64>::standard();
        a.bob_ops[1].label = "m1".into();
        assert!(a.validate().is_err());
        let mut a = OperatorAlphabet::<f64>::standard();
        a.charlie_ops.clear();
        assert!(a.validate().is_err());
        let mut a = OperatorAlphabet::<f64>::standard();
        a.bob_ops[0].params.alpha = 0.3;
        assert!(a.validate().is_err());
    }

    #[test]
    fn affine_rendering() {
        let f = |c, s| format_affine(&AffineForm { constant: c, slope: s });
        assert_eq!(f(2.0, 1.0), "2+(1-p)");
        assert_eq!(f(3.0, -1.0), "3-(1-p)");
        assert_eq!(f(2.5, 2.5), "5/2+5/2(1-p)");
        assert_eq!(f(2.5, -2.5), "5/2-5/2(1-p)");
        assert_eq!(f(3.0, 0.0), "3");
        assert_eq!(format_fraction(0.1), "1/10");
        assert_eq!(format_fraction(std::f64::consts::PI), std::f64::consts::PI.to_string());
    }

    #[test]
    fn out_of_range_p_rejected() {
        let r = build_decoding_matrix(&CoefficientTable::<f64>::standard(), &OperatorAlphabet::standard(), 1.2);
        assert!(matches!(r, Err(Error::Range { name: "p", .. })));
    }
}
