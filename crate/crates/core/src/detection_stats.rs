//! Interception statistics for the intercept-resend attack: the binomial
//! model of how many of `n` copies Eve catches, the resulting corrupted
//! decoding element and its expectation, the resolution `Δ ∝ 1/√n`, and a
//! Monte Carlo oracle that pushes copies through the session engine.
//!
//! The analytic part is generic over any field with exact integer
//! conversion, so the same code runs on [`crate::Rational`] for exact
//! results and on `f64`.

use num_traits::{FromPrimitive, Num, ToPrimitive};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::AttackKind;
use crate::error::{Error, Result};
use crate::protocol_ops::{CoefficientTable, LocalUnitaryParams};
use crate::session::{MeasurementMode, SessionConfig, SessionEngine};
use crate::Rational;

/// Copies needed are the smallest `n` with the attack signature at least
/// this many `Δ(n)` away from the clean element in every informative
/// coordinate. Three standard deviations reproduce the "nine to ten copies"
/// estimate for the default table.
pub const DEFAULT_SEPARATION_SIGMAS: f64 = 3.0;

/// Upper bound on the `n` searched by [`detection_resolution`].
const MAX_COPIES_SEARCH: usize = 1_000_000;

/// Scalar the analytic formulas are evaluated in.
pub trait Field: Clone + Num + FromPrimitive {}

impl<S: Clone + Num + FromPrimitive> Field for S {}

fn lit<S: Field>(v: u64) -> S {
    S::from_u64(v).expect("integer representable in field")
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptionModel<S> {
    /// Payoff triple of a copy Eve left alone.
    pub clean: [S; 3],
    /// Payoff triple credited to a copy Eve intercepted.
    pub intercepted: [S; 3],
}

impl<S: Field> InterceptionModel<S> {
    pub fn new(clean: [S; 3], intercepted: [S; 3]) -> Self {
        Self { clean, intercepted }
    }

    /// Clean `(3, 3, 3)`, intercepted `(5, 2, 2)`.
    pub fn standard() -> Self {
        Self::new([3, 3, 3].map(lit), [5, 2, 2].map(lit))
    }
}

/// `C(n, i) / 2ⁿ`.
pub fn binomial_prob<S: Field>(n: usize, i: usize) -> Result<S> {
    if i > n {
        return Err(Error::Range {
            name: "i",
            value: i as f64,
            min: 0.0,
            max: n as f64,
        });
    }
    let k = i.min(n - i);
    let mut coeff = S::one();
    for j in 0..k {
        coeff = coeff * lit::<S>((n - j) as u64) / lit::<S>((j + 1) as u64);
    }
    Ok(coeff / num_traits::pow(lit::<S>(2), n))
}

/// Payoff of `n` copies with `i` intercepted: `(clean·(n−i) + intercepted·i)/n`.
pub fn corrupted_element<S: Field>(n: usize, i: usize, model: &InterceptionModel<S>) -> Result<[S; 3]> {
    if n == 0 || i > n {
        return Err(Error::Range {
            name: "i",
            value: i as f64,
            min: 0.0,
            max: n as f64,
        });
    }
    let (nn, ii) = (lit::<S>(n as u64), lit::<S>(i as u64));
    let kept = lit::<S>((n - i) as u64);
    Ok([0, 1, 2].map(|c| {
        (model.clean[c].clone() * kept.clone() + model.intercepted[c].clone() * ii.clone()) / nn.clone()
    }))
}

/// `Σᵢ P(i)·corrupted_element(n, i)`.
pub fn expected_signature<S: Field>(n: usize, model: &InterceptionModel<S>) -> Result<[S; 3]> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let mut acc = [S::zero(), S::zero(), S::zero()];
    let mut p: S = binomial_prob(n, 0)?;
    for i in 0..=n {
        let e = corrupted_element(n, i, model)?;
        for c in 0..3 {
            acc[c] = acc[c].clone() + p.clone() * e[c].clone();
        }
        // P(i+1) = P(i)·(n−i)/(i+1)
        p = p * lit::<S>((n - i) as u64) / lit::<S>((i + 1) as u64);
    }
    Ok(acc)
}

/// Exact signature converted to `f64`.
pub fn expected_signature_exact(n: usize, clean: [f64; 3], intercepted: [f64; 3]) -> Result<[f64; 3]> {
    let to_rat = |v: f64| {
        Rational::from_float(v).ok_or_else(|| Error::Config(format!("payoff {v} is not finite")))
    };
    let model = InterceptionModel::new(
        [to_rat(clean[0])?, to_rat(clean[1])?, to_rat(clean[2])?],
        [to_rat(intercepted[0])?, to_rat(intercepted[1])?, to_rat(intercepted[2])?],
    );
    let sig = expected_signature(n, &model)?;
    Ok(sig.map(|r| r.to_f64().unwrap_or(f64::NAN)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEstimate {
    pub n: usize,
    pub signature: [f64; 3],
    /// Per-coordinate resolution `|clean − intercepted| / (2√n)`.
    pub delta: [f64; 3],
    /// Distance between signature and clean element in units of `Δ(n)`,
    /// minimised over informative coordinates.
    pub separation: f64,
    pub copies_needed: Option<usize>,
}

pub fn resolution(n: usize, clean: [f64; 3], intercepted: [f64; 3]) -> [f64; 3] {
    let root = (n as f64).sqrt();
    [0, 1, 2].map(|c| (clean[c] - intercepted[c]).abs() / (2.0 * root))
}

fn separation_in_deltas(n: usize, signature: [f64; 3], clean: [f64; 3], intercepted: [f64; 3]) -> f64 {
    let delta = resolution(n, clean, intercepted);
    (0..3)
        .filter(|&c| clean[c] != intercepted[c])
        .map(|c| (signature[c] - clean[c]).abs() / delta[c])
        .fold(f64::INFINITY, f64::min)
}

pub fn detection_resolution(n: usize, clean: [f64; 3], intercepted: [f64; 3]) -> Result<DetectionEstimate> {
    detection_resolution_with(n, clean, intercepted, DEFAULT_SEPARATION_SIGMAS)
}

pub fn detection_resolution_with(
    n: usize,
    clean: [f64; 3],
    intercepted: [f64; 3],
    sigmas: f64,
) -> Result<DetectionEstimate> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let signature = expected_signature_exact(n, clean, intercepted)?;
    let informative = (0..3).any(|c| clean[c] != intercepted[c]);
    let copies_needed = if informative {
        // the signature does not depend on the copy count
        (1..=MAX_COPIES_SEARCH).find(|&m| separation_in_deltas(m, signature, clean, intercepted) >= sigmas)
    } else {
        None
    };
    Ok(DetectionEstimate {
        n,
        signature,
        delta: resolution(n, clean, intercepted),
        separation: if informative {
            separation_in_deltas(n, signature, clean, intercepted)
        } else {
            0.0
        },
        copies_needed,
    })
}

/// JSON export record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub n: usize,
    pub signature: [f64; 3],
    pub delta: [f64; 3],
    pub copies_needed: Option<usize>,
    pub stderr: Option<[f64; 3]>,
}

impl From<&DetectionEstimate> for DetectionRecord {
    fn from(e: &DetectionEstimate) -> Self {
        Self {
            n: e.n,
            signature: e.signature,
            delta: e.delta,
            copies_needed: e.copies_needed,
            stderr: None,
        }
    }
}

/// Operators and payoffs of the symbol transmitted by the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSetup {
    pub alice: LocalUnitaryParams<f64>,
    pub bob: LocalUnitaryParams<f64>,
    pub charlie: LocalUnitaryParams<f64>,
    pub coeffs: CoefficientTable<f64>,
}

impl Default for OracleSetup {
    /// `U_A(0,0,0)` with symbols m1, m3.
    fn default() -> Self {
        Self {
            alice: LocalUnitaryParams::identity(),
            bob: LocalUnitaryParams::identity(),
            charlie: LocalUnitaryParams::identity(),
            coeffs: CoefficientTable::standard(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureEstimate {
    pub trials: usize,
    pub n: usize,
    pub mean: [f64; 3],
    pub stderr: [f64; 3],
}

/// Simulates `trials` symbol transmissions of `n` copies each under
/// `attack` and reports the mean empirical payoff triple with its standard
/// error. Trial `t` uses stream `t` of `seed`; the per-trial triples are
/// reduced in trial order, so the result does not depend on thread count.
pub fn monte_carlo_signature(
    trials: usize,
    n: usize,
    attack: &AttackKind<f64>,
    setup: &OracleSetup,
    seed: u64,
) -> Result<SignatureEstimate> {
    if trials == 0 || n == 0 {
        return Err(Error::Config("trials and n must be at least 1".into()));
    }
    let mut config = SessionConfig::new(1, seed);
    config.measurement_mode = MeasurementMode::Sampled;
    config.copies_per_round = n;
    config.attack = attack.clone();
    config.coeffs = setup.coeffs.clone();
    config.alphabet.alice_ops = vec![setup.alice];
    config.alphabet.bob_ops[0].params = setup.bob;
    config.alphabet.charlie_ops[0].params = setup.charlie;
    let engine = SessionEngine::new(config)?;

    let triples: Vec<[f64; 3]> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let hist = engine.sample_copies(0, 0, 0, n, &mut rng)?;
            Ok(engine.histogram_triple(&hist).0)
        })
        .collect::<Result<_>>()?;

    let count = trials as f64;
    let mut mean = [0.0; 3];
    for t in &triples {
        for c in 0..3 {
            mean[c] += t[c];
        }
    }
    mean = mean.map(|m| m / count);
    let mut var = [0.0; 3];
    if trials > 1 {
        for t in &triples {
            for c in 0..3 {
                var[c] += (t[c] - mean[c]).powi(2);
            }
        }
        var = var.map(|v| v / (count - 1.0));
    }
    Ok(SignatureEstimate {
        trials,
        n,
        mean,
        stderr: var.map(|v| (v / count).sqrt()),
    })
}
