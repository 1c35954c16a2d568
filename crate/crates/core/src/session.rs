//! Multi-round key distribution.
//!
//! Every round Alice picks one of her operators at random, Bob and Charlie
//! encode one bit each, the configured attack acts on the return lines and
//! Alice measures the payoff triple, either exactly or from `n` sampled
//! GHZ-basis outcomes. The triple is decoded against the clean library; a
//! failed decode means the round is treated as eavesdropped.
//!
//! Rounds draw their randomness from independent ChaCha streams of the
//! master seed (stream = round index) so they can run on any number of
//! threads and still yield identical transcripts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{intercept_resend, AttackKind};
use crate::decoding::{build_decoding_matrix, decode, DecodeVerdict, DecodingMatrix, OperatorAlphabet, EXACT_TOLERANCE};
use crate::error::{Error, Result};
use crate::protocol_ops::{
    build_unitary, expected_triple, ghz_initial_state, pipeline, CoefficientTable, GhzBasis, Outcome, PartyRole,
    PayoffTriple,
};
use crate::quantum_core::{ComplexMatrix, DensityMatrix, StateVector};

pub const DEFAULT_COPIES: usize = 10;

/// Rounds executed per parallel batch before checking for an abort.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    #[default]
    ExactExpectation,
    Sampled,
}

/// Reaction to a round that fails to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionPolicy {
    /// Abort the whole session at the first failed round.
    #[default]
    Abort,
    /// Drop the round's bits and continue.
    DiscardRound,
}

fn default_copies() -> usize {
    DEFAULT_COPIES
}

fn default_tolerance() -> f64 {
    EXACT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub rounds: usize,
    #[serde(default = "default_copies")]
    pub copies_per_round: usize,
    #[serde(default)]
    pub measurement_mode: MeasurementMode,
    #[serde(default)]
    pub attack: AttackKind<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub alphabet: OperatorAlphabet<f64>,
    #[serde(default)]
    pub coeffs: CoefficientTable<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub policy: DetectionPolicy,
}

impl SessionConfig {
    pub fn new(rounds: usize, seed: u64) -> Self {
        Self {
            rounds,
            copies_per_round: DEFAULT_COPIES,
            measurement_mode: MeasurementMode::ExactExpectation,
            attack: AttackKind::None,
            tolerance: EXACT_TOLERANCE,
            alphabet: OperatorAlphabet::standard(),
            coeffs: CoefficientTable::standard(),
            seed,
            policy: DetectionPolicy::Abort,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.copies_per_round == 0 {
            return Err(Error::Config("copies_per_round must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        self.alphabet.validate()?;
        if self.alphabet.bob_ops.len() != 2 || self.alphabet.charlie_ops.len() != 2 {
            return Err(Error::Config("bit encoding needs exactly two Bob and two Charlie operators".into()));
        }
        self.attack.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub alice_op_index: usize,
    pub bob_bit: u8,
    pub charlie_bit: u8,
    pub bob_symbol_sent: String,
    pub charlie_symbol_sent: String,
    pub measured_triple: PayoffTriple<f64>,
    pub verdict: DecodeVerdict<f64>,
    /// Counts of the eight GHZ outcomes, present in sampled mode only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub histogram: Option<[u32; 8]>,
}

impl RoundRecord {
    /// Decoded `(bob_bit, charlie_bit)`, if the round decoded.
    pub fn decoded_bits(&self) -> Option<(u8, u8)> {
        match self.verdict {
            DecodeVerdict::Decoded { bob, charlie, .. } => Some((bob as u8, charlie as u8)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SessionOutcome {
    KeyEstablished,
    Aborted { at_round: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub config: SessionConfig,
    pub rounds: Vec<RoundRecord>,
    pub outcome: SessionOutcome,
    /// Key bits packed most significant first, zero padded to a nibble.
    pub key: String,
    pub key_bits: usize,
}

impl SessionTranscript {
    pub fn key_bit_vec(&self) -> Vec<u8> {
        unpack_hex(&self.key, self.key_bits).expect("transcript key is valid hex")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn completed_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.verdict.is_decoded()).count()
    }
}

/// Parses `0b…` binary, `0x…` hex or bare hex into bits, most significant first.
pub fn parse_bits(text: &str) -> Result<Vec<u8>> {
    let t = text.trim();
    let (digits, binary) = if let Some(rest) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        (rest, true)
    } else {
        (t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t), false)
    };
    let digits: String = digits.chars().filter(|c| *c != '_').collect();
    if digits.is_empty() {
        return Err(Error::Bitstring(format!("{text:?} has no digits")));
    }
    let mut bits = Vec::new();
    for ch in digits.chars() {
        if binary {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => return Err(Error::Bitstring(format!("{ch:?} is not a binary digit"))),
            }
        } else {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::Bitstring(format!("{ch:?} is not a hex digit")))?;
            bits.extend((0..4).rev().map(|s| ((v >> s) & 1) as u8));
        }
    }
    Ok(bits)
}

pub fn pack_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|nib| {
            let v = nib.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32) << (3 - i)));
            std::char::from_digit(v, 16).expect("nibble")
        })
        .collect()
}

pub fn unpack_hex(hex: &str, len: usize) -> Result<Vec<u8>> {
    let mut bits = parse_bits(&format!("0x{hex}")).or_else(|e| if hex.is_empty() { Ok(vec![]) } else { Err(e) })?;
    if bits.len() < len {
        return Err(Error::Bitstring(format!("hex key shorter than {len} bits")));
    }
    bits.truncate(len);
    Ok(bits)
}

/// Draws one GHZ-basis outcome with probability `Tr(π_rst ρ)`.
///
/// Probabilities must sum to one within `1e-10`; negatives down to `-1e-10`
/// are clamped to zero before renormalizing, anything lower is an internal
/// consistency failure.
pub fn sample_ghz_outcome<R: Rng + ?Sized>(rho: &DensityMatrix<f64>, basis: &GhzBasis<f64>, rng: &mut R) -> Result<Outcome> {
    let probs = basis.probabilities(rho);
    sample_from(&probs, rng)
}

fn sample_from<R: Rng + ?Sized>(probs: &[f64; 8], rng: &mut R) -> Result<Outcome> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Consistency(format!("outcome probabilities sum to {total}")));
    }
    let mut clamped = *probs;
    for p in clamped.iter_mut() {
        if *p < -1e-10 {
            return Err(Error::Consistency(format!("negative outcome probability {p}")));
        }
        *p = p.max(0.0);
    }
    let norm: f64 = clamped.iter().sum();
    let draw = rng.gen::<f64>() * norm;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in clamped.iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if draw < acc {
            return Ok(Outcome::new(i));
        }
    }
    Ok(Outcome::new(last))
}

fn round_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How a cell's copies are produced in sampled mode.
enum CopySource {
    /// All copies share one final density matrix; outcome probabilities are fixed.
    Fixed([f64; 8]),
    /// Eve measures each copy: encoded pure state, her target, Alice's operator.
    Intercepted {
        encoded: StateVector<f64>,
        target: PartyRole,
        alice: ComplexMatrix<f64>,
    },
}

struct CellModel {
    exact: PayoffTriple<f64>,
    source: CopySource,
}

/// Precomputed per-configuration state shared by all rounds.
pub struct SessionEngine {
    config: SessionConfig,
    library: DecodingMatrix<f64>,
    basis: GhzBasis<f64>,
    cells: Vec<CellModel>,
}

impl SessionEngine {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let basis = GhzBasis::new();
        let library = build_decoding_matrix(&config.coeffs, &config.alphabet, 0.0)?;
        let mut cells = Vec::new();
        let i2 = ComplexMatrix::identity(2);
        for a in &config.alphabet.alice_ops {
            for b in &config.alphabet.bob_ops {
                for c in &config.alphabet.charlie_ops {
                    let rho = pipeline(a, &b.params, &c.params, &config.attack)?;
                    let exact = expected_triple(&rho, &config.coeffs, &basis)?;
                    let source = match config.attack {
                        AttackKind::InterceptResend { target } => {
                            let ub = build_unitary(PartyRole::Bob, &b.params)?;
                            let uc = build_unitary(PartyRole::Charlie, &c.params)?;
                            CopySource::Intercepted {
                                encoded: ghz_initial_state().apply(&i2.tensor(&ub).tensor(&uc))?,
                                target,
                                alice: build_unitary(PartyRole::Alice, a)?.tensor(&i2).tensor(&i2),
                            }
                        }
                        _ => CopySource::Fixed(basis.probabilities(&rho)),
                    };
                    cells.push(CellModel { exact, source });
                }
            }
        }
        Ok(Self {
            config,
            library,
            basis,
            cells,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn library(&self) -> &DecodingMatrix<f64> {
        &self.library
    }

    fn cell(&self, alice: usize, bob: usize, charlie: usize) -> &CellModel {
        let (_, nb, nc) = self.config.alphabet.shape();
        &self.cells[(alice * nb + bob) * nc + charlie]
    }

    /// Exact payoff triple Alice would see for the given operator indices.
    pub fn exact_triple(&self, alice: usize, bob: usize, charlie: usize) -> PayoffTriple<f64> {
        self.cell(alice, bob, charlie).exact
    }

    /// Measures `copies` copies of the given cell and returns the outcome histogram.
    pub fn sample_copies<R: Rng + ?Sized>(
        &self,
        alice: usize,
        bob: usize,
        charlie: usize,
        copies: usize,
        rng: &mut R,
    ) -> Result<[u32; 8]> {
        let mut hist = [0u32; 8];
        match &self.cell(alice, bob, charlie).source {
            CopySource::Fixed(probs) => {
                for _ in 0..copies {
                    hist[sample_from(probs, rng)?.index()] += 1;
                }
            }
            CopySource::Intercepted { encoded, target, alice } => {
                for _ in 0..copies {
                    let (collapsed, _) = intercept_resend(encoded, *target, rng)?;
                    let rho = collapsed.apply(alice)?.outer();
                    hist[sample_ghz_outcome(&rho, &self.basis, rng)?.index()] += 1;
                }
            }
        }
        Ok(hist)
    }

    /// Histogram-weighted average of the per-outcome payoff triples.
    pub fn histogram_triple(&self, hist: &[u32; 8]) -> PayoffTriple<f64> {
        let total: u32 = hist.iter().sum();
        let mut acc = [0.0; 3];
        for o in Outcome::all() {
            let t = self.config.coeffs.triple(o);
            for (a, v) in acc.iter_mut().zip(t.0) {
                *a += f64::from(hist[o.index()]) * v;
            }
        }
        PayoffTriple(acc.map(|a| a / f64::from(total)))
    }

    /// Runs one round with the supplied random source.
    pub fn run_round<R: Rng + ?Sized>(&self, round_index: usize, bob_bit: u8, charlie_bit: u8, rng: &mut R) -> Result<RoundRecord> {
        let cfg = &self.config;
        let alice = rng.gen_range(0..cfg.alphabet.alice_ops.len());
        let (b, c) = (usize::from(bob_bit & 1), usize::from(charlie_bit & 1));
        let (measured, histogram) = match cfg.measurement_mode {
            MeasurementMode::ExactExpectation => (self.exact_triple(alice, b, c), None),
            MeasurementMode::Sampled => {
                let hist = self.sample_copies(alice, b, c, cfg.copies_per_round, rng)?;
                (self.histogram_triple(&hist), Some(hist))
            }
        };
        let verdict = decode(&measured, alice, &self.library, cfg.tolerance);
        Ok(RoundRecord {
            round_index,
            alice_op_index: alice,
            bob_bit: b as u8,
            charlie_bit: c as u8,
            bob_symbol_sent: cfg.alphabet.bob_ops[b].label.clone(),
            charlie_symbol_sent: cfg.alphabet.charlie_ops[c].label.clone(),
            measured_triple: measured,
            verdict,
            histogram,
        })
    }

    /// Runs round `round_index` on its own substream of the master seed.
    pub fn run_seeded_round(&self, round_index: usize, bob_bit: u8, charlie_bit: u8) -> Result<RoundRecord> {
        let mut rng = round_rng(self.config.seed, round_index as u64);
        self.run_round(round_index, bob_bit, charlie_bit, &mut rng)
    }

    pub fn run_session(&self, bob_bits: &[u8], charlie_bits: &[u8]) -> Result<SessionTranscript> {
        let rounds = self.config.rounds;
        if bob_bits.len() < rounds || charlie_bits.len() < rounds {
            return Err(Error::Bitstring(format!(
                "need {rounds} bits per party, got {} (Bob) and {} (Charlie)",
                bob_bits.len(),
                charlie_bits.len()
            )));
        }
        let mut records = Vec::with_capacity(rounds);
        let mut aborted_at = None;
        let mut start = 0;
        while start < rounds && aborted_at.is_none() {
            let end = (start + BATCH).min(rounds);
            let batch: Vec<RoundRecord> = (start..end)
                .into_par_iter()
                .map(|i| self.run_seeded_round(i, bob_bits[i], charlie_bits[i]))
                .collect::<Result<_>>()?;
            for rec in batch {
                let failed = !rec.verdict.is_decoded();
                records.push(rec);
                if failed && self.config.policy == DetectionPolicy::Abort {
                    aborted_at = Some(records.len() - 1);
                    break;
                }
            }
            start = end;
        }
        let key: Vec<u8> = records
            .iter()
            .filter_map(RoundRecord::decoded_bits)
            .flat_map(|(b, c)| [b, c])
            .collect();
        Ok(SessionTranscript {
            config: self.config.clone(),
            rounds: records,
            outcome: match aborted_at {
                Some(at_round) => SessionOutcome::Aborted { at_round },
                None => SessionOutcome::KeyEstablished,
            },
            key: pack_hex(&key),
            key_bits: key.len(),
        })
    }
}

/// One round for a given configuration.
pub fn run_round<R: Rng + ?Sized>(config: &SessionConfig, bob_bit: u8, charlie_bit: u8, rng: &mut R) -> Result<RoundRecord> {
    SessionEngine::new(config.clone())?.run_round(0, bob_bit, charlie_bit, rng)
}

pub fn run_session(config: &SessionConfig, bob_bits: &[u8], charlie_bits: &[u8]) -> Result<SessionTranscript> {
    SessionEngine::new(config.clone())?.run_session(bob_bits, charlie_bits)
}
