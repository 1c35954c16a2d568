//! Command-line front end: decoding matrices, session simulation, the
//! copy-count analysis and the Monte Carlo oracle.
//!
//! Exit codes: 0 success, 1 usage error, 2 input-file error, 3 internal
//! consistency failure. Detecting Eve is a result, not an error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::channels::{AttackKind, PhaseDampingParams};
use crate::decoding::{affine_forms, build_decoding_matrix, format_affine, format_fraction, AffineForm, Cell};
use crate::detection_stats::{
    detection_resolution_with, monte_carlo_signature, DetectionRecord, InterceptionModel, OracleSetup,
    DEFAULT_SEPARATION_SIGMAS,
};
use crate::error::Error;
use crate::protocol_ops::{
    closed_form_triple, expected_triple, pipeline, CoefficientTable, GhzBasis, LocalUnitaryParams, PartyRole,
};
use crate::session::{parse_bits, SessionConfig, SessionEngine, SessionOutcome};

/// Environment variable supplying the seed when no `--seed` is given.
pub const SEED_ENV: &str = "GHZ_QKD_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Significant digits kept in CSV and JSON output.
const SIG_DIGITS: usize = 12;
/// Magnitudes below this are floating-point residue and print as zero.
const ZERO_SNAP: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "ghz-qkd", version, about = "Three-party GHZ key distribution simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print Alice's decoding matrix at a given damping strength.
    DecodeMatrix(DecodeMatrixArgs),
    /// Run a key-distribution session from a JSON config.
    Simulate(SimulateArgs),
    /// Tabulate the interception signature and resolution against copy count.
    Detect(DetectArgs),
    /// Compare the analytic interception signature with a Monte Carlo estimate.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Pretty,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackName {
    None,
    PhaseDamping,
    InterceptResend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    #[value(alias = "alice")]
    A,
    #[value(alias = "bob")]
    B,
    #[value(alias = "charlie")]
    C,
}

impl From<Target> for PartyRole {
    fn from(t: Target) -> Self {
        match t {
            Target::A => PartyRole::Alice,
            Target::B => PartyRole::Bob,
            Target::C => PartyRole::Charlie,
        }
    }
}

#[derive(Debug, Args)]
pub struct DecodeMatrixArgs {
    /// Phase-damping strength on Bob's return line.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// JSON coefficient table; the built-in table when omitted.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    pub format: Format,
    /// Print each entry as constant + slope·(1-p).
    #[arg(long)]
    pub symbolic: bool,
    /// Restrict to one of Charlie's operators (by index).
    #[arg(long)]
    pub charlie_op: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Bob's bits, `0b…` binary or hex.
    #[arg(long)]
    pub bob_bits: String,
    /// Charlie's bits, `0b…` binary or hex.
    #[arg(long)]
    pub charlie_bits: String,
    /// Transcript destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// Separation threshold, in units of the resolution, for `copies_needed`.
    #[arg(long, default_value_t = DEFAULT_SEPARATION_SIGMAS)]
    pub sigmas: f64,
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Copies per transmitted symbol.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = AttackName::InterceptResend)]
    pub attack: AttackName,
    /// Damping strength for `phase-damping`.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Attacked line.
    #[arg(long, value_enum, default_value_t = Target::B)]
    pub target: Target,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    pub format: Format,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn input(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_INPUT, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Range { .. } | Error::Config(_) | Error::Bitstring(_) => EXIT_USAGE,
            Error::Io(_) | Error::Json(_) | Error::Coefficients(_) => EXIT_INPUT,
            _ => EXIT_INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_INPUT, e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if informational {
                let _ = write!(out, "{text}");
                return EXIT_OK;
            }
            let _ = write!(err, "{text}");
            return EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::DecodeMatrix(a) => cmd_decode_matrix(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Detect(a) => cmd_detect(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Seed from `GHZ_QKD_SEED`, if set.
pub fn env_seed() -> std::result::Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer")),
        Err(_) => Ok(None),
    }
}

/// Rounds to 12 significant digits and prints the shortest representation.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    if x.abs() < ZERO_SNAP {
        return 0.0;
    }
    let r: f64 = format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt_triple(t: &[f64; 3]) -> String {
    format!("({}, {}, {})", fmt_num(t[0]), fmt_num(t[1]), fmt_num(t[2]))
}

fn json_num(x: f64) -> Value {
    json!(round_sig(x))
}

fn json_triple(t: &[f64; 3]) -> Value {
    Value::Array(t.iter().map(|&x| json_num(x)).collect())
}

fn angle(x: f64) -> String {
    let pi = std::f64::consts::PI;
    if x.abs() < 1e-12 {
        "0".into()
    } else if (x - pi).abs() < 1e-12 {
        "π".into()
    } else if (x / pi - (x / pi).round()).abs() < 1e-12 {
        format!("{}π", (x / pi).round())
    } else {
        fmt_num(x)
    }
}

/// `U_A(θ,α,β)` with multiples of π written symbolically.
pub fn alice_label(p: &LocalUnitaryParams<f64>) -> String {
    format!("U_A({},{},{})", angle(p.theta), angle(p.alpha), angle(p.beta))
}

fn load_coeffs(path: &Option<PathBuf>) -> std::result::Result<CoefficientTable<f64>, Failure> {
    match path {
        None => Ok(CoefficientTable::standard()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            CoefficientTable::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
        }
    }
}

fn cmd_decode_matrix(args: &DecodeMatrixArgs, out: &mut dyn Write) -> CmdResult {
    let coeffs = load_coeffs(&args.coeffs)?;
    let config = SessionConfig::new(1, 0);
    let alphabet = config.alphabet;
    let matrix = build_decoding_matrix(&coeffs, &alphabet, args.p)?;
    let (_, nb, nc) = matrix.shape();
    if let Some(c) = args.charlie_op {
        if c >= nc {
            return Err(Failure::new(EXIT_USAGE, format!("--charlie-op {c} out of range (0..{nc})")));
        }
    }
    let symbolic = args.symbolic && args.p != 0.0;
    let forms = if symbolic { Some(affine_forms(&coeffs, &alphabet)?) } else { None };
    let form_of = |cell: Cell| -> [AffineForm<f64>; 3] {
        forms
            .as_ref()
            .and_then(|f| f.iter().find(|(c, _)| *c == cell))
            .map(|(_, f)| *f)
            .expect("every cell has a form")
    };
    let keep = |cell: &Cell| args.charlie_op.is_none_or(|c| cell.charlie == c);
    let cells: Vec<(Cell, [f64; 3])> = matrix.cells().filter(|(c, _)| keep(c)).map(|(c, t)| (c, t.0)).collect();
    let value_text = |cell: Cell, t: &[f64; 3], i: usize| -> String {
        if symbolic {
            format_affine(&form_of(cell)[i])
        } else if args.symbolic {
            format_fraction(t[i])
        } else {
            fmt_num(t[i])
        }
    };

    let mut text = String::new();
    match args.format {
        Format::Csv => {
            text.push_str("alice_op,bob_symbol,charlie_symbol,A,B,C\n");
            for (cell, t) in &cells {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    cell.alice,
                    alphabet.bob_ops[cell.bob].label,
                    alphabet.charlie_ops[cell.charlie].label,
                    value_text(*cell, t, 0),
                    value_text(*cell, t, 1),
                    value_text(*cell, t, 2),
                );
            }
        }
        Format::Json => {
            let rows: Vec<Value> = cells
                .iter()
                .map(|(cell, t)| {
                    let mut row = json!({
                        "alice_op": cell.alice,
                        "alice_params": alphabet.alice_ops[cell.alice],
                        "bob_symbol": alphabet.bob_ops[cell.bob].label,
                        "charlie_symbol": alphabet.charlie_ops[cell.charlie].label,
                        "triple": json_triple(t),
                    });
                    if symbolic {
                        row["affine"] = Value::Array(
                            form_of(*cell)
                                .iter()
                                .map(|f| {
                                    json!({
                                        "constant": json_num(f.constant),
                                        "slope": json_num(f.slope),
                                        "form": format_affine(f),
                                    })
                                })
                                .collect(),
                        );
                    }
                    row
                })
                .collect();
            let doc = json!({ "p": json_num(args.p), "cells": rows });
            text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
        }
        Format::Pretty => {
            // Alice rows, (Bob, Charlie) columns with Bob varying fastest.
            let columns: Vec<(usize, usize)> = (0..nc)
                .filter(|c| args.charlie_op.is_none_or(|k| k == *c))
                .flat_map(|c| (0..nb).map(move |b| (b, c)))
                .collect();
            let header: Vec<String> = columns
                .iter()
                .map(|&(b, c)| format!("{},{}", alphabet.bob_ops[b].label, alphabet.charlie_ops[c].label))
                .collect();
            let body: Vec<(String, Vec<String>)> = alphabet
                .alice_ops
                .iter()
                .enumerate()
                .map(|(a, params)| {
                    let entries = columns
                        .iter()
                        .map(|&(b, c)| {
                            let cell = Cell::new(a, b, c);
                            let t = matrix.get(cell).0;
                            format!("({})", (0..3).map(|i| value_text(cell, &t, i)).collect::<Vec<_>>().join(", "))
                        })
                        .collect();
                    (alice_label(params), entries)
                })
                .collect();
            let label_w = body.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
            let widths: Vec<usize> = (0..columns.len())
                .map(|j| {
                    body.iter()
                        .map(|(_, e)| e[j].chars().count())
                        .chain([header[j].chars().count()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let _ = writeln!(text, "decoding matrix at p = {}", fmt_num(args.p));
            let _ = write!(text, "{:label_w$}", "");
            for (h, w) in header.iter().zip(&widths) {
                let _ = write!(text, "  {h:<w$}");
            }
            text.push('\n');
            for (label, entries) in &body {
                let _ = write!(text, "{label:<label_w$}", label_w = label_w);
                for (e, w) in entries.iter().zip(&widths) {
                    let _ = write!(text, "  {e:<w$}");
                }
                text.push('\n');
            }
            text = text.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n";
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let path = &args.config;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let raw: Value =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut config =
        SessionConfig::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let seed = match args.seed {
        Some(s) => Some(s),
        None if raw.get("seed").is_none() => env_seed().map_err(|m| Failure::new(EXIT_USAGE, m))?,
        None => None,
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let bob = parse_bits(&args.bob_bits).map_err(|e| Failure::new(EXIT_USAGE, format!("--bob-bits: {e}")))?;
    let charlie =
        parse_bits(&args.charlie_bits).map_err(|e| Failure::new(EXIT_USAGE, format!("--charlie-bits: {e}")))?;

    let transcript = SessionEngine::new(config)?.run_session(&bob, &charlie)?;
    let mut json = transcript.to_json()?;
    json.push('\n');
    match &args.out {
        Some(p) => std::fs::write(p, &json).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        None => out.write_all(json.as_bytes())?,
    }
    let discarded = transcript.rounds.len() - transcript.completed_rounds();
    let summary = match transcript.outcome {
        SessionOutcome::Aborted { at_round } => format!(
            "Aborted at round {at_round}: {} rounds completed, key length {} bits",
            transcript.completed_rounds(),
            transcript.key_bits
        ),
        SessionOutcome::KeyEstablished if discarded > 0 => format!(
            "Key established: {} rounds completed, {discarded} discarded, key length {} bits, key 0x{}",
            transcript.completed_rounds(),
            transcript.key_bits,
            transcript.key
        ),
        SessionOutcome::KeyEstablished => format!(
            "Key established: {} rounds completed, key length {} bits, key 0x{}",
            transcript.completed_rounds(),
            transcript.key_bits,
            transcript.key
        ),
    };
    writeln!(out, "{summary}")?;
    Ok(())
}

fn cmd_detect(args: &DetectArgs, out: &mut dyn Write) -> CmdResult {
    if args.n_max == 0 {
        return Err(Failure::new(EXIT_USAGE, "--n-max must be at least 1"));
    }
    if args.sigmas.is_nan() || args.sigmas <= 0.0 {
        return Err(Failure::new(EXIT_USAGE, "--sigmas must be positive"));
    }
    let model = InterceptionModel::<f64>::standard();
    let estimates = (1..=args.n_max)
        .map(|n| detection_resolution_with(n, model.clean, model.intercepted, args.sigmas))
        .collect::<crate::Result<Vec<_>>>()?;
    let copies_needed = estimates[0].copies_needed;
    let mut text = String::new();
    match args.format {
        Format::Json => {
            let records: Vec<Value> = estimates
                .iter()
                .map(|e| {
                    let r = DetectionRecord::from(e);
                    json!({
                        "n": r.n,
                        "signature": json_triple(&r.signature),
                        "delta": json_triple(&r.delta),
                        "separation": json_num(e.separation),
                        "copies_needed": r.copies_needed,
                        "stderr": r.stderr,
                    })
                })
                .collect();
            text = serde_json::to_string_pretty(&Value::Array(records)).map_err(Error::from)? + "\n";
        }
        Format::Csv => {
            text.push_str("n,f_A,f_B,f_C,delta_A,delta_B,delta_C,separation\n");
            for e in &estimates {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{},{}",
                    e.n,
                    fmt_num(e.signature[0]),
                    fmt_num(e.signature[1]),
                    fmt_num(e.signature[2]),
                    fmt_num(e.delta[0]),
                    fmt_num(e.delta[1]),
                    fmt_num(e.delta[2]),
                    fmt_num(e.separation)
                );
            }
        }
        Format::Pretty => {
            let _ = writeln!(
                text,
                "clean {}  intercepted {}",
                fmt_triple(&model.clean),
                fmt_triple(&model.intercepted)
            );
            let _ = writeln!(text, "{:>4}  {:<16}  {:<36}  separation", "n", "f(n)", "delta");
            for e in &estimates {
                let delta = format!(
                    "({:.6}, {:.6}, {:.6})",
                    e.delta[0], e.delta[1], e.delta[2]
                );
                let _ = writeln!(
                    text,
                    "{:>4}  {:<16}  {:<36}  {:.4}",
                    e.n,
                    fmt_triple(&e.signature),
                    delta,
                    e.separation
                );
            }
            match copies_needed {
                Some(n) => {
                    let _ = writeln!(text, "copies_needed = {n} (separation >= {} delta)", fmt_num(args.sigmas));
                }
                None => {
                    let _ = writeln!(text, "copies_needed = none (threshold not reached)");
                }
            }
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> CmdResult {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed().map_err(|m| Failure::new(EXIT_USAGE, m))?.unwrap_or(0),
    };
    let target = PartyRole::from(args.target);
    let attack = match args.attack {
        AttackName::None => AttackKind::None,
        AttackName::PhaseDamping => AttackKind::PhaseDamping(PhaseDampingParams::single(args.p, target)),
        AttackName::InterceptResend => AttackKind::InterceptResend { target },
    };
    attack.validate()?;
    let setup = OracleSetup::default();
    let rho = pipeline(&setup.alice, &setup.bob, &setup.charlie, &attack)?;
    let ensemble = expected_triple(&rho, &setup.coeffs, &GhzBasis::new())?.0;
    let published: Option<[f64; 3]> = match (&attack, target) {
        (AttackKind::None, _) => Some(closed_form_triple(&setup.alice, 0.0, 0.0, 0.0, &setup.coeffs).0),
        (AttackKind::PhaseDamping(_), PartyRole::Bob) => {
            Some(closed_form_triple(&setup.alice, 0.0, 0.0, args.p, &setup.coeffs).0)
        }
        (AttackKind::InterceptResend { .. }, _) => {
            let model = InterceptionModel::<f64>::standard();
            Some(crate::detection_stats::expected_signature_exact(args.n, model.clean, model.intercepted)?)
        }
        _ => None,
    };
    let est = monte_carlo_signature(args.trials, args.n, &attack, &setup, seed)?;

    let attack_desc = match args.attack {
        AttackName::None => "none".to_string(),
        AttackName::PhaseDamping => format!("phase-damping p={} target={target}", fmt_num(args.p)),
        AttackName::InterceptResend => format!("intercept-resend target={target}"),
    };
    let mut text = String::new();
    match args.format {
        Format::Json => {
            let doc = json!({
                "attack": attack,
                "operators": {
                    "alice": alice_label(&setup.alice),
                    "bob": "m1",
                    "charlie": "m3",
                },
                "trials": est.trials,
                "n": est.n,
                "seed": seed,
                "analytic_published": published.as_ref().map(json_triple),
                "analytic_ensemble": json_triple(&ensemble),
                "simulated": {
                    "mean": json_triple(&est.mean),
                    "stderr": json_triple(&est.stderr),
                },
            });
            text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
        }
        Format::Pretty | Format::Csv => {
            let _ = writeln!(
                text,
                "oracle: attack {attack_desc}, operators {}/m1/m3, n={}, trials={}, seed={seed}",
                alice_label(&setup.alice),
                est.n,
                est.trials
            );
            let _ = writeln!(text, "analytic (paper) vs simulated");
            match published {
                Some(p) => {
                    let _ = writeln!(text, "  analytic (paper):    {}", fmt_triple(&p));
                }
                None => {
                    let _ = writeln!(text, "  analytic (paper):    n/a for this target");
                }
            }
            let _ = writeln!(text, "  analytic (ensemble): {}", fmt_triple(&ensemble));
            let sim: Vec<String> = (0..3).map(|i| format!("{:.4} ± {:.4}", est.mean[i], est.stderr[i])).collect();
            let _ = writeln!(text, "  simulated:           ({})", sim.join(", "));
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}
