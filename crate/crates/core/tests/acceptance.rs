//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ghz_qkd::channels::{kraus_operators, AttackKind, PhaseDampingParams};
use ghz_qkd::decoding::{
    affine_forms, build_decoding_matrix, format_affine, sampled_tolerance, Cell, OperatorAlphabet,
};
use ghz_qkd::detection_stats::{detection_resolution, expected_signature, InterceptionModel};
use ghz_qkd::protocol_ops::{
    build_unitary, closed_form_payoff, evolve, expected_payoff, ghz_initial_state, CoefficientTable, GhzBasis,
    LocalUnitaryParams, Outcome, PartyRole,
};
use ghz_qkd::quantum_core::ComplexMatrix;
use ghz_qkd::session::{run_session, DetectionPolicy, MeasurementMode, SessionConfig};
use ghz_qkd::{cli, Rational};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CheckResult = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> CheckResult,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn clean_matrix() -> [[(usize, usize, [f64; 3]); 4]; 2] {
    [
        [(0, 0, [3.0, 3.0, 3.0]), (1, 0, [2.0, 5.0, 2.0]), (0, 1, [2.0, 2.0, 5.0]), (1, 1, [0.0, 4.0, 4.0])],
        [(0, 0, [5.0, 2.0, 2.0]), (1, 0, [4.0, 4.0, 0.0]), (0, 1, [4.0, 0.0, 4.0]), (1, 1, [1.0, 1.0, 1.0])],
    ]
}

fn c1_clean_matrix() -> CheckResult {
    let m = build_decoding_matrix(&CoefficientTable::standard(), &OperatorAlphabet::standard(), 0.0)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (a, row) in clean_matrix().iter().enumerate() {
        for &(b, c, want) in row {
            let got = m.get(Cell::new(a, b, c)).0;
            for i in 0..3 {
                worst = worst.max((got[i] - want[i]).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("8 triples, max deviation {worst:.1e}"))
}

/// `(constant, slope, printed text)` of one coordinate.
type Form = (f64, f64, &'static str);

/// Printed forms per coordinate, indexed `[charlie][alice][bob]`.
fn damped_tables() -> [[[[Form; 3]; 2]; 2]; 2] {
    let up = (2.0, 1.0, "2+(1-p)");
    let down = (2.0, -1.0, "2-(1-p)");
    let t_m = (3.0, -1.0, "3-(1-p)");
    let t_p = (3.0, 1.0, "3+(1-p)");
    let h_p = (2.5, 2.5, "5/2+5/2(1-p)");
    let h_m = (2.5, -2.5, "5/2-5/2(1-p)");
    [
        // Charlie m3
        [[[up, up, up], [t_m, h_p, t_m]], [[h_p, t_m, t_m], [t_p, t_p, h_m]]],
        // Charlie m4
        [[[t_m, t_m, h_p], [h_m, t_p, t_p]], [[t_p, h_m, t_p], [down, down, down]]],
    ]
}

fn c2_damped_tables() -> CheckResult {
    let coeffs = CoefficientTable::standard();
    let alphabet = OperatorAlphabet::standard();
    let tables = damped_tables();
    let mut worst = 0.0f64;
    for p in [0.0, 0.3, 0.7, 1.0] {
        let m = build_decoding_matrix(&coeffs, &alphabet, p).map_err(|e| e.to_string())?;
        for (c, table) in tables.iter().enumerate() {
            for (a, row) in table.iter().enumerate() {
                for (b, forms) in row.iter().enumerate() {
                    let got = m.get(Cell::new(a, b, c)).0;
                    for i in 0..3 {
                        let (k, s, _) = forms[i];
                        worst = worst.max((got[i] - (k + s * (1.0 - p))).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    for (cell, forms) in affine_forms(&coeffs, &alphabet).map_err(|e| e.to_string())? {
        let printed = damped_tables()[cell.charlie][cell.alice][cell.bob];
        for i in 0..3 {
            let text = format_affine(&forms[i]);
            ensure(text == printed[i].2, || format!("{cell:?} coordinate {i}: {text} vs {}", printed[i].2))?;
        }
    }
    Ok(format!("16 cells x 4 values of p, max deviation {worst:.1e}, rendered forms match"))
}

fn c3_oracle_equivalence() -> CheckResult {
    let coeffs = CoefficientTable::standard();
    let basis = GhzBasis::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let alice = LocalUnitaryParams::new(rng.gen_range(0.0..=PI), rng.gen_range(0.0..=PI), rng.gen_range(0.0..=PI));
        let (tb, tc, p) = (rng.gen_range(0.0..=PI), rng.gen_range(0.0..=PI), rng.gen_range(0.0..=1.0));
        let attack = AttackKind::PhaseDamping(PhaseDampingParams::single(p, PartyRole::Bob));
        let rho = ghz_qkd::protocol_ops::pipeline(
            &alice,
            &LocalUnitaryParams::rotation(tb),
            &LocalUnitaryParams::rotation(tc),
            &attack,
        )
        .map_err(|e| e.to_string())?;
        for k in PartyRole::ALL {
            let numeric = expected_payoff(k, &rho, &coeffs, &basis).map_err(|e| e.to_string())?;
            let analytic = closed_form_payoff(k, &alice, tb, tc, p, &coeffs);
            worst = worst.max((numeric - analytic).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("300 comparisons, max deviation {worst:.1e}"))
}

fn c4_invariants() -> CheckResult {
    let id2 = ComplexMatrix::<f64>::identity(2);
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let sum = kraus_operators(p)
            .iter()
            .fold(ComplexMatrix::zeros(2, 2), |acc, a| &acc + &a.dagger().matmul(a));
        ensure(sum.max_abs_diff(&id2) <= 1e-12, || format!("Kraus completeness fails at p={p}"))?;
    }

    let basis = GhzBasis::<f64>::new();
    let mut completeness = ComplexMatrix::zeros(8, 8);
    for x in Outcome::all() {
        for y in Outcome::all() {
            let ip = basis.vector(x).inner(basis.vector(y));
            let want = if x == y { 1.0 } else { 0.0 };
            ensure((ip.re - want).abs() <= 1e-12 && ip.im.abs() <= 1e-12, || {
                format!("<psi_{x}|psi_{y}> = {ip}")
            })?;
        }
        completeness = &completeness + basis.projector(x);
    }
    ensure(completeness.max_abs_diff(&ComplexMatrix::identity(8)) <= 1e-12, || {
        "GHZ projectors do not sum to identity".into()
    })?;

    let alphabet = OperatorAlphabet::<f64>::standard();
    let mut unitaries = Vec::new();
    for a in &alphabet.alice_ops {
        unitaries.push(build_unitary(PartyRole::Alice, a).map_err(|e| e.to_string())?);
    }
    for b in &alphabet.bob_ops {
        unitaries.push(build_unitary(PartyRole::Bob, &b.params).map_err(|e| e.to_string())?);
    }
    for c in &alphabet.charlie_ops {
        unitaries.push(build_unitary(PartyRole::Charlie, &c.params).map_err(|e| e.to_string())?);
    }
    ensure(unitaries.iter().all(|u| u.is_unitary(1e-12)), || "non-unitary alphabet operator".into())?;

    let mut stages = 0;
    let attacks = [
        AttackKind::None,
        AttackKind::PhaseDamping(PhaseDampingParams::single(0.4, PartyRole::Bob)),
        AttackKind::PhaseDamping(PhaseDampingParams::single(1.0, PartyRole::Bob)),
        AttackKind::InterceptResend { target: PartyRole::Bob },
    ];
    for attack in &attacks {
        for a in &alphabet.alice_ops {
            for b in &alphabet.bob_ops {
                for c in &alphabet.charlie_ops {
                    let ua = build_unitary(PartyRole::Alice, a).map_err(|e| e.to_string())?;
                    let ub = build_unitary(PartyRole::Bob, &b.params).map_err(|e| e.to_string())?;
                    let uc = build_unitary(PartyRole::Charlie, &c.params).map_err(|e| e.to_string())?;
                    let rho0 = ghz_initial_state::<f64>().outer();
                    let rho1 = evolve(&rho0, &id2, &ub, &uc);
                    let rho2 = attack.apply_ensemble(&rho1).map_err(|e| e.to_string())?;
                    let rho3 = evolve(&rho2, &ua, &id2, &id2);
                    for rho in [&rho0, &rho1, &rho2, &rho3] {
                        rho.validate().map_err(|e| format!("{} stage invalid: {e}", attack.name()))?;
                        stages += 1;
                    }
                }
            }
        }
    }
    Ok(format!("Kraus, basis, {} unitaries, {stages} pipeline stages valid", unitaries.len()))
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn c5_analytics() -> CheckResult {
    let model = InterceptionModel::<Rational>::standard();
    let want = [rat(4, 1), rat(5, 2), rat(5, 2)];
    for n in 1..=50 {
        let got = expected_signature(n, &model).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("f({n}) = ({}, {}, {})", got[0], got[1], got[2]))?;
    }
    let fm = InterceptionModel::<f64>::standard();
    let mut needed = None;
    for n in 1..=50 {
        let est = detection_resolution(n, fm.clean, fm.intercepted).map_err(|e| e.to_string())?;
        let s = (n as f64).sqrt();
        let want = [1.0 / s, 0.5 / s, 0.5 / s];
        for (got, want) in est.delta.iter().zip(want) {
            ensure((got - want).abs() <= 1e-12, || format!("delta({n}) = {:?}", est.delta))?;
        }
        needed = est.copies_needed;
    }
    let needed = needed.ok_or("copies_needed undefined")?;
    ensure(needed == 9 || needed == 10, || format!("copies_needed = {needed}"))?;
    Ok(format!("f(n) = (4, 5/2, 5/2) exactly for n in 1..=50, copies_needed = {needed}"))
}

fn random_bits(seed: u64, len: usize) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bob = (0..len).map(|_| rng.gen_range(0..2u8)).collect();
    let charlie = (0..len).map(|_| rng.gen_range(0..2u8)).collect();
    (bob, charlie)
}

fn c6_key_distribution() -> CheckResult {
    let cfg = SessionConfig::new(1000, 6);
    let (bob, charlie) = random_bits(0x0c6, 1000);
    let t = run_session(&cfg, &bob, &charlie).map_err(|e| e.to_string())?;
    let want: Vec<u8> = bob.iter().zip(&charlie).flat_map(|(&b, &c)| [b, c]).collect();
    let got = t.key_bit_vec();
    let errors = got.iter().zip(&want).filter(|(a, b)| a != b).count();
    ensure(t.key_bits == 2000, || format!("key has {} bits", t.key_bits))?;
    ensure(errors == 0 && got == want, || format!("{errors} key errors"))?;
    Ok("2000 key bits, 0 errors".into())
}

fn failure_rate(attack: AttackKind<f64>, seed: u64) -> Result<f64, String> {
    let rounds = 10_000;
    let mut cfg = SessionConfig::new(rounds, seed);
    cfg.measurement_mode = MeasurementMode::Sampled;
    cfg.copies_per_round = 10;
    cfg.tolerance = sampled_tolerance(&cfg.coeffs, 10);
    cfg.policy = DetectionPolicy::DiscardRound;
    cfg.attack = attack;
    let (bob, charlie) = random_bits(seed ^ 0xb175, rounds);
    let t = run_session(&cfg, &bob, &charlie).map_err(|e| e.to_string())?;
    let failed = t.rounds.iter().filter(|r| !r.verdict.is_decoded()).count();
    Ok(failed as f64 / t.rounds.len() as f64)
}

fn c7_detection_power() -> CheckResult {
    let attack = AttackKind::InterceptResend { target: PartyRole::Bob };
    let d1 = failure_rate(attack.clone(), 71)?;
    let d2 = failure_rate(attack, 72)?;
    let fa = failure_rate(AttackKind::None, 71)?;
    let summary = format!("detection {:.2}% / {:.2}%, false alarm {:.2}%", 100.0 * d1, 100.0 * d2, 100.0 * fa);
    ensure((d1 - d2).abs() <= 0.02, || format!("seeds disagree: {summary}"))?;
    ensure(fa < 0.01, || format!("false alarm too high: {summary}"))?;
    ensure(d1.min(d2) > fa, || format!("detection not above false alarm: {summary}"))?;
    Ok(summary)
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("ghz-qkd").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)));
    }
    String::from_utf8(out).map_err(|e| e.to_string())
}

fn c8_discrepancy_report() -> CheckResult {
    let pretty = run_cli(&["oracle", "--attack", "intercept-resend", "--seed", "81"])?;
    ensure(pretty.contains("analytic (paper) vs simulated"), || "missing caption".into())?;
    ensure(pretty.contains("analytic (paper):    (4, 2.5, 2.5)"), || "missing published value".into())?;
    ensure(pretty.contains("simulated:") && pretty.contains('±'), || "missing simulated value".into())?;

    let estimate = |seed: &str| -> Result<([f64; 3], [f64; 3]), String> {
        let text = run_cli(&["oracle", "--attack", "intercept-resend", "--seed", seed, "--format", "json"])?;
        let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let get = |v: &serde_json::Value| -> [f64; 3] { [0, 1, 2].map(|i| v[i].as_f64().unwrap_or(f64::NAN)) };
        Ok((get(&doc["simulated"]["mean"]), get(&doc["simulated"]["stderr"])))
    };
    let (m1, s1) = estimate("81")?;
    let (m2, s2) = estimate("82")?;
    for i in 0..3 {
        let bound = 3.0 * (s1[i].powi(2) + s2[i].powi(2)).sqrt();
        ensure((m1[i] - m2[i]).abs() <= bound, || {
            format!("coordinate {i}: {} vs {} exceeds 3 stderr ({bound})", m1[i], m2[i])
        })?;
    }
    Ok(format!(
        "published (4, 2.5, 2.5), simulated ({:.4}, {:.4}, {:.4}) ± {:.4}, seeds agree",
        m1[0], m1[1], m1[2], s1[0]
    ))
}

fn c9_determinism() -> CheckResult {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"rounds": 64, "seed": 9, "measurement_mode": "sampled", "tolerance": 0.79,
            "policy": "discard-round", "attack": {"kind": "intercept-resend", "target": "B"}}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for name in ["first.json", "second.json"] {
        let out = dir.path().join(name);
        run_cli(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--bob-bits",
            "0x0123456789abcdef",
            "--charlie-bits",
            "0xfedcba9876543210",
            "--out",
            out.to_str().unwrap(),
        ])?;
        files.push(std::fs::read(out).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], || "transcripts differ".into())?;
    Ok(format!("two {}-byte transcripts identical", files[0].len()))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "clean decoding matrix", budget: Duration::from_secs(1), check: c1_clean_matrix },
        Criterion { id: 2, name: "damped decoding matrices", budget: Duration::from_secs(1), check: c2_damped_tables },
        Criterion { id: 3, name: "closed form vs pipeline", budget: Duration::from_secs(5), check: c3_oracle_equivalence },
        Criterion { id: 4, name: "algebraic invariants", budget: Duration::from_secs(1), check: c4_invariants },
        Criterion { id: 5, name: "interception analytics", budget: Duration::from_secs(1), check: c5_analytics },
        Criterion { id: 6, name: "key distribution correctness", budget: Duration::from_secs(5), check: c6_key_distribution },
        Criterion { id: 7, name: "detection power", budget: Duration::from_secs(60), check: c7_detection_power },
        Criterion { id: 8, name: "oracle discrepancy report", budget: Duration::from_secs(30), check: c8_discrepancy_report },
        Criterion { id: 9, name: "simulate determinism", budget: Duration::from_secs(1), check: c9_determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(detail) if elapsed <= c.budget => ("PASS", detail),
            Ok(detail) => ("FAIL", format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget)),
            Err(detail) => ("FAIL", detail),
        };
        if verdict.0 == "FAIL" {
            failures += 1;
        }
        println!("{} C{} {} [{:.3}s]: {}", verdict.0, c.id, c.name, elapsed.as_secs_f64(), verdict.1);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
