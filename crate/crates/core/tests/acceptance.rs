//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqsum::adversary::{eve_double_cnot_forward, eve_double_cnot_return, AdversaryStrategy, User};
use sqsum::analysis::{
    audit_resources, dfs_amplitude_deviation, dfs_statistics, identity_checks, qubit_efficiency,
    ref20_efficiency, run_experiment, single_group_detection, trial_rng, verify_table1,
    ExperimentSpec, IDENTITY_TOLERANCE,
};
use sqsum::channel::ChannelConfig;
use sqsum::protocol::{step2_user_action, Protocol, ProtocolParams, UserOp};
use sqsum::qcore::{double_bell_measure, encode, logical_product, LogicalBasisLabel::*};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params(n: usize, r: usize, d: usize, delta: f64) -> ProtocolParams {
    ProtocolParams::new(n, r, d, delta).expect("valid parameters")
}

fn identities() -> Outcome {
    let checks = identity_checks();
    let worst = checks
        .iter()
        .map(|c| (c.name.as_str(), c.max_deviation()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    check(
        checks.len() == 9 && worst.1 < IDENTITY_TOLERANCE,
        format!(
            "{} identities, worst {} at {:.1e}",
            checks.len(),
            worst.0,
            worst.1
        ),
    )
}

fn table1() -> Outcome {
    let report = verify_table1();
    // Independent oracle: k_a, k_b are the results, c = k ⊕ input, k_t = k_a ⊕ k_b.
    let mut ok = report.rows.len() == 16 && report.passed();
    for row in &report.rows {
        let (a, b) = (row.alice.bit().unwrap(), row.bob.bit().unwrap());
        ok &= (row.k_a, row.k_b, row.c_a, row.c_b, row.k_t, row.r)
            == (a, b, a ^ row.x, b ^ row.y, a ^ b, row.x ^ row.y);
    }
    let flagged: Vec<String> = report
        .mismatches
        .iter()
        .map(|m| {
            format!(
                "row {} {} printed {} derived {}",
                m.row, m.column, m.printed, m.derived
            )
        })
        .collect();
    ok &= report.mismatches.len() == 1 && report.mismatches[0].column == "c_b";
    check(
        ok,
        format!("16 rows, r = x xor y, flagged: {}", flagged.join(", ")),
    )
}

fn end_to_end() -> Outcome {
    let p = params(8, 1, 1, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, ch) in [
        ("noiseless", ChannelConfig::noiseless()),
        ("dephasing", ChannelConfig::dephasing()),
    ] {
        let r = run_experiment(
            &ExperimentSpec::new(p, AdversaryStrategy::Passive, 1_000, 3).with_channel(ch),
        )
        .unwrap();
        ok &= r.check_aborts == 0 && r.correctness_failures == 0;
        parts.push(format!(
            "{name}: {} successes, {} check aborts, {} wrong",
            r.abort_breakdown.success, r.check_aborts, r.correctness_failures
        ));
    }
    check(ok, parts.join("; "))
}

fn dfs() -> Outcome {
    let phases: Vec<f64> = (0..256).map(|k| k as f64 * 0.0245).collect();
    let amp = dfs_amplitude_deviation(&phases);
    let stats = dfs_statistics(&params(8, 1, 1, 1.0), 10_000, 4).unwrap();
    check(
        amp < 1e-12 && stats.samples >= 10_000 && stats.tvd <= 0.02,
        format!(
            "amplitude deviation {amp:.1e}; TVD {:.4} over {} group samples",
            stats.tvd, stats.samples
        ),
    )
}

fn eq5_statistics() -> Outcome {
    let s = logical_product(XdpPlus, XdpPlus);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0u32; 16];
    let samples = 10_000;
    for _ in 0..samples {
        counts[double_bell_measure(&s, &mut rng).unwrap().0.index()] += 1;
    }
    let mut ok = true;
    let mut freqs = Vec::new();
    for o in sqsum::qcore::DoubleBellOutcome::all() {
        let f = counts[o.index()] as f64 / samples as f64;
        if o.is_equal_pair() {
            ok &= (f - 0.25).abs() <= 0.02;
            freqs.push(format!("{:?}{:?}={f:.4}", o.first, o.second));
        } else {
            ok &= counts[o.index()] == 0;
        }
    }
    check(
        ok,
        format!("only equal pairs observed: {}", freqs.join(" ")),
    )
}

fn double_cnot() -> Outcome {
    // Amplitude oracle: after either user action the ancilla is exactly |0_dp⟩.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut amp_ok = true;
    for op in [UserOp::Ctrl, UserOp::Sift] {
        for _ in 0..32 {
            let joint = eve_double_cnot_forward(&encode(XdpPlus), &encode(Zdp0)).unwrap();
            let (after, _) = step2_user_action(&joint, op, &mut rng).unwrap();
            let (_, ancilla) = eve_double_cnot_return(&after).unwrap();
            amp_ok &= ancilla.deviation_up_to_phase(&encode(Zdp0)).unwrap() < 1e-12;
        }
    }
    let protocol = Protocol::new(params(8, 1, 1, 1.0)).unwrap();
    let (mut records, mut zero, mut correct, mut min_fid) = (0u64, 0u64, 0u64, 1.0f64);
    let mut t = 0;
    while records < 10_000 {
        let mut rng = trial_rng(6, t);
        t += 1;
        let x = sqsum::Bits::random(8, &mut rng);
        let y = sqsum::Bits::random(8, &mut rng);
        let mut eve = AdversaryStrategy::EveDoubleCnot(User::Alice).build();
        let out = protocol.run(&x, &y, eve.as_mut(), &mut rng).unwrap();
        for rec in &out.eve_log {
            records += 1;
            zero += (rec.reading == Zdp0) as u64;
            correct += (rec.guessed_op == out.transcript[rec.index].alice_op) as u64;
            min_fid = min_fid.min(rec.ancilla_fidelity.unwrap());
        }
    }
    let zero_rate = zero as f64 / records as f64;
    let accuracy = correct as f64 / records as f64;
    check(
        amp_ok && zero == records && (1.0 - min_fid) < 1e-12 && (accuracy - 0.5).abs() <= 0.02,
        format!(
            "{records} particles, ancilla Zdp0 frequency {zero_rate:.3}, min fidelity {min_fid:.15}, \
             inference accuracy {accuracy:.4}"
        ),
    )
}

fn single_cnot() -> Outcome {
    let spec = ExperimentSpec::new(
        params(8, 16, 1, 1.0),
        AdversaryStrategy::EveSingleCnot(User::Alice),
        200,
        7,
    );
    let r = run_experiment(&spec).unwrap();
    let alice = r.eve_check.alice;
    let rate = alice.ctrl_errors as f64 / alice.ctrl_checked as f64;
    check(
        alice.ctrl_checked >= 10_000 && (rate - 0.5).abs() <= 0.02,
        format!(
            "{} targeted CTRL checks, X_dp error rate {rate:.4}",
            alice.ctrl_checked
        ),
    )
}

fn tp_attacks() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, s) in [
        ("I", AdversaryStrategy::TpAttack1),
        ("II", AdversaryStrategy::TpAttack2),
    ] {
        let g = single_group_detection(&s, &ChannelConfig::noiseless(), 100_000, 8).unwrap();
        ok &= (g.rate - 0.125).abs() <= 0.005;
        let mut runs = Vec::new();
        for nd in [8, 16, 32] {
            let r = run_experiment(&ExperimentSpec::new(
                params(1, 1, nd, 1.0),
                s,
                10_000,
                80 + nd as u64,
            ))
            .unwrap();
            let predicted = r.analytic_prediction.unwrap();
            ok &= (r.detection_rate - predicted).abs() <= 0.02;
            runs.push(format!("nd={nd} {:.4}/{predicted:.4}", r.detection_rate));
        }
        parts.push(format!(
            "attack {name}: group {:.4}, {}",
            g.rate,
            runs.join(" ")
        ));
    }
    check(ok, parts.join("; "))
}

fn efficiency() -> Outcome {
    let p = params(1, 1, 1, 1.0);
    let eta = qubit_efficiency(&p);
    let r20 = ref20_efficiency(1.0, 1.0, 1.0);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let n = 8;
    let audit = audit_resources(&params(n, 1, 1, 1.0), 2_000, 9).unwrap();
    let q = 7;
    let ok = rel(eta, 1.0 / 48.0) < 1e-15
        && rel(r20, 2.0 / 321.0) < 1e-15
        && audit.tp_qubits == Some(4 * n as u64 * q)
        && audit.classical_bits == Some(6 * n as u64)
        && audit.p_consistent(3.0);
    check(
        ok,
        format!(
            "eta {eta:.6} = 1/{:.0}, three-party {r20:.6} = 2/{:.0}; TP qubits {:?}, mean p {:.2} vs 6nq = {} \
             (se {:.2}), v {:?}",
            1.0 / eta,
            2.0 / r20,
            audit.tp_qubits,
            audit.mean_p,
            audit.expected_p,
            audit.standard_error,
            audit.classical_bits
        ),
    )
}

fn determinism() -> Outcome {
    let spec = ExperimentSpec::new(
        params(4, 1, 2, 1.0),
        AdversaryStrategy::TpAttack2,
        3_000,
        10,
    )
    .with_channel(ChannelConfig::dephasing());
    let a = serde_json::to_string(&run_experiment(&spec).unwrap().without_timing()).unwrap();
    let b = serde_json::to_string(&run_experiment(&spec).unwrap().without_timing()).unwrap();
    let cli = || {
        let mut out = Vec::new();
        let args = [
            "sqsum",
            "run",
            "--adversary",
            "eve-double-cnot",
            "--trials",
            "500",
            "--seed",
            "10",
            "--channel",
            "dephasing",
        ];
        sqsum::cli::run_cli(args, &mut out, &mut std::io::sink(), None);
        let mut v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_s");
        serde_json::to_vec(&v).unwrap()
    };
    let (c1, c2) = (cli(), cli());
    check(
        a == b && c1 == c2,
        format!(
            "experiment report {} bytes identical, CLI report {} bytes identical",
            a.len(),
            c1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("algebraic identities", identities),
        ("key table reproduction", table1),
        ("end-to-end correctness", end_to_end),
        ("channel invariance", dfs),
        ("|+>|+> double Bell statistics", eq5_statistics),
        ("double-CNOT attack futility", double_cnot),
        ("single-CNOT detection", single_cnot),
        ("dishonest TP detection", tp_attacks),
        ("qubit efficiency", efficiency),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let o = f();
        failed += !o.pass as u32;
        println!(
            "{} criterion {:>2} {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() as u32 - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
