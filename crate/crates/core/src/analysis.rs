//! Monte Carlo experiments, closed forms, and the verification suite.
//!
//! Trials are independent: trial `t` of an experiment seeded with `s` draws
//! from ChaCha8 stream `t` of seed `s`, and per-trial tallies are plain
//! integer counts merged with a commutative sum. Reports are therefore
//! identical however the trials are scheduled.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryStrategy, User};
use crate::channel::{transmit, ChannelConfig, DephasingWindow};
use crate::protocol::{
    simulate_honesty_check_group, summation_bit, tp_key_bit, CheckMark, CheckPolicy,
    EveCheckCounts, GroupRecord, Protocol, ProtocolParams, RunOutcome, UserOp, Verdict,
};
use crate::qcore::{
    double_bell_distribution, encode, logical_product, BellLabel, DoubleBellOutcome,
    LogicalBasisLabel, LogicalBell, StateVector, DOUBLE_BELL_ORDER,
};
use crate::{Bits, Error, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Deterministic per-trial random source.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval {
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inputs {
    Random,
    Fixed { x: Bits, y: Bits },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ProtocolParams,
    pub adversary: AdversaryStrategy,
    pub channel: ChannelConfig,
    pub trials: u64,
    pub seed: u64,
    pub inputs: Inputs,
    pub policy: CheckPolicy,
}

impl ExperimentSpec {
    pub fn new(
        params: ProtocolParams,
        adversary: AdversaryStrategy,
        trials: u64,
        seed: u64,
    ) -> Self {
        Self {
            params,
            adversary,
            channel: ChannelConfig::noiseless(),
            trials,
            seed,
            inputs: Inputs::Random,
            policy: CheckPolicy::default(),
        }
    }

    pub fn with_channel(mut self, channel: ChannelConfig) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_inputs(mut self, inputs: Inputs) -> Self {
        self.inputs = inputs;
        self
    }

    fn inputs_for(&self, rng: &mut dyn RngCore) -> (Bits, Bits) {
        match &self.inputs {
            Inputs::Random => (
                Bits::random(self.params.n, rng),
                Bits::random(self.params.n, rng),
            ),
            Inputs::Fixed { x, y } => (x.clone(), y.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortBreakdown {
    pub success: u64,
    pub eve_detected_ctrl: u64,
    pub eve_detected_sift: u64,
    pub tp_dishonest: u64,
    pub insufficient_sift_groups: u64,
}

impl AbortBreakdown {
    fn record(&mut self, verdict: &Verdict) {
        use crate::protocol::AbortReason::*;
        match verdict.abort_reason() {
            None => self.success += 1,
            Some(EveDetectedCtrl) => self.eve_detected_ctrl += 1,
            Some(EveDetectedSift) => self.eve_detected_sift += 1,
            Some(TpDishonest) => self.tp_dishonest += 1,
            Some(InsufficientSiftGroups) => self.insufficient_sift_groups += 1,
        }
    }

    fn merge(&mut self, o: &AbortBreakdown) {
        self.success += o.success;
        self.eve_detected_ctrl += o.eve_detected_ctrl;
        self.eve_detected_sift += o.eve_detected_sift;
        self.tp_dishonest += o.tp_dishonest;
        self.insufficient_sift_groups += o.insufficient_sift_groups;
    }

    pub fn total(&self) -> u64 {
        self.success
            + self.eve_detected_ctrl
            + self.eve_detected_sift
            + self.tp_dishonest
            + self.insufficient_sift_groups
    }

    pub fn detections(&self) -> u64 {
        self.eve_detected_ctrl + self.eve_detected_sift + self.tp_dishonest
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Tally {
    aborts: AbortBreakdown,
    step34_aborts: u64,
    correctness_failures: u64,
    key_bits_matched: u64,
    key_bits_total: u64,
    eve_check: EveCheckCounts,
    eve_guesses_correct: u64,
    eve_guesses: u64,
    eve_zero_readings: u64,
    both_sift: u64,
}

impl Tally {
    fn from_run(out: &RunOutcome, x: &Bits, y: &Bits) -> Self {
        let mut t = Tally::default();
        t.aborts.record(&out.verdict);
        if let Verdict::Abort { step: 3 | 4, .. } = out.verdict {
            t.step34_aborts = 1;
        }
        if let Some(r) = out.verdict.result() {
            if *r != x ^ y {
                t.correctness_failures = 1;
            }
            if let (Some(keys), Some((ga, gb))) = (&out.keys, &out.tp_key_guess) {
                t.key_bits_matched = (ga.matches(&keys.k_a) + gb.matches(&keys.k_b)) as u64;
                t.key_bits_total = (keys.k_a.len() + keys.k_b.len()) as u64;
            }
        }
        t.eve_check = out.eve_check;
        for rec in &out.eve_log {
            let actual = out.transcript[rec.index].op(rec.user);
            t.eve_guesses += 1;
            t.eve_guesses_correct += (rec.guessed_op == actual) as u64;
            t.eve_zero_readings += (rec.reading == LogicalBasisLabel::Zdp0) as u64;
        }
        t.both_sift = out.both_sift_in_pool as u64;
        t
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.aborts.merge(&o.aborts);
        self.step34_aborts += o.step34_aborts;
        self.correctness_failures += o.correctness_failures;
        self.key_bits_matched += o.key_bits_matched;
        self.key_bits_total += o.key_bits_total;
        self.eve_check.add(&o.eve_check);
        self.eve_guesses_correct += o.eve_guesses_correct;
        self.eve_guesses += o.eve_guesses;
        self.eve_zero_readings += o.eve_zero_readings;
        self.both_sift += o.both_sift;
        self
    }
}

/// Eve-side statistics aggregated over all intercepted particles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EveSummary {
    pub intercepted: u64,
    /// Fraction of ancilla (or particle) readings equal to `|0_dp⟩`.
    pub zero_reading_rate: f64,
    /// Fraction of particles where Eve's CTRL/SIFT guess was right.
    pub inference_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub trials: u64,
    pub detections: u64,
    pub detection_rate: f64,
    pub ci95: Interval,
    pub analytic_prediction: Option<f64>,
    pub abort_breakdown: AbortBreakdown,
    /// Aborts raised by the step 3 or step 4 checks.
    pub check_aborts: u64,
    pub correctness_failures: u64,
    /// Dishonest TP's key-recovery accuracy over successful (undetected) runs.
    pub key_leakage: Option<f64>,
    pub eve_check: EveCheckCounts,
    pub eve: Option<EveSummary>,
    pub mean_both_sift: f64,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> ExperimentReport {
        ExperimentReport {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

fn run_trial(spec: &ExperimentSpec, protocol: &Protocol, trial: u64) -> Result<Tally> {
    let mut rng = trial_rng(spec.seed, trial);
    let (x, y) = spec.inputs_for(&mut rng);
    let mut adversary = spec.adversary.build();
    let out = protocol.run(&x, &y, adversary.as_mut(), &mut rng)?;
    Ok(Tally::from_run(&out, &x, &y))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let start = Instant::now();
    let protocol = Protocol::new(spec.params)?
        .with_channel(spec.channel)
        .with_policy(spec.policy);
    spec.channel.validate()?;
    if let Inputs::Fixed { x, y } = &spec.inputs {
        if x.len() != spec.params.n || y.len() != spec.params.n {
            return Err(crate::protocol::ProtocolError::InputLength {
                n: spec.params.n,
                x: x.len(),
                y: y.len(),
            }
            .into());
        }
    }
    let trials = spec.trials.max(1);
    let tally = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &protocol, t))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;

    let detections = tally.aborts.detections();
    let nd = spec.params.n * spec.params.d;
    let eve = (tally.eve_guesses > 0).then(|| EveSummary {
        intercepted: tally.eve_guesses,
        zero_reading_rate: tally.eve_zero_readings as f64 / tally.eve_guesses as f64,
        inference_accuracy: tally.eve_guesses_correct as f64 / tally.eve_guesses as f64,
    });
    Ok(ExperimentReport {
        trials,
        detections,
        detection_rate: detections as f64 / trials as f64,
        ci95: wilson_interval(detections, trials, Z_95),
        analytic_prediction: analytic_detection(&spec.adversary, nd as u64).ok(),
        abort_breakdown: tally.aborts,
        check_aborts: tally.step34_aborts,
        correctness_failures: tally.correctness_failures,
        key_leakage: (tally.key_bits_total > 0)
            .then(|| tally.key_bits_matched as f64 / tally.key_bits_total as f64),
        eve_check: tally.eve_check,
        eve,
        mean_both_sift: tally.both_sift as f64 / trials as f64,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Per-group detection probability of a dishonest TP, estimated on isolated
/// honesty-check groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDetectionEstimate {
    pub trials: u64,
    pub detected: u64,
    pub rate: f64,
    pub ci95: Interval,
}

pub fn single_group_detection(
    adversary: &AdversaryStrategy,
    channel: &ChannelConfig,
    trials: u64,
    seed: u64,
) -> Result<GroupDetectionEstimate> {
    let detected = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut adv = adversary.build();
            let g = simulate_honesty_check_group(channel, adv.as_mut(), &mut rng)?;
            Ok::<u64, Error>((g.check == Some(CheckMark::Fail)) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(GroupDetectionEstimate {
        trials,
        detected,
        rate: detected as f64 / trials as f64,
        ci95: wilson_interval(detected, trials, Z_95),
    })
}

/// Closed-form detection probability `1 − (7/8)^nd` of the two dishonest-TP
/// attacks.
pub fn analytic_detection(attack: &AdversaryStrategy, nd: u64) -> Result<f64> {
    match attack {
        AdversaryStrategy::TpAttack1 | AdversaryStrategy::TpAttack2 => {
            Ok(1.0 - (7.0f64 / 8.0).powf(nd as f64))
        }
        other => Err(Error::UnsupportedAttack(other.name().to_string())),
    }
}

/// `η = c / (p + v)` with `c = n`, `p = 6nq`, `v = 6n`, i.e. `1 / (6q + 6)`.
pub fn qubit_efficiency(params: &ProtocolParams) -> f64 {
    qubit_efficiency_for(params.r as f64, params.d as f64, params.delta)
}

/// [`qubit_efficiency`] from the check parameters alone; `n` cancels.
pub fn qubit_efficiency_for(r: f64, d: f64, delta: f64) -> f64 {
    1.0 / (6.0 * (4.0 + r + d + delta) + 6.0)
}

/// Efficiency of the earlier three-party protocol, `2 / (9(32+r+d+δ) + 6)`.
pub fn ref20_efficiency(r: f64, d: f64, delta: f64) -> f64 {
    2.0 / (9.0 * (32.0 + r + d + delta) + 6.0)
}

/// Counter-based check of the `p = 6nq`, `v = 6n` bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceAudit {
    pub runs: u64,
    /// `4nq` physical qubits TP prepares: the same on every run.
    pub tp_qubits: Option<u64>,
    pub expected_p: f64,
    pub mean_p: f64,
    pub standard_error: f64,
    /// Classical bits on successful runs, if constant across them.
    pub classical_bits: Option<u64>,
    pub expected_v: u64,
}

impl ResourceAudit {
    pub fn p_consistent(&self, sigmas: f64) -> bool {
        (self.mean_p - self.expected_p).abs() <= sigmas * self.standard_error.max(f64::EPSILON)
    }
}

pub fn audit_resources(params: &ProtocolParams, runs: u64, seed: u64) -> Result<ResourceAudit> {
    let protocol = Protocol::new(*params)?;
    let mut tp = Vec::with_capacity(runs as usize);
    let mut p = Vec::with_capacity(runs as usize);
    let mut v = Vec::new();
    for t in 0..runs {
        let mut rng = trial_rng(seed, t);
        let x = Bits::random(params.n, &mut rng);
        let y = Bits::random(params.n, &mut rng);
        let mut adv = AdversaryStrategy::Passive.build();
        let out = protocol.run(&x, &y, adv.as_mut(), &mut rng)?;
        tp.push(out.resources.tp_physical_qubits);
        p.push(out.resources.qubits() as f64);
        if out.verdict.result().is_some() {
            v.push(out.resources.classical_bits);
        }
    }
    let constant = |xs: &[u64]| match xs.first() {
        Some(&f) if xs.iter().all(|&x| x == f) => Some(f),
        _ => None,
    };
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(ResourceAudit {
        runs,
        tp_qubits: constant(&tp),
        expected_p: 6.0 * params.n as f64 * params.q(),
        mean_p: mean,
        standard_error: (var / n).sqrt(),
        classical_bits: constant(&v),
        expected_v: 6 * params.n as u64,
    })
}

/// Announcement class printed in the key table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnouncementClass {
    Phi,
    Psi,
}

/// One row of the key table as printed: `(x, y, Alice, Bob) → (k_a, k_b,
/// c_a, c_b, class, k_t, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub x: u8,
    pub y: u8,
    pub alice: LogicalBasisLabel,
    pub bob: LogicalBasisLabel,
    pub k_a: u8,
    pub k_b: u8,
    pub c_a: u8,
    pub c_b: u8,
    pub class: AnnouncementClass,
    pub k_t: u8,
    pub r: u8,
}

const fn printed([x, y, a, b]: [u8; 4], [k_a, k_b, c_a, c_b, k_t, r]: [u8; 6]) -> Table1Row {
    Table1Row {
        x,
        y,
        alice: if a == 0 {
            LogicalBasisLabel::Zdp0
        } else {
            LogicalBasisLabel::Zdp1
        },
        bob: if b == 0 {
            LogicalBasisLabel::Zdp0
        } else {
            LogicalBasisLabel::Zdp1
        },
        k_a,
        k_b,
        c_a,
        c_b,
        class: if k_t == 0 {
            AnnouncementClass::Phi
        } else {
            AnnouncementClass::Psi
        },
        k_t,
        r,
    }
}

/// The key table as published, row for row.
pub const PRINTED_TABLE1: [Table1Row; 16] = [
    printed([0, 0, 0, 0], [0, 0, 0, 0, 0, 0]),
    printed([0, 0, 0, 1], [0, 1, 0, 1, 1, 0]),
    printed([0, 0, 1, 0], [1, 0, 1, 0, 1, 0]),
    printed([0, 0, 1, 1], [1, 1, 1, 1, 0, 0]),
    printed([0, 1, 0, 0], [0, 0, 0, 1, 0, 1]),
    printed([0, 1, 0, 1], [0, 1, 0, 0, 1, 1]),
    printed([0, 1, 1, 0], [1, 0, 1, 1, 1, 1]),
    printed([0, 1, 1, 1], [1, 1, 1, 0, 0, 1]),
    printed([1, 0, 0, 0], [0, 0, 1, 0, 0, 1]),
    printed([1, 0, 0, 1], [0, 1, 1, 1, 1, 1]),
    printed([1, 0, 1, 0], [1, 0, 0, 0, 1, 1]),
    printed([1, 0, 1, 1], [1, 1, 0, 1, 0, 1]),
    printed([1, 1, 0, 0], [0, 0, 1, 1, 0, 0]),
    printed([1, 1, 0, 1], [0, 1, 1, 0, 1, 0]),
    printed([1, 1, 1, 0], [1, 0, 0, 1, 1, 0]),
    printed([1, 1, 1, 1], [1, 1, 0, 1, 0, 0]),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Mismatch {
    pub row: usize,
    pub column: &'static str,
    pub printed: u8,
    pub derived: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Report {
    pub rows: Vec<Table1Row>,
    /// Cells where the derived table disagrees with the printed one.
    pub mismatches: Vec<Table1Mismatch>,
    /// Rows whose `r` differs from `x ⊕ y`; non-empty is a hard failure.
    pub sum_failures: Vec<usize>,
    /// Rows whose admissible announcements are not a single φ/ψ class.
    pub class_failures: Vec<usize>,
}

impl Table1Report {
    pub fn passed(&self) -> bool {
        self.sum_failures.is_empty() && self.class_failures.is_empty()
    }
}

/// Announcements TP can produce on `|a⟩|b⟩`, from the exact double Bell
/// distribution.
pub fn admissible_announcements(
    alice: LogicalBasisLabel,
    bob: LogicalBasisLabel,
) -> Vec<DoubleBellOutcome> {
    let dist =
        double_bell_distribution(&logical_product(alice, bob)).expect("4-qubit product state");
    DoubleBellOutcome::all()
        .filter(|o| dist[o.index()] > 1e-12)
        .collect()
}

/// Rebuilds every row of the key table from the measurement algebra and the
/// summation rule, and diffs it against [`PRINTED_TABLE1`].
pub fn verify_table1() -> Table1Report {
    let mut report = Table1Report {
        rows: Vec::with_capacity(16),
        mismatches: Vec::new(),
        sum_failures: Vec::new(),
        class_failures: Vec::new(),
    };
    for (i, row) in PRINTED_TABLE1.iter().enumerate() {
        let announcements = admissible_announcements(row.alice, row.bob);
        let classes: Vec<Option<u8>> = announcements.iter().map(|a| tp_key_bit(*a)).collect();
        if announcements.len() != 4 || classes.iter().any(|c| *c != classes[0] || c.is_none()) {
            report.class_failures.push(i);
            continue;
        }
        let bit = summation_bit(row.x, row.y, row.alice, row.bob, announcements[0])
            .expect("Z_dp results with a pure-class announcement");
        let derived = Table1Row {
            k_a: bit.k_a,
            k_b: bit.k_b,
            c_a: bit.c_a,
            c_b: bit.c_b,
            k_t: bit.k_t,
            r: bit.r,
            class: if bit.k_t == 0 {
                AnnouncementClass::Phi
            } else {
                AnnouncementClass::Psi
            },
            ..*row
        };
        if derived.r != row.x ^ row.y {
            report.sum_failures.push(i);
        }
        for (column, p, d) in [
            ("k_a", row.k_a, derived.k_a),
            ("k_b", row.k_b, derived.k_b),
            ("c_a", row.c_a, derived.c_a),
            ("c_b", row.c_b, derived.c_b),
            ("k_t", row.k_t, derived.k_t),
            ("r", row.r, derived.r),
        ] {
            if p != d {
                report.mismatches.push(Table1Mismatch {
                    row: i,
                    column,
                    printed: p,
                    derived: d,
                });
            }
        }
        report.rows.push(derived);
    }
    report
}

/// Several algebraic forms of one state that must coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub forms: Vec<(String, Vec<Complex64>)>,
}

impl IdentityCheck {
    /// Largest componentwise deviation of any form from the first.
    pub fn max_deviation(&self) -> f64 {
        let Some((_, reference)) = self.forms.first() else {
            return 0.0;
        };
        self.forms
            .iter()
            .skip(1)
            .map(|(_, f)| {
                if f.len() != reference.len() {
                    return f64::INFINITY;
                }
                f.iter()
                    .zip(reference)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Name of the form that deviates most.
    pub fn worst_form(&self) -> Option<&str> {
        let reference = &self.forms.first()?.1;
        self.forms
            .iter()
            .skip(1)
            .map(|(n, f)| {
                let d = f
                    .iter()
                    .zip(reference)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                (n.as_str(), d)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n)
    }
}

/// Tolerance for the algebraic identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

fn combo(terms: &[(f64, &StateVector)]) -> Vec<Complex64> {
    let dim = terms[0].1.dim();
    let mut out = vec![Complex64::default(); dim];
    for (coeff, s) in terms {
        for (o, a) in out.iter_mut().zip(s.amplitudes()) {
            *o += a * coeff;
        }
    }
    out
}

fn basis4(bits: usize) -> StateVector {
    StateVector::basis_state(4, bits).expect("4-qubit basis state")
}

/// `|ab⟩₁₃|cd⟩₂₄` written back in 1234 order.
fn reordered(s13: &StateVector, s24: &StateVector) -> StateVector {
    s13.tensor(s24)
        .and_then(|s| s.permute(&DOUBLE_BELL_ORDER))
        .expect("4-qubit register")
}

fn bell_pair(a: BellLabel, b: BellLabel) -> StateVector {
    DoubleBellOutcome::new(a, b).state()
}

/// The logical Bell-state identities and the product-state expansions built
/// from them.
pub fn identity_checks() -> Vec<IdentityCheck> {
    use BellLabel::*;
    use LogicalBasisLabel::*;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let xx = |a, b| logical_product(a, b);
    let two = |bits| StateVector::basis_state(2, bits).expect("2-qubit basis state");

    let mut checks = Vec::new();
    let bell_forms = [
        (
            "eq1",
            LogicalBell::PhiPlus,
            [(1.0, (XdpPlus, XdpPlus)), (1.0, (XdpMinus, XdpMinus))],
            [(1.0, 0b0101), (1.0, 0b1010)],
            [(1.0, (0b00, 0b11)), (1.0, (0b11, 0b00))],
            [(1.0, (PhiPlus, PhiPlus)), (-1.0, (PhiMinus, PhiMinus))],
        ),
        (
            "eq2",
            LogicalBell::PhiMinus,
            [(1.0, (XdpPlus, XdpMinus)), (1.0, (XdpMinus, XdpPlus))],
            [(1.0, 0b0101), (-1.0, 0b1010)],
            [(1.0, (0b00, 0b11)), (-1.0, (0b11, 0b00))],
            [(1.0, (PhiMinus, PhiPlus)), (-1.0, (PhiPlus, PhiMinus))],
        ),
        (
            "eq3",
            LogicalBell::PsiPlus,
            [(1.0, (XdpPlus, XdpPlus)), (-1.0, (XdpMinus, XdpMinus))],
            [(1.0, 0b0110), (1.0, 0b1001)],
            [(1.0, (0b01, 0b10)), (1.0, (0b10, 0b01))],
            [(1.0, (PsiPlus, PsiPlus)), (-1.0, (PsiMinus, PsiMinus))],
        ),
        (
            "eq4",
            LogicalBell::PsiMinus,
            [(1.0, (XdpMinus, XdpPlus)), (-1.0, (XdpPlus, XdpMinus))],
            [(1.0, 0b0110), (-1.0, 0b1001)],
            [(1.0, (0b01, 0b10)), (-1.0, (0b10, 0b01))],
            [(1.0, (PsiMinus, PsiPlus)), (-1.0, (PsiPlus, PsiMinus))],
        ),
    ];
    for (name, logical, xprod, phys, phys1324, bells) in bell_forms {
        let x: Vec<_> = xprod
            .iter()
            .map(|(c, (a, b))| (c * h, xx(*a, *b)))
            .collect();
        let p: Vec<_> = phys
            .iter()
            .map(|(c, bits)| (c * h, basis4(*bits)))
            .collect();
        let q: Vec<_> = phys1324
            .iter()
            .map(|(c, (s13, s24))| (c * h, reordered(&two(*s13), &two(*s24))))
            .collect();
        let b: Vec<_> = bells
            .iter()
            .map(|(c, (a, bb))| (c * h, bell_pair(*a, *bb)))
            .collect();
        let refs =
            |v: &[(f64, StateVector)]| combo(&v.iter().map(|(c, s)| (*c, s)).collect::<Vec<_>>());
        checks.push(IdentityCheck {
            name: name.to_string(),
            forms: vec![
                ("z_dp product".into(), logical.state().amplitudes().to_vec()),
                ("x_dp product".into(), refs(&x)),
                ("physical 1234".into(), refs(&p)),
                ("physical 1324".into(), refs(&q)),
                ("bell product 1324".into(), refs(&b)),
            ],
        });
    }

    let bell = |l: LogicalBell| l.state();
    let expansions = [
        (
            "eq5",
            (XdpPlus, XdpPlus),
            LogicalBell::PhiPlus,
            1.0,
            LogicalBell::PsiPlus,
        ),
        (
            "eq6",
            (Zdp0, Zdp0),
            LogicalBell::PhiPlus,
            1.0,
            LogicalBell::PhiMinus,
        ),
        (
            "eq7",
            (Zdp0, Zdp1),
            LogicalBell::PsiPlus,
            1.0,
            LogicalBell::PsiMinus,
        ),
        (
            "eq8",
            (Zdp1, Zdp0),
            LogicalBell::PsiPlus,
            -1.0,
            LogicalBell::PsiMinus,
        ),
        (
            "eq9",
            (Zdp1, Zdp1),
            LogicalBell::PhiPlus,
            -1.0,
            LogicalBell::PhiMinus,
        ),
    ];
    for (name, (a, b), first, sign, second) in expansions {
        let f = bell(first);
        let s = bell(second);
        checks.push(IdentityCheck {
            name: name.to_string(),
            forms: vec![
                ("product".into(), xx(a, b).amplitudes().to_vec()),
                ("logical bell sum".into(), combo(&[(h, &f), (sign * h, &s)])),
            ],
        });
    }
    checks
}

/// Amplitude-level code-space invariance: every logical state the protocol
/// transmits equals itself up to global phase after any window.
pub fn dfs_amplitude_deviation(phases: &[f64]) -> f64 {
    use LogicalBasisLabel::*;
    let mut states: Vec<StateVector> = [Zdp0, Zdp1, XdpPlus, XdpMinus].map(encode).to_vec();
    for a in [Zdp0, Zdp1, XdpPlus, XdpMinus] {
        for b in [Zdp0, Zdp1, XdpPlus, XdpMinus] {
            states.push(logical_product(a, b));
        }
    }
    states.extend(LogicalBell::ALL.map(LogicalBell::state));
    let mut worst = 0.0f64;
    for s in &states {
        for &phi in phases {
            let out = transmit(s, DephasingWindow::wrapping(phi));
            worst = worst.max(s.deviation_up_to_phase(&out).unwrap_or(f64::INFINITY));
        }
    }
    worst
}

/// Everything observable about one group in an honest run.
pub type GroupKey = (
    UserOp,
    UserOp,
    Option<LogicalBasisLabel>,
    Option<LogicalBasisLabel>,
    Option<DoubleBellOutcome>,
);

fn group_key(g: &GroupRecord) -> GroupKey {
    (
        g.alice_op,
        g.bob_op,
        g.alice_result,
        g.bob_result,
        g.tp_announcement,
    )
}

/// Total variation distance between two empirical histograms.
pub fn total_variation<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| {
            let pa = a.get(*k).copied().unwrap_or(0) as f64 / na as f64;
            let pb = b.get(*k).copied().unwrap_or(0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum::<f64>()
        / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfsStatistics {
    pub samples: u64,
    pub tvd: f64,
    /// Runs that aborted at a check in either mode.
    pub check_aborts: u64,
}

/// Honest runs under both channel modes with matched seeds; compares the
/// histograms of group-level outcomes.
pub fn dfs_statistics(
    params: &ProtocolParams,
    min_samples: u64,
    seed: u64,
) -> Result<DfsStatistics> {
    let mut hist = [BTreeMap::new(), BTreeMap::new()];
    let mut samples = 0u64;
    let mut check_aborts = 0;
    let mut trial = 0u64;
    while samples < min_samples {
        for (slot, channel) in [ChannelConfig::noiseless(), ChannelConfig::dephasing()]
            .into_iter()
            .enumerate()
        {
            let mut rng = trial_rng(seed, trial);
            let x = Bits::random(params.n, &mut rng);
            let y = Bits::random(params.n, &mut rng);
            let mut adv = AdversaryStrategy::Passive.build();
            let out = Protocol::new(*params)?.with_channel(channel).run(
                &x,
                &y,
                adv.as_mut(),
                &mut rng,
            )?;
            if matches!(out.verdict, Verdict::Abort { step: 3 | 4, .. }) {
                check_aborts += 1;
            }
            for g in &out.transcript {
                *hist[slot].entry(group_key(g)).or_insert(0u64) += 1;
            }
            if slot == 0 {
                samples += out.transcript.len() as u64;
            }
        }
        trial += 1;
    }
    Ok(DfsStatistics {
        samples,
        tvd: total_variation(&hist[0], &hist[1]),
        check_aborts,
    })
}

/// Information TP holds about position `j` in a successful honest run: the
/// class of its own announcement on the `j`-th summation group.
pub fn tp_view_bit(out: &RunOutcome, j: usize) -> Option<u8> {
    out.summation_groups()
        .nth(j)
        .and_then(|g| g.tp_announcement)
        .and_then(tp_key_bit)
}

/// Plug-in mutual information (bits) of a 2×2 joint count table.
pub fn mutual_information(counts: [[u64; 2]; 2]) -> f64 {
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let row = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
    let col = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
    let mut mi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            if counts[i][j] == 0 {
                continue;
            }
            let pij = counts[i][j] as f64 / n;
            let pi = row[i] as f64 / n;
            let pj = col[j] as f64 / n;
            mi += pij * (pij / (pi * pj)).log2();
        }
    }
    mi
}

/// Users whose channel an Eve strategy may legitimately touch.
pub fn eve_touches_only(out: &RunOutcome, target: User) -> bool {
    out.eve_log.iter().all(|r| r.user == target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_detection_examples() {
        let a = AdversaryStrategy::TpAttack1;
        assert_eq!(analytic_detection(&a, 0).unwrap(), 0.0);
        // 1 - (7/8)^16 = 1 - 33232930569601/281474976710656
        let exact = 1.0 - 33_232_930_569_601.0 / 281_474_976_710_656.0;
        assert!((analytic_detection(&a, 16).unwrap() - exact).abs() < 1e-15);
        assert!((exact - 0.881_933).abs() < 1e-6);
        assert!(analytic_detection(&AdversaryStrategy::TpAttack2, 400).unwrap() > 0.999_999);
        assert!(matches!(
            analytic_detection(&AdversaryStrategy::Passive, 8),
            Err(Error::UnsupportedAttack(_))
        ));
        for nd in 0..64 {
            assert!(analytic_detection(&a, nd + 1).unwrap() > analytic_detection(&a, nd).unwrap());
        }
    }

    #[test]
    fn efficiency_examples() {
        let p = ProtocolParams::new(1, 1, 1, 1.0).unwrap();
        assert!((qubit_efficiency(&p) - 1.0 / 48.0).abs() / (1.0 / 48.0) < 1e-15);
        let p2 = ProtocolParams::new(1, 2, 2, 2.0).unwrap();
        assert!((qubit_efficiency(&p2) - 1.0 / 66.0).abs() / (1.0 / 66.0) < 1e-15);
        let p100 = ProtocolParams::new(100, 1, 1, 1.0).unwrap();
        assert_eq!(qubit_efficiency(&p), qubit_efficiency(&p100));
        assert!((ref20_efficiency(1.0, 1.0, 1.0) - 2.0 / 321.0).abs() < 1e-18);
        assert!((ref20_efficiency(2.0, 2.0, 2.0) - 2.0 / 348.0).abs() < 1e-18);
        assert!(qubit_efficiency(&p) > ref20_efficiency(1.0, 1.0, 1.0));
        let base = qubit_efficiency(&p);
        assert!(qubit_efficiency(&ProtocolParams::new(1, 2, 1, 1.0).unwrap()) < base);
        assert!(qubit_efficiency(&ProtocolParams::new(1, 1, 2, 1.0).unwrap()) < base);
        assert!(qubit_efficiency(&ProtocolParams::new(2, 1, 1, 1.5).unwrap()) < base);
    }

    #[test]
    fn wilson_interval_behaviour() {
        let i = wilson_interval(0, 100, Z_95);
        assert!(i.lower.abs() < 1e-12);
        assert!(i.upper > 0.0 && i.upper < 0.05);
        let i = wilson_interval(50, 100, Z_95);
        assert!(i.contains(0.5));
        assert!((i.half_width() - 0.0962).abs() < 1e-3);
    }

    #[test]
    fn mutual_information_bounds() {
        assert!(mutual_information([[50, 50], [50, 50]]).abs() < 1e-12);
        assert!((mutual_information([[50, 0], [0, 50]]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identities_hold() {
        for check in identity_checks() {
            assert!(check.max_deviation() < IDENTITY_TOLERANCE, "{}", check.name);
        }
    }

    #[test]
    fn corrupted_identity_is_caught() {
        let mut checks = identity_checks();
        checks[4].forms[1].1[5] += Complex64::new(1e-6, 0.0);
        assert!(checks[4].max_deviation() > IDENTITY_TOLERANCE);
        assert_eq!(checks[4].worst_form(), Some("logical bell sum"));
    }

    #[test]
    fn table1_flags_only_the_c_b_cell() {
        let report = verify_table1();
        assert!(report.passed());
        assert_eq!(report.rows.len(), 16);
        assert_eq!(
            report.mismatches,
            vec![Table1Mismatch {
                row: 15,
                column: "c_b",
                printed: 1,
                derived: 0
            }]
        );
        for row in &report.rows {
            assert_eq!(row.r, row.x ^ row.y);
        }
        assert_eq!(report.rows[10].c_a, 0);
        assert_eq!(report.rows[10].k_t, 1);
    }

    #[test]
    fn dfs_amplitudes() {
        assert!(dfs_amplitude_deviation(&[0.3, 1.0, 2.5, std::f64::consts::PI, 6.0]) < 1e-12);
    }

    #[test]
    fn experiment_is_deterministic() {
        let p = ProtocolParams::new(2, 1, 2, 2.0).unwrap();
        let spec = ExperimentSpec::new(p, AdversaryStrategy::TpAttack2, 200, 42)
            .with_channel(ChannelConfig::dephasing());
        let a = run_experiment(&spec).unwrap().without_timing();
        let b = run_experiment(&spec).unwrap().without_timing();
        assert_eq!(a, b);
        assert_eq!(a.abort_breakdown.total(), 200);
    }
}
