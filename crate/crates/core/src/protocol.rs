//! The five-step summation protocol.
//!
//! 1. TP prepares two sequences of `n·q` particles in `|+_dp⟩` and sends them,
//!    one in flight at a time, to Alice (S1) and Bob (S2).
//! 2. Each user applies CTRL or SIFT to every particle and returns it.
//! 3. TP samples `n·r` particle groups and checks them for eavesdropping.
//! 4. TP double-Bell-measures every remaining group and announces all results;
//!    the users then sample `n·d` of them to audit TP.
//! 5. The first `n` both-SIFT groups of the rest produce `K_A`, `K_B`, `C_T`,
//!    and `R = C_A ⊕ C_B ⊕ C_T`.
//!
//! Group indices in transcripts are 0-based.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{Adversary, EveRecord, User};
use crate::channel::{sample_window, transmit_particle, ChannelConfig};
use crate::qcore::{
    double_bell_measure, encode, measure_logical, DoubleBellOutcome, LogicalBasis,
    LogicalBasisLabel, StateVector,
};
use crate::{Bits, Result};

const INTEGRALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("n must be at least 1")]
    ZeroLength,
    #[error("r must be at least 1")]
    ZeroCheckBudget,
    #[error("d must be at least 1")]
    ZeroHonestyBudget,
    #[error("delta must be a finite number greater than 0, got {0}")]
    InvalidDelta(f64),
    #[error("n·q = {n}·(4+r+d+{delta}) is not an integer particle count")]
    NonIntegerParticleCount { n: usize, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("inputs must both have length n = {n}, got |x| = {x} and |y| = {y}")]
    InputLength { n: usize, x: usize, y: usize },
    #[error("group {index} was used for summation but its announcement {announcement} is neither φ- nor ψ-type")]
    UndefinedKeyBit {
        index: usize,
        announcement: DoubleBellOutcome,
    },
    #[error("group {index} has no SIFT result where one is required")]
    MissingResult { index: usize },
    #[error("adversary returned a {0}-qubit register where a single particle is required")]
    BadParticle(usize),
}

/// `(n, r, d, δ)` with `q = 4 + r + d + δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub delta: f64,
}

impl ProtocolParams {
    pub fn new(n: usize, r: usize, d: usize, delta: f64) -> std::result::Result<Self, ParamError> {
        let p = Self { n, r, d, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> std::result::Result<(), ParamError> {
        if self.n == 0 {
            return Err(ParamError::ZeroLength);
        }
        if self.r == 0 {
            return Err(ParamError::ZeroCheckBudget);
        }
        if self.d == 0 {
            return Err(ParamError::ZeroHonestyBudget);
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(ParamError::InvalidDelta(self.delta));
        }
        let slack = self.n as f64 * self.delta;
        if (slack - slack.round()).abs() > INTEGRALITY_TOLERANCE {
            return Err(ParamError::NonIntegerParticleCount {
                n: self.n,
                delta: self.delta,
            });
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        4.0 + self.r as f64 + self.d as f64 + self.delta
    }

    /// `n·δ`, exact once the parameters validate.
    fn slack(&self) -> usize {
        (self.n as f64 * self.delta).round() as usize
    }

    /// `n·q`: particles per sequence, equal to the number of groups.
    pub fn groups(&self) -> usize {
        self.n * (4 + self.r + self.d) + self.slack()
    }

    /// `n·r`.
    pub fn eve_check_groups(&self) -> usize {
        self.n * self.r
    }

    /// `n(4+d+δ)`: groups TP measures in step 4.
    pub fn announced_groups(&self) -> usize {
        self.n * (4 + self.d) + self.slack()
    }

    /// `n·d`.
    pub fn honesty_check_groups(&self) -> usize {
        self.n * self.d
    }

    /// `n(4+δ)`: groups left for key generation.
    pub fn summation_pool(&self) -> usize {
        self.n * 4 + self.slack()
    }
}

impl fmt::Display for ProtocolParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} r={} d={} delta={}",
            self.n, self.r, self.d, self.delta
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UserOp {
    #[serde(rename = "CTRL")]
    Ctrl,
    #[serde(rename = "SIFT")]
    Sift,
}

impl UserOp {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen::<bool>() {
            UserOp::Sift
        } else {
            UserOp::Ctrl
        }
    }
}

impl fmt::Display for UserOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UserOp::Ctrl => "CTRL",
            UserOp::Sift => "SIFT",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    EveCheck,
    TpHonestyCheck,
    SummationKey,
    Surplus,
    /// Never reached because the run aborted before the group was assigned.
    Unused,
}

/// Outcome of whichever check the group was subjected to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMark {
    Pass,
    Fail,
    /// Mixed CTRL/SIFT honesty-check group: there is nothing to compare.
    NotChecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub index: usize,
    pub alice_op: UserOp,
    pub bob_op: UserOp,
    pub alice_result: Option<LogicalBasisLabel>,
    pub bob_result: Option<LogicalBasisLabel>,
    pub role: Role,
    pub tp_announcement: Option<DoubleBellOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckMark>,
}

impl GroupRecord {
    pub fn both(&self, op: UserOp) -> bool {
        self.alice_op == op && self.bob_op == op
    }

    pub fn op(&self, user: User) -> UserOp {
        match user {
            User::Alice => self.alice_op,
            User::Bob => self.bob_op,
        }
    }

    pub fn result(&self, user: User) -> Option<LogicalBasisLabel> {
        match user {
            User::Alice => self.alice_result,
            User::Bob => self.bob_result,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    EveDetectedCtrl,
    EveDetectedSift,
    TpDishonest,
    InsufficientSiftGroups,
}

impl AbortReason {
    /// Aborts that signal a detected attack rather than bad luck.
    pub fn is_detection(self) -> bool {
        !matches!(self, AbortReason::InsufficientSiftGroups)
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortReason::EveDetectedCtrl => "eve-detected-ctrl",
            AbortReason::EveDetectedSift => "eve-detected-sift",
            AbortReason::TpDishonest => "tp-dishonest",
            AbortReason::InsufficientSiftGroups => "insufficient-sift-groups",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    Success { result: Bits },
    Abort { reason: AbortReason, step: u8 },
}

impl Verdict {
    pub fn result(&self) -> Option<&Bits> {
        match self {
            Verdict::Success { result } => Some(result),
            Verdict::Abort { .. } => None,
        }
    }

    pub fn abort_reason(&self) -> Option<AbortReason> {
        match self {
            Verdict::Abort { reason, .. } => Some(*reason),
            Verdict::Success { .. } => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Success { result } => write!(f, "success R={result}"),
            Verdict::Abort { reason, step } => write!(f, "abort {reason} at step {step}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckVerdict {
    Continue,
    Abort(AbortReason),
}

/// Private strings of one successful run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub k_a: Bits,
    pub k_b: Bits,
    pub c_t: Bits,
    pub c_a: Bits,
    pub c_b: Bits,
}

/// Step 3 tallies for one user's particles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCounts {
    pub ctrl_checked: u64,
    pub ctrl_errors: u64,
    pub sift_checked: u64,
    pub sift_errors: u64,
}

impl CheckCounts {
    pub fn add(&mut self, other: &CheckCounts) {
        self.ctrl_checked += other.ctrl_checked;
        self.ctrl_errors += other.ctrl_errors;
        self.sift_checked += other.sift_checked;
        self.sift_errors += other.sift_errors;
    }

    pub fn ctrl_error_rate(&self) -> f64 {
        rate(self.ctrl_errors, self.ctrl_checked)
    }

    pub fn sift_error_rate(&self) -> f64 {
        rate(self.sift_errors, self.sift_checked)
    }
}

fn rate(errors: u64, checked: u64) -> f64 {
    if checked == 0 {
        0.0
    } else {
        errors as f64 / checked as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveCheckCounts {
    pub alice: CheckCounts,
    pub bob: CheckCounts,
}

impl EveCheckCounts {
    pub fn user(&self, user: User) -> &CheckCounts {
        match user {
            User::Alice => &self.alice,
            User::Bob => &self.bob,
        }
    }

    fn user_mut(&mut self, user: User) -> &mut CheckCounts {
        match user {
            User::Alice => &mut self.alice,
            User::Bob => &mut self.bob,
        }
    }

    pub fn total(&self) -> CheckCounts {
        let mut t = self.alice;
        t.add(&self.bob);
        t
    }

    pub fn add(&mut self, other: &EveCheckCounts) {
        self.alice.add(&other.alice);
        self.bob.add(&other.bob);
    }
}

/// Instrumented resource counters: physical qubits prepared and classical
/// bits sent for the summation itself (check traffic excluded).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCounts {
    pub tp_physical_qubits: u64,
    pub user_physical_qubits: u64,
    pub classical_bits: u64,
}

impl ResourceCounts {
    pub fn qubits(&self) -> u64 {
        self.tp_physical_qubits + self.user_physical_qubits
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub transcript: Vec<GroupRecord>,
    pub keys: Option<KeyMaterial>,
    /// Dishonest TP's guess of `(K_A, K_B)` on a successful run.
    pub tp_key_guess: Option<(Bits, Bits)>,
    pub eve_check: EveCheckCounts,
    pub resources: ResourceCounts,
    /// Both-SIFT groups among the `n(4+δ)` groups left after step 4.
    pub both_sift_in_pool: usize,
    pub eve_log: Vec<EveRecord>,
}

impl RunOutcome {
    pub fn summation_groups(&self) -> impl Iterator<Item = &GroupRecord> {
        self.transcript
            .iter()
            .filter(|g| g.role == Role::SummationKey)
    }
}

/// Step 3 tolerance. Under the dephasing model an honest run has an error
/// rate of exactly zero, so any error aborts by default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckPolicy {
    pub eve_error_threshold: f64,
}

impl Default for CheckPolicy {
    fn default() -> Self {
        Self {
            eve_error_threshold: 0.0,
        }
    }
}

/// Step 1: two sequences of `n·q` particles in `|+_dp⟩`.
pub fn step1_prepare(params: &ProtocolParams) -> Result<(Vec<StateVector>, Vec<StateVector>)> {
    params.validate()?;
    let plus = encode(LogicalBasisLabel::XdpPlus);
    let n = params.groups();
    Ok((vec![plus.clone(); n], vec![plus; n]))
}

/// Step 2 on the logical particle held in qubits (0, 1) of `incoming`. Any
/// further qubits belong to whoever else is entangled with the particle and
/// are carried along untouched.
pub fn step2_user_action<R: Rng + ?Sized>(
    incoming: &StateVector,
    op: UserOp,
    rng: &mut R,
) -> Result<(StateVector, Option<LogicalBasisLabel>)> {
    if incoming.num_qubits() < 2 {
        return Err(ProtocolError::BadParticle(incoming.num_qubits()).into());
    }
    match op {
        UserOp::Ctrl => Ok((incoming.clone(), None)),
        UserOp::Sift => {
            let (label, collapsed) = measure_logical(incoming, (0, 1), LogicalBasis::Z, rng)?;
            let fresh = encode(label);
            let outgoing = if collapsed.num_qubits() == 2 {
                fresh
            } else {
                let (_, rest) = collapsed.split(2)?;
                fresh.tensor(&rest)?
            };
            Ok((outgoing, Some(label)))
        }
    }
}

/// TP's check of one returned particle; `true` means an error was seen.
pub fn eve_check_particle<R: Rng + ?Sized>(
    stored: &StateVector,
    op: UserOp,
    announced: Option<LogicalBasisLabel>,
    rng: &mut R,
) -> Result<bool> {
    match op {
        UserOp::Ctrl => {
            let (label, _) = measure_logical(stored, (0, 1), LogicalBasis::X, rng)?;
            Ok(label != LogicalBasisLabel::XdpPlus)
        }
        UserOp::Sift => {
            let expected = announced.ok_or(ProtocolError::MissingResult { index: 0 })?;
            let (label, _) = measure_logical(stored, (0, 1), LogicalBasis::Z, rng)?;
            Ok(label != expected)
        }
    }
}

/// Step 3: TP samples `n·r` groups, marks them [`Role::EveCheck`] and checks
/// every particle in them. When `tp_honest` is false TP still measures but
/// never aborts.
pub fn step3_eve_check<R: Rng + ?Sized>(
    groups: &mut [GroupRecord],
    stored: &[(StateVector, StateVector)],
    params: &ProtocolParams,
    policy: &CheckPolicy,
    tp_honest: bool,
    rng: &mut R,
) -> Result<(CheckVerdict, EveCheckCounts)> {
    let mut chosen = sample(rng, groups.len(), params.eve_check_groups()).into_vec();
    chosen.sort_unstable();
    let mut counts = EveCheckCounts::default();
    for i in chosen {
        let group = &mut groups[i];
        group.role = Role::EveCheck;
        let mut clean = true;
        for (user, particle) in [(User::Alice, &stored[i].0), (User::Bob, &stored[i].1)] {
            let op = group.op(user);
            let err =
                eve_check_particle(particle, op, group.result(user), rng).map_err(|e| match e {
                    crate::Error::Protocol(ProtocolError::MissingResult { .. }) => {
                        ProtocolError::MissingResult { index: i }.into()
                    }
                    other => other,
                })?;
            let tally = counts.user_mut(user);
            match op {
                UserOp::Ctrl => {
                    tally.ctrl_checked += 1;
                    tally.ctrl_errors += err as u64;
                }
                UserOp::Sift => {
                    tally.sift_checked += 1;
                    tally.sift_errors += err as u64;
                }
            }
            clean &= !err;
        }
        group.check = Some(if clean {
            CheckMark::Pass
        } else {
            CheckMark::Fail
        });
    }
    if !tp_honest {
        return Ok((CheckVerdict::Continue, counts));
    }
    let total = counts.total();
    let verdict = if total.ctrl_error_rate() > policy.eve_error_threshold {
        CheckVerdict::Abort(AbortReason::EveDetectedCtrl)
    } else if total.sift_error_rate() > policy.eve_error_threshold {
        CheckVerdict::Abort(AbortReason::EveDetectedSift)
    } else {
        CheckVerdict::Continue
    };
    Ok((verdict, counts))
}

/// Genuine double Bell measurement of one stored group.
pub fn genuine_announcement<R: Rng + ?Sized>(
    alice: &StateVector,
    bob: &StateVector,
    rng: &mut R,
) -> Result<DoubleBellOutcome> {
    let group = alice.tensor(bob)?;
    Ok(double_bell_measure(&group, rng)?.0)
}

/// The users' audit of one announced group.
pub fn honesty_check_group(group: &GroupRecord) -> CheckMark {
    let Some(announcement) = group.tp_announcement else {
        return CheckMark::Fail;
    };
    let pass = match (group.alice_op, group.bob_op) {
        (UserOp::Ctrl, UserOp::Ctrl) => announcement.is_equal_pair(),
        (UserOp::Sift, UserOp::Sift) => match (group.alice_result, group.bob_result) {
            (Some(a), Some(b)) => {
                if a == b {
                    announcement.is_phi_type()
                } else {
                    announcement.is_psi_type()
                }
            }
            _ => false,
        },
        _ => return CheckMark::NotChecked,
    };
    if pass {
        CheckMark::Pass
    } else {
        CheckMark::Fail
    }
}

/// Step 4 audit. Every non-[`Role::EveCheck`] group must already carry TP's
/// announcement; the users then sample `n·d` of them.
pub fn step4_honesty_check<R: Rng + ?Sized>(
    groups: &mut [GroupRecord],
    params: &ProtocolParams,
    rng: &mut R,
) -> CheckVerdict {
    let pool: Vec<usize> = groups
        .iter()
        .filter(|g| g.role != Role::EveCheck)
        .map(|g| g.index)
        .collect();
    let mut chosen: Vec<usize> = sample(rng, pool.len(), params.honesty_check_groups())
        .into_iter()
        .map(|k| pool[k])
        .collect();
    chosen.sort_unstable();
    let mut verdict = CheckVerdict::Continue;
    for i in chosen {
        let group = &mut groups[i];
        group.role = Role::TpHonestyCheck;
        let mark = honesty_check_group(group);
        group.check = Some(mark);
        if mark == CheckMark::Fail {
            verdict = CheckVerdict::Abort(AbortReason::TpDishonest);
        }
    }
    verdict
}

/// Per-bit values of the summation rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SummationBit {
    pub k_a: u8,
    pub k_b: u8,
    pub c_a: u8,
    pub c_b: u8,
    pub k_t: u8,
    pub r: u8,
}

/// `k_t` from TP's announcement: 0 for φ-type, 1 for ψ-type.
pub fn tp_key_bit(announcement: DoubleBellOutcome) -> Option<u8> {
    if announcement.is_phi_type() {
        Some(0)
    } else if announcement.is_psi_type() {
        Some(1)
    } else {
        None
    }
}

pub fn summation_bit(
    x: u8,
    y: u8,
    alice: LogicalBasisLabel,
    bob: LogicalBasisLabel,
    announcement: DoubleBellOutcome,
) -> Option<SummationBit> {
    let k_a = alice.bit()?;
    let k_b = bob.bit()?;
    let k_t = tp_key_bit(announcement)?;
    let c_a = k_a ^ x;
    let c_b = k_b ^ y;
    Some(SummationBit {
        k_a,
        k_b,
        c_a,
        c_b,
        k_t,
        r: c_a ^ c_b ^ k_t,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummationOutcome {
    pub verdict: Verdict,
    pub keys: Option<KeyMaterial>,
    pub both_sift_in_pool: usize,
}

/// Step 5 over the groups that are neither check groups: the first `n`
/// both-SIFT ones become [`Role::SummationKey`], everything else is
/// [`Role::Surplus`].
pub fn step5_summation(
    groups: &mut [GroupRecord],
    x: &Bits,
    y: &Bits,
    params: &ProtocolParams,
) -> Result<SummationOutcome> {
    let n = params.n;
    if x.len() != n || y.len() != n {
        return Err(ProtocolError::InputLength {
            n,
            x: x.len(),
            y: y.len(),
        }
        .into());
    }
    let mut chosen = Vec::with_capacity(n);
    let mut both_sift = 0;
    for g in groups.iter_mut() {
        if matches!(g.role, Role::EveCheck | Role::TpHonestyCheck) {
            continue;
        }
        g.role = Role::Surplus;
        if g.both(UserOp::Sift) {
            both_sift += 1;
            if chosen.len() < n {
                g.role = Role::SummationKey;
                chosen.push(g.index);
            }
        }
    }
    if chosen.len() < n {
        return Ok(SummationOutcome {
            verdict: Verdict::Abort {
                reason: AbortReason::InsufficientSiftGroups,
                step: 5,
            },
            keys: None,
            both_sift_in_pool: both_sift,
        });
    }
    let mut keys = KeyMaterial {
        k_a: Bits::default(),
        k_b: Bits::default(),
        c_t: Bits::default(),
        c_a: Bits::default(),
        c_b: Bits::default(),
    };
    let mut result = Bits::default();
    for (j, &i) in chosen.iter().enumerate() {
        let g = &groups[i];
        let (Some(a), Some(b)) = (g.alice_result, g.bob_result) else {
            return Err(ProtocolError::MissingResult { index: i }.into());
        };
        let announcement = g
            .tp_announcement
            .ok_or(ProtocolError::MissingResult { index: i })?;
        let bit = summation_bit(
            x.get(j).unwrap_or(0),
            y.get(j).unwrap_or(0),
            a,
            b,
            announcement,
        )
        .ok_or(ProtocolError::UndefinedKeyBit {
            index: i,
            announcement,
        })?;
        keys.k_a.push(bit.k_a);
        keys.k_b.push(bit.k_b);
        keys.c_t.push(bit.k_t);
        keys.c_a.push(bit.c_a);
        keys.c_b.push(bit.c_b);
        result.push(bit.r);
    }
    Ok(SummationOutcome {
        verdict: Verdict::Success { result },
        keys: Some(keys),
        both_sift_in_pool: both_sift,
    })
}

/// One particle's round trip: TP → channel → (Eve) → user → (Eve) → channel → TP.
/// Returns what TP stores, the user's choice and the user's SIFT result.
pub fn exchange_particle(
    user: User,
    index: usize,
    channel: &ChannelConfig,
    adversary: &mut dyn Adversary,
    channel_rng: &mut dyn RngCore,
    rng: &mut dyn RngCore,
) -> Result<(StateVector, UserOp, Option<LogicalBasisLabel>)> {
    let particle = adversary
        .prepare(user, index, rng)
        .unwrap_or_else(|| encode(LogicalBasisLabel::XdpPlus));
    let arriving = transmit_particle(&particle, sample_window(channel, channel_rng))?;
    let flight = adversary.intercept_forward(user, index, arriving, rng)?;
    let op = UserOp::random(rng);
    let (flight, result) = step2_user_action(&flight, op, rng)?;
    let back = adversary.intercept_return(user, index, flight, rng)?;
    if back.num_qubits() != 2 {
        return Err(ProtocolError::BadParticle(back.num_qubits()).into());
    }
    let stored = transmit_particle(&back, sample_window(channel, channel_rng))?;
    Ok((stored, op, result))
}

fn tp_announcement(
    index: usize,
    alice: &StateVector,
    bob: &StateVector,
    adversary: &mut dyn Adversary,
    rng: &mut dyn RngCore,
) -> Result<DoubleBellOutcome> {
    let group = alice.tensor(bob)?;
    match adversary.announce(index, &group, rng) {
        Some(fake) => Ok(fake?),
        None => Ok(double_bell_measure(&group, rng)?.0),
    }
}

/// Exchange and announce a single group, then audit it as if it had been
/// drawn for the honesty check.
pub fn simulate_honesty_check_group(
    channel: &ChannelConfig,
    adversary: &mut dyn Adversary,
    rng: &mut dyn RngCore,
) -> Result<GroupRecord> {
    let mut channel_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let (sa, alice_op, alice_result) =
        exchange_particle(User::Alice, 0, channel, adversary, &mut channel_rng, rng)?;
    let (sb, bob_op, bob_result) =
        exchange_particle(User::Bob, 0, channel, adversary, &mut channel_rng, rng)?;
    let announcement = tp_announcement(0, &sa, &sb, adversary, rng)?;
    let mut g = GroupRecord {
        index: 0,
        alice_op,
        bob_op,
        alice_result,
        bob_result,
        role: Role::TpHonestyCheck,
        tp_announcement: Some(announcement),
        check: None,
    };
    g.check = Some(honesty_check_group(&g));
    Ok(g)
}

/// Configured protocol engine.
#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    params: ProtocolParams,
    channel: ChannelConfig,
    policy: CheckPolicy,
}

impl Protocol {
    pub fn new(params: ProtocolParams) -> std::result::Result<Self, ParamError> {
        params.validate()?;
        Ok(Self {
            params,
            channel: ChannelConfig::noiseless(),
            policy: CheckPolicy::default(),
        })
    }

    pub fn with_channel(mut self, channel: ChannelConfig) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_policy(mut self, policy: CheckPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    /// Runs steps 1–5 with `adversary`'s hooks installed.
    ///
    /// Channel phases come from a stream seeded off `rng` by a single draw, so
    /// every other random choice of the run is identical between channel modes
    /// for the same seed.
    pub fn run(
        &self,
        x: &Bits,
        y: &Bits,
        adversary: &mut dyn Adversary,
        rng: &mut dyn RngCore,
    ) -> Result<RunOutcome> {
        let params = &self.params;
        self.channel.validate()?;
        if x.len() != params.n || y.len() != params.n {
            return Err(ProtocolError::InputLength {
                n: params.n,
                x: x.len(),
                y: y.len(),
            }
            .into());
        }
        let mut channel_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let total = params.groups();
        let mut resources = ResourceCounts {
            tp_physical_qubits: 2 * 2 * total as u64,
            ..Default::default()
        };

        // Steps 1–2, strictly one particle in flight per sequence.
        let mut stored = Vec::with_capacity(total);
        let mut transcript = Vec::with_capacity(total);
        for i in 0..total {
            let (sa, alice_op, alice_result) = exchange_particle(
                User::Alice,
                i,
                &self.channel,
                adversary,
                &mut channel_rng,
                rng,
            )?;
            let (sb, bob_op, bob_result) = exchange_particle(
                User::Bob,
                i,
                &self.channel,
                adversary,
                &mut channel_rng,
                rng,
            )?;
            resources.user_physical_qubits +=
                2 * (alice_result.is_some() as u64 + bob_result.is_some() as u64);
            stored.push((sa, sb));
            transcript.push(GroupRecord {
                index: i,
                alice_op,
                bob_op,
                alice_result,
                bob_result,
                role: Role::Unused,
                tp_announcement: None,
                check: None,
            });
        }

        // Step 3.
        let (verdict, eve_check) = step3_eve_check(
            &mut transcript,
            &stored,
            params,
            &self.policy,
            adversary.runs_honest_eve_check(),
            rng,
        )?;
        if let CheckVerdict::Abort(reason) = verdict {
            return Ok(aborted(
                reason, 3, transcript, eve_check, resources, adversary,
            ));
        }

        // Step 4: announce everything first, then audit.
        for g in transcript.iter_mut().filter(|g| g.role != Role::EveCheck) {
            let (sa, sb) = &stored[g.index];
            g.tp_announcement = Some(tp_announcement(g.index, sa, sb, adversary, rng)?);
            g.role = Role::Surplus;
        }
        if let CheckVerdict::Abort(reason) = step4_honesty_check(&mut transcript, params, rng) {
            return Ok(aborted(
                reason, 4, transcript, eve_check, resources, adversary,
            ));
        }

        // Step 5.
        let summation = step5_summation(&mut transcript, x, y, params)?;
        let mut tp_key_guess = None;
        if summation.keys.is_some() {
            resources.classical_bits = 6 * params.n as u64;
            let mut ga = Bits::default();
            let mut gb = Bits::default();
            let mut complete = true;
            for g in transcript.iter().filter(|g| g.role == Role::SummationKey) {
                match adversary.key_guess(g.index) {
                    Some((a, b)) => {
                        ga.push(a.bit().unwrap_or(0));
                        gb.push(b.bit().unwrap_or(0));
                    }
                    None => complete = false,
                }
            }
            if complete {
                tp_key_guess = Some((ga, gb));
            }
        }
        Ok(RunOutcome {
            verdict: summation.verdict,
            transcript,
            keys: summation.keys,
            tp_key_guess,
            eve_check,
            resources,
            both_sift_in_pool: summation.both_sift_in_pool,
            eve_log: adversary.eve_log().to_vec(),
        })
    }
}

fn aborted(
    reason: AbortReason,
    step: u8,
    transcript: Vec<GroupRecord>,
    eve_check: EveCheckCounts,
    resources: ResourceCounts,
    adversary: &dyn Adversary,
) -> RunOutcome {
    RunOutcome {
        verdict: Verdict::Abort { reason, step },
        transcript,
        keys: None,
        tp_key_guess: None,
        eve_check,
        resources,
        both_sift_in_pool: 0,
        eve_log: adversary.eve_log().to_vec(),
    }
}

/// One full run with the default check policy.
pub fn run_protocol(
    params: &ProtocolParams,
    x: &Bits,
    y: &Bits,
    adversary: &mut dyn Adversary,
    channel: &ChannelConfig,
    rng: &mut dyn RngCore,
) -> Result<RunOutcome> {
    Protocol::new(*params)?
        .with_channel(*channel)
        .run(x, y, adversary, rng)
}
