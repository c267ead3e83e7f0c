//! Outside eavesdroppers and dishonest-TP behaviours.
//!
//! The protocol engine calls into an [`Adversary`] at fixed points of every
//! particle's round trip and at TP's announcement step. The passive
//! implementation leaves every hook at its default.
//!
//! Eve sits between the channel and the targeted user. A particle arriving at
//! the user may be part of a larger register (particle on qubits 0–1, Eve's
//! ancilla on 2–3); by the time it leaves Eve on the way back it must be a
//! single 2-qubit particle again, so ancillas live for exactly one particle.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::protocol::UserOp;
use crate::qcore::{
    encode, measure_logical, BellLabel, DoubleBellOutcome, LogicalBasis, LogicalBasisLabel,
    QuantumError, StateVector, NORM_TOLERANCE,
};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum User {
    Alice,
    Bob,
}

impl fmt::Display for User {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            User::Alice => "alice",
            User::Bob => "bob",
        })
    }
}

impl FromStr for User {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alice" | "Alice" => Ok(User::Alice),
            "bob" | "Bob" => Ok(User::Bob),
            other => Err(Error::UnknownAdversary(format!("target `{other}`"))),
        }
    }
}

/// Which attack a run is subjected to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name", content = "target")]
pub enum AdversaryStrategy {
    Passive,
    EveDoubleCnot(User),
    EveSingleCnot(User),
    EveMeasureResend(User),
    #[serde(rename = "tp-attack-1")]
    TpAttack1,
    #[serde(rename = "tp-attack-2")]
    TpAttack2,
}

impl AdversaryStrategy {
    pub const NAMES: [&'static str; 6] = [
        "passive",
        "eve-double-cnot",
        "eve-single-cnot",
        "eve-measure-resend",
        "tp-attack-1",
        "tp-attack-2",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryStrategy::Passive => "passive",
            AdversaryStrategy::EveDoubleCnot(_) => "eve-double-cnot",
            AdversaryStrategy::EveSingleCnot(_) => "eve-single-cnot",
            AdversaryStrategy::EveMeasureResend(_) => "eve-measure-resend",
            AdversaryStrategy::TpAttack1 => "tp-attack-1",
            AdversaryStrategy::TpAttack2 => "tp-attack-2",
        }
    }

    /// Eve variants take `target`; the others ignore it.
    pub fn from_name(name: &str, target: User) -> Result<Self, Error> {
        Ok(match name {
            "passive" => AdversaryStrategy::Passive,
            "eve-double-cnot" => AdversaryStrategy::EveDoubleCnot(target),
            "eve-single-cnot" => AdversaryStrategy::EveSingleCnot(target),
            "eve-measure-resend" => AdversaryStrategy::EveMeasureResend(target),
            "tp-attack-1" => AdversaryStrategy::TpAttack1,
            "tp-attack-2" => AdversaryStrategy::TpAttack2,
            other => return Err(Error::UnknownAdversary(other.to_string())),
        })
    }

    pub fn target(&self) -> Option<User> {
        match self {
            AdversaryStrategy::EveDoubleCnot(u)
            | AdversaryStrategy::EveSingleCnot(u)
            | AdversaryStrategy::EveMeasureResend(u) => Some(*u),
            _ => None,
        }
    }

    pub fn is_tp_attack(&self) -> bool {
        matches!(
            self,
            AdversaryStrategy::TpAttack1 | AdversaryStrategy::TpAttack2
        )
    }

    /// Fresh per-run instance.
    pub fn build(&self) -> Box<dyn Adversary> {
        match *self {
            AdversaryStrategy::Passive => Box::new(Passive),
            AdversaryStrategy::EveDoubleCnot(target) => Box::new(EveDoubleCnot::new(target)),
            AdversaryStrategy::EveSingleCnot(target) => Box::new(EveSingleCnot::new(target)),
            AdversaryStrategy::EveMeasureResend(target) => Box::new(EveMeasureResend::new(target)),
            AdversaryStrategy::TpAttack1 => Box::new(TpAttack1::default()),
            AdversaryStrategy::TpAttack2 => Box::new(TpAttack2::default()),
        }
    }
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target() {
            Some(t) => write!(f, "{}({t})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// What Eve learned from one intercepted particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EveRecord {
    pub user: User,
    pub index: usize,
    /// Z_dp reading of the ancilla (CNOT attacks) or of the particle itself
    /// (measure-resend).
    pub reading: LogicalBasisLabel,
    /// `|⟨0_dp|ancilla⟩|²` just before the ancilla was read, when an ancilla exists.
    pub ancilla_fidelity: Option<f64>,
    /// Eve's guess of the user's operation.
    pub guessed_op: UserOp,
}

/// Hooks the protocol engine invokes. Every method has a do-nothing default.
pub trait Adversary: Send {
    fn strategy(&self) -> AdversaryStrategy;

    /// Step 1 override: the particle TP sends instead of `|+_dp⟩`.
    fn prepare(
        &mut self,
        _user: User,
        _index: usize,
        _rng: &mut dyn RngCore,
    ) -> Option<StateVector> {
        None
    }

    /// Particle on its way to the user, after the channel.
    fn intercept_forward(
        &mut self,
        _user: User,
        _index: usize,
        particle: StateVector,
        _rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        Ok(particle)
    }

    /// Register coming back from the user; must return a single 2-qubit particle.
    fn intercept_return(
        &mut self,
        _user: User,
        _index: usize,
        flight: StateVector,
        _rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        Ok(flight)
    }

    /// Whether TP acts on its own step 3 verdict.
    fn runs_honest_eve_check(&self) -> bool {
        true
    }

    /// Step 4 override: `Some` replaces the genuine double Bell measurement
    /// of the 4-qubit group.
    fn announce(
        &mut self,
        _index: usize,
        _group: &StateVector,
        _rng: &mut dyn RngCore,
    ) -> Option<Result<DoubleBellOutcome, QuantumError>> {
        None
    }

    /// A dishonest TP's belief about `(Alice's, Bob's)` result on a group.
    fn key_guess(&self, _index: usize) -> Option<(LogicalBasisLabel, LogicalBasisLabel)> {
        None
    }

    fn eve_log(&self) -> &[EveRecord] {
        &[]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Passive;

impl Adversary for Passive {
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::Passive
    }
}

/// First CNOT: particle controls a fresh `|0_dp⟩` ancilla. The particle stays
/// on qubits 0–1, the ancilla occupies 2–3.
pub fn eve_double_cnot_forward(
    particle: &StateVector,
    ancilla: &StateVector,
) -> Result<StateVector, QuantumError> {
    particle.tensor(ancilla)?.apply_logical_cnot((0, 1), (2, 3))
}

/// Second CNOT, then separates particle and ancilla.
pub fn eve_double_cnot_return(
    joint: &StateVector,
) -> Result<(StateVector, StateVector), QuantumError> {
    let undone = joint.apply_logical_cnot((0, 1), (2, 3))?;
    undone.split(2)
}

/// Single-CNOT variant: no second CNOT; Eve reads her ancilla in Z_dp, which
/// collapses the particle, and forwards what is left.
pub fn eve_single_cnot_return<R: Rng + ?Sized>(
    joint: &StateVector,
    rng: &mut R,
) -> Result<(StateVector, LogicalBasisLabel), QuantumError> {
    let (reading, collapsed) = measure_logical(joint, (2, 3), LogicalBasis::Z, rng)?;
    let (particle, _) = collapsed.split(2)?;
    Ok((particle, reading))
}

/// Intercept-resend in Z_dp.
pub fn eve_measure_resend<R: Rng + ?Sized>(
    particle: &StateVector,
    rng: &mut R,
) -> Result<(StateVector, LogicalBasisLabel), QuantumError> {
    let (reading, _) = measure_logical(particle, (0, 1), LogicalBasis::Z, rng)?;
    Ok((encode(reading), reading))
}

fn zero_fidelity(ancilla: &StateVector) -> Result<f64, QuantumError> {
    Ok(encode(LogicalBasisLabel::Zdp0)
        .inner_product(ancilla)?
        .norm_sqr())
}

fn guess_from_ancilla(reading: LogicalBasisLabel) -> UserOp {
    // A flipped ancilla could only come from a SIFT collapse.
    if reading == LogicalBasisLabel::Zdp1 {
        UserOp::Sift
    } else {
        UserOp::Ctrl
    }
}

#[derive(Clone, Debug)]
pub struct EveDoubleCnot {
    target: User,
    log: Vec<EveRecord>,
}

impl EveDoubleCnot {
    pub fn new(target: User) -> Self {
        Self {
            target,
            log: Vec::new(),
        }
    }
}

impl Adversary for EveDoubleCnot {
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::EveDoubleCnot(self.target)
    }

    fn intercept_forward(
        &mut self,
        user: User,
        _index: usize,
        particle: StateVector,
        _rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        if user != self.target {
            return Ok(particle);
        }
        eve_double_cnot_forward(&particle, &encode(LogicalBasisLabel::Zdp0))
    }

    fn intercept_return(
        &mut self,
        user: User,
        index: usize,
        flight: StateVector,
        rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        if user != self.target {
            return Ok(flight);
        }
        let (particle, ancilla) = eve_double_cnot_return(&flight)?;
        let fidelity = zero_fidelity(&ancilla)?;
        if (fidelity - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::FactorizationFailed {
                residual: 1.0 - fidelity,
            });
        }
        let (reading, _) = measure_logical(&ancilla, (0, 1), LogicalBasis::Z, rng)?;
        self.log.push(EveRecord {
            user,
            index,
            reading,
            ancilla_fidelity: Some(fidelity),
            guessed_op: guess_from_ancilla(reading),
        });
        Ok(particle)
    }

    fn eve_log(&self) -> &[EveRecord] {
        &self.log
    }
}

#[derive(Clone, Debug)]
pub struct EveSingleCnot {
    target: User,
    log: Vec<EveRecord>,
}

impl EveSingleCnot {
    pub fn new(target: User) -> Self {
        Self {
            target,
            log: Vec::new(),
        }
    }
}

impl Adversary for EveSingleCnot {
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::EveSingleCnot(self.target)
    }

    fn intercept_forward(
        &mut self,
        user: User,
        _index: usize,
        particle: StateVector,
        _rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        if user != self.target {
            return Ok(particle);
        }
        eve_double_cnot_forward(&particle, &encode(LogicalBasisLabel::Zdp0))
    }

    fn intercept_return(
        &mut self,
        user: User,
        index: usize,
        flight: StateVector,
        rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        if user != self.target {
            return Ok(flight);
        }
        let (particle, reading) = eve_single_cnot_return(&flight, rng)?;
        self.log.push(EveRecord {
            user,
            index,
            reading,
            ancilla_fidelity: None,
            guessed_op: guess_from_ancilla(reading),
        });
        Ok(particle)
    }

    fn eve_log(&self) -> &[EveRecord] {
        &self.log
    }
}

#[derive(Clone, Debug)]
pub struct EveMeasureResend {
    target: User,
    log: Vec<EveRecord>,
}

impl EveMeasureResend {
    pub fn new(target: User) -> Self {
        Self {
            target,
            log: Vec::new(),
        }
    }
}

impl Adversary for EveMeasureResend {
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::EveMeasureResend(self.target)
    }

    fn intercept_forward(
        &mut self,
        user: User,
        index: usize,
        particle: StateVector,
        rng: &mut dyn RngCore,
    ) -> Result<StateVector, QuantumError> {
        if user != self.target {
            return Ok(particle);
        }
        let (forwarded, reading) = eve_measure_resend(&particle, rng)?;
        self.log.push(EveRecord {
            user,
            index,
            reading,
            ancilla_fidelity: None,
            // Measure-resend has no handle on the user's choice.
            guessed_op: UserOp::Ctrl,
        });
        Ok(forwarded)
    }

    fn eve_log(&self) -> &[EveRecord] {
        &self.log
    }
}

/// Attack I: every particle is prepared in a random Z_dp state; TP then
/// announces genuine double Bell results and reads the keys off its own
/// preparation.
#[derive(Clone, Debug, Default)]
pub struct TpAttack1 {
    prepared: HashMap<(User, usize), LogicalBasisLabel>,
}

impl Adversary for TpAttack1 {
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::TpAttack1
    }

    fn prepare(&mut self, user: User, index: usize, rng: &mut dyn RngCore) -> Option<StateVector> {
        let label = LogicalBasisLabel::from_bit(rng.gen_range(0..=1));
        self.prepared.insert((user, index), label);
        Some(encode(label))
    }

    fn runs_honest_eve_check(&self) -> bool {
        false
    }

    fn key_guess(&self, index: usize) -> Option<(LogicalBasisLabel, LogicalBasisLabel)> {
        Some((
            *self.prepared.get(&(User::Alice, index))?,
            *self.prepared.get(&(User::Bob, index))?,
        ))
    }
}

/// Attack II: TP measures each announced group in Z_dp ⊗ Z_dp and announces a
/// random double Bell outcome of the type those results imply.
#[derive(Clone, Debug, Default)]
pub struct TpAttack2 {
    measured: HashMap<usize, (LogicalBasisLabel, LogicalBasisLabel)>,
}

/// A uniformly random φ-type (`psi = false`) or ψ-type pair.
pub fn random_typed_announcement<R: Rng + ?Sized>(psi: bool, rng: &mut R) -> DoubleBellOutcome {
    let (plus, minus) = if psi {
        (BellLabel::PsiPlus, BellLabel::PsiMinus)
    } else {
        (BellLabel::PhiPlus, BellLabel::PhiMinus)
    };
    let mut pick = || if rng.gen::<bool>() { minus } else { plus };
    let first = pick();
    let second = pick();
    DoubleBellOutcome::new(first, second)
}

impl Adversary for TpAttack2 {
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::TpAttack2
    }

    fn announce(
        &mut self,
        index: usize,
        group: &StateVector,
        rng: &mut dyn RngCore,
    ) -> Option<Result<DoubleBellOutcome, QuantumError>> {
        let attempt = (|| {
            let (a, mid) = measure_logical(group, (0, 1), LogicalBasis::Z, rng)?;
            let (b, _) = measure_logical(&mid, (2, 3), LogicalBasis::Z, rng)?;
            self.measured.insert(index, (a, b));
            Ok(random_typed_announcement(a != b, rng))
        })();
        Some(attempt)
    }

    fn key_guess(&self, index: usize) -> Option<(LogicalBasisLabel, LogicalBasisLabel)> {
        self.measured.get(&index).copied()
    }
}
