//! Small-register state-vector algebra.
//!
//! Registers hold at most [`MAX_QUBITS`] physical qubits. Qubit `0` is the
//! leftmost factor of a ket, so in a 4-qubit register the physical qubits
//! labelled 1, 2, 3, 4 in the usual subscript notation are indices 0..=3, and
//! the computational basis index of `|q0 q1 q2 q3⟩` is `q0·8 + q1·4 + q2·2 + q3`.
//!
//! Every value is immutable: gates and measurements return fresh states.
//! Collapsed states are returned with the first non-negligible amplitude made
//! real and positive, which fixes the otherwise arbitrary global phase.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest register the simulator will build.
pub const MAX_QUBITS: usize = 6;

/// Tolerance for runtime normalization and orthonormality checks.
pub const NORM_TOLERANCE: f64 = 1e-9;

const PHASE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("register of {requested} qubits exceeds the {MAX_QUBITS}-qubit capacity")]
    CapacityExceeded { requested: usize },
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("control and target are both qubit {0}")]
    ControlEqualsTarget(usize),
    #[error("logical qubit pairs share a physical qubit")]
    OverlappingPairs,
    #[error("measurement basis is not orthonormal and complete: {0}")]
    NonOrthonormalBasis(String),
    #[error("state norm {norm:e} is below tolerance")]
    DegenerateState { norm: f64 },
    #[error("amplitudes have norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("amplitude count {0} is not a power of two between 2 and 64")]
    InvalidLength(usize),
    #[error("expected a {expected}-qubit register, found {found}")]
    WrongRegisterSize { expected: usize, found: usize },
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("subsystem is entangled with the rest of the register (residual {residual:e})")]
    FactorizationFailed { residual: f64 },
    #[error("measurement left the logical code space")]
    LeakedOutOfCodeSpace,
}

pub type Result<T> = std::result::Result<T, QuantumError>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Normalized pure state of `num_qubits` physical qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, rejecting anything that is not a
    /// unit vector of a supported dimension.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QuantumError::InvalidLength(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(QuantumError::CapacityExceeded {
                requested: num_qubits,
            });
        }
        let state = Self {
            num_qubits,
            amplitudes,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized { norm });
        }
        Ok(state)
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().copied().map(c).collect())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QuantumError::CapacityExceeded {
                requested: num_qubits,
            });
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(QuantumError::IndexOutOfRange { index, num_qubits });
        }
        let mut amplitudes = vec![Complex64::default(); dim];
        amplitudes[index] = c(1.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Normalized linear combination `Σ coeff·state`. The combination must
    /// already have unit norm; it is not rescaled.
    pub fn superpose(terms: &[(Complex64, &StateVector)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or(QuantumError::DegenerateState { norm: 0.0 })?
            .1;
        let mut amplitudes = vec![Complex64::default(); first.dim()];
        for (coeff, state) in terms {
            if state.num_qubits != first.num_qubits {
                return Err(QuantumError::DimensionMismatch {
                    left: first.num_qubits,
                    right: state.num_qubits,
                });
            }
            for (acc, a) in amplitudes.iter_mut().zip(&state.amplitudes) {
                *acc += coeff * a;
            }
        }
        Self::new(amplitudes)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn bit(&self, index: usize, qubit: usize) -> usize {
        (index >> (self.num_qubits - 1 - qubit)) & 1
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(QuantumError::IndexOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    fn check_distinct(&self, qubits: &[usize]) -> Result<()> {
        for (i, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..i].contains(&q) {
                return Err(QuantumError::OverlappingPairs);
            }
        }
        Ok(())
    }

    /// Kronecker product; `self` supplies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let requested = self.num_qubits + other.num_qubits;
        if requested > MAX_QUBITS {
            return Err(QuantumError::CapacityExceeded { requested });
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(StateVector {
            num_qubits: requested,
            amplitudes,
        })
    }

    /// Physical CNOT.
    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<StateVector> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QuantumError::ControlEqualsTarget(control));
        }
        let flip = 1usize << (self.num_qubits - 1 - target);
        let mut amplitudes = self.amplitudes.clone();
        for (i, amp) in amplitudes.iter_mut().enumerate() {
            if self.bit(i, control) == 1 {
                *amp = self.amplitudes[i ^ flip];
            }
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes,
        })
    }

    /// CNOT between two dual-rail logical qubits: two physical CNOTs from the
    /// first qubit of `control` onto both qubits of `target`. On the code
    /// space this sends `|1_dp⟩|b_dp⟩` to `|1_dp⟩|b̄_dp⟩` and leaves
    /// `|0_dp⟩|b_dp⟩` alone.
    pub fn apply_logical_cnot(
        &self,
        control: (usize, usize),
        target: (usize, usize),
    ) -> Result<StateVector> {
        self.check_distinct(&[control.0, control.1, target.0, target.1])?;
        self.apply_cnot(control.0, target.0)?
            .apply_cnot(control.0, target.1)
    }

    /// Reorders qubits: qubit `k` of the result is qubit `order[k]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.num_qubits {
            return Err(QuantumError::DimensionMismatch {
                left: self.num_qubits,
                right: order.len(),
            });
        }
        self.check_distinct(order)?;
        let n = self.num_qubits;
        let mut amplitudes = vec![Complex64::default(); self.dim()];
        for (i, amp) in self.amplitudes.iter().enumerate() {
            let mut j = 0;
            for (k, &src) in order.iter().enumerate() {
                j |= self.bit(i, src) << (n - 1 - k);
            }
            amplitudes[j] = *amp;
        }
        Ok(StateVector {
            num_qubits: n,
            amplitudes,
        })
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(QuantumError::DimensionMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest componentwise distance `|a_i - b_i|`.
    pub fn max_deviation(&self, other: &StateVector) -> Result<f64> {
        if self.num_qubits != other.num_qubits {
            return Err(QuantumError::DimensionMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Componentwise distance after rotating `other` onto `self`'s global phase.
    pub fn deviation_up_to_phase(&self, other: &StateVector) -> Result<f64> {
        let overlap = other.inner_product(self)?;
        let phase = if overlap.norm() > PHASE_EPS {
            overlap / overlap.norm()
        } else {
            c(1.0)
        };
        let rotated = StateVector {
            num_qubits: other.num_qubits,
            amplitudes: other.amplitudes.iter().map(|a| a * phase).collect(),
        };
        self.max_deviation(&rotated)
    }

    /// Same state with the first non-negligible amplitude real and positive.
    pub fn canonical_phase(&self) -> StateVector {
        let pivot = self
            .amplitudes
            .iter()
            .find(|a| a.norm() > PHASE_EPS)
            .copied()
            .unwrap_or(c(1.0));
        let phase = pivot.conj() / pivot.norm();
        StateVector {
            num_qubits: self.num_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }

    pub(crate) fn map_amplitudes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> StateVector {
        StateVector {
            num_qubits: self.num_qubits,
            amplitudes: self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| f(i, *a))
                .collect(),
        }
    }

    fn placement(&self, qubits: &[usize]) -> Vec<usize> {
        let k = qubits.len();
        (0..1usize << k)
            .map(|s| {
                qubits.iter().enumerate().fold(0, |acc, (pos, &q)| {
                    acc | (((s >> (k - 1 - pos)) & 1) << (self.num_qubits - 1 - q))
                })
            })
            .collect()
    }

    fn check_subsystem(&self, qubits: &[usize], basis: &MeasurementBasis) -> Result<()> {
        self.check_distinct(qubits)?;
        if qubits.len() != basis.num_qubits {
            return Err(QuantumError::DimensionMismatch {
                left: qubits.len(),
                right: basis.num_qubits,
            });
        }
        Ok(())
    }

    /// Unnormalized projection onto basis vector `outcome` of the subsystem.
    fn project_raw(&self, qubits: &[usize], vector: &[Complex64]) -> (f64, Vec<Complex64>) {
        let place = self.placement(qubits);
        let mask = place.iter().fold(0, |acc, p| acc | p);
        let mut out = vec![Complex64::default(); self.dim()];
        let mut prob = 0.0;
        for rest in (0..self.dim()).filter(|i| i & mask == 0) {
            let coeff: Complex64 = place
                .iter()
                .zip(vector)
                .map(|(p, v)| v.conj() * self.amplitudes[rest | p])
                .sum();
            prob += coeff.norm_sqr();
            for (p, v) in place.iter().zip(vector) {
                out[rest | p] = v * coeff;
            }
        }
        (prob, out)
    }

    /// Born probabilities of each basis outcome on `qubits`.
    pub fn probabilities(&self, qubits: &[usize], basis: &MeasurementBasis) -> Result<Vec<f64>> {
        self.check_subsystem(qubits, basis)?;
        Ok(basis
            .vectors
            .iter()
            .map(|v| self.project_raw(qubits, v).0)
            .collect())
    }

    /// Deterministic branch: probability of `outcome` and the renormalized
    /// post-measurement state.
    pub fn project(
        &self,
        qubits: &[usize],
        basis: &MeasurementBasis,
        outcome: usize,
    ) -> Result<(f64, StateVector)> {
        self.check_subsystem(qubits, basis)?;
        let vector = basis
            .vectors
            .get(outcome)
            .ok_or(QuantumError::IndexOutOfRange {
                index: outcome,
                num_qubits: basis.num_qubits,
            })?;
        let (prob, raw) = self.project_raw(qubits, vector);
        let norm = prob.sqrt();
        if norm < NORM_TOLERANCE {
            return Err(QuantumError::DegenerateState { norm });
        }
        let collapsed = StateVector {
            num_qubits: self.num_qubits,
            amplitudes: raw.into_iter().map(|a| a / norm).collect(),
        };
        Ok((prob, collapsed.canonical_phase()))
    }

    /// Projective measurement of `qubits` in `basis`, sampled by the Born rule.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        qubits: &[usize],
        basis: &MeasurementBasis,
        rng: &mut R,
    ) -> Result<(usize, StateVector)> {
        let probs = self.probabilities(qubits, basis)?;
        let total: f64 = probs.iter().sum();
        if total.sqrt() < NORM_TOLERANCE {
            return Err(QuantumError::DegenerateState { norm: total.sqrt() });
        }
        let outcome = sample_index(&probs, rng);
        let (_, state) = self.project(qubits, basis, outcome)?;
        Ok((outcome, state))
    }

    /// Splits a product state into its leading `k` qubits and the rest.
    ///
    /// Both factors come back in canonical phase, so the product equals the
    /// input up to a global phase.
    pub fn split(&self, k: usize) -> Result<(StateVector, StateVector)> {
        if k == 0 || k >= self.num_qubits {
            return Err(QuantumError::IndexOutOfRange {
                index: k,
                num_qubits: self.num_qubits,
            });
        }
        let rest_dim = 1usize << (self.num_qubits - k);
        let lead_dim = 1usize << k;
        let pivot = (0..self.dim())
            .max_by(|&a, &b| {
                self.amplitudes[a]
                    .norm_sqr()
                    .total_cmp(&self.amplitudes[b].norm_sqr())
            })
            .unwrap_or(0);
        let column = pivot % rest_dim;
        let mut lead: Vec<Complex64> = (0..lead_dim)
            .map(|a| self.amplitudes[a * rest_dim + column])
            .collect();
        let lead_norm = lead.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if lead_norm < NORM_TOLERANCE {
            return Err(QuantumError::DegenerateState { norm: lead_norm });
        }
        lead.iter_mut().for_each(|a| *a /= lead_norm);
        let rest: Vec<Complex64> = (0..rest_dim)
            .map(|b| {
                lead.iter()
                    .enumerate()
                    .map(|(a, l)| l.conj() * self.amplitudes[a * rest_dim + b])
                    .sum()
            })
            .collect();
        let residual = (0..self.dim())
            .map(|i| (self.amplitudes[i] - lead[i / rest_dim] * rest[i % rest_dim]).norm())
            .fold(0.0, f64::max);
        if residual > NORM_TOLERANCE {
            return Err(QuantumError::FactorizationFailed { residual });
        }
        let lead = StateVector::new(lead)?.canonical_phase();
        let rest = StateVector::new(rest)
            .map_err(|_| QuantumError::FactorizationFailed { residual })?
            .canonical_phase();
        Ok((lead, rest))
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < PHASE_EPS {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(
                f,
                "({:.4}{:+.4}i)|{:0width$b}⟩",
                a.re,
                a.im,
                i,
                width = self.num_qubits
            )?;
        }
        Ok(())
    }
}

/// Free-function form of [`StateVector::tensor`].
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    a.tensor(b)
}

/// Inverse-CDF draw from a discrete distribution that sums to ~1.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_nonzero
}

/// Orthonormal basis spanning a `num_qubits` subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBasis {
    num_qubits: usize,
    vectors: Vec<Vec<Complex64>>,
}

impl MeasurementBasis {
    pub fn new(vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = vectors.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(QuantumError::NonOrthonormalBasis(format!(
                "{dim} vectors cannot span a qubit subsystem"
            )));
        }
        if let Some(bad) = vectors.iter().position(|v| v.len() != dim) {
            return Err(QuantumError::NonOrthonormalBasis(format!(
                "vector {bad} has the wrong dimension"
            )));
        }
        for i in 0..dim {
            for j in 0..=i {
                let ip: Complex64 = vectors[i]
                    .iter()
                    .zip(&vectors[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (ip - c(expected)).norm() > NORM_TOLERANCE {
                    return Err(QuantumError::NonOrthonormalBasis(format!(
                        "⟨v{i}|v{j}⟩ = {ip}"
                    )));
                }
            }
        }
        Ok(Self {
            num_qubits: dim.trailing_zeros() as usize,
            vectors,
        })
    }

    fn from_real_rows(rows: &[[f64; 4]]) -> Self {
        Self {
            num_qubits: 2,
            vectors: rows
                .iter()
                .map(|r| r.iter().copied().map(c).collect())
                .collect(),
        }
    }

    pub fn computational(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let vectors = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| c(if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        Self {
            num_qubits,
            vectors,
        }
    }

    /// Z_dp completed to a 2-qubit basis: `|01⟩, |10⟩`, then the two
    /// out-of-code vectors `|00⟩, |11⟩`.
    pub fn z_dp() -> Self {
        Self::from_real_rows(&[
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// X_dp completed to a 2-qubit basis: `|+_dp⟩, |−_dp⟩`, then `|φ±⟩`.
    pub fn x_dp() -> Self {
        let h = FRAC_1_SQRT_2;
        Self::from_real_rows(&[
            [0.0, h, h, 0.0],
            [0.0, h, -h, 0.0],
            [h, 0.0, 0.0, h],
            [h, 0.0, 0.0, -h],
        ])
    }

    /// Bell basis in [`BellLabel`] order: `φ+, φ−, ψ+, ψ−`.
    pub fn bell() -> Self {
        let h = FRAC_1_SQRT_2;
        Self::from_real_rows(&[
            [h, 0.0, 0.0, h],
            [h, 0.0, 0.0, -h],
            [0.0, h, h, 0.0],
            [0.0, h, -h, 0.0],
        ])
    }

    /// Product basis; outcome index is `a_index * b.len() + b_index`.
    pub fn product(a: &MeasurementBasis, b: &MeasurementBasis) -> Result<Self> {
        let requested = a.num_qubits + b.num_qubits;
        if requested > MAX_QUBITS {
            return Err(QuantumError::CapacityExceeded { requested });
        }
        let vectors = a
            .vectors
            .iter()
            .flat_map(|u| {
                b.vectors.iter().map(move |v| {
                    u.iter()
                        .flat_map(|x| v.iter().map(move |y| x * y))
                        .collect()
                })
            })
            .collect();
        Ok(Self {
            num_qubits: requested,
            vectors,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, outcome: usize) -> Option<&[Complex64]> {
        self.vectors.get(outcome).map(Vec::as_slice)
    }
}

/// The two logical measurement bases usable on dual-rail qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalBasis {
    Z,
    X,
}

impl LogicalBasis {
    pub fn measurement_basis(self) -> MeasurementBasis {
        match self {
            LogicalBasis::Z => MeasurementBasis::z_dp(),
            LogicalBasis::X => MeasurementBasis::x_dp(),
        }
    }

    pub fn labels(self) -> [LogicalBasisLabel; 2] {
        match self {
            LogicalBasis::Z => [LogicalBasisLabel::Zdp0, LogicalBasisLabel::Zdp1],
            LogicalBasis::X => [LogicalBasisLabel::XdpPlus, LogicalBasisLabel::XdpMinus],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicalBasisLabel {
    Zdp0,
    Zdp1,
    XdpPlus,
    XdpMinus,
}

impl LogicalBasisLabel {
    pub fn basis(self) -> LogicalBasis {
        match self {
            Self::Zdp0 | Self::Zdp1 => LogicalBasis::Z,
            Self::XdpPlus | Self::XdpMinus => LogicalBasis::X,
        }
    }

    /// Key bit carried by a Z_dp label.
    pub fn bit(self) -> Option<u8> {
        match self {
            Self::Zdp0 => Some(0),
            Self::Zdp1 => Some(1),
            _ => None,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            Self::Zdp0
        } else {
            Self::Zdp1
        }
    }
}

impl fmt::Display for LogicalBasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zdp0 => "|0_dp>",
            Self::Zdp1 => "|1_dp>",
            Self::XdpPlus => "|+_dp>",
            Self::XdpMinus => "|-_dp>",
        })
    }
}

/// Two-physical-qubit encoding of a logical basis state.
pub fn encode(label: LogicalBasisLabel) -> StateVector {
    let h = FRAC_1_SQRT_2;
    let amps = match label {
        LogicalBasisLabel::Zdp0 => [0.0, 1.0, 0.0, 0.0],
        LogicalBasisLabel::Zdp1 => [0.0, 0.0, 1.0, 0.0],
        LogicalBasisLabel::XdpPlus => [0.0, h, h, 0.0],
        LogicalBasisLabel::XdpMinus => [0.0, h, -h, 0.0],
    };
    StateVector {
        num_qubits: 2,
        amplitudes: amps.iter().copied().map(c).collect(),
    }
}

/// Logical measurement of the dual-rail qubit on physical qubits `pair`.
pub fn measure_logical<R: Rng + ?Sized>(
    state: &StateVector,
    pair: (usize, usize),
    basis: LogicalBasis,
    rng: &mut R,
) -> Result<(LogicalBasisLabel, StateVector)> {
    let (outcome, collapsed) = state.measure(&[pair.0, pair.1], &basis.measurement_basis(), rng)?;
    let label = *basis
        .labels()
        .get(outcome)
        .ok_or(QuantumError::LeakedOutOfCodeSpace)?;
    Ok((label, collapsed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellLabel {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_phi(self) -> bool {
        matches!(self, Self::PhiPlus | Self::PhiMinus)
    }

    pub fn state(self) -> StateVector {
        StateVector {
            num_qubits: 2,
            amplitudes: MeasurementBasis::bell().vectors[self.index()].clone(),
        }
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PhiPlus => "phi+",
            Self::PhiMinus => "phi-",
            Self::PsiPlus => "psi+",
            Self::PsiMinus => "psi-",
        })
    }
}

/// Outcome of the double Bell measurement: `first` on physical qubits (1,3),
/// `second` on (2,4).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DoubleBellOutcome {
    pub first: BellLabel,
    pub second: BellLabel,
}

impl DoubleBellOutcome {
    pub fn new(first: BellLabel, second: BellLabel) -> Self {
        Self { first, second }
    }

    /// All sixteen outcomes, in joint-measurement index order.
    pub fn all() -> impl Iterator<Item = DoubleBellOutcome> {
        BellLabel::ALL
            .into_iter()
            .flat_map(|a| BellLabel::ALL.into_iter().map(move |b| Self::new(a, b)))
    }

    pub fn index(self) -> usize {
        self.first.index() * 4 + self.second.index()
    }

    /// Both halves are φ states.
    pub fn is_phi_type(self) -> bool {
        self.first.is_phi() && self.second.is_phi()
    }

    /// Both halves are ψ states.
    pub fn is_psi_type(self) -> bool {
        !self.first.is_phi() && !self.second.is_phi()
    }

    pub fn is_equal_pair(self) -> bool {
        self.first == self.second
    }

    /// Four-qubit state `|first⟩₁₃|second⟩₂₄` in 1234 qubit order.
    pub fn state(self) -> StateVector {
        self.first
            .state()
            .tensor(&self.second.state())
            .and_then(|s| s.permute(&DOUBLE_BELL_ORDER))
            .expect("4-qubit Bell product is within capacity")
    }
}

impl fmt::Display for DoubleBellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_13 {}_24", self.first, self.second)
    }
}

/// Maps the (1,3)(2,4) pairing onto 1234 order and back; it is its own inverse.
pub const DOUBLE_BELL_ORDER: [usize; 4] = [0, 2, 1, 3];

fn check_four(s: &StateVector) -> Result<()> {
    if s.num_qubits != 4 {
        return Err(QuantumError::WrongRegisterSize {
            expected: 4,
            found: s.num_qubits,
        });
    }
    Ok(())
}

/// Bell measurement on physical qubits (1,3), renormalize, then on (2,4).
pub fn double_bell_measure<R: Rng + ?Sized>(
    s: &StateVector,
    rng: &mut R,
) -> Result<(DoubleBellOutcome, StateVector)> {
    check_four(s)?;
    let bell = MeasurementBasis::bell();
    let (a, mid) = s.measure(&[0, 2], &bell, rng)?;
    let (b, post) = mid.measure(&[1, 3], &bell, rng)?;
    let outcome = DoubleBellOutcome::new(BellLabel::ALL[a], BellLabel::ALL[b]);
    Ok((outcome, post))
}

/// Exact outcome distribution of the double Bell measurement, computed as a
/// single 16-outcome projective measurement; indexed by
/// [`DoubleBellOutcome::index`].
pub fn double_bell_distribution(s: &StateVector) -> Result<Vec<f64>> {
    check_four(s)?;
    let bell = MeasurementBasis::bell();
    let joint = MeasurementBasis::product(&bell, &bell)?;
    s.probabilities(&DOUBLE_BELL_ORDER, &joint)
}

/// Four-qubit logical Bell states, in the `|Φ±_dp⟩, |Ψ±_dp⟩` convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogicalBell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl LogicalBell {
    pub const ALL: [LogicalBell; 4] = [
        LogicalBell::PhiPlus,
        LogicalBell::PhiMinus,
        LogicalBell::PsiPlus,
        LogicalBell::PsiMinus,
    ];

    /// Built from the Z_dp product form.
    pub fn state(self) -> StateVector {
        use LogicalBasisLabel::{Zdp0, Zdp1};
        let (a, b, sign) = match self {
            LogicalBell::PhiPlus => ((Zdp0, Zdp0), (Zdp1, Zdp1), 1.0),
            LogicalBell::PhiMinus => ((Zdp0, Zdp0), (Zdp1, Zdp1), -1.0),
            LogicalBell::PsiPlus => ((Zdp0, Zdp1), (Zdp1, Zdp0), 1.0),
            LogicalBell::PsiMinus => ((Zdp0, Zdp1), (Zdp1, Zdp0), -1.0),
        };
        let first = logical_product(a.0, a.1);
        let second = logical_product(b.0, b.1);
        StateVector::superpose(&[
            (c(FRAC_1_SQRT_2), &first),
            (c(sign * FRAC_1_SQRT_2), &second),
        ])
        .expect("logical Bell states are normalized")
    }
}

/// `encode(a) ⊗ encode(b)` on four physical qubits.
pub fn logical_product(a: LogicalBasisLabel, b: LogicalBasisLabel) -> StateVector {
    encode(a)
        .tensor(&encode(b))
        .expect("two logical qubits fit in the register")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = FRAC_1_SQRT_2;

    fn real(s: &StateVector) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(
            real(&encode(LogicalBasisLabel::Zdp0)),
            vec![0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            real(&encode(LogicalBasisLabel::Zdp1)),
            vec![0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            real(&encode(LogicalBasisLabel::XdpPlus)),
            vec![0.0, H, H, 0.0]
        );
        for label in [
            LogicalBasisLabel::Zdp0,
            LogicalBasisLabel::Zdp1,
            LogicalBasisLabel::XdpPlus,
            LogicalBasisLabel::XdpMinus,
        ] {
            assert!((encode(label).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_examples() {
        let z0 = encode(LogicalBasisLabel::Zdp0);
        let s = tensor(&z0, &z0).unwrap();
        assert_eq!(s, StateVector::basis_state(4, 0b0101).unwrap());

        let plus = encode(LogicalBasisLabel::XdpPlus);
        let s = tensor(&plus, &z0).unwrap();
        let mut expected = vec![0.0; 16];
        expected[0b0101] = H;
        expected[0b1001] = H;
        assert_eq!(real(&s), expected);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_rejects_oversized_register() {
        let a = StateVector::basis_state(4, 0).unwrap();
        let b = StateVector::basis_state(3, 0).unwrap();
        assert_eq!(
            a.tensor(&b),
            Err(QuantumError::CapacityExceeded { requested: 7 })
        );
    }

    #[test]
    fn physical_cnot_truth_table() {
        let s10 = StateVector::basis_state(2, 0b10).unwrap();
        assert_eq!(
            s10.apply_cnot(0, 1).unwrap(),
            StateVector::basis_state(2, 0b11).unwrap()
        );
        let s00 = StateVector::basis_state(2, 0b00).unwrap();
        assert_eq!(s00.apply_cnot(0, 1).unwrap(), s00);
        let plus = encode(LogicalBasisLabel::XdpPlus);
        assert_eq!(
            plus.apply_cnot(1, 0).unwrap().apply_cnot(1, 0).unwrap(),
            plus
        );
    }

    #[test]
    fn physical_cnot_errors() {
        let s = StateVector::basis_state(2, 0).unwrap();
        assert_eq!(
            s.apply_cnot(1, 1),
            Err(QuantumError::ControlEqualsTarget(1))
        );
        assert!(matches!(
            s.apply_cnot(0, 2),
            Err(QuantumError::IndexOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn logical_cnot_matches_classical_truth_table() {
        use LogicalBasisLabel::{Zdp0, Zdp1};
        for (a, b, out) in [
            (Zdp0, Zdp0, Zdp0),
            (Zdp0, Zdp1, Zdp1),
            (Zdp1, Zdp0, Zdp1),
            (Zdp1, Zdp1, Zdp0),
        ] {
            let got = logical_product(a, b)
                .apply_logical_cnot((0, 1), (2, 3))
                .unwrap();
            assert_eq!(got, logical_product(a, out));
        }
    }

    #[test]
    fn logical_cnot_entangles_plus_with_ancilla() {
        let s = logical_product(LogicalBasisLabel::XdpPlus, LogicalBasisLabel::Zdp0);
        let joint = s.apply_logical_cnot((0, 1), (2, 3)).unwrap();
        assert!(joint.max_deviation(&LogicalBell::PhiPlus.state()).unwrap() < 1e-12);
        let back = joint.apply_logical_cnot((0, 1), (2, 3)).unwrap();
        assert!(back.max_deviation(&s).unwrap() < 1e-12);
    }

    #[test]
    fn logical_cnot_errors() {
        let s = StateVector::basis_state(4, 0).unwrap();
        assert_eq!(
            s.apply_logical_cnot((0, 1), (1, 2)),
            Err(QuantumError::OverlappingPairs)
        );
        assert!(matches!(
            s.apply_logical_cnot((0, 1), (2, 4)),
            Err(QuantumError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn inner_product_examples() {
        let z0 = encode(LogicalBasisLabel::Zdp0);
        let z1 = encode(LogicalBasisLabel::Zdp1);
        let plus = encode(LogicalBasisLabel::XdpPlus);
        assert!((z0.inner_product(&z0).unwrap() - c(1.0)).norm() < 1e-15);
        assert!(z0.inner_product(&z1).unwrap().norm() < 1e-15);
        assert!((plus.inner_product(&z0).unwrap() - c(H)).norm() < 1e-15);
        let four = StateVector::basis_state(4, 0).unwrap();
        assert!(matches!(
            z0.inner_product(&four),
            Err(QuantumError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_first_argument() {
        let i = Complex64::new(0.0, 1.0);
        let a = StateVector::new(vec![c(H), i * H]).unwrap();
        let b = StateVector::basis_state(1, 1).unwrap();
        // ⟨a|b⟩ = conj(i/√2)
        assert!((a.inner_product(&b).unwrap() - (-i * H)).norm() < 1e-15);
    }

    #[test]
    fn measurement_probabilities_match_inner_products() {
        let z0 = encode(LogicalBasisLabel::Zdp0);
        let plus = encode(LogicalBasisLabel::XdpPlus);
        let pz = z0
            .probabilities(&[0, 1], &MeasurementBasis::z_dp())
            .unwrap();
        assert!((pz[0] - 1.0).abs() < 1e-15);
        let p = plus
            .probabilities(&[0, 1], &MeasurementBasis::z_dp())
            .unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        // |⟨±_dp|0_dp⟩|² by hand: (1/√2·1)² = 1/2.
        let px = z0
            .probabilities(&[0, 1], &MeasurementBasis::x_dp())
            .unwrap();
        assert!((px[0] - 0.5).abs() < 1e-15 && (px[1] - 0.5).abs() < 1e-15);
        assert!(px[2].abs() < 1e-15 && px[3].abs() < 1e-15);
    }

    #[test]
    fn measure_eigenstate_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (label, post) = measure_logical(
                &encode(LogicalBasisLabel::Zdp0),
                (0, 1),
                LogicalBasis::Z,
                &mut rng,
            )
            .unwrap();
            assert_eq!(label, LogicalBasisLabel::Zdp0);
            assert_eq!(post, encode(LogicalBasisLabel::Zdp0));
        }
    }

    #[test]
    fn measure_rejects_bad_basis() {
        let bad = MeasurementBasis::new(vec![vec![c(1.0), c(0.0)], vec![c(1.0), c(0.0)]]);
        assert!(matches!(bad, Err(QuantumError::NonOrthonormalBasis(_))));
        let short = MeasurementBasis::new(vec![vec![c(1.0), c(0.0)]]);
        assert!(matches!(short, Err(QuantumError::NonOrthonormalBasis(_))));
    }

    #[test]
    fn project_onto_zero_probability_branch_is_degenerate() {
        let z0 = encode(LogicalBasisLabel::Zdp0);
        assert!(matches!(
            z0.project(&[0, 1], &MeasurementBasis::z_dp(), 1),
            Err(QuantumError::DegenerateState { .. })
        ));
    }

    #[test]
    fn collapsed_states_have_canonical_phase() {
        let i = Complex64::new(0.0, 1.0);
        let s = StateVector::new(vec![i * H, c(0.0), c(0.0), c(-H)]).unwrap();
        let (_, post) = s
            .project(&[0], &MeasurementBasis::computational(1), 1)
            .unwrap();
        assert_eq!(post.amplitudes()[3], c(1.0));
    }

    #[test]
    fn double_bell_requires_four_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = encode(LogicalBasisLabel::Zdp0);
        assert_eq!(
            double_bell_measure(&s, &mut rng).unwrap_err(),
            QuantumError::WrongRegisterSize {
                expected: 4,
                found: 2
            }
        );
    }

    #[test]
    fn double_bell_on_zero_zero_gives_phi_pairs() {
        let s = logical_product(LogicalBasisLabel::Zdp0, LogicalBasisLabel::Zdp0);
        let dist = double_bell_distribution(&s).unwrap();
        for o in DoubleBellOutcome::all() {
            let expected = if o.is_phi_type() { 0.25 } else { 0.0 };
            assert!((dist[o.index()] - expected).abs() < 1e-12, "{o}");
        }
    }

    #[test]
    fn double_bell_on_zero_one_gives_only_psi_pairs() {
        let s = logical_product(LogicalBasisLabel::Zdp0, LogicalBasisLabel::Zdp1);
        let dist = double_bell_distribution(&s).unwrap();
        for o in DoubleBellOutcome::all() {
            let expected = if o.is_psi_type() { 0.25 } else { 0.0 };
            assert!((dist[o.index()] - expected).abs() < 1e-12, "{o}");
        }
    }

    #[test]
    fn sequential_and_joint_double_bell_agree() {
        // Branch-by-branch probabilities of the sequential collapse must equal
        // the joint 16-outcome distribution.
        let bell = MeasurementBasis::bell();
        let states = [
            logical_product(LogicalBasisLabel::XdpPlus, LogicalBasisLabel::XdpPlus),
            logical_product(LogicalBasisLabel::XdpPlus, LogicalBasisLabel::Zdp1),
            logical_product(LogicalBasisLabel::Zdp1, LogicalBasisLabel::XdpMinus),
            LogicalBell::PsiMinus.state(),
        ];
        for s in &states {
            let joint = double_bell_distribution(s).unwrap();
            for o in DoubleBellOutcome::all() {
                let sequential = match s.project(&[0, 2], &bell, o.first.index()) {
                    Ok((p1, mid)) => match mid.project(&[1, 3], &bell, o.second.index()) {
                        Ok((p2, _)) => p1 * p2,
                        Err(QuantumError::DegenerateState { .. }) => 0.0,
                        Err(e) => panic!("{e}"),
                    },
                    Err(QuantumError::DegenerateState { .. }) => 0.0,
                    Err(e) => panic!("{e}"),
                };
                assert!((sequential - joint[o.index()]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn double_bell_post_state_is_the_bell_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = logical_product(LogicalBasisLabel::XdpPlus, LogicalBasisLabel::XdpPlus);
        for _ in 0..50 {
            let (o, post) = double_bell_measure(&s, &mut rng).unwrap();
            assert!(o.is_equal_pair());
            assert!(post.deviation_up_to_phase(&o.state()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn split_recovers_factors() {
        let a = encode(LogicalBasisLabel::XdpMinus);
        let b = encode(LogicalBasisLabel::Zdp1);
        let (x, y) = a.tensor(&b).unwrap().split(2).unwrap();
        assert!(x.deviation_up_to_phase(&a).unwrap() < 1e-12);
        assert!(y.deviation_up_to_phase(&b).unwrap() < 1e-12);
        assert!(matches!(
            LogicalBell::PhiPlus.state().split(2),
            Err(QuantumError::FactorizationFailed { .. })
        ));
    }

    #[test]
    fn permute_swaps_qubits() {
        let s = StateVector::basis_state(3, 0b100).unwrap();
        assert_eq!(
            s.permute(&[1, 2, 0]).unwrap(),
            StateVector::basis_state(3, 0b001).unwrap()
        );
    }

    #[test]
    fn new_validates_amplitudes() {
        assert!(matches!(
            StateVector::from_real(&[1.0, 1.0]),
            Err(QuantumError::NotNormalized { .. })
        ));
        assert_eq!(
            StateVector::from_real(&[1.0, 0.0, 0.0]),
            Err(QuantumError::InvalidLength(3))
        );
    }
}
