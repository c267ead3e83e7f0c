//! Exact simulator for two-party semiquantum summation over a
//! collective-dephasing channel.
//!
//! A quantum third party (TP) helps two classical users, Alice and Bob, compute
//! `R = X ⊕ Y` of their private bit strings. Travelling particles are dual-rail
//! logical qubits (`|0_dp⟩ = |01⟩`, `|1_dp⟩ = |10⟩`) so the channel's
//! collective phase never becomes observable. The users can only reflect a
//! particle (CTRL) or measure it in `Z_dp` and resend what they saw (SIFT).
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: state vectors, CNOTs and projective measurements on at most
//!   six physical qubits, including the double Bell measurement.
//! - [`channel`]: the dephasing channel and its window sampler.
//! - [`protocol`]: the five-step protocol engine and its transcript.
//! - [`adversary`]: outside eavesdroppers and dishonest-TP strategies,
//!   installed into the engine through the [`adversary::Adversary`] hooks.
//! - [`analysis`]: seeded Monte Carlo experiments, closed-form detection
//!   probabilities, qubit efficiency and the key-table check.
//! - [`cli`]: the `sqsum` command line (`run`, `verify`, `efficiency`,
//!   `selftest`) and its report/transcript writers.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use sqsum::adversary::AdversaryStrategy;
//! use sqsum::channel::ChannelConfig;
//! use sqsum::protocol::{run_protocol, ProtocolParams, Verdict};
//! use sqsum::Bits;
//!
//! let params = ProtocolParams::new(8, 1, 1, 4.0).unwrap();
//! let x: Bits = "10110100".parse().unwrap();
//! let y: Bits = "11010010".parse().unwrap();
//! let mut eve = AdversaryStrategy::Passive.build();
//! let mut rng = ChaCha8Rng::seed_from_u64(7);
//! let outcome = run_protocol(&params, &x, &y, eve.as_mut(), &ChannelConfig::dephasing(), &mut rng).unwrap();
//! if let Verdict::Success { result } = &outcome.verdict {
//!     assert_eq!(result.to_string(), "01100110");
//! }
//! ```

pub mod adversary;
pub mod analysis;
mod bits;
pub mod channel;
pub mod cli;
pub mod protocol;
pub mod qcore;

pub use bits::{Bits, BitsParseError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Quantum(#[from] qcore::QuantumError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Params(#[from] protocol::ParamError),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error("no closed-form detection probability for strategy `{0}`")]
    UnsupportedAttack(String),
    #[error("unknown adversary `{0}`")]
    UnknownAdversary(String),
}

pub type Result<T> = std::result::Result<T, Error>;
