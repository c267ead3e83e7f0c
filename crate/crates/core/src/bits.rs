use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A bit string written most-significant (x₁) first, e.g. `"10110100"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Bits(Vec<u8>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid bit string character {found:?} at position {position}")]
pub struct BitsParseError {
    pub position: usize,
    pub found: char,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits(vec![0; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Bits((0..len).map(|_| rng.gen_range(0..=1)).collect())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Self {
        Bits(bits.into_iter().map(|b| b & 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<u8> {
        self.0.get(j).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn push(&mut self, bit: u8) {
        self.0.push(bit & 1);
    }

    /// Number of positions where the two strings agree.
    pub fn matches(&self, other: &Bits) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count()
    }
}

impl BitXor for &Bits {
    type Output = Bits;

    fn bitxor(self, rhs: &Bits) -> Bits {
        assert_eq!(
            self.len(),
            rhs.len(),
            "xor of bit strings of unequal length"
        );
        Bits(self.0.iter().zip(&rhs.0).map(|(a, b)| a ^ b).collect())
    }
}

impl FromStr for Bits {
    type Err = BitsParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, ch)| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                found => Err(BitsParseError { position, found }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_xor() {
        let x: Bits = "10110100".parse().unwrap();
        let y: Bits = "11010010".parse().unwrap();
        assert_eq!((&x ^ &y).to_string(), "01100110");
        assert_eq!(
            "10a".parse::<Bits>(),
            Err(BitsParseError {
                position: 2,
                found: 'a'
            })
        );
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(v in proptest::collection::vec(0u8..2, 0..64)) {
            let b = Bits::from_bits(v);
            prop_assert_eq!(b.to_string().parse::<Bits>().unwrap(), b.clone());
            prop_assert_eq!(&b ^ &b, Bits::zeros(b.len()));
        }
    }
}
