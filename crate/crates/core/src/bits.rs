//! Fixed-width bit strings.
//!
//! Bit strings are rendered MSB-first: the string `"01100"` has width 5 and
//! integer value 12, and its first character is the most significant bit.
//! The same convention indexes state vectors, so the basis state
//! `|b_{m-1} ... b_0>` lives at integer index `sum b_j 2^j` and "the first p
//! qubits" are the p most significant bits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Widest bit string representable.
pub const MAX_BITS: usize = 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    width: usize,
    value: u64,
}

impl BitString {
    pub fn new(width: usize, value: u64) -> Result<Self> {
        if width > MAX_BITS {
            return Err(Error::OutOfRange {
                what: "bit-string width",
                value: width as i64,
                allowed: format!("0..={MAX_BITS}"),
            });
        }
        if width < 64 && value >> width != 0 {
            return Err(Error::OutOfRange {
                what: "bit-string value",
                value: value as i64,
                allowed: format!("< 2^{width}"),
            });
        }
        Ok(Self { width, value })
    }

    /// The zero-width string.
    pub const fn empty() -> Self {
        Self { width: 0, value: 0 }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.len() > MAX_BITS {
            return Err(Error::OutOfRange {
                what: "bit-string width",
                value: s.len() as i64,
                allowed: format!("0..={MAX_BITS}"),
            });
        }
        let mut value = 0u64;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidBitString(s.to_string())),
                };
        }
        Ok(Self {
            width: s.len(),
            value,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.value as usize
    }

    /// Bit at string position `pos` (0 = leftmost, most significant).
    pub fn bit(&self, pos: usize) -> bool {
        assert!(pos < self.width, "bit position {pos} out of range");
        (self.value >> (self.width - 1 - pos)) & 1 == 1
    }

    /// `self ∥ other`: `self` occupies the high bits.
    pub fn concat(&self, other: &BitString) -> Result<BitString> {
        BitString::new(
            self.width + other.width,
            (self.value << other.width) | other.value,
        )
    }

    /// The leading `len` bits.
    pub fn prefix(&self, len: usize) -> BitString {
        assert!(len <= self.width);
        BitString {
            width: len,
            value: self.value >> (self.width - len),
        }
    }

    /// The trailing `len` bits.
    pub fn suffix(&self, len: usize) -> BitString {
        assert!(len <= self.width);
        BitString {
            width: len,
            value: self.value & low_mask(len),
        }
    }

    /// Iterate over every string of the given width in increasing order.
    pub fn all(width: usize) -> impl Iterator<Item = BitString> {
        assert!(width <= 20, "exhaustive enumeration limited to 20 bits");
        (0..1u64 << width).map(move |value| BitString { width, value })
    }
}

pub(crate) fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for pos in 0..self.width {
            f.write_str(if self.bit(pos) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BitString::parse(s)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        BitString::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_parse() {
        let b = BitString::parse("01100").unwrap();
        assert_eq!(b.width(), 5);
        assert_eq!(b.value(), 12);
        assert!(!b.bit(0));
        assert!(b.bit(1));
        assert_eq!(b.to_string(), "01100");
    }

    #[test]
    fn prefix_suffix_concat() {
        let b = BitString::parse("111000001111").unwrap();
        assert_eq!(b.prefix(3).to_string(), "111");
        assert_eq!(b.suffix(1).to_string(), "1");
        let x = BitString::parse("0110").unwrap();
        let i = BitString::parse("0").unwrap();
        assert_eq!(x.concat(&i).unwrap().to_string(), "01100");
        assert_eq!(BitString::empty().concat(&x).unwrap(), x);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            BitString::parse("01a"),
            Err(Error::InvalidBitString(_))
        ));
        assert!(BitString::new(2, 4).is_err());
    }

    #[test]
    fn leading_zeros_survive_display() {
        assert_eq!(BitString::new(4, 1).unwrap().to_string(), "0001");
        assert_eq!(BitString::empty().to_string(), "");
    }
}
