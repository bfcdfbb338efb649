//! Bit sequences are plain `Vec<u8>` with values 0 or 1.

use crate::{Error, Result};

pub type Bit = u8;

pub fn to_string(bits: &[Bit]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn from_str(s: &str) -> Result<Vec<Bit>> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Config(format!("non-binary character {other:?} in bit string"))),
        })
        .collect()
}

/// Bits of an `n`-bit word, most significant first.
pub fn unpack(word: u64, n: usize) -> Vec<Bit> {
    (0..n).map(|k| ((word >> (n - 1 - k)) & 1) as Bit).collect()
}

pub fn pack(bits: &[Bit]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack_roundtrip() {
        for w in [0u64, 1, 0b1011, 0b0010] {
            assert_eq!(pack(&unpack(w, 4)), w);
        }
        assert_eq!(unpack(0b10, 2), vec![1, 0]);
    }

    #[test]
    fn string_roundtrip() {
        let b = from_str("10110").unwrap();
        assert_eq!(b, vec![1, 0, 1, 1, 0]);
        assert_eq!(to_string(&b), "10110");
        assert!(from_str("10x").is_err());
    }
}
