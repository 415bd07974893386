//! Byte <-> nucleotide codec.
//!
//! Every byte is written as four base-4 digits, most significant first, and
//! each digit is mapped to a nucleotide with `A = 0, C = 1, G = 2, U = 3`.
//! The text "Hello" therefore becomes `CAGA CGCC CGUA CGUA CGUU`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("sequence length {0} is not a multiple of four; cannot frame into bytes")]
    LengthNotMultipleOfFour(usize),
    #[error("invalid base-4 digit {0}")]
    InvalidDigit(u8),
    #[error("invalid nucleotide character {0:?} at position {1}")]
    InvalidSymbol(char, usize),
}

/// One RNA base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Nucleotide {
    A = 0,
    C = 1,
    G = 2,
    U = 3,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::U];

    #[inline]
    pub fn digit(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn from_digit(digit: u8) -> Result<Self, CodecError> {
        match digit {
            0 => Ok(Nucleotide::A),
            1 => Ok(Nucleotide::C),
            2 => Ok(Nucleotide::G),
            3 => Ok(Nucleotide::U),
            d => Err(CodecError::InvalidDigit(d)),
        }
    }

    /// Index into per-letter arrays, `A..U` as `0..4`.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Nucleotide::A => 'A',
            Nucleotide::C => 'C',
            Nucleotide::G => 'G',
            Nucleotide::U => 'U',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' | 'a' => Some(Nucleotide::A),
            'C' | 'c' => Some(Nucleotide::C),
            'G' | 'g' => Some(Nucleotide::G),
            'U' | 'u' => Some(Nucleotide::U),
            _ => None,
        }
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// An ordered nucleotide sequence. An `n`-symbol string holds `2n` bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NucleotideString(Vec<Nucleotide>);

impl NucleotideString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Nucleotide] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Nucleotide> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Nucleotide> {
        self.0.iter()
    }

    pub fn capacity_bits(&self) -> usize {
        2 * self.0.len()
    }

    /// Per-letter counts `[A, C, G, U]`.
    pub fn letter_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for nt in &self.0 {
            counts[nt.index()] += 1;
        }
        counts
    }
}

impl From<Vec<Nucleotide>> for NucleotideString {
    fn from(v: Vec<Nucleotide>) -> Self {
        Self(v)
    }
}

impl FromIterator<Nucleotide> for NucleotideString {
    fn from_iter<I: IntoIterator<Item = Nucleotide>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for NucleotideString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|nt| nt.as_char()).collect();
        f.write_str(&s)
    }
}

impl FromStr for NucleotideString {
    type Err = CodecError;

    /// Parses `A/C/G/U` text (case-insensitive). ASCII whitespace is skipped
    /// so grouped sequences like `CAGA CGCC` parse as well.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .filter(|(_, c)| !c.is_ascii_whitespace())
            .map(|(i, c)| Nucleotide::from_char(c).ok_or(CodecError::InvalidSymbol(c, i)))
            .collect()
    }
}

pub fn encode_bytes(data: &[u8]) -> NucleotideString {
    let mut out = Vec::with_capacity(4 * data.len());
    for &byte in data {
        for shift in [6u32, 4, 2, 0] {
            let digit = (byte >> shift) & 0b11;
            // two-bit value, always a valid digit
            out.push(Nucleotide::from_digit(digit).expect("two-bit digit"));
        }
    }
    NucleotideString(out)
}

pub fn decode_bytes(s: &NucleotideString) -> Result<Vec<u8>, CodecError> {
    if !s.len().is_multiple_of(4) {
        return Err(CodecError::LengthNotMultipleOfFour(s.len()));
    }
    Ok(s.0
        .chunks_exact(4)
        .map(|group| group.iter().fold(0u16, |acc, nt| acc * 4 + u16::from(nt.digit())))
        .map(|v| {
            debug_assert!(v <= 255);
            v as u8
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nts(s: &str) -> NucleotideString {
        s.parse().unwrap()
    }

    #[test]
    fn hello_vectors() {
        let s = encode_bytes(b"Hello");
        assert_eq!(s.to_string(), "CAGACGCCCGUACGUACGUU");
        assert_eq!(decode_bytes(&nts("CAGA CGCC CGUA CGUA CGUU")).unwrap(), b"Hello");
    }

    #[test]
    fn hello_base4_groups() {
        // [72, 101, 108, 108, 111] -> [1020, 1211, 1230, 1230, 1233]
        let groups: Vec<String> = encode_bytes(b"Hello")
            .as_slice()
            .chunks(4)
            .map(|g| g.iter().map(|nt| char::from(b'0' + nt.digit())).collect())
            .collect();
        assert_eq!(groups, ["1020", "1211", "1230", "1230", "1233"]);
    }

    #[test]
    fn empty() {
        assert!(encode_bytes(b"").is_empty());
        assert_eq!(decode_bytes(&NucleotideString::new()).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn single_byte_65() {
        // 65 = 64 + 1 = 1001 in base 4
        assert_eq!(encode_bytes(&[65]).to_string(), "CAAC");
    }

    #[test]
    fn framing_error() {
        assert_eq!(decode_bytes(&nts("CAGAC")), Err(CodecError::LengthNotMultipleOfFour(5)));
    }

    #[test]
    fn digits() {
        assert_eq!(Nucleotide::A.digit(), 0);
        assert_eq!(Nucleotide::U.digit(), 3);
        assert_eq!(Nucleotide::from_digit(4), Err(CodecError::InvalidDigit(4)));
        for d in 0..4u8 {
            assert_eq!(Nucleotide::from_digit(d).unwrap().digit(), d);
        }
        for nt in Nucleotide::ALL {
            assert_eq!(Nucleotide::from_digit(nt.digit()).unwrap(), nt);
        }
    }

    #[test]
    fn bad_symbol() {
        assert_eq!("CAGT".parse::<NucleotideString>(), Err(CodecError::InvalidSymbol('T', 3)));
    }

    #[test]
    fn every_group_in_byte_range() {
        for a in Nucleotide::ALL {
            for b in Nucleotide::ALL {
                for c in Nucleotide::ALL {
                    for d in Nucleotide::ALL {
                        let s = NucleotideString::from(vec![a, b, c, d]);
                        let v = s.iter().fold(0u32, |acc, nt| acc * 4 + nt.digit() as u32);
                        assert!(v <= 255);
                        assert_eq!(decode_bytes(&s).unwrap(), vec![v as u8]);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(data in proptest::collection::vec(any::<u8>(), 0..1000)) {
            let s = encode_bytes(&data);
            prop_assert_eq!(s.len(), 4 * data.len());
            prop_assert_eq!(decode_bytes(&s).unwrap(), data);
        }

        #[test]
        fn text_round_trip(data in proptest::collection::vec(any::<u8>(), 0..64)) {
            let s = encode_bytes(&data);
            let parsed: NucleotideString = s.to_string().parse().unwrap();
            prop_assert_eq!(parsed, s);
        }
    }
}
