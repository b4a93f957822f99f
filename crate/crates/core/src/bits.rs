//! Classical bit strings.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// A string of classical bits. Position 0 is the leftmost character of the
/// textual form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString(Vec<u8>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid bit character {found:?} at position {position}")]
pub struct ParseBitsError {
    pub position: usize,
    pub found: char,
}

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        BitString(alloc::vec![0; len])
    }

    /// Builds a string from 0/1 values; returns `None` if any entry is not a bit.
    pub fn from_bits(bits: &[u8]) -> Option<Self> {
        if bits.iter().all(|&b| b <= 1) {
            Some(BitString(bits.to_vec()))
        } else {
            None
        }
    }

    /// Uniformly random string of the given length.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        (0..len).map(|_| rng.random::<bool>()).collect()
    }

    /// The low `len` bits of `word`, most significant first.
    pub fn from_word(word: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        (0..len).map(|i| (word >> (len - 1 - i)) & 1 == 1).collect()
    }

    /// Inverse of [`BitString::from_word`]; position 0 becomes the most significant bit.
    pub fn to_word(&self) -> u64 {
        debug_assert!(self.len() <= 64);
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        self.0[i] = bit & 1;
    }

    pub fn push(&mut self, bit: u8) {
        self.0.push(bit & 1);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn parity(&self) -> u8 {
        self.0.iter().fold(0, |acc, &b| acc ^ b)
    }

    /// Bitwise XOR.
    ///
    /// # Panics
    /// If the lengths differ.
    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len(), other.len(), "xor of bit strings with different lengths");
        BitString(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    /// The bits at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> BitString {
        BitString(positions.iter().map(|&p| self.0[p]).collect())
    }

    /// Packs the bits MSB-first into bytes; the final byte is zero padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
            .collect()
    }

    /// Inverse of [`BitString::to_bytes`] for a known bit length.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        Some((0..len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString(iter.into_iter().map(u8::from).collect())
    }
}

impl FromStr for BitString {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, c)| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                found => Err(ParseBitsError { position, found }),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let b: BitString = "10110".parse().unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b.weight(), 3);
        assert_eq!(b.parity(), 1);
        assert_eq!(b.to_string(), "10110");
        assert_eq!("10a".parse::<BitString>().unwrap_err().position, 2);
    }

    #[test]
    fn word_conversion_is_msb_first() {
        let b: BitString = "110".parse().unwrap();
        assert_eq!(b.to_word(), 0b110);
        assert_eq!(BitString::from_word(0b011, 3).to_string(), "011");
    }

    #[test]
    fn bytes_round_trip() {
        let b: BitString = "1011001110".parse().unwrap();
        let bytes = b.to_bytes();
        assert_eq!(bytes, [0b1011_0011, 0b1000_0000]);
        assert_eq!(BitString::from_bytes(&bytes, 10).unwrap(), b);
        assert!(BitString::from_bytes(&bytes, 17).is_none());
    }
}
