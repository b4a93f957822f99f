//! Binary linear codes: generating matrices, encoding, membership through a
//! derived parity-check matrix, and the masked-parity codeword choice used
//! by the Advanced Protocol.
//!
//! Internally a length-`n` word is a `u64` with string position `j` stored
//! in bit `j`, so block lengths up to 64 are supported.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use thiserror::Error;

use crate::bits::BitString;

pub const MAX_BLOCK_LENGTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("generating matrix has no rows")]
    Empty,
    #[error("row {row} has width {width}, expected {expected}")]
    RaggedRows { row: usize, width: usize, expected: usize },
    #[error("block length {0} exceeds the supported maximum of 64")]
    BlockTooLong(usize),
    #[error("rows are linearly dependent (rank {rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },
    #[error("expected length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("mask must be a non-zero string")]
    ZeroMask,
    #[error("every codeword has zero parity against this mask, so bit 1 cannot be committed")]
    RNonSeparating,
    #[error("malformed matrix text on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

fn pack(bits: &BitString) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (j, b)| acc | (u64::from(b) << j))
}

fn unpack(word: u64, n: usize) -> BitString {
    (0..n).map(|j| (word >> j) & 1 == 1).collect()
}

fn word_parity(word: u64) -> u8 {
    (word.count_ones() & 1) as u8
}

/// A member of a code's row space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword(BitString);

impl Codeword {
    pub fn bits(&self) -> &BitString {
        &self.0
    }

    pub fn into_bits(self) -> BitString {
        self.0
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// `k × n` generating matrix of a binary linear code, with its parity-check
/// matrix derived once at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    n: usize,
    rows: Vec<u64>,
    parity_check: Vec<u64>,
    d_min: Option<usize>,
}

impl GeneratorMatrix {
    pub fn new(rows: &[BitString]) -> Result<Self, CodeError> {
        let first = rows.first().ok_or(CodeError::Empty)?;
        let n = first.len();
        if n == 0 {
            return Err(CodeError::Empty);
        }
        if n > MAX_BLOCK_LENGTH {
            return Err(CodeError::BlockTooLong(n));
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(CodeError::RaggedRows {
                row,
                width: r.len(),
                expected: n,
            });
        }
        let packed: Vec<u64> = rows.iter().map(pack).collect();
        let parity_check = derive_parity_check(&packed, n)?;
        Ok(GeneratorMatrix {
            n,
            rows: packed,
            parity_check,
            d_min: None,
        })
    }

    /// Parses one row of `0`/`1` characters per non-empty line; `#` starts a
    /// comment and whitespace inside a row is ignored.
    pub fn from_text(text: &str) -> Result<Self, CodeError> {
        let mut rows = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let content: String = line
                .split('#')
                .next()
                .unwrap_or("")
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect();
            if content.is_empty() {
                continue;
            }
            let row = content.parse::<BitString>().map_err(|e| CodeError::Parse {
                line: line_no + 1,
                reason: alloc::format!("{e}"),
            })?;
            rows.push(row);
        }
        Self::new(&rows)
    }

    /// The [8,4,4] extended Hamming code in systematic form.
    pub fn extended_hamming_8_4() -> Self {
        let rows: Vec<BitString> = ["10000111", "01001011", "00101101", "00011110"]
            .iter()
            .map(|r| r.parse().expect("static matrix"))
            .collect();
        Self::new(&rows).expect("static matrix").with_min_distance(4)
    }

    /// Systematic `[I_k | A]` code of length `n` with `k = max(1, n/2)` and
    /// `A[i][j] = 1` iff `i + j` is even. Used as the default code when a
    /// block length other than 8 is requested.
    pub fn half_rate(n: usize) -> Result<Self, CodeError> {
        if n == 8 {
            return Ok(Self::extended_hamming_8_4());
        }
        if n < 2 {
            return Err(CodeError::Empty);
        }
        let k = core::cmp::max(1, n / 2);
        let rows: Vec<BitString> = (0..k)
            .map(|i| {
                (0..n)
                    .map(|j| if j < k { j == i } else { (i + (j - k)).is_multiple_of(2) })
                    .collect()
            })
            .collect();
        Self::new(&rows)
    }

    pub fn with_min_distance(mut self, d: usize) -> Self {
        self.d_min = Some(d);
        self
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min_distance(&self) -> Option<usize> {
        self.d_min
    }

    pub fn rows(&self) -> Vec<BitString> {
        self.rows.iter().map(|&r| unpack(r, self.n)).collect()
    }

    /// Rows of the derived parity-check matrix `H` (`H cᵀ = 0` iff `c ∈ C`).
    pub fn parity_check_rows(&self) -> Vec<BitString> {
        self.parity_check.iter().map(|&r| unpack(r, self.n)).collect()
    }

    /// `c = msg · G` over GF(2).
    pub fn encode(&self, msg: &BitString) -> Result<Codeword, CodeError> {
        if msg.len() != self.k() {
            return Err(CodeError::LengthMismatch {
                expected: self.k(),
                actual: msg.len(),
            });
        }
        let word = msg
            .iter()
            .zip(&self.rows)
            .filter(|(b, _)| *b == 1)
            .fold(0u64, |acc, (_, row)| acc ^ row);
        Ok(Codeword(unpack(word, self.n)))
    }

    fn encode_word(&self, msg: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(i, _)| (msg >> i) & 1 == 1)
            .fold(0u64, |acc, (_, row)| acc ^ row)
    }

    /// Membership test via the parity-check matrix. Strings of the wrong
    /// length are not codewords.
    pub fn is_codeword(&self, c: &BitString) -> bool {
        if c.len() != self.n {
            return false;
        }
        let word = pack(c);
        self.parity_check.iter().all(|&h| word_parity(h & word) == 0)
    }

    /// Wraps `c` as a [`Codeword`] if it belongs to the code.
    pub fn codeword(&self, c: BitString) -> Option<Codeword> {
        self.is_codeword(&c).then_some(Codeword(c))
    }

    /// Whether the functional `c ↦ c⊙r` is non-zero on the code.
    pub fn separates(&self, r: &BitString) -> bool {
        r.len() == self.n && {
            let mask = pack(r);
            self.rows.iter().any(|&g| word_parity(g & mask) == 1)
        }
    }

    /// A uniformly random codeword `c` with `c⊙r = b`.
    ///
    /// The constraint is linear in the message: with `w_i = g_i⊙r`, a uniform
    /// message is drawn and, if its parity against `w` is wrong, one bit in
    /// the support of `w` is flipped. That map is a bijection between the two
    /// parity classes, so the result is uniform.
    pub fn choose_codeword<R: Rng + ?Sized>(&self, r: &BitString, b: u8, rng: &mut R) -> Result<Codeword, CodeError> {
        if r.len() != self.n {
            return Err(CodeError::LengthMismatch {
                expected: self.n,
                actual: r.len(),
            });
        }
        let mask = pack(r);
        if mask == 0 {
            return Err(CodeError::ZeroMask);
        }
        let k = self.k();
        let w = self
            .rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &g)| acc | (u64::from(word_parity(g & mask)) << i));
        let b = b & 1;
        if w == 0 && b == 1 {
            return Err(CodeError::RNonSeparating);
        }
        let mut msg = if k == 64 {
            rng.random::<u64>()
        } else {
            rng.random::<u64>() & ((1u64 << k) - 1)
        };
        if w != 0 && word_parity(msg & w) != b {
            msg ^= 1u64 << w.trailing_zeros();
        }
        Ok(Codeword(unpack(self.encode_word(msg), self.n)))
    }

    /// Every codeword, in message order. Intended for small `k`.
    pub fn codewords(&self) -> Vec<BitString> {
        assert!(self.k() <= 24, "codeword enumeration is limited to k <= 24");
        (0..1u64 << self.k())
            .map(|m| unpack(self.encode_word(m), self.n))
            .collect()
    }
}

/// `c⊙r`: parity of the bitwise AND.
pub fn dot_parity(c: &BitString, r: &BitString) -> Result<u8, CodeError> {
    if c.len() != r.len() {
        return Err(CodeError::LengthMismatch {
            expected: c.len(),
            actual: r.len(),
        });
    }
    Ok(c.iter().zip(r.iter()).fold(0, |acc, (a, b)| acc ^ (a & b)))
}

pub fn encode(msg: &BitString, g: &GeneratorMatrix) -> Result<Codeword, CodeError> {
    g.encode(msg)
}

pub fn is_codeword(c: &BitString, g: &GeneratorMatrix) -> bool {
    g.is_codeword(c)
}

pub fn choose_codeword<R: Rng + ?Sized>(
    g: &GeneratorMatrix,
    r: &BitString,
    b: u8,
    rng: &mut R,
) -> Result<Codeword, CodeError> {
    g.choose_codeword(r, b, rng)
}

/// Reduced row echelon form, then one parity-check row per free column.
fn derive_parity_check(rows: &[u64], n: usize) -> Result<Vec<u64>, CodeError> {
    let mut rref = rows.to_vec();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        let bit = 1u64 << col;
        let Some(found) = (rank..rref.len()).find(|&r| rref[r] & bit != 0) else {
            continue;
        };
        rref.swap(rank, found);
        let pivot_row = rref[rank];
        for (r, row) in rref.iter_mut().enumerate() {
            if r != rank && *row & bit != 0 {
                *row ^= pivot_row;
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == rref.len() {
            break;
        }
    }
    if rank < rows.len() {
        return Err(CodeError::RankDeficient { rank, rows: rows.len() });
    }
    Ok((0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            pivots
                .iter()
                .enumerate()
                .filter(|(i, _)| rref[*i] >> free & 1 == 1)
                .fold(1u64 << free, |h, (_, &p)| h | (1u64 << p))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn small() -> GeneratorMatrix {
        GeneratorMatrix::new(&[bits("101"), bits("011")]).unwrap()
    }

    #[test]
    fn encode_examples() {
        let g = small();
        assert_eq!(g.encode(&bits("00")).unwrap().bits(), &bits("000"));
        assert_eq!(g.encode(&bits("11")).unwrap().bits(), &bits("110"));
        assert!(matches!(g.encode(&bits("1")), Err(CodeError::LengthMismatch { .. })));
    }

    #[test]
    fn membership_examples() {
        let g = small();
        assert!(g.is_codeword(&bits("000")));
        assert!(!g.is_codeword(&bits("111")));
        for c in ["000", "101", "011", "110"] {
            assert!(g.is_codeword(&bits(c)));
        }
        assert!(!g.is_codeword(&bits("00")));
    }

    #[test]
    fn dot_parity_examples() {
        assert_eq!(dot_parity(&bits("101"), &bits("110")).unwrap(), 1);
        assert_eq!(dot_parity(&bits("111"), &bits("000")).unwrap(), 0);
        assert!(dot_parity(&bits("1"), &bits("10")).is_err());
    }

    #[test]
    fn choose_codeword_examples() {
        let g = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = alloc::collections::BTreeSet::new();
        for _ in 0..200 {
            let c = g.choose_codeword(&bits("100"), 1, &mut rng).unwrap();
            seen.insert(c.into_bits().to_string());
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), ["101", "110"]);
        assert_eq!(
            g.choose_codeword(&bits("111"), 1, &mut rng),
            Err(CodeError::RNonSeparating)
        );
        assert!(g.choose_codeword(&bits("111"), 0, &mut rng).is_ok());
        assert_eq!(g.choose_codeword(&bits("000"), 0, &mut rng), Err(CodeError::ZeroMask));
    }

    #[test]
    fn rank_deficiency_is_rejected() {
        let err = GeneratorMatrix::new(&[bits("101"), bits("101")]).unwrap_err();
        assert_eq!(err, CodeError::RankDeficient { rank: 1, rows: 2 });
        assert!(matches!(
            GeneratorMatrix::new(&[bits("101"), bits("01")]),
            Err(CodeError::RaggedRows { row: 1, .. })
        ));
    }

    #[test]
    fn hamming_code_has_distance_four() {
        let g = GeneratorMatrix::extended_hamming_8_4();
        assert_eq!((g.k(), g.n()), (4, 8));
        let min_weight = g
            .codewords()
            .iter()
            .filter(|c| c.weight() > 0)
            .map(|c| c.weight())
            .min();
        assert_eq!(min_weight, Some(4));
        assert_eq!(g.parity_check_rows().len(), 4);
    }

    #[test]
    fn half_rate_family_is_full_rank() {
        for n in 2..=12 {
            let g = GeneratorMatrix::half_rate(n).unwrap();
            assert_eq!(g.n(), n);
            assert!(g.k() >= 1);
        }
    }

    #[test]
    fn text_parsing() {
        let g = GeneratorMatrix::from_text("# small code\n1 0 1\n\n011  # second row\n").unwrap();
        assert_eq!(g, small());
        assert!(matches!(
            GeneratorMatrix::from_text("10x"),
            Err(CodeError::Parse { line: 1, .. })
        ));
    }
}
