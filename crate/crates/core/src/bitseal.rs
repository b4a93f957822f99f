//! Sealing a single bit inside a sealed string.
//!
//! The string is laid out as a fixed 32-bit rule header followed by the
//! payload and dummy positions. The header tells an honest reader which
//! positions carry the bit and how to measure them:
//!
//! ```text
//! bit  0..4   tag        1 = parity of positions, 2 = rotated pair parity, 3 = no clue
//! bit  4..16  field A    first position
//! bit 16..28  field B    last position (parity) or angle in degrees (rotated pair)
//! bit 28..32  reserved   must be zero
//! ```
//!
//! Fields are big-endian; header bit 0 is string position 0. Positions are
//! absolute indices into the sealed string. A parity rule covers the
//! contiguous range `first..=last`; a rotated pair covers `first` and
//! `first + 1`, both encoded in `Basis2(angle)`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::chance::OutcomeSource;
use crate::quantum::Basis2;
use crate::seal::{seal_in_frames, OwnerRecord, PublicRegisters, SealError, SealParams};

pub const HEADER_BITS: usize = 32;
pub const FIELD_MAX: usize = (1 << 12) - 1;

const TAG_PARITY: u64 = 1;
const TAG_ROTATED: u64 = 2;
const TAG_NO_CLUE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BitSealError {
    #[error("malformed rule header: {0}")]
    MalformedHeader(&'static str),
    #[error("invalid rule: {0}")]
    InvalidRule(&'static str),
    #[error("rule needs positions up to {required} but the string has {available} bits")]
    CapacityExceeded { required: usize, available: usize },
    #[error(transparent)]
    Seal(#[from] SealError),
}

/// How the sealed bit is derived from the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappingRule {
    /// Parity of the computational-basis values at `first..=last`.
    ParityOfPositions { first: usize, last: usize },
    /// Parity of the `Basis2(angle)` outcomes at `first` and `first + 1`.
    RotatedPairParity { first: usize, angle_degrees: u16 },
    /// A header that points nowhere; honest readers report it as indeterminate.
    NoClue,
}

impl MappingRule {
    pub fn parity(first: usize, last: usize) -> Result<Self, BitSealError> {
        let rule = MappingRule::ParityOfPositions { first, last };
        rule.validate()?;
        Ok(rule)
    }

    pub fn rotated_pair(first: usize, angle_degrees: u16) -> Result<Self, BitSealError> {
        let rule = MappingRule::RotatedPairParity { first, angle_degrees };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), BitSealError> {
        match *self {
            MappingRule::ParityOfPositions { first, last } => {
                if first > last {
                    return Err(BitSealError::InvalidRule("parity range is empty"));
                }
                if last > FIELD_MAX {
                    return Err(BitSealError::InvalidRule("position does not fit in 12 bits"));
                }
            }
            MappingRule::RotatedPairParity { first, angle_degrees } => {
                if first >= FIELD_MAX {
                    return Err(BitSealError::InvalidRule("position does not fit in 12 bits"));
                }
                if angle_degrees >= 180 {
                    return Err(BitSealError::InvalidRule("angle must be below 180 degrees"));
                }
            }
            MappingRule::NoClue => {}
        }
        Ok(())
    }

    /// Positions the rule reads, in order.
    pub fn positions(&self) -> Vec<usize> {
        match *self {
            MappingRule::ParityOfPositions { first, last } => (first..=last).collect(),
            MappingRule::RotatedPairParity { first, .. } => alloc::vec![first, first + 1],
            MappingRule::NoClue => Vec::new(),
        }
    }

    /// Measurement basis for the payload positions.
    pub fn basis(&self) -> Basis2 {
        match *self {
            MappingRule::RotatedPairParity { angle_degrees, .. } => Basis2::new(f64::from(angle_degrees) * PI / 180.0),
            _ => Basis2::COMPUTATIONAL,
        }
    }
}

pub fn encode_rule(rule: &MappingRule) -> Result<BitString, BitSealError> {
    rule.validate()?;
    let (tag, a, b) = match *rule {
        MappingRule::ParityOfPositions { first, last } => (TAG_PARITY, first as u64, last as u64),
        MappingRule::RotatedPairParity { first, angle_degrees } => {
            (TAG_ROTATED, first as u64, u64::from(angle_degrees))
        }
        MappingRule::NoClue => (TAG_NO_CLUE, 0, 0),
    };
    Ok(BitString::from_word(tag << 28 | a << 16 | b << 4, HEADER_BITS))
}

pub fn decode_rule(header: &BitString) -> Result<MappingRule, BitSealError> {
    if header.len() != HEADER_BITS {
        return Err(BitSealError::MalformedHeader("header must be 32 bits"));
    }
    let word = header.to_word();
    if word & 0xF != 0 {
        return Err(BitSealError::MalformedHeader("reserved bits set"));
    }
    let a = ((word >> 16) & 0xFFF) as usize;
    let b = ((word >> 4) & 0xFFF) as usize;
    let rule = match word >> 28 {
        TAG_PARITY => MappingRule::ParityOfPositions { first: a, last: b },
        TAG_ROTATED => MappingRule::RotatedPairParity {
            first: a,
            angle_degrees: b as u16,
        },
        TAG_NO_CLUE if a == 0 && b == 0 => MappingRule::NoClue,
        TAG_NO_CLUE => return Err(BitSealError::MalformedHeader("no-clue header with non-zero fields")),
        _ => return Err(BitSealError::MalformedHeader("unknown rule tag")),
    };
    rule.validate()
        .map_err(|_| BitSealError::MalformedHeader("fields out of range"))?;
    Ok(rule)
}

/// Where the header, payload and dummies sit in a sealed string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSealLayout {
    pub rule: MappingRule,
    pub header: Range<usize>,
    pub payload: Vec<usize>,
    pub dummies: Vec<usize>,
    pub total: usize,
}

impl BitSealLayout {
    pub fn new(rule: MappingRule, total: usize) -> Result<Self, BitSealError> {
        rule.validate()?;
        let payload = rule.positions();
        let required = payload.iter().map(|p| p + 1).max().unwrap_or(0).max(HEADER_BITS);
        if required > total {
            return Err(BitSealError::CapacityExceeded {
                required,
                available: total,
            });
        }
        if payload.iter().any(|&p| p < HEADER_BITS) {
            return Err(BitSealError::InvalidRule("payload overlaps the header"));
        }
        let dummies = (HEADER_BITS..total).filter(|p| !payload.contains(p)).collect();
        Ok(BitSealLayout {
            rule,
            header: 0..HEADER_BITS,
            payload,
            dummies,
            total,
        })
    }

    pub fn header_positions(&self) -> Vec<usize> {
        self.header.clone().collect()
    }
}

/// Outcome of an honest bit read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitReading {
    Bit(u8),
    Indeterminate,
}

impl BitReading {
    pub fn bit(self) -> Option<u8> {
        match self {
            BitReading::Bit(b) => Some(b),
            BitReading::Indeterminate => None,
        }
    }
}

/// Seals bit `b` under `rule` into a string of `params.length()` qubits.
pub fn seal_bit<R: Rng + ?Sized>(
    b: u8,
    rule: MappingRule,
    params: &SealParams,
    rng: &mut R,
) -> Result<(PublicRegisters, OwnerRecord, BitSealLayout), BitSealError> {
    let layout = BitSealLayout::new(rule, params.length())?;
    let mut bits = BitString::random(layout.total, rng);
    let header = encode_rule(&rule)?;
    for (i, h) in header.iter().enumerate() {
        bits.set(i, h);
    }
    if let Some((&last, rest)) = layout.payload.split_last() {
        let partial = rest.iter().fold(0, |acc, &p| acc ^ bits.get(p));
        bits.set(last, partial ^ (b & 1));
    }
    let mut frames = alloc::vec![0.0; layout.total];
    let basis = rule.basis();
    for &p in &layout.payload {
        frames[p] = basis.angle;
    }
    let (regs, record) = seal_in_frames(&bits, &frames, params, rng)?;
    Ok((regs, record, layout))
}

/// Like [`seal_bit`], but with probability `no_clue_probability` the header
/// is replaced by a no-clue rule and every non-header position is a dummy.
pub fn seal_bit_with_no_clue<R: Rng + ?Sized>(
    b: u8,
    rule: MappingRule,
    no_clue_probability: f64,
    params: &SealParams,
    rng: &mut R,
) -> Result<(PublicRegisters, OwnerRecord, BitSealLayout), BitSealError> {
    let p = no_clue_probability.clamp(0.0, 1.0);
    let rule = if p > 0.0 && rng.random_bool(p) {
        MappingRule::NoClue
    } else {
        rule
    };
    seal_bit(b, rule, params, rng)
}

/// Honest reading: decode the header, then measure the payload as the rule
/// prescribes. Dummies are left untouched.
pub fn read_bit<Q: OutcomeSource + ?Sized>(
    regs: &mut PublicRegisters,
    source: &mut Q,
) -> Result<BitReading, BitSealError> {
    if regs.len() < HEADER_BITS {
        return Err(BitSealError::MalformedHeader("string shorter than the header"));
    }
    let mut header = BitString::new();
    for i in 0..HEADER_BITS {
        header.push(regs.measure_z(i, source)?);
    }
    let rule = decode_rule(&header)?;
    let positions = rule.positions();
    if positions.iter().any(|&p| p < HEADER_BITS || p >= regs.len()) {
        return Err(BitSealError::MalformedHeader("payload positions outside the string"));
    }
    if rule == MappingRule::NoClue {
        return Ok(BitReading::Indeterminate);
    }
    let basis = rule.basis();
    let mut parity = 0;
    for p in positions {
        parity ^= regs.measure_basis(p, basis, source)?;
    }
    Ok(BitReading::Bit(parity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seal::check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize) -> SealParams {
        SealParams::new(PI / 8.0, 0.25, n).unwrap()
    }

    fn tiny(n: usize) -> SealParams {
        SealParams::new(1e-12, 0.25, n).unwrap()
    }

    #[test]
    fn header_round_trips() {
        let rules = [
            MappingRule::ParityOfPositions { first: 0, last: 1 },
            MappingRule::RotatedPairParity {
                first: 62,
                angle_degrees: 15,
            },
            MappingRule::NoClue,
        ];
        for rule in rules {
            let header = encode_rule(&rule).unwrap();
            assert_eq!(header.len(), HEADER_BITS);
            assert_eq!(decode_rule(&header).unwrap(), rule);
        }
        assert!((MappingRule::rotated_pair(62, 15).unwrap().basis().angle - PI / 12.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(
            decode_rule(&BitString::zeros(16)),
            Err(BitSealError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_rule(&BitString::zeros(32)),
            Err(BitSealError::MalformedHeader(_))
        ));
        let mut reserved = encode_rule(&MappingRule::NoClue).unwrap();
        reserved.set(31, 1);
        assert!(decode_rule(&reserved).is_err());
        let rotated = BitString::from_word(2 << 28 | 40 << 16 | 200 << 4, 32);
        assert!(decode_rule(&rotated).is_err());
    }

    #[test]
    fn parity_payload_is_uniform_over_matching_strings() {
        let rule = MappingRule::parity(32, 33).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut count_00 = 0;
        let trials = 4000;
        for _ in 0..trials {
            let (_, record, layout) = seal_bit(0, rule, &tiny(40), &mut rng).unwrap();
            let payload = record.bits.select(&layout.payload);
            assert_eq!(payload.parity(), 0);
            if payload.weight() == 0 {
                count_00 += 1;
            }
        }
        let f = count_00 as f64 / trials as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / trials as f64).sqrt());
    }

    #[test]
    fn rotated_pair_carries_parity_in_frame() {
        let rule = MappingRule::rotated_pair(62, 15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (_, record, _) = seal_bit(1, rule, &params(64), &mut rng).unwrap();
            assert_eq!(record.bits.get(62) ^ record.bits.get(63), 1);
            assert!((record.frames[62] - PI / 12.0).abs() < 1e-15);
            assert_eq!(record.frames[10], 0.0);
        }
    }

    #[test]
    fn zero_wobble_reads_exactly_and_repeatably() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for rule in [
            MappingRule::parity(32, 39).unwrap(),
            MappingRule::rotated_pair(46, 15).unwrap(),
        ] {
            for b in [0, 1] {
                let (mut regs, _, _) = seal_bit(b, rule, &tiny(48), &mut rng).unwrap();
                assert_eq!(read_bit(&mut regs, &mut rng).unwrap(), BitReading::Bit(b));
                assert_eq!(read_bit(&mut regs, &mut rng).unwrap(), BitReading::Bit(b));
            }
        }
    }

    #[test]
    fn no_clue_reads_as_indeterminate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut regs, _, layout) = seal_bit(1, MappingRule::NoClue, &tiny(40), &mut rng).unwrap();
        assert_eq!(layout.dummies.len(), 8);
        assert_eq!(read_bit(&mut regs, &mut rng).unwrap(), BitReading::Indeterminate);
        let (mut regs, _, _) =
            seal_bit_with_no_clue(1, MappingRule::parity(32, 33).unwrap(), 1.0, &tiny(40), &mut rng).unwrap();
        assert_eq!(read_bit(&mut regs, &mut rng).unwrap(), BitReading::Indeterminate);
    }

    #[test]
    fn capacity_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = seal_bit(0, MappingRule::parity(32, 40).unwrap(), &tiny(36), &mut rng).unwrap_err();
        assert_eq!(
            err,
            BitSealError::CapacityExceeded {
                required: 41,
                available: 36
            }
        );
        assert!(seal_bit(0, MappingRule::parity(0, 1).unwrap(), &tiny(36), &mut rng).is_err());
    }

    #[test]
    fn unread_seal_passes_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut regs, record, _) =
            seal_bit(1, MappingRule::rotated_pair(62, 15).unwrap(), &params(64), &mut rng).unwrap();
        assert!(check(&mut regs, &record, &mut rng).unwrap().is_unread());
    }
}
