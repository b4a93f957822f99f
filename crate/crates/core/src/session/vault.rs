//! The owner's sealed registers, in either register mode.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;

use super::{RegisterMode, SessionError};
use crate::bits::BitString;
use crate::bitseal::{read_bit, seal_bit_with_no_clue, BitReading, BitSealLayout, HEADER_BITS};
use crate::chance::OutcomeSource;
use crate::seal::{self, check_indices, OwnerRecord, PublicRegisters, SealParams};

/// The registers an owner sealed for one session, together with the owner's
/// private record of them.
pub enum SealedRegisters {
    Qubits {
        regs: PublicRegisters,
        record: OwnerRecord,
    },
    Strings {
        regs: Vec<PublicRegisters>,
        records: Vec<OwnerRecord>,
        layouts: Vec<BitSealLayout>,
        bits: BitString,
    },
}

impl SealedRegisters {
    pub fn seal<R: Rng + ?Sized>(
        x: &BitString,
        mode: &RegisterMode,
        params: &SealParams,
        rng: &mut R,
    ) -> Result<Self, SessionError> {
        match mode {
            RegisterMode::Qubit => {
                let (regs, record) = seal::seal(x, params, rng)?;
                Ok(SealedRegisters::Qubits { regs, record })
            }
            RegisterMode::BitSeal {
                rule,
                no_clue_probability,
            } => {
                let mut regs = Vec::with_capacity(x.len());
                let mut records = Vec::with_capacity(x.len());
                let mut layouts = Vec::with_capacity(x.len());
                for b in x.iter() {
                    let (r, rec, lay) = seal_bit_with_no_clue(b, *rule, *no_clue_probability, params, rng)?;
                    regs.push(r);
                    records.push(rec);
                    layouts.push(lay);
                }
                Ok(SealedRegisters::Strings {
                    regs,
                    records,
                    layouts,
                    bits: x.clone(),
                })
            }
        }
    }

    pub fn from_qubits(regs: PublicRegisters, record: OwnerRecord) -> Self {
        SealedRegisters::Qubits { regs, record }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len(&self) -> usize {
        match self {
            SealedRegisters::Qubits { regs, .. } => regs.len(),
            SealedRegisters::Strings { regs, .. } => regs.len(),
        }
    }

    /// The bit the owner sealed in register `i`.
    pub fn owner_bit(&self, i: usize) -> u8 {
        match self {
            SealedRegisters::Qubits { record, .. } => record.bits.get(i),
            SealedRegisters::Strings { bits, .. } => bits.get(i),
        }
    }

    /// Whether the owner's record marks register `i` as carrying no clue.
    pub fn is_no_clue(&self, i: usize) -> bool {
        match self {
            SealedRegisters::Qubits { .. } => false,
            SealedRegisters::Strings { layouts, .. } => layouts[i].payload.is_empty(),
        }
    }

    /// Honest decoding. `None` means the register carried no clue.
    pub fn decode<Q: OutcomeSource + ?Sized>(&mut self, i: usize, source: &mut Q) -> Result<Option<u8>, SessionError> {
        match self {
            SealedRegisters::Qubits { regs, .. } => Ok(Some(regs.measure_z(i, source)?)),
            SealedRegisters::Strings { regs, .. } => match read_bit(&mut regs[i], source) {
                Ok(BitReading::Bit(b)) => Ok(Some(b)),
                Ok(BitReading::Indeterminate) => Ok(None),
                // A header misread as garbage is reported like a no-clue seal.
                Err(crate::bitseal::BitSealError::MalformedHeader(_)) => Ok(None),
                Err(e) => Err(e.into()),
            },
        }
    }

    /// Runs the owner's check on `indices`; returns the registers that failed.
    pub fn check<Q: OutcomeSource + ?Sized>(
        &mut self,
        indices: &[usize],
        source: &mut Q,
    ) -> Result<BTreeSet<usize>, SessionError> {
        match self {
            SealedRegisters::Qubits { regs, record } => {
                Ok(check_indices(regs, record, indices, source)?.failed_indices)
            }
            SealedRegisters::Strings { regs, records, .. } => {
                let mut failed = BTreeSet::new();
                for &i in indices {
                    if !seal::check(&mut regs[i], &records[i], source)?.is_unread() {
                        failed.insert(i);
                    }
                }
                Ok(failed)
            }
        }
    }

    /// Per-register honest decoding error bound used by the spot check.
    pub fn epsilon(&self, params: &SealParams) -> f64 {
        match self {
            SealedRegisters::Qubits { .. } => params.max_error_rate(),
            SealedRegisters::Strings { layouts, .. } => {
                let widest = layouts.iter().map(|l| l.payload.len()).max().unwrap_or(0);
                ((HEADER_BITS + widest) as f64 * params.max_error_rate()).min(1.0)
            }
        }
    }

    pub fn qubits_mut(&mut self) -> Option<&mut PublicRegisters> {
        match self {
            SealedRegisters::Qubits { regs, .. } => Some(regs),
            SealedRegisters::Strings { .. } => None,
        }
    }

    pub fn record(&self) -> Option<&OwnerRecord> {
        match self {
            SealedRegisters::Qubits { record, .. } => Some(record),
            SealedRegisters::Strings { .. } => None,
        }
    }
}
