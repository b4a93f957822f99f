//! The quantum string seal: sealing an N-bit string into slightly rotated
//! qubits, honest reading, and the sealer's projection check.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::chance::OutcomeSource;
use crate::math::{cos, exp2, log2, powf, sin};
use crate::quantum::{Basis2, JointState, PureQubit, QuantumError, DEFAULT_ARITY_CAP};

/// Default upper bound on the wobble scale Θ.
pub const DEFAULT_THETA_CAP: f64 = core::f64::consts::PI / 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SealError {
    #[error("invalid seal parameters: {0}")]
    InvalidParams(&'static str),
    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("register {index} is part of a joint state and cannot be read individually")]
    RegisterEntangled { index: usize },
    #[error("register index {index} out of range for {len} registers")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("owner record covers {record} registers but {registers} are present")]
    IdMismatch { record: usize, registers: usize },
    #[error("wobble angle {theta} at index {index} exceeds the bound {bound}")]
    AngleOutOfRange { index: usize, theta: f64, bound: f64 },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Wobble scale Θ, shrink exponent α and string length N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SealParams {
    theta_max: f64,
    alpha: f64,
    length: usize,
}

impl SealParams {
    pub fn new(theta_max: f64, alpha: f64, length: usize) -> Result<Self, SealError> {
        Self::with_theta_cap(theta_max, alpha, length, DEFAULT_THETA_CAP)
    }

    /// Like [`SealParams::new`] with a custom upper bound on Θ (which must
    /// itself stay below π/4).
    pub fn with_theta_cap(theta_max: f64, alpha: f64, length: usize, theta_cap: f64) -> Result<Self, SealError> {
        if !(theta_cap > 0.0 && theta_cap < core::f64::consts::FRAC_PI_4) {
            return Err(SealError::InvalidParams("theta cap must lie in (0, pi/4)"));
        }
        if !(theta_max > 0.0 && theta_max <= theta_cap) {
            return Err(SealError::InvalidParams("theta_max must lie in (0, theta cap]"));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(SealError::InvalidParams("alpha must lie in (0, 1/2)"));
        }
        if length == 0 {
            return Err(SealError::InvalidParams("string length must be at least 1"));
        }
        Ok(SealParams {
            theta_max,
            alpha,
            length,
        })
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Same Θ and α for a string of another length.
    pub fn with_length(&self, length: usize) -> Result<Self, SealError> {
        if length == 0 {
            return Err(SealError::InvalidParams("string length must be at least 1"));
        }
        Ok(SealParams { length, ..*self })
    }

    /// Largest allowed wobble magnitude, Θ / N^α.
    pub fn wobble_bound(&self) -> f64 {
        self.theta_max / powf(self.length as f64, self.alpha)
    }

    /// Maximum honest per-bit reading error, sin²(Θ / N^α).
    pub fn max_error_rate(&self) -> f64 {
        let s = sin(self.wobble_bound());
        s * s
    }
}

/// The sealer's secret: sealed bits, wobble angles, and the frame each bit
/// was encoded in (0 for the computational basis).
#[derive(Debug, Clone, PartialEq)]
pub struct OwnerRecord {
    pub bits: BitString,
    pub thetas: Vec<f64>,
    pub frames: Vec<f64>,
    pub params: SealParams,
}

impl OwnerRecord {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The state register `i` was prepared in.
    pub fn expected_state(&self, i: usize) -> PureQubit {
        Basis2::new(self.frames[i]).sealed(self.bits.get(i), self.thetas[i])
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Single(PureQubit),
    Grouped(usize),
}

#[derive(Debug, Clone)]
struct Group {
    members: Vec<usize>,
    state: JointState,
}

/// The reader-visible qubits. Registers normally hold single qubits; a joint
/// measurement merges the registers it touches into a shared [`JointState`],
/// and registers are split back out as soon as they become unentangled.
#[derive(Debug, Clone)]
pub struct PublicRegisters {
    slots: Vec<Slot>,
    groups: BTreeMap<usize, Group>,
    next_group: usize,
    arity_cap: usize,
}

impl PublicRegisters {
    pub fn new(qubits: Vec<PureQubit>) -> Self {
        PublicRegisters {
            slots: qubits.into_iter().map(Slot::Single).collect(),
            groups: BTreeMap::new(),
            next_group: 0,
            arity_cap: DEFAULT_ARITY_CAP,
        }
    }

    pub fn with_arity_cap(mut self, arity_cap: usize) -> Self {
        self.arity_cap = arity_cap;
        self
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The qubit in register `i`, or `None` if it lives inside a joint state.
    pub fn qubit(&self, i: usize) -> Option<PureQubit> {
        match self.slots.get(i)? {
            Slot::Single(q) => Some(*q),
            Slot::Grouped(_) => None,
        }
    }

    pub fn is_entangled(&self, i: usize) -> bool {
        matches!(self.slots.get(i), Some(Slot::Grouped(_)))
    }

    /// Registers sharing a joint state with `i` (including `i`), in qubit order.
    pub fn group_members(&self, i: usize) -> Option<&[usize]> {
        match self.slots.get(i)? {
            Slot::Grouped(g) => Some(&self.groups[g].members),
            Slot::Single(_) => None,
        }
    }

    pub fn joint_state_count(&self) -> usize {
        self.groups.len()
    }

    fn check_index(&self, i: usize) -> Result<(), SealError> {
        if i >= self.slots.len() {
            Err(SealError::IndexOutOfRange {
                index: i,
                len: self.slots.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Computational-basis measurement of register `i`.
    pub fn measure_z<Q: OutcomeSource + ?Sized>(&mut self, i: usize, source: &mut Q) -> Result<u8, SealError> {
        self.check_index(i)?;
        match self.slots[i] {
            Slot::Single(q) => {
                let (outcome, post) = q.measure_z(source);
                self.slots[i] = Slot::Single(post);
                Ok(outcome)
            }
            Slot::Grouped(_) => Ok(u8::from(!self.project_register(i, PureQubit::ZERO, source)?)),
        }
    }

    /// Measurement of register `i` in a rotated basis.
    pub fn measure_basis<Q: OutcomeSource + ?Sized>(
        &mut self,
        i: usize,
        basis: Basis2,
        source: &mut Q,
    ) -> Result<u8, SealError> {
        self.check_index(i)?;
        match self.slots[i] {
            Slot::Single(q) => {
                let (outcome, post) = q.measure_basis(basis, source);
                self.slots[i] = Slot::Single(post);
                Ok(outcome)
            }
            Slot::Grouped(_) => Ok(u8::from(!self.project_register(i, basis.vector(0), source)?)),
        }
    }

    /// Projects register `i` onto `target`; returns whether it succeeded.
    pub fn project_register<Q: OutcomeSource + ?Sized>(
        &mut self,
        i: usize,
        target: PureQubit,
        source: &mut Q,
    ) -> Result<bool, SealError> {
        self.check_index(i)?;
        match self.slots[i] {
            Slot::Single(q) => {
                let (ok, post) = q.project(target, source);
                self.slots[i] = Slot::Single(post);
                Ok(ok)
            }
            Slot::Grouped(g) => {
                let group = self.groups.remove(&g).expect("group exists");
                let position = group.members.iter().position(|&m| m == i).expect("member");
                let (ok, post) = group.state.project_qubit(position, target, source)?;
                let kept = if ok { target } else { target.orthogonal() };
                let (_, rest) = post.factor_qubit(position)?.ok_or(QuantumError::NotProductState)?;
                self.slots[i] = Slot::Single(kept);
                let mut members = group.members;
                members.remove(position);
                self.install_group(members, rest);
                Ok(ok)
            }
        }
    }

    /// Joint two-outcome measurement over `indices`. `accept` receives the
    /// basis string of the requested registers packed with `indices[0]` as
    /// the most significant bit. Registers already sharing a joint state with
    /// any requested register are merged in.
    pub fn project_joint<Q: OutcomeSource + ?Sized>(
        &mut self,
        indices: &[usize],
        accept: impl Fn(usize) -> bool,
        source: &mut Q,
    ) -> Result<bool, SealError> {
        let (members, state, keys) = self.merged_view(indices)?;
        for &i in &members {
            if let Slot::Grouped(g) = self.slots[i] {
                self.groups.remove(&g);
            }
        }
        let outcome = state.project_subset(|x| accept(keys[x]), source);
        self.install_group(members, outcome.post);
        Ok(outcome.success)
    }

    /// Success probability `project_joint` would have, without measuring.
    pub fn joint_probability(&self, indices: &[usize], accept: impl Fn(usize) -> bool) -> Result<f64, SealError> {
        let (_, state, keys) = self.merged_view(indices)?;
        Ok(state.subset_probability(|x| accept(keys[x])))
    }

    fn merged_view(&self, indices: &[usize]) -> Result<(Vec<usize>, JointState, Vec<usize>), SealError> {
        let mut members: Vec<usize> = Vec::new();
        let mut seen_groups = BTreeSet::new();
        let mut parts: Vec<JointState> = Vec::new();
        for &i in indices {
            self.check_index(i)?;
            match self.slots[i] {
                Slot::Single(q) => {
                    if members.contains(&i) {
                        continue;
                    }
                    members.push(i);
                    parts.push(JointState::from(q));
                }
                Slot::Grouped(g) => {
                    if seen_groups.insert(g) {
                        let group = &self.groups[&g];
                        members.extend(&group.members);
                        parts.push(group.state.clone());
                    }
                }
            }
        }
        if members.len() > self.arity_cap {
            return Err(QuantumError::ArityExceeded {
                arity: members.len(),
                cap: self.arity_cap,
            }
            .into());
        }
        let mut state = parts.remove(0);
        for part in &parts {
            state = state.kron(part, self.arity_cap)?;
        }
        let positions: Vec<usize> = indices
            .iter()
            .map(|i| {
                members
                    .iter()
                    .position(|m| m == i)
                    .expect("requested register is a member")
            })
            .collect();
        let width = positions.len();
        let keys = (0..1usize << members.len())
            .map(|x| {
                positions.iter().enumerate().fold(0usize, |acc, (j, &p)| {
                    acc | (usize::from(state.bit_of(x, p)) << (width - 1 - j))
                })
            })
            .collect();
        Ok((members, state, keys))
    }

    /// Stores a joint state, splitting off every register that is no longer
    /// entangled with the others.
    fn install_group(&mut self, mut members: Vec<usize>, mut state: JointState) {
        let mut position = 0;
        while members.len() > 1 && position < members.len() {
            match state.factor_qubit(position) {
                Ok(Some((q, rest))) => {
                    self.slots[members[position]] = Slot::Single(q);
                    members.remove(position);
                    state = rest;
                }
                _ => position += 1,
            }
        }
        if members.len() == 1 {
            let amps = state.amplitudes();
            self.slots[members[0]] =
                Slot::Single(PureQubit::from_amplitudes(amps[0], amps[1]).expect("normalized remainder"));
            return;
        }
        let id = self.next_group;
        self.next_group += 1;
        for &m in &members {
            self.slots[m] = Slot::Grouped(id);
        }
        self.groups.insert(id, Group { members, state });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckVerdict {
    Unread,
    ReadDetected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub verdict: CheckVerdict,
    pub failed_indices: BTreeSet<usize>,
}

impl CheckReport {
    fn from_failures(failed_indices: BTreeSet<usize>) -> Self {
        let verdict = if failed_indices.is_empty() {
            CheckVerdict::Unread
        } else {
            CheckVerdict::ReadDetected
        };
        CheckReport {
            verdict,
            failed_indices,
        }
    }

    pub fn is_unread(&self) -> bool {
        self.verdict == CheckVerdict::Unread
    }
}

/// Seals `bits` with wobble angles drawn uniformly from
/// `[-Θ/N^α, Θ/N^α]`.
pub fn seal<R: Rng + ?Sized>(
    bits: &BitString,
    params: &SealParams,
    rng: &mut R,
) -> Result<(PublicRegisters, OwnerRecord), SealError> {
    let frames = alloc::vec![0.0; bits.len()];
    seal_in_frames(bits, &frames, params, rng)
}

/// Like [`seal`], with bit `i` encoded relative to the rotated basis
/// `Basis2(frames[i])`.
pub fn seal_in_frames<R: Rng + ?Sized>(
    bits: &BitString,
    frames: &[f64],
    params: &SealParams,
    rng: &mut R,
) -> Result<(PublicRegisters, OwnerRecord), SealError> {
    check_length(bits.len(), params)?;
    let bound = params.wobble_bound();
    let thetas: Vec<f64> = (0..bits.len()).map(|_| rng.random_range(-bound..=bound)).collect();
    seal_with_angles(bits, &thetas, frames, params)
}

/// Deterministic sealing with caller-chosen angles.
pub fn seal_with_angles(
    bits: &BitString,
    thetas: &[f64],
    frames: &[f64],
    params: &SealParams,
) -> Result<(PublicRegisters, OwnerRecord), SealError> {
    check_length(bits.len(), params)?;
    check_length(thetas.len(), params)?;
    check_length(frames.len(), params)?;
    let bound = params.wobble_bound();
    if let Some((index, &theta)) = thetas
        .iter()
        .enumerate()
        .find(|(_, t)| t.is_nan() || t.abs() > bound * (1.0 + 1e-12))
    {
        return Err(SealError::AngleOutOfRange { index, theta, bound });
    }
    let record = OwnerRecord {
        bits: bits.clone(),
        thetas: thetas.to_vec(),
        frames: frames.to_vec(),
        params: *params,
    };
    let qubits = (0..bits.len()).map(|i| record.expected_state(i)).collect();
    Ok((PublicRegisters::new(qubits), record))
}

fn check_length(actual: usize, params: &SealParams) -> Result<(), SealError> {
    if actual != params.length() {
        Err(SealError::LengthMismatch {
            expected: params.length(),
            actual,
        })
    } else {
        Ok(())
    }
}

/// Honest reading: every register measured in the computational basis.
pub fn read<Q: OutcomeSource + ?Sized>(regs: &mut PublicRegisters, source: &mut Q) -> Result<BitString, SealError> {
    if let Some(index) = (0..regs.len()).find(|&i| regs.is_entangled(i)) {
        return Err(SealError::RegisterEntangled { index });
    }
    let mut out = BitString::new();
    for i in 0..regs.len() {
        out.push(regs.measure_z(i, source)?);
    }
    Ok(out)
}

/// The sealer's check over every register.
pub fn check<Q: OutcomeSource + ?Sized>(
    regs: &mut PublicRegisters,
    record: &OwnerRecord,
    source: &mut Q,
) -> Result<CheckReport, SealError> {
    let all: Vec<usize> = (0..record.len()).collect();
    check_indices(regs, record, &all, source)
}

/// The sealer's check restricted to `indices`.
pub fn check_indices<Q: OutcomeSource + ?Sized>(
    regs: &mut PublicRegisters,
    record: &OwnerRecord,
    indices: &[usize],
    source: &mut Q,
) -> Result<CheckReport, SealError> {
    if record.len() != regs.len() {
        return Err(SealError::IdMismatch {
            record: record.len(),
            registers: regs.len(),
        });
    }
    let mut failed = BTreeSet::new();
    for &i in indices {
        if !regs.project_register(i, record.expected_state(i), source)? {
            failed.insert(i);
        }
    }
    Ok(CheckReport::from_failures(failed))
}

pub fn max_error_rate(params: &SealParams) -> f64 {
    params.max_error_rate()
}

/// Upper bound on the probability of extracting `information_bits` bits and
/// passing the check: `min(1, 2^-K Π 2cos²θ_i)`, evaluated in log space.
pub fn escape_bound(thetas: &[f64], information_bits: f64) -> f64 {
    debug_assert!(information_bits >= 0.0 && information_bits <= thetas.len() as f64);
    let mut log_p = -information_bits;
    for &t in thetas {
        let c = cos(t);
        if c == 0.0 {
            return 0.0;
        }
        log_p += log2(2.0 * c * c);
    }
    if log_p >= 0.0 {
        1.0
    } else {
        exp2(log_p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn params_validation() {
        assert!(SealParams::new(PI / 8.0, 0.25, 64).is_ok());
        assert!(SealParams::new(0.0, 0.25, 64).is_err());
        assert!(SealParams::new(PI / 4.0, 0.25, 64).is_err());
        assert!(SealParams::new(0.1, 0.5, 64).is_err());
        assert!(SealParams::new(0.1, 0.0, 64).is_err());
        assert!(SealParams::new(0.1, 0.25, 0).is_err());
        assert!(SealParams::with_theta_cap(0.5, 0.25, 4, 0.6).is_ok());
    }

    #[test]
    fn zero_wobble_seal_is_basis_state() {
        let params = SealParams::new(1e-12, 0.25, 1).unwrap();
        let bits: BitString = "1".parse().unwrap();
        let (regs, _) = seal(&bits, &params, &mut rng(1)).unwrap();
        let q = regs.qubit(0).unwrap();
        assert!((q.amp1() - 1.0).abs() < 1e-20);
    }

    #[test]
    fn seal_respects_angle_bound() {
        let params = SealParams::new(PI / 8.0, 0.25, 4).unwrap();
        let bits: BitString = "1010".parse().unwrap();
        let (_, record) = seal(&bits, &params, &mut rng(2)).unwrap();
        assert_eq!(record.bits, bits);
        let bound = PI / 8.0 / 4f64.powf(0.25);
        assert!(record.thetas.iter().all(|t| t.abs() <= bound));
        assert!(matches!(
            seal(&"10".parse().unwrap(), &params, &mut rng(2)),
            Err(SealError::LengthMismatch { expected: 4, actual: 2 })
        ));
    }

    #[test]
    fn check_after_seal_is_unread_and_repeatable() {
        let params = SealParams::new(PI / 8.0, 0.25, 32).unwrap();
        let mut r = rng(3);
        for _ in 0..200 {
            let bits = BitString::random(32, &mut r);
            let (mut regs, record) = seal(&bits, &params, &mut r).unwrap();
            assert!(check(&mut regs, &record, &mut r).unwrap().is_unread());
            assert!(check(&mut regs, &record, &mut r).unwrap().is_unread());
        }
    }

    #[test]
    fn read_twice_gives_same_string() {
        let params = SealParams::new(PI / 8.0, 0.25, 16).unwrap();
        let mut r = rng(4);
        let (mut regs, _) = seal(&BitString::random(16, &mut r), &params, &mut r).unwrap();
        let first = read(&mut regs, &mut r).unwrap();
        assert_eq!(read(&mut regs, &mut r).unwrap(), first);
    }

    #[test]
    fn read_refuses_entangled_registers() {
        let params = SealParams::new(PI / 8.0, 0.25, 4).unwrap();
        let mut r = rng(5);
        let (mut regs, _) = seal(&"0000".parse().unwrap(), &params, &mut r).unwrap();
        // Odd-parity projection; retry until it fails, which leaves the pair entangled.
        loop {
            let mut attempt = regs.clone();
            if !attempt.project_joint(&[1, 2], |x| x == 1 || x == 2, &mut r).unwrap() {
                regs = attempt;
                break;
            }
        }
        assert!(regs.is_entangled(1) && regs.is_entangled(2));
        assert_eq!(read(&mut regs, &mut r), Err(SealError::RegisterEntangled { index: 1 }));
    }

    #[test]
    fn grouped_register_check_splits_it_back_out() {
        let params = SealParams::new(PI / 8.0, 0.25, 3).unwrap();
        let (mut regs, record) =
            seal_with_angles(&"011".parse().unwrap(), &[0.1, -0.15, 0.2], &[0.0; 3], &params).unwrap();
        let mut r = rng(6);
        loop {
            let mut attempt = regs.clone();
            if !attempt.project_joint(&[0, 2], |x| x == 0b01, &mut r).unwrap() {
                regs = attempt;
                break;
            }
        }
        assert_eq!(regs.group_members(0), Some(&[0usize, 2][..]));
        check(&mut regs, &record, &mut r).unwrap();
        assert_eq!(regs.joint_state_count(), 0);
        assert!((0..3).all(|i| !regs.is_entangled(i)));
    }

    #[test]
    fn joint_merge_respects_arity_cap() {
        let params = SealParams::new(PI / 8.0, 0.25, 6).unwrap();
        let mut r = rng(7);
        let (regs, _) = seal(&BitString::random(6, &mut r), &params, &mut r).unwrap();
        let mut regs = regs.with_arity_cap(3);
        assert!(matches!(
            regs.project_joint(&[0, 1, 2, 3], |_| true, &mut r),
            Err(SealError::Quantum(QuantumError::ArityExceeded { arity: 4, cap: 3 }))
        ));
    }

    #[test]
    fn max_error_rate_examples() {
        let p1 = SealParams::new(0.3, 0.25, 1).unwrap();
        assert!((p1.max_error_rate() - 0.3f64.sin().powi(2)).abs() < 1e-15);
        let p = SealParams::new(PI / 8.0, 0.25, 64).unwrap();
        let expected = ((PI / 8.0) / 64f64.powf(0.25)).sin().powi(2);
        assert!((max_error_rate(&p) - expected).abs() < 1e-15);
        assert!((max_error_rate(&p) - 0.019_153_027).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        let mut n = 8;
        while n <= 1024 {
            let e = SealParams::new(PI / 8.0, 0.25, n).unwrap().max_error_rate();
            assert!(e < prev);
            prev = e;
            n *= 2;
        }
    }

    #[test]
    fn escape_bound_examples() {
        assert_eq!(escape_bound(&[0.0; 10], 10.0), 1.0);
        let quarter = [PI / 4.0; 10];
        assert!((escape_bound(&quarter, 10.0) - 2f64.powi(-10)).abs() < 1e-15);
        assert_eq!(escape_bound(&[0.3, 0.2], 0.0), 1.0);
        // 2000 qubits would overflow a direct product of 2cos²θ.
        let many = alloc::vec![0.01; 2000];
        let direct_log: f64 = many.iter().map(|t: &f64| (t.cos().powi(2)).log2()).sum();
        assert!((escape_bound(&many, 2000.0).log2() - direct_log).abs() < 1e-9);
    }
}
