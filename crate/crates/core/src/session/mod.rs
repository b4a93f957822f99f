//! The Basic and Advanced commitment protocols built on sealed registers.
//!
//! The owner seals `s` random bits and hands the registers to the committer.
//! Each run plays both parties with a chosen behavior, writes every message
//! to a [`SessionTranscript`], and ends in a [`Verdict`]. Classical choices
//! are drawn from `classical`, measurement outcomes from `quantum`, so a
//! fixed classical stream plus a [`crate::BranchReplay`] enumerates every
//! outcome of a session exactly.

mod transcript;
mod vault;

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use thiserror::Error;

pub use transcript::{CheckKind, Message, Payload, Phase, Protocol, Sender, SessionTranscript, Step, TranscriptError};
pub use vault::SealedRegisters;

use crate::adversary::collective_unveil;
use crate::bits::BitString;
use crate::bitseal::{BitSealError, MappingRule};
use crate::chance::OutcomeSource;
use crate::gf2::{dot_parity, CodeError, GeneratorMatrix};
use crate::math::sqrt;
use crate::seal::{OwnerRecord, SealError, SealParams};
use transcript::indices_u32;

/// Default number of random index sets the codeword-vote guesser tries.
pub const DEFAULT_GUESS_SAMPLES: usize = 256;
/// Default attempt budget of the collective search.
pub const DEFAULT_T_MAX: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(&'static str),
    #[error("{behavior:?} cannot act as {role:?}")]
    IllegalStrategy { role: Role, behavior: Behavior },
    #[error("{behavior:?} does not apply to the {protocol} protocol")]
    NotApplicable { behavior: Behavior, protocol: Protocol },
    #[error("no decodable register left to choose from")]
    NoUsableRegister,
    #[error("the collective search needs single-qubit registers")]
    UnsupportedMode,
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error(transparent)]
    BitSeal(#[from] BitSealError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Statistical thresholds of the committer's spot check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub z: f64,
    pub slack: f64,
    pub min_sample: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            z: 4.0,
            slack: 1.0,
            min_sample: 16,
        }
    }
}

/// What a single register holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegisterMode {
    /// One wobbled qubit per register; the `s` registers form one sealed
    /// string of length `s`.
    Qubit,
    /// Each register is a full bit seal of `seal.length()` qubits.
    BitSeal {
        rule: MappingRule,
        no_clue_probability: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub s: usize,
    pub m: usize,
    pub n: usize,
    pub generator: Option<GeneratorMatrix>,
    pub seal: SealParams,
    pub thresholds: Thresholds,
    /// `n ≤ (s − m) / code_fraction`.
    pub code_fraction: usize,
    pub mode: RegisterMode,
    pub guess_samples: usize,
}

impl ProtocolParams {
    pub fn basic(s: usize, m: usize, seal: SealParams) -> Result<Self, SessionError> {
        Self::new(s, m, None, seal, Thresholds::default(), 4, RegisterMode::Qubit)
    }

    pub fn advanced(s: usize, m: usize, generator: GeneratorMatrix, seal: SealParams) -> Result<Self, SessionError> {
        Self::new(
            s,
            m,
            Some(generator),
            seal,
            Thresholds::default(),
            4,
            RegisterMode::Qubit,
        )
    }

    /// Fully specified parameters; the protocol is Advanced iff a generating
    /// matrix is given.
    pub fn new(
        s: usize,
        m: usize,
        generator: Option<GeneratorMatrix>,
        seal: SealParams,
        thresholds: Thresholds,
        code_fraction: usize,
        mode: RegisterMode,
    ) -> Result<Self, SessionError> {
        let p = ProtocolParams {
            s,
            m,
            n: generator.as_ref().map_or(0, GeneratorMatrix::n),
            generator,
            seal,
            thresholds,
            code_fraction,
            mode,
            guess_samples: DEFAULT_GUESS_SAMPLES,
        };
        p.validate(p.protocol())?;
        Ok(p)
    }

    pub fn protocol(&self) -> Protocol {
        if self.generator.is_some() {
            Protocol::Advanced
        } else {
            Protocol::Basic
        }
    }

    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Result<Self, SessionError> {
        self.thresholds = thresholds;
        self.validate(self.protocol())?;
        Ok(self)
    }

    pub fn with_code_fraction(mut self, code_fraction: usize) -> Result<Self, SessionError> {
        self.code_fraction = code_fraction;
        self.validate(self.protocol())?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: RegisterMode) -> Result<Self, SessionError> {
        self.mode = mode;
        self.validate(self.protocol())?;
        Ok(self)
    }

    pub fn with_guess_samples(mut self, samples: usize) -> Self {
        self.guess_samples = samples;
        self
    }

    pub fn validate(&self, protocol: Protocol) -> Result<(), SessionError> {
        let bad = |reason| Err(SessionError::InvalidParams(reason));
        if self.m >= self.s {
            return bad("spot-check sample must be smaller than s");
        }
        if self.s - self.m < 2 {
            return bad("at least two registers must survive the spot check");
        }
        if self.m < self.thresholds.min_sample {
            return bad("spot-check sample is below the configured minimum");
        }
        if self.thresholds.z.is_nan()
            || self.thresholds.z <= 0.0
            || self.thresholds.slack.is_nan()
            || self.thresholds.slack < 0.0
        {
            return bad("spot-check thresholds must be positive");
        }
        match self.mode {
            RegisterMode::Qubit if self.seal.length() != self.s => {
                return bad("in qubit mode the seal length must equal s");
            }
            RegisterMode::BitSeal {
                no_clue_probability, ..
            } if !(0.0..1.0).contains(&no_clue_probability) => {
                return bad("no-clue probability must lie in [0, 1)");
            }
            _ => {}
        }
        if protocol == Protocol::Advanced {
            let Some(g) = &self.generator else {
                return bad("the advanced protocol needs a generating matrix");
            };
            if g.n() != self.n {
                return bad("generating matrix width differs from n");
            }
            if self.code_fraction == 0 || self.n * self.code_fraction > self.s - self.m {
                return bad("n must not exceed (s - m) / code_fraction");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Committer,
    Owner,
    SealReader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Behavior {
    Honest,
    /// Commits honestly, then announces the other bit.
    FlipAtUnveil,
    /// Commits honestly, then announces registers it never measured.
    RandomIndices,
    /// Measures nothing at commit time and lets a late measurement pick the bit.
    DeferredChoiceBasic,
    /// Measures nothing at commit time, then searches for a fitting index set
    /// with joint measurements.
    CollectiveSearchAdvanced {
        t_max: usize,
    },
    /// Owner guesses the bit from the commit-phase messages and its own
    /// sealed values, without locating the committer's registers.
    TranscriptGuesser,
    /// Owner guesses `a ⊕ majority(x)` over the unsampled registers.
    SealedMajorityGuesser,
    MeasureAllReader,
    SubsetParityReader,
}

impl Behavior {
    fn role(self) -> Option<Role> {
        match self {
            Behavior::Honest => None,
            Behavior::FlipAtUnveil
            | Behavior::RandomIndices
            | Behavior::DeferredChoiceBasic
            | Behavior::CollectiveSearchAdvanced { .. } => Some(Role::Committer),
            Behavior::TranscriptGuesser | Behavior::SealedMajorityGuesser => Some(Role::Owner),
            Behavior::MeasureAllReader | Behavior::SubsetParityReader => Some(Role::SealReader),
        }
    }

    fn applies_to(self, protocol: Protocol) -> bool {
        match self {
            Behavior::DeferredChoiceBasic | Behavior::SealedMajorityGuesser => protocol == Protocol::Basic,
            Behavior::CollectiveSearchAdvanced { .. } => protocol == Protocol::Advanced,
            Behavior::MeasureAllReader | Behavior::SubsetParityReader => false,
            _ => true,
        }
    }
}

/// A behavior bound to the role that plays it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategy {
    role: Role,
    behavior: Behavior,
}

impl Strategy {
    pub fn new(role: Role, behavior: Behavior) -> Result<Self, SessionError> {
        match behavior.role() {
            Some(r) if r != role => Err(SessionError::IllegalStrategy { role, behavior }),
            _ => Ok(Strategy { role, behavior }),
        }
    }

    pub fn honest_committer() -> Self {
        Strategy {
            role: Role::Committer,
            behavior: Behavior::Honest,
        }
    }

    pub fn honest_owner() -> Self {
        Strategy {
            role: Role::Owner,
            behavior: Behavior::Honest,
        }
    }

    pub fn committer(behavior: Behavior) -> Result<Self, SessionError> {
        Strategy::new(Role::Committer, behavior)
    }

    pub fn owner(behavior: Behavior) -> Result<Self, SessionError> {
        Strategy::new(Role::Owner, behavior)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior
    }

    fn expect(&self, role: Role, protocol: Protocol) -> Result<(), SessionError> {
        if self.role != role {
            return Err(SessionError::IllegalStrategy {
                role,
                behavior: self.behavior,
            });
        }
        if !self.behavior.applies_to(protocol) {
            return Err(SessionError::NotApplicable {
                behavior: self.behavior,
                protocol,
            });
        }
        Ok(())
    }
}

/// Result of the committer's spot check on the sampled registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpotCheck {
    pub sample: usize,
    pub ones: usize,
    pub mismatches: usize,
    pub randomness_ok: bool,
    pub mismatch_ok: bool,
}

impl SpotCheck {
    pub fn passed(&self) -> bool {
        self.randomness_ok && self.mismatch_ok
    }

    pub fn failed_checks(&self) -> Vec<CheckKind> {
        let mut out = Vec::new();
        if !self.randomness_ok {
            out.push(CheckKind::RandomnessCheck);
        }
        if !self.mismatch_ok {
            out.push(CheckKind::MismatchCheck);
        }
        out
    }
}

/// Spot check over `(decoded, claimed)` pairs: the claimed bits must look
/// balanced, `|ones/m − 1/2| ≤ z·sqrt(1/(4m))`, and disagree with the decoded
/// ones no more than `m·ε + z·sqrt(m·ε(1−ε)) + slack` times.
/// An empty sample fails the randomness test.
pub fn spot_check(pairs: &[(u8, u8)], epsilon: f64, thresholds: &Thresholds) -> SpotCheck {
    let m = pairs.len();
    let ones = pairs.iter().filter(|(_, claimed)| *claimed == 1).count();
    let mismatches = pairs.iter().filter(|(d, c)| d != c).count();
    let mf = m as f64;
    let randomness_ok = m > 0 && (ones as f64 / mf - 0.5).abs() <= thresholds.z * sqrt(1.0 / (4.0 * mf));
    let allowed = mf * epsilon + thresholds.z * sqrt(mf * epsilon * (1.0 - epsilon)) + thresholds.slack;
    SpotCheck {
        sample: m,
        ones,
        mismatches,
        randomness_ok,
        mismatch_ok: mismatches as f64 <= allowed,
    }
}

/// The owner's final decision.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verdict {
    pub accepted: bool,
    pub failed_checks: Vec<CheckKind>,
    pub unveiled_bit: Option<u8>,
    /// Returned registers whose check projection failed.
    pub failed_registers: BTreeSet<usize>,
}

impl Verdict {
    fn from_checks(failed_checks: Vec<CheckKind>, unveiled_bit: Option<u8>, failed_registers: BTreeSet<usize>) -> Self {
        Verdict {
            accepted: failed_checks.is_empty(),
            failed_checks,
            unveiled_bit,
            failed_registers,
        }
    }

    pub fn failed(&self, kind: CheckKind) -> bool {
        self.failed_checks.contains(&kind)
    }

    fn payload(&self) -> Payload {
        Payload::Verdict {
            accepted: self.accepted,
            failed: self.failed_checks.clone(),
            unveiled: self.unveiled_bit,
        }
    }
}

/// Committer-side bookkeeping that never appears in the transcript.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Masks redrawn because they could not separate the code.
    pub mask_redraws: usize,
    /// Registers discarded because they carried no clue.
    pub discarded: Vec<usize>,
    /// Joint measurements attempted by a collective search.
    pub attempts: usize,
    /// Whether a collective search saw its projector succeed.
    pub projector_succeeded: bool,
    /// Information proxy accumulated by a collective search, in bits.
    pub info_bits: f64,
    /// The subsets a collective search projected, in order.
    pub attempted: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub transcript: SessionTranscript,
    pub spot_check: SpotCheck,
    /// The spot check failed and the session stopped before the commitment.
    pub aborted: bool,
    pub verdict: Verdict,
    pub owner_guess: Option<u8>,
    pub diagnostics: Diagnostics,
    /// The owner's private seal record (qubit mode only).
    pub owner_record: Option<OwnerRecord>,
}

impl SessionOutcome {
    /// Accepted by the owner after a completed session.
    pub fn accepted(&self) -> bool {
        !self.aborted && self.verdict.accepted
    }

    /// Accepted, with `target` as the unveiled bit.
    pub fn hit_target(&self, target: u8) -> bool {
        self.accepted() && self.verdict.unveiled_bit == Some(target)
    }
}

struct Prelude {
    transcript: SessionTranscript,
    vault: SealedRegisters,
    spot: SpotCheck,
    spot_claims: BitString,
    remaining: Vec<usize>,
}

/// Steps shared by both protocols: sealing and the spot check.
fn prelude<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    mut transcript: SessionTranscript,
    params: &ProtocolParams,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<Prelude, SessionError> {
    let x = BitString::random(params.s, classical);
    let mut vault = SealedRegisters::seal(&x, &params.mode, &params.seal, classical)?;
    transcript.push(
        Step::Seal,
        Sender::Owner,
        Payload::Sealed {
            registers: params.s as u32,
        },
    )?;

    let mut sampled = index::sample(classical, params.s, params.m).into_vec();
    sampled.sort_unstable();
    transcript.push(
        Step::SpotCheckRequest,
        Sender::Committer,
        Payload::Indices(indices_u32(&sampled)),
    )?;
    let mut decoded = Vec::with_capacity(sampled.len());
    for &i in &sampled {
        decoded.push(vault.decode(i, quantum)?);
    }
    let claims: BitString = sampled.iter().map(|&i| vault.owner_bit(i) == 1).collect();
    transcript.push(Step::SpotCheckReveal, Sender::Owner, Payload::Bits(claims.clone()))?;
    let pairs: Vec<(u8, u8)> = decoded
        .iter()
        .zip(claims.iter())
        .filter_map(|(d, c)| d.map(|d| (d, c)))
        .collect();
    let spot = spot_check(&pairs, vault.epsilon(&params.seal), &params.thresholds);
    transcript.push(
        Step::SpotCheckResult,
        Sender::Committer,
        Payload::SpotCheck {
            passed: spot.passed(),
            ones: spot.ones as u32,
            mismatches: spot.mismatches as u32,
        },
    )?;
    let sampled_set: BTreeSet<usize> = sampled.into_iter().collect();
    let remaining = (0..params.s).filter(|i| !sampled_set.contains(i)).collect();
    Ok(Prelude {
        transcript,
        vault,
        spot,
        spot_claims: claims,
        remaining,
    })
}

fn aborted(mut p: Prelude) -> Result<SessionOutcome, SessionError> {
    let verdict = Verdict::from_checks(p.spot.failed_checks(), None, BTreeSet::new());
    p.transcript.push(Step::Verdict, Sender::Committer, verdict.payload())?;
    Ok(SessionOutcome {
        transcript: p.transcript,
        spot_check: p.spot,
        aborted: true,
        verdict,
        owner_guess: None,
        diagnostics: Diagnostics::default(),
        owner_record: p.vault.record().cloned(),
    })
}

/// Picks a random register from `pool` that is not yet used and decodes it,
/// discarding registers that carry no clue.
fn decode_fresh<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    pool: &[usize],
    used: &mut BTreeSet<usize>,
    vault: &mut SealedRegisters,
    diag: &mut Diagnostics,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<(usize, u8), SessionError> {
    loop {
        let free: Vec<usize> = pool.iter().copied().filter(|i| !used.contains(i)).collect();
        let &i = free
            .get(classical.random_range(0..free.len().max(1)))
            .ok_or(SessionError::NoUsableRegister)?;
        used.insert(i);
        match vault.decode(i, quantum)? {
            Some(v) => return Ok((i, v)),
            None => diag.discarded.push(i),
        }
    }
}

fn random_fresh<R: Rng + ?Sized>(
    pool: &[usize],
    used: &BTreeSet<usize>,
    count: usize,
    classical: &mut R,
) -> Result<Vec<usize>, SessionError> {
    let free: Vec<usize> = pool.iter().copied().filter(|i| !used.contains(i)).collect();
    if free.len() < count {
        return Err(SessionError::NoUsableRegister);
    }
    let mut picked: Vec<usize> = index::sample(classical, free.len(), count)
        .into_iter()
        .map(|k| free[k])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

fn majority(bits: impl Iterator<Item = u8>) -> u8 {
    let (ones, total) = bits.fold((0usize, 0usize), |(o, t), b| (o + usize::from(b), t + 1));
    u8::from(2 * ones > total)
}

fn push_discards(transcript: &mut SessionTranscript, diag: &Diagnostics) -> Result<(), SessionError> {
    if !diag.discarded.is_empty() {
        let mut d = diag.discarded.clone();
        d.sort_unstable();
        transcript.push(Step::Discard, Sender::Committer, Payload::Indices(indices_u32(&d)))?;
    }
    Ok(())
}

/// Runs one Basic Protocol session in which the committer wants to commit `b`.
pub fn run_basic<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    b: u8,
    committer: &Strategy,
    owner: &Strategy,
    params: &ProtocolParams,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<SessionOutcome, SessionError> {
    params.validate(Protocol::Basic)?;
    committer.expect(Role::Committer, Protocol::Basic)?;
    owner.expect(Role::Owner, Protocol::Basic)?;
    let b = b & 1;

    let mut p = prelude(SessionTranscript::new(Protocol::Basic), params, classical, quantum)?;
    if !p.spot.passed() {
        return aborted(p);
    }
    let mut diag = Diagnostics::default();
    let mut used = BTreeSet::new();

    // (3)
    let (a, measured) = match committer.behavior {
        Behavior::DeferredChoiceBasic => (quantum.coin(), None),
        _ => {
            let (i0, v) = decode_fresh(&p.remaining, &mut used, &mut p.vault, &mut diag, classical, quantum)?;
            (v ^ b, Some(i0))
        }
    };
    push_discards(&mut p.transcript, &diag)?;
    p.transcript.push(Step::CommitBit, Sender::Committer, Payload::Bit(a))?;

    let live: Vec<usize> = p
        .remaining
        .iter()
        .copied()
        .filter(|i| !diag.discarded.contains(i))
        .collect();
    let owner_guess = match owner.behavior {
        Behavior::TranscriptGuesser => Some(a ^ majority(p.spot_claims.iter())),
        Behavior::SealedMajorityGuesser => Some(a ^ majority(live.iter().map(|&i| p.vault.owner_bit(i)))),
        _ => None,
    };

    // (4)
    let (announced_bit, announced) = match committer.behavior {
        Behavior::FlipAtUnveil => (b ^ 1, measured.expect("measured at commit")),
        Behavior::RandomIndices => {
            let i1 = random_fresh(&live, &used, 1, classical)?[0];
            (b, i1)
        }
        Behavior::DeferredChoiceBasic => {
            let (i0, v) = decode_fresh(&p.remaining, &mut used, &mut p.vault, &mut diag, classical, quantum)?;
            (a ^ v, i0)
        }
        _ => (b, measured.expect("measured at commit")),
    };
    let returned: Vec<usize> = p
        .remaining
        .iter()
        .copied()
        .filter(|&i| i != announced && !diag.discarded.contains(&i))
        .collect();
    p.transcript.push(
        Step::Unveil,
        Sender::Committer,
        Payload::Unveil {
            bit: announced_bit,
            indices: alloc::vec![announced as u32],
        },
    )?;
    p.transcript.push(
        Step::ReturnRegisters,
        Sender::Committer,
        Payload::Indices(indices_u32(&returned)),
    )?;

    // (5)
    let verdict = verify_unveil_basic(a, announced_bit, announced, &mut p.vault, &returned, quantum)?;
    p.transcript.push(Step::Verdict, Sender::Owner, verdict.payload())?;
    Ok(SessionOutcome {
        transcript: p.transcript,
        spot_check: p.spot,
        aborted: false,
        verdict,
        owner_guess,
        diagnostics: diag,
        owner_record: p.vault.record().cloned(),
    })
}

/// Owner's verification in the Basic Protocol. Every check runs.
pub fn verify_unveil_basic<Q: OutcomeSource + ?Sized>(
    a: u8,
    b: u8,
    i0: usize,
    vault: &mut SealedRegisters,
    returned: &[usize],
    quantum: &mut Q,
) -> Result<Verdict, SessionError> {
    let mut failed = Vec::new();
    let consistent = i0 < vault.len() && !vault.is_no_clue(i0) && a == vault.owner_bit(i0) ^ b;
    if !consistent {
        failed.push(CheckKind::ConsistencyCheck);
    }
    let failed_registers = vault.check(returned, quantum)?;
    if !failed_registers.is_empty() {
        failed.push(CheckKind::UnreadCheck);
    }
    Ok(Verdict::from_checks(failed, Some(b), failed_registers))
}

/// A non-zero mask drawn uniformly among those that separate the code.
fn separating_mask<R: Rng + ?Sized>(g: &GeneratorMatrix, classical: &mut R, diag: &mut Diagnostics) -> BitString {
    loop {
        let r = BitString::random(g.n(), classical);
        if r.weight() > 0 && g.separates(&r) {
            return r;
        }
        diag.mask_redraws += 1;
    }
}

/// Runs one Advanced Protocol session in which the committer wants to commit `b`.
pub fn run_advanced<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    b: u8,
    committer: &Strategy,
    owner: &Strategy,
    params: &ProtocolParams,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<SessionOutcome, SessionError> {
    params.validate(Protocol::Advanced)?;
    committer.expect(Role::Committer, Protocol::Advanced)?;
    owner.expect(Role::Owner, Protocol::Advanced)?;
    let g = params.generator.as_ref().expect("validated");
    let n = params.n;
    let b = b & 1;

    // (i)
    let mut transcript = SessionTranscript::new(Protocol::Advanced);
    transcript.push(
        Step::AgreeParams,
        Sender::Committer,
        Payload::Params {
            s: params.s as u32,
            m: params.m as u32,
            n: n as u32,
            generator: g.rows(),
        },
    )?;
    // (ii)
    let mut p = prelude(transcript, params, classical, quantum)?;
    if !p.spot.passed() {
        return aborted(p);
    }
    let mut diag = Diagnostics::default();
    let mut used = BTreeSet::new();

    // (iii) to (vi)
    let collective = matches!(committer.behavior, Behavior::CollectiveSearchAdvanced { .. });
    let (measured, r, c_prime) = if collective {
        let r = separating_mask(g, classical, &mut diag);
        let c_prime = BitString::random(n, classical);
        (Vec::new(), r, c_prime)
    } else {
        let mut picks = Vec::with_capacity(n);
        for _ in 0..n {
            picks.push(decode_fresh(
                &p.remaining,
                &mut used,
                &mut p.vault,
                &mut diag,
                classical,
                quantum,
            )?);
        }
        picks.sort_unstable();
        let x: BitString = picks.iter().map(|&(_, v)| v == 1).collect();
        let r = separating_mask(g, classical, &mut diag);
        let c = g.choose_codeword(&r, b, classical)?;
        let c_prime = c.bits().xor(&x);
        (picks.into_iter().map(|(i, _)| i).collect(), r, c_prime)
    };
    push_discards(&mut p.transcript, &diag)?;
    p.transcript
        .push(Step::AnnounceMask, Sender::Committer, Payload::Bits(r.clone()))?;
    p.transcript.push(
        Step::AnnounceMaskedCodeword,
        Sender::Committer,
        Payload::Bits(c_prime.clone()),
    )?;

    let live: Vec<usize> = p
        .remaining
        .iter()
        .copied()
        .filter(|i| !diag.discarded.contains(i))
        .collect();
    let owner_guess = match owner.behavior {
        Behavior::TranscriptGuesser => Some(codeword_vote(
            g,
            &p.vault,
            &live,
            &r,
            &c_prime,
            params.guess_samples,
            classical,
        )),
        _ => None,
    };

    // (vii)
    let (announced_bit, announced) = match committer.behavior {
        Behavior::FlipAtUnveil => (b ^ 1, measured),
        Behavior::RandomIndices => (b, random_fresh(&live, &used, n, classical)?),
        Behavior::CollectiveSearchAdvanced { t_max } => {
            let regs = p.vault.qubits_mut().ok_or(SessionError::UnsupportedMode)?;
            let attempt = collective_unveil(regs, &live, g, &c_prime, &r, b, t_max, classical, quantum)?;
            diag.attempts = attempt.attempts;
            diag.projector_succeeded = attempt.projector_succeeded;
            diag.info_bits = attempt.info_bits;
            diag.attempted = attempt.attempted;
            (b, attempt.announced)
        }
        _ => (b, measured),
    };
    let announced_set: BTreeSet<usize> = announced.iter().copied().collect();
    let returned: Vec<usize> = live.iter().copied().filter(|i| !announced_set.contains(i)).collect();
    p.transcript.push(
        Step::Unveil,
        Sender::Committer,
        Payload::Unveil {
            bit: announced_bit,
            indices: indices_u32(&announced),
        },
    )?;
    p.transcript.push(
        Step::ReturnRegisters,
        Sender::Committer,
        Payload::Indices(indices_u32(&returned)),
    )?;

    // (viii)
    let verdict = verify_unveil_advanced(
        &c_prime,
        &r,
        announced_bit,
        &announced,
        &mut p.vault,
        &returned,
        g,
        quantum,
    )?;
    p.transcript.push(Step::Verdict, Sender::Owner, verdict.payload())?;
    Ok(SessionOutcome {
        transcript: p.transcript,
        spot_check: p.spot,
        aborted: false,
        verdict,
        owner_guess,
        diagnostics: diag,
        owner_record: p.vault.record().cloned(),
    })
}

/// Owner's verification in the Advanced Protocol. Every check runs; a
/// malformed index announcement is reported as a consistency failure.
#[allow(clippy::too_many_arguments)]
pub fn verify_unveil_advanced<Q: OutcomeSource + ?Sized>(
    c_prime: &BitString,
    r: &BitString,
    b: u8,
    indices: &[usize],
    vault: &mut SealedRegisters,
    returned: &[usize],
    g: &GeneratorMatrix,
    quantum: &mut Q,
) -> Result<Verdict, SessionError> {
    let mut failed = Vec::new();
    let well_formed = indices.len() == g.n()
        && c_prime.len() == g.n()
        && indices.windows(2).all(|w| w[0] < w[1])
        && indices.iter().all(|&i| i < vault.len() && !vault.is_no_clue(i));
    if !well_formed {
        failed.push(CheckKind::ConsistencyCheck);
    }
    let x: BitString = indices
        .iter()
        .map(|&i| i < vault.len() && vault.owner_bit(i) == 1)
        .collect();
    let c = if x.len() == c_prime.len() {
        c_prime.xor(&x)
    } else {
        BitString::zeros(0)
    };
    if !g.is_codeword(&c) {
        failed.push(CheckKind::CodewordCheck);
    }
    if dot_parity(&c, r).ok() != Some(b) {
        failed.push(CheckKind::ParityCheck);
    }
    let failed_registers = vault.check(returned, quantum)?;
    if !failed_registers.is_empty() {
        failed.push(CheckKind::UnreadCheck);
    }
    Ok(Verdict::from_checks(failed, Some(b), failed_registers))
}

/// Owner's guess from `r`, `c′` and its own sealed values: every sampled index
/// set whose values turn `c′` into a codeword votes with that codeword's
/// parity against `r`. Ties are broken by a coin.
fn codeword_vote<R: Rng + ?Sized>(
    g: &GeneratorMatrix,
    vault: &SealedRegisters,
    live: &[usize],
    r: &BitString,
    c_prime: &BitString,
    samples: usize,
    classical: &mut R,
) -> u8 {
    let n = g.n();
    let mut votes = [0usize; 2];
    let mut pool = live.to_vec();
    for _ in 0..samples {
        pool.shuffle(classical);
        let mut set = pool[..n].to_vec();
        set.sort_unstable();
        let x: BitString = set.iter().map(|&i| vault.owner_bit(i) == 1).collect();
        let c = c_prime.xor(&x);
        if g.is_codeword(&c) {
            votes[usize::from(dot_parity(&c, r).expect("same length"))] += 1;
        }
    }
    match votes[1].cmp(&votes[0]) {
        core::cmp::Ordering::Greater => 1,
        core::cmp::Ordering::Less => 0,
        core::cmp::Ordering::Equal => u8::from(classical.random_bool(0.5)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basic_params() -> ProtocolParams {
        ProtocolParams::basic(64, 16, SealParams::new(PI / 8.0, 0.25, 64).unwrap()).unwrap()
    }

    fn advanced_params() -> ProtocolParams {
        ProtocolParams::advanced(
            64,
            16,
            GeneratorMatrix::extended_hamming_8_4(),
            SealParams::new(PI / 8.0, 0.25, 64).unwrap(),
        )
        .unwrap()
    }

    fn tiny_seal(s: usize) -> SealParams {
        SealParams::new(1e-12, 0.25, s).unwrap()
    }

    #[test]
    fn spot_check_examples() {
        let t = Thresholds::default();
        let zeros: Vec<(u8, u8)> = (0..64).map(|_| (0, 0)).collect();
        let s = spot_check(&zeros, 0.02, &t);
        assert!(!s.randomness_ok && s.mismatch_ok);
        let balanced: Vec<(u8, u8)> = (0..64).map(|i| ((i % 2) as u8, (i % 2) as u8)).collect();
        assert!(spot_check(&balanced, 0.02, &t).passed());
        let noisy: Vec<(u8, u8)> = (0..64).map(|i| (((i / 2) % 2) as u8, (i % 2) as u8)).collect();
        let s = spot_check(&noisy, 0.02, &t);
        assert!(s.randomness_ok && !s.mismatch_ok);
        assert_eq!(s.failed_checks(), [CheckKind::MismatchCheck]);
        assert!(!spot_check(&[], 0.02, &t).randomness_ok);
    }

    #[test]
    fn params_validation() {
        let seal = SealParams::new(PI / 8.0, 0.25, 64).unwrap();
        assert!(ProtocolParams::basic(64, 64, seal).is_err());
        assert!(ProtocolParams::basic(64, 8, seal).is_err());
        assert!(ProtocolParams::basic(32, 16, seal).is_err());
        let g = GeneratorMatrix::half_rate(16).unwrap();
        assert!(ProtocolParams::advanced(64, 16, g, seal).is_err());
        assert!(Strategy::new(Role::Owner, Behavior::FlipAtUnveil).is_err());
        assert!(Strategy::new(Role::Owner, Behavior::Honest).is_ok());
    }

    #[test]
    fn strategies_must_fit_the_protocol() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let deferred = Strategy::committer(Behavior::DeferredChoiceBasic).unwrap();
        let err = run_advanced(
            0,
            &deferred,
            &Strategy::honest_owner(),
            &advanced_params(),
            &mut rng.clone(),
            &mut rng,
        );
        assert!(matches!(err, Err(SessionError::NotApplicable { .. })));
    }

    #[test]
    fn zero_wobble_honest_sessions_accept() {
        let basic = ProtocolParams::basic(64, 16, tiny_seal(64)).unwrap();
        let adv = ProtocolParams::advanced(64, 16, GeneratorMatrix::extended_hamming_8_4(), tiny_seal(64)).unwrap();
        let c = Strategy::honest_committer();
        let o = Strategy::honest_owner();
        for seed in 0..40 {
            let mut cl = ChaCha8Rng::seed_from_u64(seed);
            let mut qu = ChaCha8Rng::seed_from_u64(seed + 1000);
            let b = (seed % 2) as u8;
            let out = run_basic(b, &c, &o, &basic, &mut cl, &mut qu).unwrap();
            if !out.aborted {
                assert!(out.accepted(), "{:?}", out.verdict);
                assert_eq!(out.verdict.unveiled_bit, Some(b));
            }
            let out = run_advanced(b, &c, &o, &adv, &mut cl, &mut qu).unwrap();
            if !out.aborted {
                assert!(out.accepted(), "{:?}", out.verdict);
                assert_eq!(out.verdict.unveiled_bit, Some(b));
            }
        }
    }

    #[test]
    fn flipped_unveil_fails_the_right_check() {
        let flip = Strategy::committer(Behavior::FlipAtUnveil).unwrap();
        let o = Strategy::honest_owner();
        let mut cl = ChaCha8Rng::seed_from_u64(5);
        let mut qu = ChaCha8Rng::seed_from_u64(6);
        let basic = ProtocolParams::basic(64, 16, tiny_seal(64)).unwrap();
        let out = run_basic(1, &flip, &o, &basic, &mut cl, &mut qu).unwrap();
        assert_eq!(out.verdict.failed_checks, [CheckKind::ConsistencyCheck]);
        assert_eq!(out.verdict.unveiled_bit, Some(0));
        let adv = ProtocolParams::advanced(64, 16, GeneratorMatrix::extended_hamming_8_4(), tiny_seal(64)).unwrap();
        let out = run_advanced(1, &flip, &o, &adv, &mut cl, &mut qu).unwrap();
        assert_eq!(out.verdict.failed_checks, [CheckKind::ParityCheck]);
    }

    #[test]
    fn transcript_shape_and_determinism() {
        let c = Strategy::honest_committer();
        let o = Strategy::owner(Behavior::TranscriptGuesser).unwrap();
        let run = |seed| {
            let mut cl = ChaCha8Rng::seed_from_u64(seed);
            let mut qu = ChaCha8Rng::seed_from_u64(seed ^ 0xFF);
            run_advanced(1, &c, &o, &advanced_params(), &mut cl, &mut qu).unwrap()
        };
        let a = run(11);
        let b = run(11);
        assert_eq!(a.transcript.to_text(), b.transcript.to_text());
        let steps: Vec<Step> = a.transcript.messages().iter().map(|m| m.step).collect();
        assert_eq!(
            steps,
            [
                Step::AgreeParams,
                Step::Seal,
                Step::SpotCheckRequest,
                Step::SpotCheckReveal,
                Step::SpotCheckResult,
                Step::AnnounceMask,
                Step::AnnounceMaskedCodeword,
                Step::Unveil,
                Step::ReturnRegisters,
                Step::Verdict,
            ]
        );
        assert!(a.owner_guess.is_some());
        let Payload::Indices(returned) = &a.transcript.find(Step::ReturnRegisters).unwrap().payload else {
            panic!("wrong payload");
        };
        assert_eq!(returned.len(), 64 - 16 - 8);
    }

    #[test]
    fn measured_register_fails_check_at_the_branch_rate() {
        // One returned register measured in Z with θ = 0.3 fails with 2cos²θ·sin²θ.
        let theta = 0.3;
        let seal = SealParams::with_theta_cap(theta, 0.25, 1, 0.7).unwrap();
        let (regs, record) = crate::seal::seal_with_angles(&"0".parse().unwrap(), &[theta], &[0.0], &seal).unwrap();
        let expected = 2.0 * (theta.cos() * theta.sin()).powi(2);
        let branches = crate::chance::enumerate_branches(64, |src| {
            let mut vault = SealedRegisters::from_qubits(regs.clone(), record.clone());
            vault.decode(0, src).unwrap();
            !vault.check(&[0], src).unwrap().is_empty()
        })
        .unwrap();
        let p = crate::chance::expectation(&branches, |&f| f64::from(u8::from(f)));
        assert!((p - expected).abs() < 1e-12);
    }

    #[test]
    fn bit_seal_registers_run_end_to_end() {
        let rule = MappingRule::parity(32, 35).unwrap();
        let params = ProtocolParams::basic(40, 16, tiny_seal(48)).unwrap_err();
        assert!(matches!(params, SessionError::InvalidParams(_)));
        let mode = RegisterMode::BitSeal {
            rule,
            no_clue_probability: 0.2,
        };
        let mut p = basic_params();
        p.seal = tiny_seal(48);
        p.mode = mode;
        p.validate(Protocol::Basic).unwrap();
        let mut cl = ChaCha8Rng::seed_from_u64(21);
        let mut qu = ChaCha8Rng::seed_from_u64(22);
        let mut accepted = 0;
        for _ in 0..10 {
            let out = run_basic(
                1,
                &Strategy::honest_committer(),
                &Strategy::honest_owner(),
                &p,
                &mut cl,
                &mut qu,
            )
            .unwrap();
            if !out.aborted {
                assert!(out.accepted(), "{:?}", out.verdict);
                accepted += 1;
            }
        }
        assert!(accepted > 0);
    }
}
