//! Ordered, typed protocol messages and their line format.
//!
//! One line per message, tab separated: `phase  step  sender  payload-hex`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Basic,
    Advanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Commit,
    Unveil,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Commit => "commit",
            Phase::Unveil => "unveil",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sender {
    Committer,
    Owner,
}

impl Sender {
    pub fn as_str(self) -> &'static str {
        match self {
            Sender::Committer => "committer",
            Sender::Owner => "owner",
        }
    }
}

/// Protocol steps in the order they must occur. Not every protocol uses
/// every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    AgreeParams,
    Seal,
    SpotCheckRequest,
    SpotCheckReveal,
    SpotCheckResult,
    Discard,
    CommitBit,
    AnnounceMask,
    AnnounceMaskedCodeword,
    Unveil,
    ReturnRegisters,
    Verdict,
}

impl Step {
    const ALL: [Step; 12] = [
        Step::AgreeParams,
        Step::Seal,
        Step::SpotCheckRequest,
        Step::SpotCheckReveal,
        Step::SpotCheckResult,
        Step::Discard,
        Step::CommitBit,
        Step::AnnounceMask,
        Step::AnnounceMaskedCodeword,
        Step::Unveil,
        Step::ReturnRegisters,
        Step::Verdict,
    ];

    pub fn phase(self) -> Phase {
        if self >= Step::Unveil {
            Phase::Unveil
        } else {
            Phase::Commit
        }
    }

    pub fn label(self, protocol: Protocol) -> Option<&'static str> {
        match protocol {
            Protocol::Basic => match self {
                Step::Seal => Some("(1)"),
                Step::SpotCheckRequest => Some("(2).request"),
                Step::SpotCheckReveal => Some("(2).reveal"),
                Step::SpotCheckResult => Some("(2).result"),
                Step::Discard => Some("(3).discard"),
                Step::CommitBit => Some("(3)"),
                Step::Unveil => Some("(4)"),
                Step::ReturnRegisters => Some("(4).return"),
                Step::Verdict => Some("(5)"),
                _ => None,
            },
            Protocol::Advanced => match self {
                Step::AgreeParams => Some("(i)"),
                Step::Seal => Some("(ii).seal"),
                Step::SpotCheckRequest => Some("(ii).request"),
                Step::SpotCheckReveal => Some("(ii).reveal"),
                Step::SpotCheckResult => Some("(ii).result"),
                Step::Discard => Some("(iii).discard"),
                Step::AnnounceMask => Some("(iv)"),
                Step::AnnounceMaskedCodeword => Some("(vi)"),
                Step::Unveil => Some("(vii)"),
                Step::ReturnRegisters => Some("(vii).return"),
                Step::Verdict => Some("(viii)"),
                _ => None,
            },
        }
    }

    pub fn from_label(protocol: Protocol, label: &str) -> Option<Step> {
        Step::ALL.into_iter().find(|s| s.label(protocol) == Some(label))
    }
}

/// Which verification failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    RandomnessCheck,
    MismatchCheck,
    CodewordCheck,
    ParityCheck,
    UnreadCheck,
    ConsistencyCheck,
}

impl CheckKind {
    const ALL: [CheckKind; 6] = [
        CheckKind::RandomnessCheck,
        CheckKind::MismatchCheck,
        CheckKind::CodewordCheck,
        CheckKind::ParityCheck,
        CheckKind::UnreadCheck,
        CheckKind::ConsistencyCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::RandomnessCheck => "randomness",
            CheckKind::MismatchCheck => "mismatch",
            CheckKind::CodewordCheck => "codeword",
            CheckKind::ParityCheck => "parity",
            CheckKind::UnreadCheck => "unread",
            CheckKind::ConsistencyCheck => "consistency",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        CheckKind::ALL.get(usize::from(code)).copied()
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Params {
        s: u32,
        m: u32,
        n: u32,
        generator: Vec<BitString>,
    },
    Sealed {
        registers: u32,
    },
    Indices(Vec<u32>),
    Bits(BitString),
    SpotCheck {
        passed: bool,
        ones: u32,
        mismatches: u32,
    },
    Bit(u8),
    Unveil {
        bit: u8,
        indices: Vec<u32>,
    },
    Verdict {
        accepted: bool,
        failed: Vec<CheckKind>,
        unveiled: Option<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("step {next:?} cannot follow {last:?}")]
    OutOfOrder { last: Step, next: Step },
    #[error("step {step:?} is not part of the {protocol:?} protocol")]
    ForeignStep { protocol: Protocol, step: Step },
    #[error("payload bytes are malformed")]
    MalformedPayload,
    #[error("transcript line {line} is malformed: {reason}")]
    MalformedLine { line: usize, reason: &'static str },
}

mod tag {
    pub const PARAMS: u8 = 1;
    pub const SEALED: u8 = 2;
    pub const INDICES: u8 = 3;
    pub const BITS: u8 = 4;
    pub const SPOT: u8 = 5;
    pub const BIT: u8 = 6;
    pub const UNVEIL: u8 = 7;
    pub const VERDICT: u8 = 8;
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_bits(out: &mut Vec<u8>, bits: &BitString) {
    put_u32(out, bits.len() as u32);
    out.extend_from_slice(&bits.to_bytes());
}

fn put_indices(out: &mut Vec<u8>, indices: &[u32]) {
    put_u32(out, indices.len() as u32);
    for &i in indices {
        put_u32(out, i);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TranscriptError> {
        if self.bytes.len() < n {
            return Err(TranscriptError::MalformedPayload);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, TranscriptError> {
        Ok(self.take(1)?[0])
    }

    fn bit(&mut self) -> Result<u8, TranscriptError> {
        match self.u8()? {
            b @ (0 | 1) => Ok(b),
            _ => Err(TranscriptError::MalformedPayload),
        }
    }

    fn u32(&mut self) -> Result<u32, TranscriptError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn bits(&mut self) -> Result<BitString, TranscriptError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len.div_ceil(8))?;
        BitString::from_bytes(bytes, len).ok_or(TranscriptError::MalformedPayload)
    }

    fn indices(&mut self) -> Result<Vec<u32>, TranscriptError> {
        let len = self.u32()? as usize;
        if len > self.bytes.len() / 4 {
            return Err(TranscriptError::MalformedPayload);
        }
        (0..len).map(|_| self.u32()).collect()
    }
}

impl Payload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Payload::Params { s, m, n, generator } => {
                out.push(tag::PARAMS);
                put_u32(&mut out, *s);
                put_u32(&mut out, *m);
                put_u32(&mut out, *n);
                put_u32(&mut out, generator.len() as u32);
                for row in generator {
                    put_bits(&mut out, row);
                }
            }
            Payload::Sealed { registers } => {
                out.push(tag::SEALED);
                put_u32(&mut out, *registers);
            }
            Payload::Indices(indices) => {
                out.push(tag::INDICES);
                put_indices(&mut out, indices);
            }
            Payload::Bits(bits) => {
                out.push(tag::BITS);
                put_bits(&mut out, bits);
            }
            Payload::SpotCheck {
                passed,
                ones,
                mismatches,
            } => {
                out.push(tag::SPOT);
                out.push(u8::from(*passed));
                put_u32(&mut out, *ones);
                put_u32(&mut out, *mismatches);
            }
            Payload::Bit(b) => {
                out.push(tag::BIT);
                out.push(*b);
            }
            Payload::Unveil { bit, indices } => {
                out.push(tag::UNVEIL);
                out.push(*bit);
                put_indices(&mut out, indices);
            }
            Payload::Verdict {
                accepted,
                failed,
                unveiled,
            } => {
                out.push(tag::VERDICT);
                out.push(u8::from(*accepted));
                out.push(unveiled.unwrap_or(0xFF));
                out.push(failed.len() as u8);
                out.extend(failed.iter().map(|k| k.code()));
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Payload, TranscriptError> {
        let mut r = Reader { bytes };
        let payload = match r.u8()? {
            tag::PARAMS => {
                let s = r.u32()?;
                let m = r.u32()?;
                let n = r.u32()?;
                let rows = r.u32()? as usize;
                if rows > r.bytes.len() / 4 {
                    return Err(TranscriptError::MalformedPayload);
                }
                let generator = (0..rows).map(|_| r.bits()).collect::<Result<_, _>>()?;
                Payload::Params { s, m, n, generator }
            }
            tag::SEALED => Payload::Sealed { registers: r.u32()? },
            tag::INDICES => Payload::Indices(r.indices()?),
            tag::BITS => Payload::Bits(r.bits()?),
            tag::SPOT => Payload::SpotCheck {
                passed: r.bit()? == 1,
                ones: r.u32()?,
                mismatches: r.u32()?,
            },
            tag::BIT => Payload::Bit(r.bit()?),
            tag::UNVEIL => Payload::Unveil {
                bit: r.bit()?,
                indices: r.indices()?,
            },
            tag::VERDICT => {
                let accepted = r.bit()? == 1;
                let unveiled = match r.u8()? {
                    0xFF => None,
                    b @ (0 | 1) => Some(b),
                    _ => return Err(TranscriptError::MalformedPayload),
                };
                let count = usize::from(r.u8()?);
                let failed = r
                    .take(count)?
                    .iter()
                    .map(|&c| CheckKind::from_code(c).ok_or(TranscriptError::MalformedPayload))
                    .collect::<Result<_, _>>()?;
                Payload::Verdict {
                    accepted,
                    failed,
                    unveiled,
                }
            }
            _ => return Err(TranscriptError::MalformedPayload),
        };
        if !r.bytes.is_empty() {
            return Err(TranscriptError::MalformedPayload);
        }
        Ok(payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub step: Step,
    pub sender: Sender,
    pub payload: Payload,
}

impl Message {
    pub fn phase(&self) -> Phase {
        self.step.phase()
    }
}

/// Messages of one session in protocol order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTranscript {
    protocol: Protocol,
    messages: Vec<Message>,
}

impl SessionTranscript {
    pub fn new(protocol: Protocol) -> Self {
        SessionTranscript {
            protocol,
            messages: Vec::new(),
        }
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn last_step(&self) -> Option<Step> {
        self.messages.last().map(|m| m.step)
    }

    pub fn find(&self, step: Step) -> Option<&Message> {
        self.messages.iter().find(|m| m.step == step)
    }

    /// Messages sent before the unveil phase began.
    pub fn commit_phase(&self) -> impl Iterator<Item = &Message> {
        self.messages.iter().take_while(|m| m.phase() == Phase::Commit)
    }

    pub fn push(&mut self, step: Step, sender: Sender, payload: Payload) -> Result<(), TranscriptError> {
        if step.label(self.protocol).is_none() {
            return Err(TranscriptError::ForeignStep {
                protocol: self.protocol,
                step,
            });
        }
        if let Some(last) = self.last_step() {
            if step <= last {
                return Err(TranscriptError::OutOfOrder { last, next: step });
            }
        }
        self.messages.push(Message { step, sender, payload });
        Ok(())
    }

    /// Line-delimited rendering; identical sessions render identically.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(m.phase().as_str());
            out.push('\t');
            out.push_str(m.step.label(self.protocol).unwrap_or("?"));
            out.push('\t');
            out.push_str(m.sender.as_str());
            out.push('\t');
            out.push_str(&hex::encode(m.payload.encode()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(protocol: Protocol, text: &str) -> Result<Self, TranscriptError> {
        let mut transcript = SessionTranscript::new(protocol);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |reason| TranscriptError::MalformedLine { line: i + 1, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            let [phase, label, sender, payload] = fields[..] else {
                return Err(bad("expected four tab-separated fields"));
            };
            let step = Step::from_label(protocol, label).ok_or_else(|| bad("unknown step label"))?;
            if step.phase().as_str() != phase {
                return Err(bad("phase does not match step"));
            }
            let sender = match sender {
                "committer" => Sender::Committer,
                "owner" => Sender::Owner,
                _ => return Err(bad("unknown sender")),
            };
            let bytes = hex::decode(payload).map_err(|_| bad("payload is not hex"))?;
            transcript.push(step, sender, Payload::decode(&bytes)?)?;
        }
        Ok(transcript)
    }
}

impl fmt::Display for SessionTranscript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn indices_u32(indices: &[usize]) -> Vec<u32> {
    indices.iter().map(|&i| i as u32).collect()
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Basic => "basic",
            Protocol::Advanced => "advanced",
        })
    }
}
