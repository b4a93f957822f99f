//! Text formats for session files: the transcript lines plus the owner's
//! private seal record.
//!
//! ```text
//! protocol    advanced
//! seal    0.39269908169872414    0.25    64
//! qubit    0    1    -0.031    0
//! ...
//! commit    (i)    owner    01000000...
//! ```
//!
//! Fields are tab-separated (spaces above). `seal` carries Θ, α and N; each `qubit` line
//! carries index, bit, wobble angle and frame angle in radians. Every other
//! line is a transcript record `phase, step, sender, payload-hex`. Floats are
//! printed in shortest round-trip form, so parsing restores them exactly.

use std::fmt::Write as _;

use qseal::seal::{OwnerRecord, SealParams};
use qseal::session::{Protocol, SessionTranscript, TranscriptError};
use qseal::BitString;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionFile {
    pub transcript: SessionTranscript,
    pub record: Option<OwnerRecord>,
}

pub fn owner_record_text(record: &OwnerRecord) -> String {
    let p = &record.params;
    let mut out = format!("seal\t{}\t{}\t{}\n", p.theta_max(), p.alpha(), p.length());
    for i in 0..record.len() {
        writeln!(
            out,
            "qubit\t{i}\t{}\t{}\t{}",
            record.bits.get(i),
            record.thetas[i],
            record.frames[i]
        )
        .expect("writing to a String");
    }
    out
}

impl SessionFile {
    pub fn to_text(&self) -> String {
        let mut out = format!("protocol\t{}\n", self.transcript.protocol());
        if let Some(r) = &self.record {
            out.push_str(&owner_record_text(r));
        }
        out.push_str(&self.transcript.to_text());
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        let bad = |line: usize, reason: &str| FormatError::Line {
            line,
            reason: reason.to_string(),
        };
        let mut protocol = None;
        let mut params = None;
        let mut bits = Vec::new();
        let mut thetas = Vec::new();
        let mut frames = Vec::new();
        let mut transcript_lines = String::new();
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "" => {}
                "protocol" => {
                    protocol = Some(match fields.get(1).copied() {
                        Some("basic") => Protocol::Basic,
                        Some("advanced") => Protocol::Advanced,
                        _ => return Err(bad(no, "unknown protocol")),
                    });
                }
                "seal" => {
                    let [_, theta, alpha, len] = fields[..] else {
                        return Err(bad(no, "seal needs three fields"));
                    };
                    let parsed = (theta.parse::<f64>(), alpha.parse::<f64>(), len.parse::<usize>());
                    let (Ok(theta), Ok(alpha), Ok(len)) = parsed else {
                        return Err(bad(no, "malformed seal parameters"));
                    };
                    params = Some(SealParams::new(theta, alpha, len).map_err(|e| bad(no, &e.to_string()))?);
                }
                "qubit" => {
                    let [_, idx, bit, theta, frame] = fields[..] else {
                        return Err(bad(no, "qubit needs four fields"));
                    };
                    if idx.parse::<usize>().ok() != Some(bits.len()) {
                        return Err(bad(no, "qubit lines must be in index order"));
                    }
                    let (Ok(bit), Ok(theta), Ok(frame)) =
                        (bit.parse::<u8>(), theta.parse::<f64>(), frame.parse::<f64>())
                    else {
                        return Err(bad(no, "malformed qubit line"));
                    };
                    if bit > 1 {
                        return Err(bad(no, "bit must be 0 or 1"));
                    }
                    bits.push(bit);
                    thetas.push(theta);
                    frames.push(frame);
                }
                _ => {
                    transcript_lines.push_str(line);
                    transcript_lines.push('\n');
                }
            }
        }
        let protocol = protocol.ok_or_else(|| bad(1, "missing protocol line"))?;
        let record = match params {
            Some(params) => {
                if bits.len() != params.length() {
                    return Err(bad(0, "qubit count differs from the seal length"));
                }
                Some(OwnerRecord {
                    bits: BitString::from_bits(&bits).expect("bits checked"),
                    thetas,
                    frames,
                    params,
                })
            }
            None if bits.is_empty() => None,
            None => return Err(bad(0, "qubit lines without a seal line")),
        };
        Ok(SessionFile {
            transcript: SessionTranscript::from_text(protocol, &transcript_lines)?,
            record,
        })
    }
}
