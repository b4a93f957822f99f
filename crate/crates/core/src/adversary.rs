//! Cheating strategies against seals and the commitment protocols, exact
//! branch-enumeration oracles for small instances, and per-strategy reports.
//!
//! Adversaries only use projectors diagonal in the computational basis of
//! the registers they attack (plus the parity projector on a bit seal's
//! payload). General POVMs and entangling unitaries are not modeled.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::bitseal::{seal_bit, BitSealError, BitSealLayout, MappingRule};
use crate::chance::{enumerate_branches, BranchBudgetExceeded, BranchReplay, OutcomeSource};
use crate::gf2::{dot_parity, GeneratorMatrix};
use crate::math::log2;
use crate::seal::{check, seal, seal_with_angles, OwnerRecord, PublicRegisters, SealError, SealParams};
use crate::session::{run_advanced, run_basic, Behavior, ProtocolParams, SessionError, SessionOutcome, Strategy};
use crate::stats::Rate;

/// Printed alongside attack results.
pub const MEASUREMENT_CLASS_NOTE: &str =
    "adversaries use computational-basis subset projectors and the parity projector only; general POVMs are not modeled";

/// What one cheating trial achieved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialOutcome {
    /// The spot check stopped the session before any commitment.
    pub aborted: bool,
    /// The verifier accepted.
    pub escaped: bool,
    /// Accepted with the attacker's target as the outcome.
    pub target_hit: bool,
    pub info_bits: f64,
    pub attempts: usize,
}

impl TrialOutcome {
    pub fn from_session(outcome: &SessionOutcome, target: u8) -> Self {
        TrialOutcome {
            aborted: outcome.aborted,
            escaped: outcome.accepted(),
            target_hit: outcome.hit_target(target),
            info_bits: outcome.diagnostics.info_bits,
            attempts: outcome.diagnostics.attempts,
        }
    }
}

/// Aggregated statistics of one strategy over many trials. Rates are taken
/// over the trials that were not aborted by the spot check.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttackReport {
    pub trials: u64,
    pub aborted: u64,
    pub escape: Rate,
    pub target_success: Rate,
    pub info_bits_total: f64,
}

impl AttackReport {
    pub fn record(&mut self, t: &TrialOutcome) {
        self.trials += 1;
        if t.aborted {
            self.aborted += 1;
            return;
        }
        self.escape.record(t.escaped);
        self.target_success.record(t.target_hit);
        self.info_bits_total += t.info_bits;
    }

    pub fn merge(self, other: AttackReport) -> AttackReport {
        AttackReport {
            trials: self.trials + other.trials,
            aborted: self.aborted + other.aborted,
            escape: self.escape.merge(other.escape),
            target_success: self.target_success.merge(other.target_success),
            info_bits_total: self.info_bits_total + other.info_bits_total,
        }
    }

    pub fn escape_rate(&self) -> f64 {
        self.escape.value()
    }

    pub fn target_success_rate(&self) -> f64 {
        self.target_success.value()
    }

    /// Mean information proxy per completed trial, in bits.
    pub fn info_proxy(&self) -> f64 {
        if self.escape.trials == 0 {
            0.0
        } else {
            self.info_bits_total / self.escape.trials as f64
        }
    }

    pub fn escape_ci95(&self) -> (f64, f64) {
        self.escape.ci95()
    }

    pub fn target_ci95(&self) -> (f64, f64) {
        self.target_success.ci95()
    }
}

/// Result of the unveil-phase collective search.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveAttempt {
    pub announced: Vec<usize>,
    pub attempts: usize,
    pub projector_succeeded: bool,
    pub info_bits: f64,
    pub attempted: Vec<Vec<usize>>,
}

/// Disjoint random `n`-subsets of `candidates`, at most `t_max` of them, each
/// sorted. Registers are never reused across attempts.
pub fn plan_subsets<R: Rng + ?Sized>(candidates: &[usize], n: usize, t_max: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut pool = candidates.to_vec();
    pool.shuffle(rng);
    pool.chunks_exact(n.max(1))
        .take(t_max)
        .map(|c| {
            let mut v = c.to_vec();
            v.sort_unstable();
            v
        })
        .collect()
}

/// `accept[x]` for every `x ∈ {0,1}^n` (first register = most significant
/// bit): whether `c′ ⊕ x` is a codeword with parity `target` against `r`.
pub fn accepted_strings(g: &GeneratorMatrix, c_prime: &BitString, r: &BitString, target: u8) -> Vec<bool> {
    let n = g.n();
    (0..1u64 << n)
        .map(|key| {
            let c = c_prime.xor(&BitString::from_word(key, n));
            g.is_codeword(&c) && dot_parity(&c, r).ok() == Some(target)
        })
        .collect()
}

/// The unveil-phase search: project fresh `n`-subsets onto the strings that
/// would make `c′` open to `target`, stopping at the first success. If every
/// attempt fails the last attempted subset is announced anyway.
#[allow(clippy::too_many_arguments)]
pub fn collective_unveil<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    regs: &mut PublicRegisters,
    candidates: &[usize],
    g: &GeneratorMatrix,
    c_prime: &BitString,
    r: &BitString,
    target: u8,
    t_max: usize,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<CollectiveAttempt, SealError> {
    let n = g.n();
    let plan = plan_subsets(candidates, n, t_max, classical);
    let accept = accepted_strings(g, c_prime, r, target);
    let hits = accept.iter().filter(|&&a| a).count() as f64;
    let space = (1u64 << n) as f64;
    let mut attempt = CollectiveAttempt {
        announced: Vec::new(),
        attempts: 0,
        projector_succeeded: false,
        info_bits: 0.0,
        attempted: Vec::new(),
    };
    for subset in &plan {
        attempt.attempts += 1;
        let ok = regs.project_joint(subset, |k| accept[k], quantum)?;
        attempt.info_bits += if ok {
            log2(space / hits)
        } else {
            log2(space / (space - hits))
        };
        attempt.announced = subset.clone();
        attempt.attempted.push(subset.clone());
        if ok {
            attempt.projector_succeeded = true;
            break;
        }
    }
    if attempt.announced.is_empty() {
        let mut fallback: Vec<usize> = candidates.iter().copied().take(n).collect();
        fallback.sort_unstable();
        attempt.announced = fallback;
    }
    Ok(attempt)
}

/// Basic Protocol committer who measures nothing at commit time.
pub fn deferred_choice_basic<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    target_b: u8,
    params: &ProtocolParams,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<TrialOutcome, SessionError> {
    let committer = Strategy::committer(Behavior::DeferredChoiceBasic)?;
    let out = run_basic(
        target_b,
        &committer,
        &Strategy::honest_owner(),
        params,
        classical,
        quantum,
    )?;
    Ok(TrialOutcome::from_session(&out, target_b))
}

/// Advanced Protocol committer running the collective search.
pub fn collective_search_advanced<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    target_b: u8,
    params: &ProtocolParams,
    t_max: usize,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<TrialOutcome, SessionError> {
    let committer = Strategy::committer(Behavior::CollectiveSearchAdvanced { t_max })?;
    let out = run_advanced(
        target_b,
        &committer,
        &Strategy::honest_owner(),
        params,
        classical,
        quantum,
    )?;
    Ok(TrialOutcome::from_session(&out, target_b))
}

/// What a seal reader learned and whether the owner noticed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderOutcome {
    pub escaped: bool,
    /// Whether the extracted value equals the sealed one.
    pub correct: bool,
}

/// Reads every qubit in Z, then lets the owner check.
pub fn measure_all_attack<Q: OutcomeSource + ?Sized>(
    regs: &mut PublicRegisters,
    record: &OwnerRecord,
    quantum: &mut Q,
) -> Result<ReaderOutcome, SealError> {
    let read = crate::seal::read(regs, quantum)?;
    let escaped = check(regs, record, quantum)?.is_unread();
    Ok(ReaderOutcome {
        escaped,
        correct: read == record.bits,
    })
}

/// Seals a fresh random string and runs [`measure_all_attack`] on it.
pub fn measure_all_reader<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    params: &SealParams,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<(ReaderOutcome, OwnerRecord), SealError> {
    let bits = BitString::random(params.length(), classical);
    let (mut regs, record) = seal(&bits, params, classical)?;
    let outcome = measure_all_attack(&mut regs, &record, quantum)?;
    Ok((outcome, record))
}

/// Projects the payload of a parity-rule bit seal onto its even or odd
/// parity subspace, then lets the owner check the whole string.
pub fn subset_parity_attack<Q: OutcomeSource + ?Sized>(
    regs: &mut PublicRegisters,
    record: &OwnerRecord,
    layout: &BitSealLayout,
    sealed_bit: u8,
    quantum: &mut Q,
) -> Result<ReaderOutcome, BitSealError> {
    if !matches!(layout.rule, MappingRule::ParityOfPositions { .. }) {
        return Err(BitSealError::InvalidRule("the parity attack needs a parity rule"));
    }
    let even = regs.project_joint(&layout.payload, |k| k.count_ones() % 2 == 0, quantum)?;
    let learned = u8::from(!even);
    let escaped = check(regs, record, quantum)?.is_unread();
    Ok(ReaderOutcome {
        escaped,
        correct: learned == sealed_bit,
    })
}

/// Seals a random bit under `rule` and runs [`subset_parity_attack`].
pub fn subset_parity_reader<R: Rng + ?Sized, Q: OutcomeSource + ?Sized>(
    rule: MappingRule,
    params: &SealParams,
    classical: &mut R,
    quantum: &mut Q,
) -> Result<ReaderOutcome, BitSealError> {
    let b = u8::from(classical.random_bool(0.5));
    let (mut regs, record, layout) = seal_bit(b, rule, params, classical)?;
    subset_parity_attack(&mut regs, &record, &layout, b, quantum)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Budget(#[from] BranchBudgetExceeded),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error(transparent)]
    BitSeal(#[from] BitSealError),
}

/// Exact probabilities summed over every measurement branch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExactProbabilities {
    pub escape: f64,
    pub target_success: f64,
    pub abort: f64,
    pub branches: usize,
}

/// Enumerates every branch of `trial` (which must draw all randomness other
/// than its replay source from fixed seeds) and sums the outcome
/// probabilities. Escape and target success are unconditional, i.e. they
/// include aborted branches as failures.
pub fn exact_oracle<E, F>(budget: usize, mut trial: F) -> Result<ExactProbabilities, OracleError>
where
    F: FnMut(&mut BranchReplay) -> Result<TrialOutcome, E>,
    OracleError: From<E>,
{
    let mut err = None;
    let branches = enumerate_branches(budget, |src| match trial(src) {
        Ok(t) => Some(t),
        Err(e) => {
            err.get_or_insert(e);
            None
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    let mut out = ExactProbabilities {
        branches: branches.len(),
        ..Default::default()
    };
    for b in &branches {
        let t = b.value.expect("errors returned above");
        if t.aborted {
            out.abort += b.probability;
        }
        if t.escaped {
            out.escape += b.probability;
        }
        if t.target_hit {
            out.target_success += b.probability;
        }
    }
    Ok(out)
}

/// Exact escape probability of the measure-all reader on a fixed seal.
pub fn exact_measure_all(
    bits: &BitString,
    thetas: &[f64],
    params: &SealParams,
    budget: usize,
) -> Result<f64, OracleError> {
    let frames = alloc::vec![0.0; bits.len()];
    let (regs, record) = seal_with_angles(bits, thetas, &frames, params)?;
    let p = exact_oracle(budget, |src| {
        let mut regs = regs.clone();
        measure_all_attack(&mut regs, &record, src).map(|o| TrialOutcome {
            escaped: o.escaped,
            target_hit: o.escaped && o.correct,
            ..Default::default()
        })
    })?;
    Ok(p.escape)
}

/// Exact probabilities of one session, conditional on the classical stream
/// seeded by `classical_seed`: only measurement outcomes are enumerated.
pub fn exact_session(
    committer: &Strategy,
    target_b: u8,
    params: &ProtocolParams,
    classical_seed: u64,
    budget: usize,
) -> Result<ExactProbabilities, OracleError> {
    let owner = Strategy::honest_owner();
    let protocol = params.protocol();
    exact_oracle(budget, |src| {
        let mut classical = ChaCha8Rng::seed_from_u64(classical_seed);
        let out = match protocol {
            crate::session::Protocol::Basic => run_basic(target_b, committer, &owner, params, &mut classical, src)?,
            crate::session::Protocol::Advanced => {
                run_advanced(target_b, committer, &owner, params, &mut classical, src)?
            }
        };
        Ok::<_, SessionError>(TrialOutcome::from_session(&out, target_b))
    })
}

/// Exact escape and learning probabilities of the parity attack on a seal
/// drawn from `classical_seed`.
pub fn exact_subset_parity(
    rule: MappingRule,
    params: &SealParams,
    classical_seed: u64,
    budget: usize,
) -> Result<ExactProbabilities, OracleError> {
    exact_oracle(budget, |src| {
        let mut classical = ChaCha8Rng::seed_from_u64(classical_seed);
        subset_parity_reader(rule, params, &mut classical, src).map(|o| TrialOutcome {
            escaped: o.escaped,
            target_hit: o.correct,
            ..Default::default()
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{measure_all_escape, read_check_pass};
    use crate::session::Protocol;
    use core::f64::consts::PI;

    #[test]
    fn measure_all_oracle_matches_closed_form() {
        let params = SealParams::new(PI / 8.0, 0.25, 3).unwrap();
        let thetas = [0.1, -0.2, 0.05];
        let bits: BitString = "101".parse().unwrap();
        let exact = exact_measure_all(&bits, &thetas, &params, 1 << 12).unwrap();
        assert!((exact - measure_all_escape(&thetas)).abs() < 1e-12);
        assert!((measure_all_escape(&[0.2]) - read_check_pass(0.2)).abs() < 1e-15);
    }

    #[test]
    fn honest_advanced_oracle_with_zero_wobble_accepts_surely() {
        let seal = SealParams::new(1e-12, 0.25, 12).unwrap();
        let g = GeneratorMatrix::new(&["101".parse().unwrap(), "011".parse().unwrap()]).unwrap();
        let thresholds = crate::session::Thresholds {
            min_sample: 4,
            ..Default::default()
        };
        let params =
            ProtocolParams::new(12, 4, Some(g), seal, thresholds, 2, crate::session::RegisterMode::Qubit).unwrap();
        assert_eq!(params.protocol(), Protocol::Advanced);
        for seed in 0..4 {
            let p = exact_session(&Strategy::honest_committer(), 1, &params, seed, 1 << 20).unwrap();
            assert!((p.escape + p.abort - 1.0).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn deferred_choice_is_a_coin() {
        let seal = SealParams::new(1e-12, 0.25, 24).unwrap();
        let params = ProtocolParams::basic(24, 16, seal).unwrap();
        let committer = Strategy::committer(Behavior::DeferredChoiceBasic).unwrap();
        let p = exact_session(&committer, 0, &params, 3, 1 << 24).unwrap();
        assert!(p.abort < 1e-12);
        assert!((p.escape - 1.0).abs() < 1e-9);
        assert!((p.target_success - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_attempt_probability_is_sum_of_products() {
        let g = GeneratorMatrix::new(&["101".parse().unwrap(), "011".parse().unwrap()]).unwrap();
        let params = SealParams::new(PI / 8.0, 0.25, 3).unwrap();
        let bits: BitString = "110".parse().unwrap();
        let thetas = [0.2, -0.1, 0.15];
        let (regs, record) = seal_with_angles(&bits, &thetas, &[0.0; 3], &params).unwrap();
        let c_prime: BitString = "010".parse().unwrap();
        let r: BitString = "100".parse().unwrap();
        let accept = accepted_strings(&g, &c_prime, &r, 1);
        let idx = [0usize, 1, 2];
        let expected: f64 = (0..8)
            .filter(|&x| accept[x])
            .map(|x| {
                idx.iter()
                    .enumerate()
                    .map(|(pos, &i)| record.expected_state(i).amplitude(((x >> (2 - pos)) & 1) as u8).powi(2))
                    .product::<f64>()
            })
            .sum();
        let got = regs.joint_probability(&idx, |k| accept[k]).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn parity_attack_on_exact_seals_is_invisible() {
        let params = SealParams::new(1e-12, 0.25, 40).unwrap();
        let rule = MappingRule::parity(32, 35).unwrap();
        let p = exact_subset_parity(rule, &params, 7, 1 << 12).unwrap();
        assert!((p.escape - 1.0).abs() < 1e-9);
        assert!((p.target_success - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_accumulates() {
        let mut r = AttackReport::default();
        r.record(&TrialOutcome {
            escaped: true,
            target_hit: true,
            info_bits: 2.0,
            ..Default::default()
        });
        r.record(&TrialOutcome {
            aborted: true,
            ..Default::default()
        });
        r.record(&TrialOutcome::default());
        assert_eq!((r.trials, r.aborted), (3, 1));
        assert_eq!(r.escape_rate(), 0.5);
        assert_eq!(r.info_proxy(), 1.0);
    }
}
