//! Amplitude-level reference for session probabilities. Shared with the
//! acceptance target of the lab crate.

#![allow(dead_code)]

use std::f64::consts::PI;

use qseal::chance::enumerate_branches;
use qseal::gf2::GeneratorMatrix;
use qseal::seal::{seal, OwnerRecord, SealParams};
use qseal::session::{
    run_advanced, run_basic, spot_check, Behavior, Payload, ProtocolParams, RegisterMode, SessionOutcome, Step,
    Strategy, Thresholds,
};
use qseal::BitString;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const S: usize = 12;
pub const M: usize = 4;

pub fn small_params(g: Option<GeneratorMatrix>) -> ProtocolParams {
    let seal = SealParams::new(PI / 8.0, 0.25, S).unwrap();
    let thresholds = Thresholds {
        min_sample: 4,
        ..Thresholds::default()
    };
    ProtocolParams::new(S, M, g, seal, thresholds, 2, RegisterMode::Qubit).unwrap()
}

pub fn owner_record(seed: u64, params: &ProtocolParams) -> OwnerRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = BitString::random(params.s, &mut rng);
    seal(&x, &params.seal, &mut rng).unwrap().1
}

pub fn amp(record: &OwnerRecord, i: usize, bit: u8) -> f64 {
    let t = record.thetas[i];
    if bit == record.bits.get(i) {
        t.cos()
    } else {
        t.sin()
    }
}

pub fn indices(out: &SessionOutcome, step: Step) -> Vec<usize> {
    match &out.transcript.find(step).unwrap().payload {
        Payload::Indices(v) => v.iter().map(|&i| i as usize).collect(),
        Payload::Unveil { indices, .. } => indices.iter().map(|&i| i as usize).collect(),
        p => panic!("unexpected payload {p:?}"),
    }
}

pub fn bits(out: &SessionOutcome, step: Step) -> BitString {
    match &out.transcript.find(step).unwrap().payload {
        Payload::Bits(b) => b.clone(),
        p => panic!("unexpected payload {p:?}"),
    }
}

/// Probability the spot check passes, summing over every mismatch pattern.
pub fn spot_pass(record: &OwnerRecord, sample: &[usize], params: &ProtocolParams) -> f64 {
    let eps = params.seal.max_error_rate();
    let mut total = 0.0;
    for pattern in 0u32..(1 << sample.len()) {
        let mut p = 1.0;
        let mut pairs = Vec::new();
        for (j, &i) in sample.iter().enumerate() {
            let x = record.bits.get(i);
            let wrong = (pattern >> j) & 1 == 1;
            p *= amp(record, i, x ^ u8::from(wrong)).powi(2);
            pairs.push((x ^ u8::from(wrong), x));
        }
        if spot_check(&pairs, eps, &params.thresholds).passed() {
            total += p;
        }
    }
    total
}

/// Row space of `rows` by brute force.
pub fn span(rows: &[BitString]) -> Vec<u64> {
    let n = rows[0].len();
    let words: Vec<u64> = rows
        .iter()
        .map(|r| (0..n).fold(0u64, |w, j| w | (u64::from(r.get(j)) << j)))
        .collect();
    let mut out: Vec<u64> = (0u64..1 << words.len())
        .map(|msg| {
            words
                .iter()
                .enumerate()
                .filter(|(i, _)| msg >> i & 1 == 1)
                .fold(0, |acc, (_, w)| acc ^ w)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn word(b: &BitString) -> u64 {
    (0..b.len()).fold(0u64, |w, j| w | (u64::from(b.get(j)) << j))
}

pub fn all_branches(
    committer: &Strategy,
    b: u8,
    params: &ProtocolParams,
    seed: u64,
) -> Vec<qseal::Branch<SessionOutcome>> {
    let owner = Strategy::honest_owner();
    enumerate_branches(1 << 24, |src| {
        let mut classical = ChaCha8Rng::seed_from_u64(seed);
        match params.generator {
            Some(_) => run_advanced(b, committer, &owner, params, &mut classical, src).unwrap(),
            None => run_basic(b, committer, &owner, params, &mut classical, src).unwrap(),
        }
    })
    .unwrap()
}

/// Escape probability of the collective search computed from amplitudes.
pub fn collective_reference(seed: u64, b: u8, g: &GeneratorMatrix, params: &ProtocolParams) -> f64 {
    let committer = Strategy::committer(Behavior::CollectiveSearchAdvanced { t_max: 8 }).unwrap();
    let branches = all_branches(&committer, b, params, seed);
    let record = owner_record(seed, params);
    let sample = indices(&branches[0].value, Step::SpotCheckRequest);
    let Some(first) = branches.iter().map(|br| &br.value).find(|o| !o.aborted) else {
        return 0.0;
    };
    let r = word(&bits(first, Step::AnnounceMask));
    let c_prime = word(&bits(first, Step::AnnounceMaskedCodeword));
    let plan = branches
        .iter()
        .map(|br| br.value.diagnostics.attempted.clone())
        .max_by_key(Vec::len)
        .unwrap();
    assert!(!plan.is_empty());

    let n = g.n();
    let code = span(&g.rows());
    let accepted = |c: u64| code.binary_search(&c).is_ok() && (c & r).count_ones() % 2 == u32::from(b);
    // position p of a subset is bit p of x here
    let x_of = |subset: &[usize], x: u64| -> f64 {
        subset
            .iter()
            .enumerate()
            .map(|(p, &i)| amp(&record, i, (x >> p & 1) as u8))
            .product()
    };
    let owner_valid = |subset: &[usize]| {
        let x = subset
            .iter()
            .enumerate()
            .fold(0u64, |w, (p, &i)| w | (u64::from(record.bits.get(i)) << p));
        accepted(c_prime ^ x)
    };

    let mut reach = 1.0;
    let mut escape = 0.0;
    for (j, subset) in plan.iter().enumerate() {
        let succeed: f64 = (0..1u64 << n)
            .filter(|&x| accepted(c_prime ^ x))
            .map(|x| x_of(subset, x).powi(2))
            .sum();
        if owner_valid(subset) {
            escape += reach * succeed;
        }
        if j + 1 == plan.len() {
            if owner_valid(subset) {
                escape += reach * (1.0 - succeed);
            }
            break;
        }
        // the failed subset is returned and checked; the check passes with the
        // squared overlap of the projected state and the sealed product state
        let unnormalized: f64 = (0..1u64 << n)
            .filter(|&x| !accepted(c_prime ^ x))
            .map(|x| x_of(subset, x).powi(2))
            .sum();
        let fail = 1.0 - succeed;
        let check_pass = if fail > 0.0 {
            unnormalized * unnormalized / fail
        } else {
            0.0
        };
        reach *= fail * check_pass;
    }
    spot_pass(&record, &sample, params) * escape
}
