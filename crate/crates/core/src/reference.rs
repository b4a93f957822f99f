//! Closed-form reference values the simulations are compared against.
//!
//! `u` is always the wobble bound `Θ/N^α`, with angles uniform on `[-u, u]`.

use crate::bits::BitString;
use crate::gf2::{dot_parity, GeneratorMatrix};
use crate::math::{cos, powf, sin};

/// `E[sin²θ] = 1/2 − sin(2u)/(4u)`: mean per-bit reading error.
pub fn mean_read_error(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        // series, avoids cancellation
        return u * u / 3.0 - powf(u, 4.0) * 2.0 / 15.0;
    }
    0.5 - sin(2.0 * u) / (4.0 * u)
}

/// `cos⁴θ + sin⁴θ`: probability a qubit read in Z still passes its check.
pub fn read_check_pass(theta: f64) -> f64 {
    let c2 = cos(theta) * cos(theta);
    let s2 = sin(theta) * sin(theta);
    c2 * c2 + s2 * s2
}

/// `2cos²θ·sin²θ`: check failure probability after a Z measurement.
pub fn read_check_failure(theta: f64) -> f64 {
    1.0 - read_check_pass(theta)
}

/// `E[cos⁴θ + sin⁴θ] = 1 − (1/2 − sin(4u)/(8u))/2`.
pub fn mean_read_check_pass(u: f64) -> f64 {
    1.0 - 0.5 * mean_read_error(2.0 * u)
}

/// `Π(cos⁴θ_i + sin⁴θ_i)`: escape probability of reading every qubit.
pub fn measure_all_escape(thetas: &[f64]) -> f64 {
    thetas.iter().map(|&t| read_check_pass(t)).product()
}

/// Honest Basic acceptance given the spot check passed: the committer's
/// decoded bit must equal the sealed one.
pub fn basic_honest_acceptance(q: f64) -> f64 {
    1.0 - q
}

/// Flipping the bit at unveil passes only if the decoded bit was wrong.
pub fn basic_flip_escape(q: f64) -> f64 {
    q
}

/// Deferred choice passes when the late measurement decodes correctly.
pub fn deferred_choice_escape(q: f64) -> f64 {
    1.0 - q
}

/// The unveiled bit is an independent coin, so half the escapes hit the target.
pub fn deferred_choice_target_success(q: f64) -> f64 {
    0.5 * (1.0 - q)
}

/// Probability that the owner's recovered codeword `c ⊕ e` passes both the
/// codeword and parity checks, where `e` has independent Bernoulli(q) bits
/// and `flip` is the parity mismatch the error must produce (0 for an honest
/// unveil, 1 for a flipped one). Averaged over separating masks `r`.
pub fn advanced_error_acceptance(g: &GeneratorMatrix, q: f64, flip: u8) -> f64 {
    let n = g.n();
    assert!(n <= 20, "mask enumeration limited to n <= 20");
    let codewords = g.codewords();
    let mut total = 0.0;
    let mut masks = 0u64;
    for word in 1u64..(1u64 << n) {
        let r = BitString::from_word(word, n);
        if !g.separates(&r) {
            continue;
        }
        masks += 1;
        total += codewords
            .iter()
            .filter(|e| dot_parity(e, &r).expect("same length") == flip)
            .map(|e| {
                let w = e.weight() as f64;
                powf(q, w) * powf(1.0 - q, n as f64 - w)
            })
            .sum::<f64>();
    }
    total / masks as f64
}

/// A uniform `x` lands `c′ ⊕ x` in the code with probability `2^(k−n)`.
pub fn random_index_codeword_pass(g: &GeneratorMatrix) -> f64 {
    powf(2.0, g.k() as f64 - g.n() as f64)
}
