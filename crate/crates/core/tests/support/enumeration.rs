//! Brute-force row-space enumeration for code checks.

#![allow(dead_code)]

use std::collections::BTreeMap;

use qseal::gf2::{CodeError, GeneratorMatrix};
use qseal::BitString;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn to_string(word: u32, n: usize) -> BitString {
    (0..n).map(|j| word >> j & 1 == 1).collect()
}

pub fn to_word(b: &BitString) -> u32 {
    (0..b.len()).fold(0, |w, j| w | (u32::from(b.get(j)) << j))
}

/// The row space, keyed by codeword with the message that produced it.
pub fn row_space(rows: &[u32]) -> BTreeMap<u32, u32> {
    (0u32..1 << rows.len())
        .map(|msg| {
            let c = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| msg >> i & 1 == 1)
                .fold(0, |acc, (_, r)| acc ^ r);
            (c, msg)
        })
        .collect()
}

pub fn random_generator(k: usize, n: usize, rng: &mut ChaCha8Rng) -> (GeneratorMatrix, Vec<u32>) {
    use rand::Rng;
    loop {
        let rows: Vec<u32> = (0..k).map(|_| rng.random_range(1..1u32 << n)).collect();
        let strings: Vec<BitString> = rows.iter().map(|&r| to_string(r, n)).collect();
        match GeneratorMatrix::new(&strings) {
            Ok(g) => return (g, rows),
            Err(CodeError::RankDeficient { .. }) => {
                assert!(row_space(&rows).len() < 1 << k);
            }
            Err(e) => panic!("{e}"),
        }
    }
}

pub fn check_against_enumeration(g: &GeneratorMatrix, rows: &[u32]) {
    let (k, n) = (rows.len(), g.n());
    let space = row_space(rows);
    assert_eq!(space.len(), 1 << k);
    for (&c, &msg) in &space {
        assert_eq!(to_word(g.encode(&to_string(msg, k)).unwrap().bits()), c);
    }
    for w in 0u32..1 << n {
        assert_eq!(g.is_codeword(&to_string(w, n)), space.contains_key(&w), "word {w:b}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(rows[0]));
    for r in 1u32..1 << n {
        let mask = to_string(r, n);
        let separating = space.keys().any(|c| (c & r).count_ones() % 2 == 1);
        assert_eq!(g.separates(&mask), separating);
        for b in [0u8, 1] {
            match g.choose_codeword(&mask, b, &mut rng) {
                Ok(c) => {
                    let w = to_word(c.bits());
                    assert!(space.contains_key(&w));
                    assert_eq!((w & r).count_ones() % 2, u32::from(b));
                }
                Err(CodeError::RNonSeparating) => assert!(!separating && b == 1),
                Err(e) => panic!("{e}"),
            }
        }
    }
}
