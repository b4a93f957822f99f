//! Code operations against brute-force enumeration of the row space.

mod support;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use qseal::gf2::GeneratorMatrix;
use qseal::stats::chi_square_passes;
use qseal::BitString;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::enumeration::*;

#[test]
fn random_codes_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 2..=12 {
        for k in 1..=n.min(10) {
            let (g, rows) = random_generator(k, n, &mut rng);
            check_against_enumeration(&g, &rows);
        }
    }
}

#[test]
fn named_codes_match_enumeration() {
    let hamming = GeneratorMatrix::extended_hamming_8_4();
    let rows: Vec<u32> = hamming.rows().iter().map(to_word).collect();
    check_against_enumeration(&hamming, &rows);
    let space = row_space(&rows);
    let min_weight = space.keys().filter(|&&c| c != 0).map(|c| c.count_ones()).min();
    assert_eq!(min_weight, Some(4));
    for n in 2..=12 {
        let g = GeneratorMatrix::half_rate(n).unwrap();
        let rows: Vec<u32> = g.rows().iter().map(to_word).collect();
        check_against_enumeration(&g, &rows);
    }
}

#[test]
fn choose_codeword_is_uniform_on_its_parity_class() {
    let g = GeneratorMatrix::extended_hamming_8_4();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (r, b) in [("10000000", 1u8), ("11000000", 0), ("01101001", 1)] {
        let mask: BitString = r.parse().unwrap();
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for _ in 0..10_000 {
            *counts
                .entry(to_word(g.choose_codeword(&mask, b, &mut rng).unwrap().bits()))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 8, "mask {r}");
        let counts: Vec<u64> = counts.into_values().collect();
        assert!(chi_square_passes(&counts, 3.0), "{counts:?}");
    }
}

proptest! {
    #[test]
    fn parity_check_annihilates_exactly_the_code(seed in any::<u64>(), n in 2usize..=12, k_off in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1 + k_off % n.min(10);
        let (g, rows) = random_generator(k, n, &mut rng);
        let h: Vec<u32> = g.parity_check_rows().iter().map(to_word).collect();
        prop_assert_eq!(h.len(), n - k);
        let space: BTreeSet<u32> = row_space(&rows).into_keys().collect();
        for w in 0u32..1 << n {
            let zero = h.iter().all(|&r| (r & w).count_ones() % 2 == 0);
            prop_assert_eq!(zero, space.contains(&w));
        }
    }
}
