//! Exact session probabilities from branch enumeration, checked against an
//! independent calculation that works directly on amplitudes.
//!
//! Classical choices (sealed bits, angles, spot sample, mask, masked
//! codeword, attempted subsets) are recovered from the session itself; only
//! the quantum probabilities are recomputed here.

mod support;

use qseal::adversary::exact_session;
use qseal::gf2::GeneratorMatrix;
use qseal::session::{Behavior, Step, Strategy};
use support::amplitude::*;

#[test]
fn collective_search_matches_amplitude_calculation() {
    let g2 = GeneratorMatrix::half_rate(2).unwrap();
    let g3 = GeneratorMatrix::new(&["101".parse().unwrap(), "011".parse().unwrap()]).unwrap();
    for g in [g2, g3] {
        let params = small_params(Some(g.clone()));
        let committer = Strategy::committer(Behavior::CollectiveSearchAdvanced { t_max: 8 }).unwrap();
        for seed in 0..6 {
            for b in [0, 1] {
                let exact = exact_session(&committer, b, &params, seed, 1 << 24).unwrap();
                let reference = collective_reference(seed, b, &g, &params);
                assert!(
                    (exact.escape - reference).abs() < 1e-9,
                    "n={} seed={seed} b={b}: {} vs {reference}",
                    g.n(),
                    exact.escape
                );
                assert!((exact.target_success - exact.escape).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn deferred_choice_matches_amplitude_calculation() {
    let params = small_params(None);
    let committer = Strategy::committer(Behavior::DeferredChoiceBasic).unwrap();
    for seed in 0..8 {
        let record = owner_record(seed, &params);
        let exact = exact_session(&committer, 1, &params, seed, 1 << 24).unwrap();
        let branches = all_branches(&committer, 1, &params, seed);
        let first = &branches[0].value;
        let sample = indices(first, Step::SpotCheckRequest);
        let spot = spot_pass(&record, &sample, &params);
        // the unveiled register is picked classically, so it is the same on
        // every branch that got that far
        let chosen = branches
            .iter()
            .find(|br| !br.value.aborted)
            .map(|br| indices(&br.value, Step::Unveil)[0])
            .unwrap();
        let correct = record.thetas[chosen].cos().powi(2);
        assert!((exact.escape - spot * correct).abs() < 1e-9, "seed {seed}");
        assert!(
            (exact.target_success - 0.5 * spot * correct).abs() < 1e-9,
            "seed {seed}"
        );
    }
}

#[test]
fn honest_advanced_matches_amplitude_calculation() {
    let g = GeneratorMatrix::new(&["101".parse().unwrap(), "011".parse().unwrap()]).unwrap();
    let params = small_params(Some(g.clone()));
    let code = span(&g.rows());
    for seed in 0..8 {
        let record = owner_record(seed, &params);
        let exact = exact_session(&Strategy::honest_committer(), 0, &params, seed, 1 << 24).unwrap();
        let branches = all_branches(&Strategy::honest_committer(), 0, &params, seed);
        let sample = indices(&branches[0].value, Step::SpotCheckRequest);
        let done = branches.iter().find(|br| !br.value.aborted).unwrap();
        let used = indices(&done.value, Step::Unveil);
        let r = word(&bits(&done.value, Step::AnnounceMask));
        // the decoding error e must itself be a codeword with e⊙r = 0
        let ok: f64 = code
            .iter()
            .filter(|&&e| (e & r).count_ones().is_multiple_of(2))
            .map(|&e| {
                used.iter()
                    .enumerate()
                    .map(|(p, &i)| {
                        let t = record.thetas[i];
                        if e >> p & 1 == 1 {
                            t.sin().powi(2)
                        } else {
                            t.cos().powi(2)
                        }
                    })
                    .product::<f64>()
            })
            .sum();
        let spot = spot_pass(&record, &sample, &params);
        assert!((exact.escape - spot * ok).abs() < 1e-9, "seed {seed}");
    }
}
