//! Sealing statistics against closed forms.

use std::f64::consts::PI;

use qseal::adversary::{exact_measure_all, measure_all_reader};
use qseal::reference::{mean_read_error, measure_all_escape};
use qseal::seal::{escape_bound, read, seal, SealParams};
use qseal::stats::{ks_critical, ks_uniform, Rate, THREE_SIGMA_ALPHA};
use qseal::BitString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn wobble_angles_are_uniform() {
    let params = SealParams::new(PI / 8.0, 0.25, 64).unwrap();
    let u = params.wobble_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut thetas = Vec::new();
    for _ in 0..200 {
        let bits = BitString::random(64, &mut rng);
        thetas.extend(seal(&bits, &params, &mut rng).unwrap().1.thetas);
    }
    assert!(thetas.iter().all(|t| t.abs() <= u));
    let d = ks_uniform(&thetas, -u, u);
    assert!(d <= ks_critical(thetas.len(), THREE_SIGMA_ALPHA), "KS distance {d}");
}

#[test]
fn read_error_tracks_the_uniform_angle_mean() {
    for n in [16usize, 64, 256] {
        let params = SealParams::new(PI / 8.0, 0.25, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut errors = Rate::default();
        while errors.trials < 20_000 {
            let bits = BitString::random(n, &mut rng);
            let (mut regs, _) = seal(&bits, &params, &mut rng).unwrap();
            let got = read(&mut regs, &mut rng).unwrap();
            for i in 0..n {
                errors.record(got.get(i) != bits.get(i));
            }
        }
        let eps = params.max_error_rate();
        let q = mean_read_error(params.wobble_bound());
        assert!(q <= eps);
        assert!(errors.at_most(eps, 3.0), "N={n}: {} > {eps}", errors.value());
        assert!(errors.within_sigma(q, 3.0), "N={n}: {} vs {q}", errors.value());
    }
}

#[test]
fn measure_all_enumeration_equals_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in 1..=10 {
        let params = SealParams::new(PI / 8.0, 0.25, n).unwrap();
        let u = params.wobble_bound();
        let thetas: Vec<f64> = (0..n).map(|_| rng.random_range(-u..=u)).collect();
        let bits = BitString::random(n, &mut rng);
        let exact = exact_measure_all(&bits, &thetas, &params, 1 << 24).unwrap();
        let closed = measure_all_escape(&thetas);
        assert!((exact - closed).abs() < 1e-12, "N={n}");
        assert!(closed <= escape_bound(&thetas, n as f64) + 1e-15);
    }
}

#[test]
fn measure_all_monte_carlo_sits_below_the_bound() {
    let params = SealParams::with_theta_cap(0.7, 0.25, 8, 0.75).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut quantum = ChaCha8Rng::seed_from_u64(13);
    let mut escapes = Rate::default();
    let mut expected = 0.0;
    let trials = 20_000;
    for _ in 0..trials {
        let (outcome, record) = measure_all_reader(&params, &mut rng, &mut quantum).unwrap();
        escapes.record(outcome.escaped);
        expected += measure_all_escape(&record.thetas) / trials as f64;
        assert!(measure_all_escape(&record.thetas) <= escape_bound(&record.thetas, 8.0));
    }
    assert!(escapes.within_sigma(expected, 3.0), "{} vs {expected}", escapes.value());
}
