//! Binomial rate estimates and the small set of hypothesis checks the
//! experiments rely on.

use alloc::vec::Vec;

use crate::math::{abs, ln, sqrt};

/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Count of successes out of a number of Bernoulli trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rate {
    pub successes: u64,
    pub trials: u64,
}

impl Rate {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials, "more successes than trials");
        Rate { successes, trials }
    }

    pub fn record(&mut self, success: bool) {
        self.trials += 1;
        self.successes += u64::from(success);
    }

    pub fn merge(self, other: Rate) -> Rate {
        Rate::new(self.successes + other.successes, self.trials + other.trials)
    }

    pub fn value(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Standard deviation of the estimate when the true rate is `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        if self.trials == 0 {
            return f64::INFINITY;
        }
        sqrt((p * (1.0 - p)).max(0.0) / self.trials as f64)
    }

    /// `|p̂ − p| ≤ k·σ(p)`, the binomial deviation test against an analytic
    /// reference. A reference of exactly 0 or 1 leaves no slack.
    pub fn within_sigma(&self, reference: f64, k: f64) -> bool {
        abs(self.value() - reference) <= k * self.sigma_at(reference) + 1e-12
    }

    /// One-sided version: `p̂ ≤ bound + k·σ(bound)`.
    pub fn at_most(&self, bound: f64, k: f64) -> bool {
        self.value() <= bound + k * self.sigma_at(bound) + 1e-12
    }

    /// Wilson score interval.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        if self.trials == 0 {
            return (0.0, 1.0);
        }
        let n = self.trials as f64;
        let p = self.value();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        // the endpoints at 0 and n successes are exact, not rounding residue
        let lo = if self.successes == 0 {
            0.0
        } else {
            (centre - half).max(0.0)
        };
        let hi = if self.successes == self.trials {
            1.0
        } else {
            (centre + half).min(1.0)
        };
        (lo, hi)
    }

    pub fn ci95(&self) -> (f64, f64) {
        self.wilson(Z95)
    }

    /// Half-width of the normal-approximation 95% interval.
    pub fn ci95_half_width(&self) -> f64 {
        Z95 * self.sigma_at(self.value())
    }
}

/// True when each value is at most its predecessor, or the two 95% intervals
/// overlap (a rise that is not statistically distinguishable).
pub fn nonincreasing_within_ci(rates: &[Rate]) -> bool {
    rates.windows(2).all(|w| {
        let (prev, next) = (w[0], w[1]);
        if next.value() <= prev.value() {
            return true;
        }
        let (_, prev_hi) = prev.ci95();
        let (next_lo, _) = next.ci95();
        next_lo <= prev_hi
    })
}

/// Pearson chi-square statistic against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return 0.0;
    }
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Accepts uniformity when the statistic is below `df + k·sqrt(2·df)`.
pub fn chi_square_passes(counts: &[u64], k: f64) -> bool {
    let df = counts.len().saturating_sub(1) as f64;
    chi_square_uniform(counts) <= df + k * sqrt(2.0 * df)
}

/// Kolmogorov–Smirnov distance between the sample and the uniform law on
/// `[lo, hi]`.
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical distance at two-sided level `alpha`.
pub fn ks_critical(samples: usize, alpha: f64) -> f64 {
    sqrt(-ln(alpha / 2.0) / 2.0) / sqrt(samples as f64)
}

/// Two-sided tail mass beyond 3σ for a normal law.
pub const THREE_SIGMA_ALPHA: f64 = 0.002_699_796;
