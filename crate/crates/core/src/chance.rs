//! Sources of branch choices.
//!
//! Every quantum measurement outcome (and every coin a strategy wants the exact
//! oracle to enumerate) is drawn through [`OutcomeSource::pick`]. Random
//! streams implement it by sampling; [`BranchReplay`] implements it by
//! following a recorded path, which lets [`enumerate_branches`] visit every
//! outcome branch of a trial together with its exact probability.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use thiserror::Error;

/// Default cap on the number of leaves an exact enumeration may visit.
pub const DEFAULT_BRANCH_BUDGET: usize = 1 << 24;

pub trait OutcomeSource {
    /// Picks an index with probability proportional to `weights`.
    ///
    /// Entries with non-positive weight are never picked, so an outcome of
    /// probability exactly zero can never occur. At least one weight must be
    /// positive.
    fn pick(&mut self, weights: &[f64]) -> usize;

    /// A fair coin.
    fn coin(&mut self) -> u8 {
        self.pick(&[0.5, 0.5]) as u8
    }
}

impl<R: RngCore + ?Sized> OutcomeSource for R {
    fn pick(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        assert!(total > 0.0, "pick needs at least one positive weight");
        let mut u = self.random::<f64>() * total;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if u < w {
                return i;
            }
            u -= w;
            last = i;
        }
        last
    }
}

/// Replays a fixed prefix of choices, then always takes the first possible
/// outcome while queueing the untaken siblings.
#[derive(Debug, Clone)]
pub struct BranchReplay {
    path: Vec<usize>,
    cursor: usize,
    probability: f64,
    pending: Vec<Vec<usize>>,
}

impl BranchReplay {
    fn new(prefix: Vec<usize>) -> Self {
        BranchReplay {
            path: prefix,
            cursor: 0,
            probability: 1.0,
            pending: Vec::new(),
        }
    }

    /// Probability of the choices made so far.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    /// Number of choices made so far.
    pub fn depth(&self) -> usize {
        self.cursor
    }
}

impl OutcomeSource for BranchReplay {
    fn pick(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        assert!(total > 0.0, "pick needs at least one positive weight");
        let choice = if self.cursor < self.path.len() {
            self.path[self.cursor]
        } else {
            let mut possible = weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i);
            let first = possible.next().expect("positive weight exists");
            for sibling in possible {
                let mut alt = self.path.clone();
                alt.push(sibling);
                self.pending.push(alt);
            }
            self.path.push(first);
            first
        };
        self.cursor += 1;
        self.probability *= weights[choice] / total;
        choice
    }
}

/// One fully resolved branch of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub probability: f64,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("branch enumeration exceeded its budget of {budget} leaves")]
pub struct BranchBudgetExceeded {
    pub budget: usize,
}

/// Runs `trial` once per outcome branch and returns every leaf with its
/// probability. The trial must be deterministic apart from the choices it
/// draws from the replay source (reseed any classical RNG inside it).
pub fn enumerate_branches<T, F>(budget: usize, mut trial: F) -> Result<Vec<Branch<T>>, BranchBudgetExceeded>
where
    F: FnMut(&mut BranchReplay) -> T,
{
    let mut stack: Vec<Vec<usize>> = alloc::vec![Vec::new()];
    let mut leaves = Vec::new();
    while let Some(prefix) = stack.pop() {
        if leaves.len() >= budget {
            return Err(BranchBudgetExceeded { budget });
        }
        let mut replay = BranchReplay::new(prefix);
        let value = trial(&mut replay);
        stack.append(&mut replay.pending);
        leaves.push(Branch {
            probability: replay.probability,
            value,
        });
    }
    Ok(leaves)
}

/// Probability-weighted sum of `f` over enumerated branches.
pub fn expectation<T>(branches: &[Branch<T>], mut f: impl FnMut(&T) -> f64) -> f64 {
    branches.iter().map(|b| b.probability * f(&b.value)).sum()
}
