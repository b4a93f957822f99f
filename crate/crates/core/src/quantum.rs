//! Exact real-amplitude state vectors for single qubits and small registers.
//!
//! Measurements consume a state and return the post-measurement state. Every
//! outcome is drawn through an [`OutcomeSource`], so the same code runs under
//! Monte Carlo sampling and under exact branch enumeration.
//!
//! Joint-state index convention: the first qubit is the most significant bit
//! of the amplitude index.

use alloc::vec::Vec;

use thiserror::Error;

use crate::chance::OutcomeSource;
use crate::math::{abs, cos, sin, sqrt};

/// Tolerance for every normalization and orthogonality check.
pub const NORM_TOL: f64 = 1e-9;

/// Default maximum number of qubits in a [`JointState`].
pub const DEFAULT_ARITY_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("joint state of {arity} qubits exceeds the arity cap of {cap}")]
    ArityExceeded { arity: usize, cap: usize },
    #[error("amplitudes are not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("amplitude vector length {len} is not a positive power of two")]
    InvalidDimension { len: usize },
    #[error("state is entangled and cannot be split into single qubits")]
    NotProductState,
    #[error("qubit position {position} out of range for arity {arity}")]
    PositionOutOfRange { position: usize, arity: usize },
}

/// A single qubit with real amplitudes `amp0|0> + amp1|1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubit {
    amp0: f64,
    amp1: f64,
}

impl PureQubit {
    pub const ZERO: PureQubit = PureQubit { amp0: 1.0, amp1: 0.0 };
    pub const ONE: PureQubit = PureQubit { amp0: 0.0, amp1: 1.0 };

    pub fn basis(bit: u8) -> Self {
        if bit & 1 == 0 {
            Self::ZERO
        } else {
            Self::ONE
        }
    }

    pub fn from_amplitudes(amp0: f64, amp1: f64) -> Result<Self, QuantumError> {
        let norm_sqr = amp0 * amp0 + amp1 * amp1;
        if !norm_sqr.is_finite() || abs(norm_sqr - 1.0) > NORM_TOL {
            return Err(QuantumError::NotNormalized { norm_sqr });
        }
        Ok(PureQubit { amp0, amp1 })
    }

    /// `cos(angle)|0> + sin(angle)|1>`.
    pub fn from_angle(angle: f64) -> Self {
        PureQubit {
            amp0: cos(angle),
            amp1: sin(angle),
        }
    }

    /// `cos(theta)|bit> + sin(theta)|not bit>`.
    pub fn sealed(bit: u8, theta: f64) -> Self {
        let (c, s) = (cos(theta), sin(theta));
        if bit & 1 == 0 {
            PureQubit { amp0: c, amp1: s }
        } else {
            PureQubit { amp0: s, amp1: c }
        }
    }

    pub fn amp0(&self) -> f64 {
        self.amp0
    }

    pub fn amp1(&self) -> f64 {
        self.amp1
    }

    pub fn amplitude(&self, bit: u8) -> f64 {
        if bit & 1 == 0 {
            self.amp0
        } else {
            self.amp1
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0 * self.amp0 + self.amp1 * self.amp1
    }

    /// The state orthogonal to this one, `-amp1|0> + amp0|1>`.
    pub fn orthogonal(&self) -> Self {
        PureQubit {
            amp0: -self.amp1,
            amp1: self.amp0,
        }
    }

    pub fn overlap(&self, other: &PureQubit) -> f64 {
        self.amp0 * other.amp0 + self.amp1 * other.amp1
    }

    /// Computational-basis measurement.
    pub fn measure_z<Q: OutcomeSource + ?Sized>(self, source: &mut Q) -> (u8, PureQubit) {
        let outcome = source.pick(&[self.amp0 * self.amp0, self.amp1 * self.amp1]) as u8;
        (outcome, PureQubit::basis(outcome))
    }

    /// Two-outcome projective test `{|t><t|, 1 - |t><t|}`.
    ///
    /// On success the post-state is `target`, otherwise the state orthogonal
    /// to it.
    pub fn project<Q: OutcomeSource + ?Sized>(self, target: PureQubit, source: &mut Q) -> (bool, PureQubit) {
        let along = self.overlap(&target);
        let across = self.overlap(&target.orthogonal());
        if source.pick(&[along * along, across * across]) == 0 {
            (true, target)
        } else {
            (false, target.orthogonal())
        }
    }

    /// Measurement in a rotated orthonormal basis.
    pub fn measure_basis<Q: OutcomeSource + ?Sized>(self, basis: Basis2, source: &mut Q) -> (u8, PureQubit) {
        let v0 = basis.vector(0);
        let v1 = basis.vector(1);
        let p0 = self.overlap(&v0);
        let p1 = self.overlap(&v1);
        let outcome = source.pick(&[p0 * p0, p1 * p1]) as u8;
        (outcome, basis.vector(outcome))
    }
}

/// The orthonormal pair `{cos a|0> + sin a|1>, -sin a|0> + cos a|1>}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis2 {
    pub angle: f64,
}

impl Basis2 {
    pub const COMPUTATIONAL: Basis2 = Basis2 { angle: 0.0 };

    pub fn new(angle: f64) -> Self {
        Basis2 { angle }
    }

    pub fn vector(&self, k: u8) -> PureQubit {
        let (c, s) = (cos(self.angle), sin(self.angle));
        if k & 1 == 0 {
            PureQubit { amp0: c, amp1: s }
        } else {
            PureQubit { amp0: -s, amp1: c }
        }
    }

    /// `cos(theta)|v_k> + sin(theta)|v_not k>` in this basis.
    pub fn sealed(&self, k: u8, theta: f64) -> PureQubit {
        if self.angle == 0.0 {
            return PureQubit::sealed(k, theta);
        }
        let main = self.vector(k);
        let other = self.vector(k ^ 1);
        let (c, s) = (cos(theta), sin(theta));
        PureQubit {
            amp0: c * main.amp0 + s * other.amp0,
            amp1: c * main.amp1 + s * other.amp1,
        }
    }
}

/// A real state vector over `arity` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    arity: usize,
    amps: Vec<f64>,
}

/// Result of [`JointState::project_subset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetProjection {
    pub success: bool,
    pub post: JointState,
    /// Set when the accepted set was empty: the projector is zero, the
    /// measurement fails with certainty and the state is unchanged.
    pub empty_subset: bool,
}

impl JointState {
    pub fn from_amplitudes(amps: Vec<f64>, arity_cap: usize) -> Result<Self, QuantumError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QuantumError::InvalidDimension { len });
        }
        let arity = len.trailing_zeros() as usize;
        if arity > arity_cap {
            return Err(QuantumError::ArityExceeded { arity, cap: arity_cap });
        }
        let norm_sqr: f64 = amps.iter().map(|a| a * a).sum();
        if !norm_sqr.is_finite() || abs(norm_sqr - 1.0) > NORM_TOL {
            return Err(QuantumError::NotNormalized { norm_sqr });
        }
        Ok(JointState { arity, amps })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index] * self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    /// Value of qubit `position` within basis index `index`.
    pub fn bit_of(&self, index: usize, position: usize) -> u8 {
        ((index >> (self.arity - 1 - position)) & 1) as u8
    }

    /// `self ⊗ other`; the qubits of `self` come first.
    pub fn kron(&self, other: &JointState, arity_cap: usize) -> Result<JointState, QuantumError> {
        let arity = self.arity + other.arity;
        if arity > arity_cap {
            return Err(QuantumError::ArityExceeded { arity, cap: arity_cap });
        }
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(JointState { arity, amps })
    }

    /// Total probability of the basis strings accepted by `accept`.
    pub fn subset_probability(&self, accept: impl Fn(usize) -> bool) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(x, _)| accept(*x))
            .map(|(_, a)| a * a)
            .sum()
    }

    /// Projective measurement `{P, 1 - P}` with `P` the sum of `|x><x|` over
    /// accepted basis strings.
    pub fn project_subset<Q: OutcomeSource + ?Sized>(
        self,
        accept: impl Fn(usize) -> bool,
        source: &mut Q,
    ) -> SubsetProjection {
        let mut p_in = 0.0;
        let mut p_out = 0.0;
        let mut any_accepted = false;
        for (x, a) in self.amps.iter().enumerate() {
            if accept(x) {
                any_accepted = true;
                p_in += a * a;
            } else {
                p_out += a * a;
            }
        }
        if !any_accepted {
            return SubsetProjection {
                success: false,
                post: self,
                empty_subset: true,
            };
        }
        let success = source.pick(&[p_in, p_out]) == 0;
        let kept = if success { p_in } else { p_out };
        let scale = 1.0 / sqrt(kept);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(x, a)| if accept(x) == success { a * scale } else { 0.0 })
            .collect();
        SubsetProjection {
            success,
            post: JointState {
                arity: self.arity,
                amps,
            },
            empty_subset: false,
        }
    }

    /// Projects one qubit onto `target` (`|t><t| ⊗ 1`). After either outcome
    /// that qubit is unentangled from the rest.
    pub fn project_qubit<Q: OutcomeSource + ?Sized>(
        self,
        position: usize,
        target: PureQubit,
        source: &mut Q,
    ) -> Result<(bool, JointState), QuantumError> {
        self.check_position(position)?;
        let mask = 1usize << (self.arity - 1 - position);
        let (t0, t1) = (target.amp0, target.amp1);
        let mut p_along = 0.0;
        let mut p_across = 0.0;
        for i0 in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amps[i0], self.amps[i0 | mask]);
            let along = t0 * a0 + t1 * a1;
            let across = -t1 * a0 + t0 * a1;
            p_along += along * along;
            p_across += across * across;
        }
        let success = source.pick(&[p_along, p_across]) == 0;
        let (keep, scale) = if success {
            (target, 1.0 / sqrt(p_along))
        } else {
            (target.orthogonal(), 1.0 / sqrt(p_across))
        };
        let mut amps = self.amps;
        for i0 in (0..amps.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (amps[i0], amps[i0 | mask]);
            let coeff = (keep.amp0 * a0 + keep.amp1 * a1) * scale;
            amps[i0] = keep.amp0 * coeff;
            amps[i0 | mask] = keep.amp1 * coeff;
        }
        Ok((
            success,
            JointState {
                arity: self.arity,
                amps,
            },
        ))
    }

    /// Splits off qubit `position` if it is unentangled from the others,
    /// returning the qubit and the remaining state (qubit order preserved).
    pub fn factor_qubit(&self, position: usize) -> Result<Option<(PureQubit, JointState)>, QuantumError> {
        self.check_position(position)?;
        if self.arity < 2 {
            return Ok(None);
        }
        let shift = self.arity - 1 - position;
        let mask = 1usize << shift;
        let low = mask - 1;
        let half = self.amps.len() / 2;
        let mut r0 = Vec::with_capacity(half);
        let mut r1 = Vec::with_capacity(half);
        for rest in 0..half {
            let i0 = ((rest & !low) << 1) | (rest & low);
            r0.push(self.amps[i0]);
            r1.push(self.amps[i0 | mask]);
        }
        let n0: f64 = r0.iter().map(|a| a * a).sum();
        let n1: f64 = r1.iter().map(|a| a * a).sum();
        let dot: f64 = r0.iter().zip(&r1).map(|(a, b)| a * b).sum();
        if abs(dot * dot - n0 * n1) > NORM_TOL {
            return Ok(None);
        }
        let a = sqrt(n0);
        let b = if dot < 0.0 { -sqrt(n1) } else { sqrt(n1) };
        let rest = if n0 >= n1 {
            r0.iter().map(|x| x / a).collect()
        } else {
            r1.iter().map(|x| x / b).collect()
        };
        let norm = sqrt(a * a + b * b);
        Ok(Some((
            PureQubit {
                amp0: a / norm,
                amp1: b / norm,
            },
            JointState {
                arity: self.arity - 1,
                amps: rest,
            },
        )))
    }

    /// The single-qubit factors of a product state, first qubit first. Each
    /// factor is determined up to a sign that is pushed into the last one.
    pub fn split_to_qubits(&self) -> Result<Vec<PureQubit>, QuantumError> {
        let mut factors = Vec::with_capacity(self.arity);
        let mut current = self.clone();
        while current.arity > 1 {
            let (q, rest) = current.factor_qubit(0)?.ok_or(QuantumError::NotProductState)?;
            factors.push(q);
            current = rest;
        }
        factors.push(PureQubit {
            amp0: current.amps[0],
            amp1: current.amps[1],
        });
        Ok(factors)
    }

    fn check_position(&self, position: usize) -> Result<(), QuantumError> {
        if position >= self.arity {
            Err(QuantumError::PositionOutOfRange {
                position,
                arity: self.arity,
            })
        } else {
            Ok(())
        }
    }
}

impl From<PureQubit> for JointState {
    fn from(q: PureQubit) -> Self {
        JointState {
            arity: 1,
            amps: alloc::vec![q.amp0, q.amp1],
        }
    }
}

pub fn make_sealed_qubit(bit: u8, theta: f64) -> PureQubit {
    PureQubit::sealed(bit, theta)
}

pub fn measure_z<Q: OutcomeSource + ?Sized>(state: PureQubit, source: &mut Q) -> (u8, PureQubit) {
    state.measure_z(source)
}

pub fn project<Q: OutcomeSource + ?Sized>(state: PureQubit, target: PureQubit, source: &mut Q) -> (bool, PureQubit) {
    state.project(target, source)
}

pub fn measure_basis2<Q: OutcomeSource + ?Sized>(state: PureQubit, basis: Basis2, source: &mut Q) -> (u8, PureQubit) {
    state.measure_basis(basis, source)
}

/// Product state of `qubits` under the default arity cap.
pub fn tensor(qubits: &[PureQubit]) -> Result<JointState, QuantumError> {
    tensor_with_cap(qubits, DEFAULT_ARITY_CAP)
}

pub fn tensor_with_cap(qubits: &[PureQubit], arity_cap: usize) -> Result<JointState, QuantumError> {
    if qubits.is_empty() {
        return Err(QuantumError::InvalidDimension { len: 1 });
    }
    if qubits.len() > arity_cap {
        return Err(QuantumError::ArityExceeded {
            arity: qubits.len(),
            cap: arity_cap,
        });
    }
    let mut amps = alloc::vec![1.0];
    for q in qubits {
        amps = amps.iter().flat_map(|a| [a * q.amp0, a * q.amp1]).collect();
    }
    Ok(JointState {
        arity: qubits.len(),
        amps,
    })
}

/// Subset projection with an explicit set of accepted basis indices.
pub fn joint_project_subset<Q: OutcomeSource + ?Sized>(
    state: JointState,
    accepted: &alloc::collections::BTreeSet<usize>,
    source: &mut Q,
) -> SubsetProjection {
    state.project_subset(|x| accepted.contains(&x), source)
}

pub fn split_to_qubits(state: &JointState) -> Result<Vec<PureQubit>, QuantumError> {
    state.split_to_qubits()
}
