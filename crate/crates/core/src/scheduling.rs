//! Amplifier composites and end-to-end runs of the scheduling algorithm.
//!
//! Alice's amplifier is
//!
//! ```text
//! G = sign * (B I_0 B^-1 I_A)^m B
//! ```
//!
//! and the outer composite that locates the common slot is
//!
//! ```text
//! Q = sign * (G I_0 G^-1 I_B)^m' G
//! ```
//!
//! with `B` the basis transform (the two-spin `U` or Walsh-Hadamard `W`) and
//! the `I` factors selective phase rotations. The original algorithm is the
//! special case `B = W`, phase `pi`, `sign = +1`.
//!
//! Composites are kept as a [`Circuit`]: an ordered list of tagged factors in
//! application order. The tags carry the party that owns each factor, which is
//! what [`crate::protocol`] uses for exchange accounting.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::{selective_inversion, selective_phase, u_operator, walsh_hadamard};
use crate::linalg::{Operator, StateVector, C64};

/// One party's availability over `n_slots` time slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Schedule {
    n_slots: usize,
    available: BTreeSet<usize>,
}

impl Schedule {
    pub fn new(n_slots: usize, available: impl IntoIterator<Item = usize>) -> Result<Self> {
        if n_slots < 2 || !n_slots.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n_slots));
        }
        let available: BTreeSet<usize> = available.into_iter().collect();
        if let Some(&index) = available.iter().find(|&&i| i >= n_slots) {
            return Err(Error::IndexOutOfRange {
                index,
                dim: n_slots,
            });
        }
        Ok(Schedule { n_slots, available })
    }

    /// Parses a bit string such as `"1100"`; character `k` is slot `k`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let mut available = Vec::new();
        for (k, ch) in bits.chars().enumerate() {
            match ch {
                '1' => available.push(k),
                '0' => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "schedule bit `{other}` is neither 0 nor 1"
                    )))
                }
            }
        }
        Schedule::new(bits.chars().count(), available)
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn n_qubits(&self) -> usize {
        self.n_slots.trailing_zeros() as usize
    }

    pub fn available(&self) -> Vec<usize> {
        self.available.iter().copied().collect()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.available.contains(&slot)
    }

    pub fn len(&self) -> usize {
        self.available.len()
    }

    pub fn is_empty(&self) -> bool {
        self.available.is_empty()
    }

    /// Fraction of available slots.
    pub fn epsilon(&self) -> f64 {
        self.available.len() as f64 / self.n_slots as f64
    }

    pub fn intersection(&self, other: &Schedule) -> Vec<usize> {
        self.available
            .intersection(&other.available)
            .copied()
            .collect()
    }

    pub fn to_bits(&self) -> String {
        (0..self.n_slots)
            .map(|k| if self.contains(k) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bits())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmplifierConfig {
    pub basis_transform: Operator,
    /// Label used in transcripts ("U", "W", ...).
    pub basis_name: String,
    /// Phase of the party oracles `I_A` and `I_B`.
    pub oracle_phase: f64,
    /// Phase of the `|0...0>` rotation `I_0`.
    pub zero_phase: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Overall factor applied to each composite; +1 or -1.
    pub sign: f64,
}

impl AmplifierConfig {
    /// Two-spin generalized algorithm: `U`, pi/2 rotations, one iteration, sign -1.
    pub fn two_spin() -> Self {
        AmplifierConfig {
            basis_transform: u_operator(),
            basis_name: "U".into(),
            oracle_phase: PI / 2.0,
            zero_phase: PI / 2.0,
            inner_iterations: 1,
            outer_iterations: 1,
            sign: -1.0,
        }
    }

    /// Generalized algorithm with an arbitrary basis transform and common phase.
    pub fn generalized(basis_transform: Operator, basis_name: &str, phase: f64) -> Self {
        AmplifierConfig {
            basis_transform,
            basis_name: basis_name.into(),
            oracle_phase: phase,
            zero_phase: phase,
            inner_iterations: 1,
            outer_iterations: 1,
            sign: -1.0,
        }
    }

    /// Original algorithm: Walsh-Hadamard and selective inversions.
    pub fn original(n_qubits: usize, inner_iterations: usize, outer_iterations: usize) -> Self {
        AmplifierConfig {
            basis_transform: walsh_hadamard(n_qubits),
            basis_name: "W".into(),
            oracle_phase: PI,
            zero_phase: PI,
            inner_iterations,
            outer_iterations,
            sign: 1.0,
        }
    }

    pub fn with_outer_iterations(mut self, m: usize) -> Self {
        self.outer_iterations = m;
        self
    }

    pub fn with_inner_iterations(mut self, m: usize) -> Self {
        self.inner_iterations = m;
        self
    }

    pub fn with_zero_phase(mut self, phase: f64) -> Self {
        self.zero_phase = phase;
        self
    }

    pub fn with_sign(mut self, sign: f64) -> Self {
        self.sign = sign;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.basis_transform.n_qubits()
    }

    pub fn validate(&self, n_slots: usize) -> Result<()> {
        if self.basis_transform.dim() != n_slots {
            return Err(Error::DimensionMismatch {
                expected: n_slots,
                found: self.basis_transform.dim(),
            });
        }
        if !self.basis_transform.is_unitary() {
            return Err(Error::NotUnitary(self.basis_transform.unitarity_defect()));
        }
        if self.inner_iterations == 0 || self.outer_iterations == 0 {
            return Err(Error::InvalidArgument(
                "iteration counts must be at least 1".into(),
            ));
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::InvalidArgument(format!(
                "sign must be +1 or -1, got {}",
                self.sign
            )));
        }
        if !(self.oracle_phase.is_finite() && self.zero_phase.is_finite()) {
            return Err(Error::InvalidArgument("phases must be finite".into()));
        }
        Ok(())
    }
}

/// Role of a factor inside a composite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FactorTag {
    /// Basis transform `U` or `W`.
    Basis,
    /// A caller-supplied amplifier `G` treated as one opaque factor.
    Amplifier,
    /// `I_0`: phase rotation of `|0...0>`.
    ZeroPhase,
    /// `I_A`: Alice's oracle.
    AlicePhase,
    /// `I_B`: Bob's oracle.
    BobPhase,
    /// Overall sign of a composite.
    Sign,
}

#[derive(Clone, Debug, PartialEq)]
enum Action {
    Dense(Arc<Operator>),
    Diagonal(Arc<Vec<C64>>),
    Scalar(C64),
}

/// A tagged unitary inside a [`Circuit`].
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    tag: FactorTag,
    name: String,
    inverse: bool,
    action: Action,
}

impl Factor {
    pub fn new(tag: FactorTag, name: &str, op: Operator) -> Self {
        let action = if op.is_diagonal() {
            Action::Diagonal(Arc::new((0..op.dim()).map(|k| op.entry(k, k)).collect()))
        } else {
            Action::Dense(Arc::new(op))
        };
        Factor {
            tag,
            name: name.to_string(),
            inverse: false,
            action,
        }
    }

    pub fn sign(sign: f64) -> Self {
        Factor {
            tag: FactorTag::Sign,
            name: if sign < 0.0 { "-1" } else { "+1" }.into(),
            inverse: false,
            action: Action::Scalar(C64::new(sign, 0.0)),
        }
    }

    pub fn tag(&self) -> FactorTag {
        self.tag
    }

    pub fn is_inverse(&self) -> bool {
        self.inverse
    }

    /// Transcript label, e.g. `U`, `U^-1`, `I_B`.
    pub fn label(&self) -> String {
        if self.inverse && self.tag != FactorTag::Sign {
            format!("{}^-1", self.name)
        } else {
            self.name.clone()
        }
    }

    pub fn adjoint(&self) -> Factor {
        let action = match &self.action {
            Action::Dense(op) => Action::Dense(Arc::new(op.adjoint())),
            Action::Diagonal(d) => Action::Diagonal(Arc::new(d.iter().map(|z| z.conj()).collect())),
            Action::Scalar(z) => Action::Scalar(z.conj()),
        };
        Factor {
            tag: self.tag,
            name: self.name.clone(),
            inverse: !self.inverse,
            action,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        match &self.action {
            Action::Dense(op) => op.apply(psi),
            Action::Diagonal(d) => {
                if d.len() != psi.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: d.len(),
                        found: psi.dim(),
                    });
                }
                let amplitudes = psi.amplitudes().iter().zip(d.iter()).map(|(a, p)| a * p);
                Ok(StateVector::from_unchecked(amplitudes.collect()))
            }
            Action::Scalar(z) => Ok(psi.scale(*z)),
        }
    }

    pub fn to_operator(&self, n_qubits: usize) -> Operator {
        match &self.action {
            Action::Dense(op) => (**op).clone(),
            Action::Diagonal(d) => Operator::from_diagonal(d).expect("diagonal of 2^n entries"),
            Action::Scalar(z) => Operator::identity(n_qubits).scale(*z),
        }
    }
}

/// An ordered product of factors, stored in application order.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    factors: Vec<Factor>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            factors: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn push(&mut self, factor: Factor) {
        self.factors.push(factor);
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.factors.extend(other.factors.iter().cloned());
    }

    pub fn adjoint(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            factors: self.factors.iter().rev().map(Factor::adjoint).collect(),
        }
    }

    pub fn count(&self, tag: FactorTag) -> usize {
        self.factors.iter().filter(|f| f.tag == tag).count()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.factors
            .iter()
            .try_fold(psi.clone(), |state, factor| factor.apply(&state))
    }

    /// Collapses the circuit into one matrix (last factor leftmost).
    pub fn to_operator(&self) -> Operator {
        self.factors
            .iter()
            .fold(Operator::identity(self.n_qubits), |acc, f| {
                &f.to_operator(self.n_qubits) * &acc
            })
    }
}

fn phase_rotation(marked: &[usize], phase: f64, n_qubits: usize) -> Result<Operator> {
    if phase == PI {
        selective_inversion(marked, n_qubits)
    } else {
        selective_phase(marked, phase, n_qubits)
    }
}

/// Circuit form of `sign * (B I_0 B^-1 I_A)^m B`.
pub fn amplifier_circuit(alice: &Schedule, cfg: &AmplifierConfig) -> Result<Circuit> {
    cfg.validate(alice.n_slots())?;
    let n = alice.n_qubits();
    let basis = Factor::new(
        FactorTag::Basis,
        &cfg.basis_name,
        cfg.basis_transform.clone(),
    );
    let basis_inv = basis.adjoint();
    let oracle = Factor::new(
        FactorTag::AlicePhase,
        "I_A",
        phase_rotation(&alice.available(), cfg.oracle_phase, n)?,
    );
    let zero = Factor::new(
        FactorTag::ZeroPhase,
        "I_0",
        phase_rotation(&[0], cfg.zero_phase, n)?,
    );

    let mut circuit = Circuit::new(n);
    circuit.push(basis.clone());
    for _ in 0..cfg.inner_iterations {
        circuit.push(oracle.clone());
        circuit.push(basis_inv.clone());
        circuit.push(zero.clone());
        circuit.push(basis.clone());
    }
    if cfg.sign != 1.0 {
        circuit.push(Factor::sign(cfg.sign));
    }
    Ok(circuit)
}

/// Circuit form of `sign * (G I_0 G^-1 I_B)^m' G` for a given amplifier circuit.
pub fn outer_circuit(
    amplifier: &Circuit,
    bob: &Schedule,
    cfg: &AmplifierConfig,
) -> Result<Circuit> {
    if amplifier.n_qubits() != bob.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: 1 << amplifier.n_qubits(),
            found: bob.n_slots(),
        });
    }
    cfg.validate(bob.n_slots())?;
    let n = bob.n_qubits();
    let amplifier_inv = amplifier.adjoint();
    let oracle = Factor::new(
        FactorTag::BobPhase,
        "I_B",
        phase_rotation(&bob.available(), cfg.oracle_phase, n)?,
    );
    let zero = Factor::new(
        FactorTag::ZeroPhase,
        "I_0",
        phase_rotation(&[0], cfg.zero_phase, n)?,
    );

    let mut circuit = amplifier.clone();
    for _ in 0..cfg.outer_iterations {
        circuit.push(oracle.clone());
        circuit.extend(&amplifier_inv);
        circuit.push(zero.clone());
        circuit.extend(amplifier);
    }
    if cfg.sign != 1.0 {
        circuit.push(Factor::sign(cfg.sign));
    }
    Ok(circuit)
}

/// Full composite for a pair of schedules.
pub fn scheduling_circuit(
    alice: &Schedule,
    bob: &Schedule,
    cfg: &AmplifierConfig,
) -> Result<Circuit> {
    if alice.n_slots() != bob.n_slots() {
        return Err(Error::DimensionMismatch {
            expected: alice.n_slots(),
            found: bob.n_slots(),
        });
    }
    outer_circuit(&amplifier_circuit(alice, cfg)?, bob, cfg)
}

/// Alice's amplifier `G` as a matrix.
#[allow(non_snake_case)]
pub fn build_G(alice: &Schedule, cfg: &AmplifierConfig) -> Result<Operator> {
    Ok(amplifier_circuit(alice, cfg)?.to_operator())
}

/// The outer composite `Q` built around a given amplifier matrix `G`.
#[allow(non_snake_case)]
pub fn build_Q(g: &Operator, bob: &Schedule, cfg: &AmplifierConfig) -> Result<Operator> {
    if g.dim() != bob.n_slots() {
        return Err(Error::DimensionMismatch {
            expected: bob.n_slots(),
            found: g.dim(),
        });
    }
    if !g.is_unitary() {
        return Err(Error::NotUnitary(g.unitarity_defect()));
    }
    let mut amplifier = Circuit::new(g.n_qubits());
    amplifier.push(Factor::new(FactorTag::Amplifier, "G", g.clone()));
    Ok(outer_circuit(&amplifier, bob, cfg)?.to_operator())
}

/// `max(1, round(pi sqrt(1/epsilon) / 4))`.
pub fn iteration_count(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let m = (PI * (1.0 / epsilon).sqrt() / 4.0).round() as usize;
    Ok(m.max(1))
}

/// `|amplitude|^2` per basis index.
pub fn measure_distribution(psi: &StateVector) -> Vec<f64> {
    psi.probabilities()
}

/// Total probability on a set of basis indices.
pub fn marked_probability(distribution: &[f64], marked: &[usize]) -> f64 {
    marked.iter().map(|&k| distribution[k]).sum()
}

/// Result of running a composite on `|0...0>`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub final_state: StateVector,
    pub distribution: Vec<f64>,
    /// Most probable slot; ties go to the smallest index.
    pub top_slot: usize,
    pub top_probability: f64,
    /// Probability mass on the common slots; 0 when the schedules are disjoint.
    pub success_probability: f64,
    pub exchanges: usize,
    pub common: Vec<usize>,
}

const TIE_TOLERANCE: f64 = 1e-12;

impl RunOutcome {
    pub fn from_state(final_state: StateVector, common: Vec<usize>, exchanges: usize) -> Self {
        let distribution = measure_distribution(&final_state);
        let best = distribution.iter().copied().fold(0.0, f64::max);
        let top_slot = distribution
            .iter()
            .position(|&p| p >= best - TIE_TOLERANCE)
            .expect("nonempty distribution");
        RunOutcome {
            top_probability: distribution[top_slot],
            success_probability: marked_probability(&distribution, &common),
            final_state,
            distribution,
            top_slot,
            exchanges,
            common,
        }
    }
}

/// Runs the generalized composite on `|0...0>`.
pub fn run_generalized(
    alice: &Schedule,
    bob: &Schedule,
    cfg: &AmplifierConfig,
) -> Result<RunOutcome> {
    let circuit = scheduling_circuit(alice, bob, cfg)?;
    let state = circuit.apply(&StateVector::zero(alice.n_qubits()))?;
    Ok(RunOutcome::from_state(
        state,
        alice.intersection(bob),
        circuit.count(FactorTag::BobPhase),
    ))
}

/// Original-algorithm configuration for Alice's schedule.
///
/// The inner count uses Alice's fraction `|A|/N`; the outer count assumes a
/// single common slot among Alice's `|A|` slots.
pub fn original_config(alice: &Schedule) -> Result<AmplifierConfig> {
    let (inner, outer) = if alice.is_empty() {
        (1, 1)
    } else {
        (
            iteration_count(alice.epsilon())?,
            iteration_count(1.0 / alice.len() as f64)?,
        )
    };
    Ok(AmplifierConfig::original(alice.n_qubits(), inner, outer))
}

/// Runs the original Walsh-Hadamard / selective-inversion algorithm.
pub fn run_original(alice: &Schedule, bob: &Schedule) -> Result<RunOutcome> {
    run_generalized(alice, bob, &original_config(alice)?)
}
