//! Pulse sequences on the two-spin system.
//!
//! A [`PulseSequence`] lists elements in the order they are applied, so its
//! unitary is `P_last ... P_2 P_1`. Operator products are written the other
//! way round (rightmost acts first); the gate templates below are stored in
//! application order.
//!
//! Pulses are ideal and instantaneous. Delays evolve in the doubly rotating
//! frame under
//!
//! ```text
//! H = -2 pi o1 I_z^1 - 2 pi o2 I_z^2 + 2 pi J I_z^1 I_z^2
//! ```
//!
//! where `o1`, `o2` are resonance offsets. The Larmor frequencies only enter
//! as metadata.
//!
//! Text format, one element per line (`#` starts a comment):
//!
//! ```text
//! rf 1 y -90
//! rf 12 x 45
//! delay 0.0025
//! jdelay 15/4J
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::{coupled_evolution, rotation, Axis, NamedGate, Spin};
use crate::linalg::{equal_up_to_global_phase, Operator, PhaseEquivalenceReport, C64};
use crate::scheduling::{build_G, AmplifierConfig, Schedule};

/// Carbon-13 / proton pair of labelled chloroform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinSystem {
    /// Larmor frequency of spin 1 (13C), Hz.
    pub nu1: f64,
    /// Larmor frequency of spin 2 (1H), Hz.
    pub nu2: f64,
    /// Scalar coupling, Hz.
    pub coupling_hz: f64,
    /// Rotating-frame offset of spin 1, Hz.
    pub offset1: f64,
    /// Rotating-frame offset of spin 2, Hz.
    pub offset2: f64,
}

impl Default for SpinSystem {
    fn default() -> Self {
        SpinSystem {
            nu1: 125.76e6,
            nu2: 500.13e6,
            coupling_hz: 215.0,
            offset1: 0.0,
            offset2: 0.0,
        }
    }
}

impl SpinSystem {
    pub fn with_coupling(coupling_hz: f64) -> Result<Self> {
        if !(coupling_hz > 0.0 && coupling_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coupling must be positive, got {coupling_hz} Hz"
            )));
        }
        Ok(SpinSystem {
            coupling_hz,
            ..SpinSystem::default()
        })
    }

    pub fn with_offsets(self, offset1: f64, offset2: f64) -> Self {
        SpinSystem {
            offset1,
            offset2,
            ..self
        }
    }

    /// Free evolution for `tau` seconds.
    pub fn free_evolution(&self, tau: f64) -> Operator {
        let coupling = coupled_evolution(tau, self.coupling_hz);
        if self.offset1 == 0.0 && self.offset2 == 0.0 {
            return coupling;
        }
        // exp(+i 2 pi (o1 z1 + o2 z2) tau) with z = +-1/2
        let zeeman: Vec<C64> = (0..4)
            .map(|k| {
                let z1 = if k & 2 == 0 { 0.5 } else { -0.5 };
                let z2 = if k & 1 == 0 { 0.5 } else { -0.5 };
                C64::from_polar(
                    1.0,
                    2.0 * PI * (self.offset1 * z1 + self.offset2 * z2) * tau,
                )
            })
            .collect();
        &Operator::from_diagonal(&zeeman).expect("4 entries") * &coupling
    }
}

/// A pulse angle, stored in degrees so that text round trips are exact.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct Angle(f64);

impl Angle {
    pub fn from_degrees(degrees: f64) -> Self {
        Angle(degrees)
    }

    pub fn from_radians(radians: f64) -> Self {
        Angle(radians.to_degrees())
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// Whole multiples of 360 degrees act as `+-1`.
    fn is_full_turns(self) -> bool {
        let r = self.0.rem_euclid(360.0);
        r < 1e-12 || 360.0 - r < 1e-12
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PulseElement {
    /// Hard pulse `[angle]_axis^spin`.
    Rf {
        spin: Spin,
        axis: Axis,
        angle: Angle,
    },
    /// Free evolution for `seconds`.
    Delay { seconds: f64 },
    /// Coupling evolution `[numerator / (denominator J)]`, realized on expansion.
    JDelay { numerator: u32, denominator: u32 },
}

impl PulseElement {
    pub fn rf(spin: Spin, axis: Axis, degrees: f64) -> Self {
        PulseElement::Rf {
            spin,
            axis,
            angle: Angle::from_degrees(degrees),
        }
    }

    pub fn delay(seconds: f64) -> Self {
        PulseElement::Delay { seconds }
    }

    pub fn jdelay(numerator: u32, denominator: u32) -> Self {
        assert!(denominator > 0, "jdelay denominator must be positive");
        PulseElement::JDelay {
            numerator,
            denominator,
        }
    }
}

impl fmt::Display for PulseElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseElement::Rf { spin, axis, angle } => {
                write!(f, "rf {spin} {axis} {}", angle.degrees())
            }
            PulseElement::Delay { seconds } => write!(f, "delay {seconds}"),
            PulseElement::JDelay {
                numerator,
                denominator,
            } => write!(f, "jdelay {numerator}/{denominator}J"),
        }
    }
}

impl FromStr for PulseElement {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["rf", spin, axis, angle] => {
                let degrees: f64 = angle.parse().map_err(|_| format!("bad angle `{angle}`"))?;
                if !degrees.is_finite() {
                    return Err(format!("angle `{angle}` is not finite"));
                }
                Ok(PulseElement::rf(spin.parse()?, axis.parse()?, degrees))
            }
            ["delay", seconds] => {
                let seconds: f64 = seconds
                    .parse()
                    .map_err(|_| format!("bad delay `{seconds}`"))?;
                if !(seconds >= 0.0 && seconds.is_finite()) {
                    return Err(format!("delay {seconds} must be finite and >= 0"));
                }
                Ok(PulseElement::delay(seconds))
            }
            ["jdelay", fraction] => {
                let bad = || format!("bad jdelay `{fraction}`, expected <n>/<d>J");
                let body = fraction.strip_suffix('J').ok_or_else(bad)?;
                let (n, d) = body.split_once('/').ok_or_else(bad)?;
                let numerator: u32 = n.parse().map_err(|_| bad())?;
                let denominator: u32 = d.parse().map_err(|_| bad())?;
                if denominator == 0 {
                    return Err(bad());
                }
                Ok(PulseElement::jdelay(numerator, denominator))
            }
            _ => Err(format!("unrecognized element `{}`", line.trim())),
        }
    }
}

/// How `[n/kJ]` coupling blocks are realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DelayRealization {
    /// `tau/2 - [pi]_x^{1,2} - tau/2 - [-pi]_x^{1,2}`: offsets refocus, J survives.
    #[default]
    Refocused,
    /// A plain delay; only equivalent when the offsets vanish.
    Bare,
}

/// Ordered list of pulse elements, applied first to last.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PulseSequence {
    elements: Vec<PulseElement>,
}

impl PulseSequence {
    pub fn new(elements: Vec<PulseElement>) -> Self {
        PulseSequence { elements }
    }

    pub fn elements(&self) -> &[PulseElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn push(&mut self, element: PulseElement) {
        self.elements.push(element);
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &PulseSequence) -> PulseSequence {
        let mut elements = self.elements.clone();
        elements.extend_from_slice(&next.elements);
        PulseSequence { elements }
    }

    /// Replaces every `jdelay` by its physical realization.
    pub fn expand(&self, sys: &SpinSystem, realization: DelayRealization) -> PulseSequence {
        let mut elements = Vec::with_capacity(self.elements.len());
        for &el in &self.elements {
            match el {
                PulseElement::JDelay {
                    numerator,
                    denominator,
                } => {
                    let tau = numerator as f64 / (denominator as f64 * sys.coupling_hz);
                    match realization {
                        DelayRealization::Refocused => {
                            elements.extend_from_slice(&refocused_delay(tau).elements)
                        }
                        DelayRealization::Bare => elements.push(PulseElement::delay(tau)),
                    }
                }
                other => elements.push(other),
            }
        }
        PulseSequence { elements }
    }

    /// The inverse sequence: reversed order and negated angles.
    ///
    /// `[x/J]` has period `4/J` up to a global phase, so coupling blocks are
    /// inverted as `[(4 - x)/J]`. Bare delays cannot be inverted in general.
    pub fn inverse(&self) -> Result<PulseSequence> {
        let mut elements = Vec::with_capacity(self.elements.len());
        for &el in self.elements.iter().rev() {
            match el {
                PulseElement::Rf { spin, axis, angle } => elements.push(PulseElement::Rf {
                    spin,
                    axis,
                    angle: Angle(-angle.0),
                }),
                PulseElement::JDelay {
                    numerator,
                    denominator,
                } => {
                    let period = 4 * denominator;
                    let residue = (period - numerator % period) % period;
                    if residue != 0 {
                        elements.push(reduced_jdelay(residue, denominator));
                    }
                }
                PulseElement::Delay { seconds: 0.0 } => {}
                PulseElement::Delay { .. } => {
                    return Err(Error::InvalidArgument(
                        "a bare delay has no pulse-sequence inverse".into(),
                    ))
                }
            }
        }
        Ok(PulseSequence { elements })
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reduced_jdelay(numerator: u32, denominator: u32) -> PulseElement {
    let g = gcd(numerator, denominator).max(1);
    PulseElement::jdelay(numerator / g, denominator / g)
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for el in &self.elements {
            writeln!(f, "{el}")?;
        }
        Ok(())
    }
}

impl FromStr for PulseSequence {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut elements = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let el = line.parse().map_err(|message| Error::Parse {
                line: k + 1,
                message,
            })?;
            elements.push(el);
        }
        Ok(PulseSequence { elements })
    }
}

impl FromIterator<PulseElement> for PulseSequence {
    fn from_iter<T: IntoIterator<Item = PulseElement>>(iter: T) -> Self {
        PulseSequence {
            elements: iter.into_iter().collect(),
        }
    }
}

fn element_unitary(el: &PulseElement, sys: &SpinSystem, realization: DelayRealization) -> Operator {
    match *el {
        PulseElement::Rf { spin, axis, angle } => rotation(spin, axis, angle.radians(), 2),
        PulseElement::Delay { seconds } => sys.free_evolution(seconds),
        PulseElement::JDelay { .. } => {
            let single = PulseSequence::new(vec![*el]).expand(sys, realization);
            sequence_unitary_with(&single, sys, realization)
        }
    }
}

/// Unitary of a sequence, realizing `jdelay` blocks as refocused delays.
pub fn sequence_unitary(seq: &PulseSequence, sys: &SpinSystem) -> Operator {
    sequence_unitary_with(seq, sys, DelayRealization::Refocused)
}

pub fn sequence_unitary_with(
    seq: &PulseSequence,
    sys: &SpinSystem,
    realization: DelayRealization,
) -> Operator {
    seq.elements.iter().fold(Operator::identity(2), |acc, el| {
        &element_unitary(el, sys, realization) * &acc
    })
}

/// `tau/2 - [pi]_x^{1,2} - tau/2 - [-pi]_x^{1,2}`.
///
/// The opposite-phase pair only matters for miscalibrated pulses; with ideal
/// pulses `[pi][pi]` would do as well.
pub fn refocused_delay(tau: f64) -> PulseSequence {
    PulseSequence::new(vec![
        PulseElement::delay(tau / 2.0),
        PulseElement::rf(Spin::Both, Axis::X, 180.0),
        PulseElement::delay(tau / 2.0),
        PulseElement::rf(Spin::Both, Axis::X, -180.0),
    ])
}

/// Gates with a known pulse realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RegistryGate {
    U,
    IA12,
    IA34,
    IB12,
    IB14,
    IB23,
    IB34,
    I0,
    G12,
    G12Inv,
    G34,
}

impl RegistryGate {
    pub const ALL: [RegistryGate; 11] = [
        RegistryGate::U,
        RegistryGate::IA12,
        RegistryGate::IA34,
        RegistryGate::IB12,
        RegistryGate::IB14,
        RegistryGate::IB23,
        RegistryGate::IB34,
        RegistryGate::I0,
        RegistryGate::G12,
        RegistryGate::G12Inv,
        RegistryGate::G34,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegistryGate::U => "U",
            RegistryGate::IA12 => "I_A12",
            RegistryGate::IA34 => "I_A34",
            RegistryGate::IB12 => "I_B12",
            RegistryGate::IB14 => "I_B14",
            RegistryGate::IB23 => "I_B23",
            RegistryGate::IB34 => "I_B34",
            RegistryGate::I0 => "I_0",
            RegistryGate::G12 => "G12",
            RegistryGate::G12Inv => "G12_inv",
            RegistryGate::G34 => "G34",
        }
    }

    /// Pulse template in application order, with symbolic `jdelay` blocks.
    pub fn template(self) -> PulseSequence {
        use Axis::{X, Y};
        use PulseElement as P;
        use Spin::{Both, One, Two};
        let seq = match self {
            RegistryGate::U => vec![P::rf(One, Y, 90.0), P::rf(Two, Y, -90.0)],
            // R_y(90) R_x(90) R_y(-90) on spin 1
            RegistryGate::IA12 | RegistryGate::IB12 => vec![
                P::rf(One, Y, -90.0),
                P::rf(One, X, 90.0),
                P::rf(One, Y, 90.0),
            ],
            RegistryGate::IA34 | RegistryGate::IB34 => vec![
                P::rf(One, Y, -90.0),
                P::rf(One, X, -90.0),
                P::rf(One, Y, 90.0),
            ],
            RegistryGate::IB14 => vec![P::jdelay(7, 2)],
            RegistryGate::IB23 => vec![P::jdelay(1, 2)],
            // R_y(90) R_x(45) R_y(-90) [15/4J] on both spins
            RegistryGate::I0 => vec![
                P::jdelay(15, 4),
                P::rf(Both, Y, -90.0),
                P::rf(Both, X, 45.0),
                P::rf(Both, Y, 90.0),
            ],
            RegistryGate::G12 => vec![
                P::rf(One, X, 90.0),
                P::jdelay(15, 4),
                P::rf(Both, Y, -90.0),
                P::rf(Both, X, 45.0),
                P::rf(One, Y, 90.0),
                P::rf(One, Y, 90.0),
            ],
            RegistryGate::G12Inv => vec![
                P::rf(One, Y, -90.0),
                P::rf(One, Y, -90.0),
                P::rf(Both, X, -45.0),
                P::rf(Both, Y, 90.0),
                P::jdelay(1, 4),
                P::rf(One, X, -90.0),
            ],
            RegistryGate::G34 => vec![
                P::rf(One, X, -90.0),
                P::jdelay(15, 4),
                P::rf(Both, Y, -90.0),
                P::rf(Both, X, 45.0),
                P::rf(One, Y, 90.0),
                P::rf(One, Y, 90.0),
            ],
        };
        PulseSequence::new(seq)
    }

    /// The abstract unitary the template realizes (up to global phase).
    pub fn target(self) -> Operator {
        let cfg = AmplifierConfig::two_spin();
        let g = |avail: [usize; 2]| {
            build_G(&Schedule::new(4, avail).expect("4 slots"), &cfg).expect("valid config")
        };
        match self {
            RegistryGate::U => NamedGate::U.operator(),
            RegistryGate::IA12 => NamedGate::IA12.operator(),
            RegistryGate::IA34 => NamedGate::IA34.operator(),
            RegistryGate::IB12 => NamedGate::IB12.operator(),
            RegistryGate::IB14 => NamedGate::IB14.operator(),
            RegistryGate::IB23 => NamedGate::IB23.operator(),
            RegistryGate::IB34 => NamedGate::IB34.operator(),
            RegistryGate::I0 => NamedGate::I0.operator(),
            RegistryGate::G12 => g([0, 1]),
            RegistryGate::G12Inv => g([0, 1]).adjoint(),
            RegistryGate::G34 => g([2, 3]),
        }
    }
}

impl fmt::Display for RegistryGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegistryGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegistryGate::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}

/// Pulse sequence for a registry gate with coupling blocks refocused.
pub fn compile_gate(gate: RegistryGate, sys: &SpinSystem) -> PulseSequence {
    gate.template().expand(sys, DelayRealization::Refocused)
}

/// Looks a gate up by name and compiles it.
pub fn compile_gate_by_name(name: &str, sys: &SpinSystem) -> Result<PulseSequence> {
    Ok(compile_gate(name.parse()?, sys))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceVerification {
    pub target: Operator,
    pub achieved: Operator,
    pub report: PhaseEquivalenceReport,
}

pub fn verify_sequence(
    seq: &PulseSequence,
    target: &Operator,
    sys: &SpinSystem,
    tol: f64,
) -> Result<SequenceVerification> {
    let achieved = sequence_unitary(seq, sys);
    let report = equal_up_to_global_phase(target, &achieved, tol)?;
    Ok(SequenceVerification {
        target: target.clone(),
        achieved,
        report,
    })
}

fn commutes(a: &PulseElement, b: &PulseElement) -> bool {
    match (a, b) {
        (PulseElement::Rf { spin: s1, .. }, PulseElement::Rf { spin: s2, .. }) => s1.disjoint(*s2),
        _ => false,
    }
}

/// Appends `el`, merging it into an earlier compatible element when possible.
/// Returns whether anything was merged or dropped.
fn push_merged(out: &mut Vec<PulseElement>, el: PulseElement) -> bool {
    match el {
        PulseElement::Rf { spin, axis, angle } => {
            if angle.is_full_turns() {
                return true;
            }
            for j in (0..out.len()).rev() {
                match out[j] {
                    PulseElement::Rf {
                        spin: s,
                        axis: a,
                        angle: prev,
                    } if s == spin && a == axis => {
                        let merged = Angle(prev.0 + angle.0);
                        if merged.is_full_turns() {
                            out.remove(j);
                        } else {
                            out[j] = PulseElement::Rf {
                                spin,
                                axis,
                                angle: merged,
                            };
                        }
                        return true;
                    }
                    ref other if commutes(other, &el) => continue,
                    _ => break,
                }
            }
            out.push(el);
            false
        }
        PulseElement::Delay { seconds } => {
            if seconds == 0.0 {
                return true;
            }
            if let Some(PulseElement::Delay { seconds: prev }) = out.last_mut() {
                *prev += seconds;
                return true;
            }
            out.push(el);
            false
        }
        PulseElement::JDelay {
            numerator,
            denominator,
        } => {
            if numerator == 0 {
                return true;
            }
            if let Some(PulseElement::JDelay {
                numerator: n0,
                denominator: d0,
            }) = out.last().copied()
            {
                let l = d0 / gcd(d0, denominator) * denominator;
                let sum = n0 * (l / d0) + numerator * (l / denominator);
                out.pop();
                out.push(reduced_jdelay(sum, l));
                return true;
            }
            out.push(el);
            false
        }
    }
}

/// Peephole optimization, preserving the unitary up to a global phase.
///
/// Merges same-spin same-axis rotations (looking past pulses on the other
/// spin, which commute), drops full-turn rotations, and merges adjacent
/// delays. Repeats until nothing changes.
pub fn optimize_sequence(seq: &PulseSequence) -> PulseSequence {
    let mut current = seq.elements.clone();
    loop {
        let mut out = Vec::with_capacity(current.len());
        let mut changed = false;
        for &el in &current {
            changed |= push_merged(&mut out, el);
        }
        current = out;
        if !changed {
            return PulseSequence { elements: current };
        }
    }
}

/// Scales every rf angle by `1 + fraction`; delays are untouched.
pub fn apply_angle_miscalibration(seq: &PulseSequence, fraction: f64) -> Result<PulseSequence> {
    if fraction.is_nan() || fraction.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "miscalibration fraction must satisfy |f| < 1, got {fraction}"
        )));
    }
    let scale = 1.0 + fraction;
    Ok(seq
        .elements
        .iter()
        .map(|&el| match el {
            PulseElement::Rf { spin, axis, angle } => PulseElement::Rf {
                spin,
                axis,
                angle: Angle(angle.0 * scale),
            },
            other => other,
        })
        .collect())
}
