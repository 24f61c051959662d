//! Named gates of the two-spin scheduling experiment.
//!
//! Rotations follow the NMR sign convention `R(phi) = exp(+i phi I)`, which is
//! the opposite of the usual `exp(-i theta sigma / 2)` circuit convention.
//! Every pulse identity in [`crate::nmr`] depends on this choice, so do not
//! "fix" it.
//!
//! Spin operators are `I_a = sigma_a / 2` with `sigma_z = diag(1, -1)`; the
//! up-spin `|0>` is the `+1/2` eigenstate of `I_z`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{tensor, Operator, C64, ONE};

/// Which spin(s) an rf pulse addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    One,
    Two,
    Both,
}

impl Spin {
    pub fn disjoint(self, other: Spin) -> bool {
        matches!(
            (self, other),
            (Spin::One, Spin::Two) | (Spin::Two, Spin::One)
        )
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::One => "1",
            Spin::Two => "2",
            Spin::Both => "12",
        })
    }
}

impl FromStr for Spin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "1" => Ok(Spin::One),
            "2" => Ok(Spin::Two),
            "12" => Ok(Spin::Both),
            other => Err(format!("bad spin `{other}`, expected 1, 2 or 12")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            other => Err(format!("bad axis `{other}`, expected x or y")),
        }
    }
}

/// `exp(i angle sigma_axis / 2)` on one qubit.
fn single_qubit_rotation(axis: Axis, angle: f64) -> Operator {
    let (s, c) = (angle / 2.0).sin_cos();
    let entries = match axis {
        // cos I + i sin sigma_x
        Axis::X => [
            C64::new(c, 0.0),
            C64::new(0.0, s),
            C64::new(0.0, s),
            C64::new(c, 0.0),
        ],
        // cos I + i sin sigma_y = [[c, s], [-s, c]]
        Axis::Y => [
            C64::new(c, 0.0),
            C64::new(s, 0.0),
            C64::new(-s, 0.0),
            C64::new(c, 0.0),
        ],
    };
    Operator::from_unitary_unchecked(DMatrix::from_row_slice(2, 2, &entries))
}

/// Places a one-qubit operator on qubit `position` (0 = most significant).
fn embed(single: &Operator, position: usize, n_qubits: usize) -> Operator {
    let left = Operator::identity(position);
    let right = Operator::identity(n_qubits - position - 1);
    tensor(&tensor(&left, single), &right)
}

/// `R_axis^spin(angle) = exp(i angle I_axis^spin)` on an `n_qubits` register.
///
/// Spins 1 and 2 are qubits 0 and 1. `Spin::Both` is the product of the two
/// commuting single-spin rotations.
///
/// # Panics
///
/// If the register is too small for the addressed spin.
pub fn rotation(spin: Spin, axis: Axis, angle: f64, n_qubits: usize) -> Operator {
    let needed = match spin {
        Spin::One => 1,
        Spin::Two | Spin::Both => 2,
    };
    assert!(
        n_qubits >= needed,
        "spin {spin} needs at least {needed} qubits, register has {n_qubits}"
    );
    let single = single_qubit_rotation(axis, angle);
    match spin {
        Spin::One => embed(&single, 0, n_qubits),
        Spin::Two => embed(&single, 1, n_qubits),
        Spin::Both => &embed(&single, 0, n_qubits) * &embed(&single, 1, n_qubits),
    }
}

/// Free evolution under the scalar coupling: `[tau] = exp(-i 2 pi J tau I_z^1 I_z^2)`.
pub fn coupled_evolution(tau: f64, coupling_hz: f64) -> Operator {
    let half = PI * coupling_hz * tau / 2.0;
    let aligned = C64::from_polar(1.0, -half);
    let opposed = C64::from_polar(1.0, half);
    Operator::from_diagonal(&[aligned, opposed, opposed, aligned]).expect("4 is a power of two")
}

/// `n`-fold tensor power of the Hadamard gate.
pub fn walsh_hadamard(n_qubits: usize) -> Operator {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let hadamard = Operator::from_unitary_unchecked(DMatrix::from_row_slice(2, 2, &[h, h, h, -h]));
    (0..n_qubits).fold(Operator::identity(0), |acc, _| tensor(&acc, &hadamard))
}

/// The two-spin basis transform that replaces the Walsh-Hadamard transform.
pub fn u_operator() -> Operator {
    let rows: [[f64; 4]; 4] = [
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0, 1.0],
    ];
    let entries: Vec<C64> = rows
        .iter()
        .flatten()
        .map(|&x| C64::new(x / 2.0, 0.0))
        .collect();
    Operator::unitary(DMatrix::from_row_slice(4, 4, &entries)).expect("U is unitary")
}

fn check_marked(marked: &[usize], n_qubits: usize) -> Result<usize> {
    let dim = 1usize << n_qubits;
    match marked.iter().find(|&&i| i >= dim) {
        Some(&index) => Err(Error::IndexOutOfRange { index, dim }),
        None => Ok(dim),
    }
}

/// Diagonal phase rotation: `e^{i phi}` on marked basis states, `1` elsewhere.
pub fn selective_phase(marked: &[usize], phi: f64, n_qubits: usize) -> Result<Operator> {
    let dim = check_marked(marked, n_qubits)?;
    let factor = if phi == PI / 2.0 {
        C64::new(0.0, 1.0)
    } else {
        C64::from_polar(1.0, phi)
    };
    let mut diag = vec![ONE; dim];
    for &i in marked {
        diag[i] = factor;
    }
    Operator::from_diagonal(&diag)
}

/// Diagonal `-1` on marked states: the selective inversion of the original algorithm.
pub fn selective_inversion(marked: &[usize], n_qubits: usize) -> Result<Operator> {
    let dim = check_marked(marked, n_qubits)?;
    let mut diag = vec![ONE; dim];
    for &i in marked {
        diag[i] = -ONE;
    }
    Operator::from_diagonal(&diag)
}

/// Declarative description of a gate, validated on [`GateSpec::build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateSpec {
    Rotation {
        spin: Spin,
        axis: Axis,
        angle: f64,
        n_qubits: usize,
    },
    CoupledEvolution {
        tau: f64,
        coupling_hz: f64,
    },
    WalshHadamard {
        n_qubits: usize,
    },
    SelectivePhase {
        marked: Vec<usize>,
        angle: f64,
        n_qubits: usize,
    },
    UOperator,
}

impl GateSpec {
    pub fn build(&self) -> Result<Operator> {
        match *self {
            GateSpec::Rotation {
                spin,
                axis,
                angle,
                n_qubits,
            } => {
                if !angle.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "angle {angle} is not finite"
                    )));
                }
                if n_qubits == 0 || (spin != Spin::One && n_qubits < 2) {
                    return Err(Error::InvalidArgument(format!(
                        "spin {spin} does not fit a {n_qubits}-qubit register"
                    )));
                }
                Ok(rotation(spin, axis, angle, n_qubits))
            }
            GateSpec::CoupledEvolution { tau, coupling_hz } => {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return Err(Error::InvalidArgument(format!("delay {tau} must be >= 0")));
                }
                if !(coupling_hz > 0.0 && coupling_hz.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "coupling {coupling_hz} Hz must be > 0"
                    )));
                }
                Ok(coupled_evolution(tau, coupling_hz))
            }
            GateSpec::WalshHadamard { n_qubits } => {
                if n_qubits == 0 {
                    return Err(Error::InvalidArgument("n_qubits must be >= 1".into()));
                }
                Ok(walsh_hadamard(n_qubits))
            }
            GateSpec::SelectivePhase {
                ref marked,
                angle,
                n_qubits,
            } => {
                if !angle.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "angle {angle} is not finite"
                    )));
                }
                selective_phase(marked, angle, n_qubits)
            }
            GateSpec::UOperator => Ok(u_operator()),
        }
    }
}

/// Named two-qubit gates of the scheduling experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedGate {
    U,
    W,
    IA12,
    I0,
    IB14,
    IB23,
    IB12,
    IA34,
    IB34,
}

impl NamedGate {
    pub const ALL: [NamedGate; 9] = [
        NamedGate::U,
        NamedGate::W,
        NamedGate::IA12,
        NamedGate::I0,
        NamedGate::IB14,
        NamedGate::IB23,
        NamedGate::IB12,
        NamedGate::IA34,
        NamedGate::IB34,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedGate::U => "U",
            NamedGate::W => "W",
            NamedGate::IA12 => "I_A12",
            NamedGate::I0 => "I_0",
            NamedGate::IB14 => "I_B14",
            NamedGate::IB23 => "I_B23",
            NamedGate::IB12 => "I_B12",
            NamedGate::IA34 => "I_A34",
            NamedGate::IB34 => "I_B34",
        }
    }

    /// Marked basis indices of the selective pi/2 rotations.
    pub fn marked(self) -> Option<&'static [usize]> {
        match self {
            NamedGate::IA12 | NamedGate::IB12 => Some(&[0, 1]),
            NamedGate::I0 => Some(&[0]),
            NamedGate::IB14 => Some(&[0, 3]),
            NamedGate::IB23 => Some(&[1, 2]),
            NamedGate::IA34 | NamedGate::IB34 => Some(&[2, 3]),
            NamedGate::U | NamedGate::W => None,
        }
    }

    pub fn operator(self) -> Operator {
        match self {
            NamedGate::U => u_operator(),
            NamedGate::W => walsh_hadamard(2),
            other => {
                selective_phase(other.marked().unwrap(), PI / 2.0, 2).expect("indices are in range")
            }
        }
    }
}

impl fmt::Display for NamedGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NamedGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedGate::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{equal_up_to_global_phase, StateVector, EXACT_TOLERANCE, ZERO};
    use std::f64::consts::FRAC_PI_2;

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    #[test]
    fn zero_rotation_is_identity() {
        let r = rotation(Spin::One, Axis::X, 0.0, 2);
        assert_eq!(r.max_abs_diff(&Operator::identity(2)), 0.0);
    }

    #[test]
    fn pi_rotation_about_x_is_i_sigma_x() {
        let r = rotation(Spin::One, Axis::X, PI, 1);
        let expected = Operator::from_rows(2, &[ZERO, i(), i(), ZERO]).unwrap();
        assert!(r.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn u_is_composition_of_y_rotations() {
        let composed = &rotation(Spin::One, Axis::Y, FRAC_PI_2, 2)
            * &rotation(Spin::Two, Axis::Y, -FRAC_PI_2, 2);
        assert!(composed.max_abs_diff(&u_operator()) <= EXACT_TOLERANCE);
        assert_eq!(u_operator().entry(0, 0), C64::new(0.5, 0.0));
        assert_eq!(u_operator().entry(0, 1), C64::new(-0.5, 0.0));
        let product = &u_operator() * &u_operator().adjoint();
        assert!(product.max_abs_diff(&Operator::identity(2)) <= EXACT_TOLERANCE);
    }

    #[test]
    fn both_spin_rotation_is_product() {
        let both = rotation(Spin::Both, Axis::X, 0.7, 2);
        let product = &rotation(Spin::One, Axis::X, 0.7, 2) * &rotation(Spin::Two, Axis::X, 0.7, 2);
        assert_eq!(both, product);
    }

    #[test]
    fn coupled_evolution_cases() {
        let j = 215.0;
        assert!(coupled_evolution(0.0, j).max_abs_diff(&Operator::identity(2)) == 0.0);

        let b14 = NamedGate::IB14.operator();
        let r =
            equal_up_to_global_phase(&coupled_evolution(7.0 / (2.0 * j), j), &b14, 1e-12).unwrap();
        assert!(r.equivalent);
        // [7/2J] = e^{-i pi/4} diag(i, 1, 1, i): b14 ~ e^{i pi/4} [7/2J].
        assert!((r.global_phase - C64::from_polar(1.0, PI / 4.0)).norm() < 1e-12);

        let b23 = NamedGate::IB23.operator();
        let r =
            equal_up_to_global_phase(&coupled_evolution(1.0 / (2.0 * j), j), &b23, 1e-12).unwrap();
        assert!(r.equivalent);
    }

    #[test]
    fn walsh_hadamard_cases() {
        let s = FRAC_1_SQRT_2;
        let h = walsh_hadamard(1);
        let expected =
            Operator::from_rows(2, &[s.into(), s.into(), s.into(), (-s).into()]).unwrap();
        assert_eq!(h.max_abs_diff(&expected), 0.0);

        let uniform = walsh_hadamard(2).apply(&StateVector::zero(2)).unwrap();
        for a in uniform.amplitudes() {
            assert!((a - C64::new(0.5, 0.0)).norm() < 1e-15);
        }

        let w3 = walsh_hadamard(3);
        assert!((&w3 * &w3).max_abs_diff(&Operator::identity(3)) < 1e-12);
    }

    #[test]
    fn selective_phase_instances() {
        let diag = |op: &Operator| (0..4).map(|k| op.entry(k, k)).collect::<Vec<_>>();
        assert_eq!(
            diag(&selective_phase(&[0, 1], FRAC_PI_2, 2).unwrap()),
            vec![i(), i(), ONE, ONE]
        );
        assert_eq!(
            diag(&selective_phase(&[0], FRAC_PI_2, 2).unwrap()),
            vec![i(), ONE, ONE, ONE]
        );
        assert_eq!(
            diag(&selective_phase(&[2, 3], FRAC_PI_2, 2).unwrap()),
            vec![ONE, ONE, i(), i()]
        );
        assert_eq!(
            selective_phase(&[], 1.234, 3).unwrap(),
            Operator::identity(3)
        );
        assert_eq!(
            selective_phase(&[4], FRAC_PI_2, 2),
            Err(Error::IndexOutOfRange { index: 4, dim: 4 })
        );
    }

    #[test]
    fn selective_inversion_cases() {
        let i0 = selective_inversion(&[0], 2).unwrap();
        assert_eq!(i0.entry(0, 0), -ONE);
        assert_eq!(i0.entry(1, 1), ONE);
        assert_eq!(selective_inversion(&[], 2).unwrap(), Operator::identity(2));
        let m = selective_inversion(&[1, 3], 2).unwrap();
        assert_eq!(&m * &m, Operator::identity(2));
        let via_phase = selective_phase(&[1, 3], PI, 2).unwrap();
        assert!(via_phase.max_abs_diff(&m) < 1e-15);
        assert!(selective_inversion(&[9], 3).is_err());
    }

    #[test]
    fn gate_spec_validation() {
        let bad = GateSpec::Rotation {
            spin: Spin::One,
            axis: Axis::X,
            angle: f64::NAN,
            n_qubits: 2,
        };
        assert!(bad.build().is_err());
        let bad = GateSpec::SelectivePhase {
            marked: vec![8],
            angle: 1.0,
            n_qubits: 3,
        };
        assert!(bad.build().is_err());
        assert_eq!(GateSpec::UOperator.build().unwrap(), u_operator());
        let json = serde_json::to_string(&GateSpec::WalshHadamard { n_qubits: 2 }).unwrap();
        assert_eq!(json, r#"{"kind":"walsh_hadamard","n_qubits":2}"#);
    }

    #[test]
    fn registry_round_trips_names() {
        for gate in NamedGate::ALL {
            assert_eq!(gate.name().parse::<NamedGate>().unwrap(), gate);
            assert!(gate.operator().is_unitary());
        }
        assert!("I_B99".parse::<NamedGate>().is_err());
    }
}
