//! Deviation matrices, simulated two-spin readout, least-squares
//! reconstruction, and the error metrics used to compare a reconstructed
//! matrix against theory.
//!
//! A readout setting is a short pulse sequence applied before acquisition.
//! Each acquisition yields the eight single-quantum expectation values in
//! [`Observable::ALL`]. Reconstruction fits the 15 real Pauli coefficients of a
//! traceless Hermitian matrix to all observations at once.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::{Axis, Spin};
use crate::linalg::{DensityMatrix, DeviationMatrix, MatrixJson, Operator, C64};
use crate::nmr::{sequence_unitary, PulseElement, PulseSequence, SpinSystem};

/// Single-quantum observables of the two-spin system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Observable {
    /// `I_x^1`
    Ix1,
    /// `I_y^1`
    Iy1,
    /// `I_x^2`
    Ix2,
    /// `I_y^2`
    Iy2,
    /// `2 I_x^1 I_z^2`
    Ix1Iz2,
    /// `2 I_y^1 I_z^2`
    Iy1Iz2,
    /// `2 I_z^1 I_x^2`
    Iz1Ix2,
    /// `2 I_z^1 I_y^2`
    Iz1Iy2,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Observable::Ix1,
        Observable::Iy1,
        Observable::Ix2,
        Observable::Iy2,
        Observable::Ix1Iz2,
        Observable::Iy1Iz2,
        Observable::Iz1Ix2,
        Observable::Iz1Iy2,
    ];

    pub fn operator(self) -> Operator {
        use Pauli::{I, X, Y, Z};
        let (a, b, scale) = match self {
            Observable::Ix1 => (X, I, 0.5),
            Observable::Iy1 => (Y, I, 0.5),
            Observable::Ix2 => (I, X, 0.5),
            Observable::Iy2 => (I, Y, 0.5),
            Observable::Ix1Iz2 => (X, Z, 0.5),
            Observable::Iy1Iz2 => (Y, Z, 0.5),
            Observable::Iz1Ix2 => (Z, X, 0.5),
            Observable::Iz1Iy2 => (Z, Y, 0.5),
        };
        pauli_product(a, b).scale(C64::new(scale, 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn entries(self) -> [C64; 4] {
        let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        }
    }
}

fn pauli_product(a: Pauli, b: Pauli) -> Operator {
    let a = DMatrix::from_row_slice(2, 2, &a.entries());
    let b = DMatrix::from_row_slice(2, 2, &b.entries());
    Operator::new(a.kronecker(&b)).expect("4x4")
}

/// The 15 non-identity two-qubit Pauli products.
fn traceless_basis() -> Vec<Operator> {
    Pauli::ALL
        .iter()
        .flat_map(|&a| Pauli::ALL.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| !(a == Pauli::I && b == Pauli::I))
        .map(|(a, b)| pauli_product(a, b))
        .collect()
}

/// `rho_0 = I_z^1/2 + I_z^2/2 + I_z^1 I_z^2 = |00><00| - I/4`.
pub fn pseudo_pure_deviation() -> DeviationMatrix {
    let z1 = pauli_product(Pauli::Z, Pauli::I).scale(C64::new(0.5, 0.0));
    let z2 = pauli_product(Pauli::I, Pauli::Z).scale(C64::new(0.5, 0.0));
    let half = C64::new(0.5, 0.0);
    let sum = z1.matrix() * half + z2.matrix() * half + z1.matrix() * z2.matrix();
    DeviationMatrix::new(sum).expect("rho_0 is traceless Hermitian")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReadoutSetting {
    pub label: String,
    pub pre_pulses: PulseSequence,
}

impl ReadoutSetting {
    pub fn new(label: &str, pre_pulses: PulseSequence) -> Self {
        ReadoutSetting {
            label: label.to_string(),
            pre_pulses,
        }
    }
}

/// Readout settings `none, y1, y2, y1y2, x1, x2, x1x2` with 90 degree pulses.
///
/// The y-phase four alone leave `I_z^1 I_z^2` unobserved; the x-phase
/// variants complete the set.
pub fn standard_settings() -> Vec<ReadoutSetting> {
    let p = |spin, axis| PulseElement::rf(spin, axis, 90.0);
    vec![
        ReadoutSetting::new("none", PulseSequence::default()),
        ReadoutSetting::new("y1", PulseSequence::new(vec![p(Spin::One, Axis::Y)])),
        ReadoutSetting::new("y2", PulseSequence::new(vec![p(Spin::Two, Axis::Y)])),
        ReadoutSetting::new(
            "y1y2",
            PulseSequence::new(vec![p(Spin::One, Axis::Y), p(Spin::Two, Axis::Y)]),
        ),
        ReadoutSetting::new("x1", PulseSequence::new(vec![p(Spin::One, Axis::X)])),
        ReadoutSetting::new("x2", PulseSequence::new(vec![p(Spin::Two, Axis::X)])),
        ReadoutSetting::new(
            "x1x2",
            PulseSequence::new(vec![p(Spin::One, Axis::X), p(Spin::Two, Axis::X)]),
        ),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub setting: ReadoutSetting,
    /// Expectation values in [`Observable::ALL`] order.
    pub values: [f64; 8],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObservationSet {
    pub observations: Vec<Observation>,
}

/// `tr(O u rho u^dag)` for each observable, `u` being the readout pulses.
pub fn forward_observe(
    rho: &DeviationMatrix,
    setting: &ReadoutSetting,
    sys: &SpinSystem,
) -> [f64; 8] {
    let u = sequence_unitary(&setting.pre_pulses, sys);
    let rotated = rho.evolve(&u).expect("two-spin deviation matrix");
    let mut values = [0.0; 8];
    for (v, obs) in values.iter_mut().zip(Observable::ALL) {
        *v = (obs.operator().matrix() * rotated.matrix()).trace().re;
    }
    values
}

pub fn observe(
    rho: &DeviationMatrix,
    settings: &[ReadoutSetting],
    sys: &SpinSystem,
) -> ObservationSet {
    ObservationSet {
        observations: settings
            .iter()
            .map(|s| Observation {
                setting: s.clone(),
                values: forward_observe(rho, s, sys),
            })
            .collect(),
    }
}

const BASIS_SIZE: usize = 15;

/// Least-squares reconstruction of a traceless Hermitian matrix.
///
/// Fails with [`Error::RankDeficient`] when the settings do not determine all
/// 15 Pauli coefficients.
pub fn reconstruct(observations: &ObservationSet, sys: &SpinSystem) -> Result<DeviationMatrix> {
    let basis = traceless_basis();
    let rows = observations.observations.len() * Observable::ALL.len();
    let mut design = DMatrix::<f64>::zeros(rows, BASIS_SIZE);
    let mut rhs = DVector::<f64>::zeros(rows);
    let mut row = 0;
    for obs in &observations.observations {
        let u = sequence_unitary(&obs.setting.pre_pulses, sys);
        for (k, o) in Observable::ALL.into_iter().enumerate() {
            // Heisenberg picture: the setting rotates the observable back.
            let effective = u.adjoint().matrix() * o.operator().matrix() * u.matrix();
            for (col, b) in basis.iter().enumerate() {
                design[(row, col)] = (&effective * b.matrix()).trace().re;
            }
            rhs[row] = obs.values[k];
            row += 1;
        }
    }

    let svd = design.svd(true, true);
    let largest = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * largest.max(1.0))
        .count();
    if rank < BASIS_SIZE {
        return Err(Error::RankDeficient {
            rank,
            required: BASIS_SIZE,
        });
    }
    let coefficients = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut matrix = DMatrix::<C64>::zeros(4, 4);
    for (c, b) in coefficients.iter().zip(&basis) {
        matrix += b.matrix() * C64::new(*c, 0.0);
    }
    // Project out any rounding-level trace.
    let shift = matrix.trace() / C64::new(4.0, 0.0);
    for k in 0..4 {
        matrix[(k, k)] -= shift;
    }
    DeviationMatrix::new(matrix)
}

/// Deviation-matrix comparison metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    /// Largest `|exp - th| / |th|` over entries where theory is nonzero.
    pub max_relative_error_nonzero: f64,
    /// Largest `|exp|` over theory-zero entries, relative to `max |th|`.
    pub max_small_element: f64,
    /// `max |Im exp| / max |Re th|`.
    pub imaginary_fraction: f64,
}

/// Entries with `|th| <= NONZERO_CUTOFF * max |th|` count as theoretical zeros.
pub const NONZERO_CUTOFF: f64 = 1e-6;

pub fn error_report(experimental: &DensityMatrix, theory: &DensityMatrix) -> Result<ErrorReport> {
    if experimental.dim() != theory.dim() {
        return Err(Error::DimensionMismatch {
            expected: theory.dim(),
            found: experimental.dim(),
        });
    }
    let th = theory.matrix();
    let ex = experimental.matrix();
    let max_th = th.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max_th == 0.0 {
        return Err(Error::ZeroTheory);
    }
    let max_re_th = th.iter().map(|z| z.re.abs()).fold(0.0, f64::max);

    let mut relative = 0.0f64;
    let mut small = 0.0f64;
    for (e, t) in ex.iter().zip(th.iter()) {
        if t.norm() > NONZERO_CUTOFF * max_th {
            relative = relative.max((e - t).norm() / t.norm());
        } else {
            small = small.max(e.norm() / max_th);
        }
    }
    let max_im = ex.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let denominator = if max_re_th > 0.0 { max_re_th } else { max_th };
    Ok(ErrorReport {
        max_relative_error_nonzero: relative,
        max_small_element: small,
        imaginary_fraction: max_im / denominator,
    })
}

/// Runs `seq` on the pseudo-pure state, reads it out with `settings` and
/// reconstructs it. The result is shifted by `I/4` back to a trace-one
/// density matrix comparable with `|psi><psi|`.
pub fn simulated_tomography(
    seq: &PulseSequence,
    sys: &SpinSystem,
    settings: &[ReadoutSetting],
) -> Result<DensityMatrix> {
    let rho = pseudo_pure_deviation().evolve(&sequence_unitary(seq, sys))?;
    let reconstructed = reconstruct(&observe(&rho, settings, sys), sys)?;
    Ok(reconstructed.as_density().shifted(0.25))
}

/// One record of the figure export: a theory matrix and, optionally, a
/// simulated reconstruction with its error report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig1Entry {
    pub scenario: String,
    pub theory: MatrixJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_report: Option<ErrorReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{to_density, StateVector};
    use crate::scheduling::{build_G, build_Q, AmplifierConfig, Schedule};

    fn sys() -> SpinSystem {
        SpinSystem::default()
    }

    fn real_diag(d: [f64; 4]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            4,
            d.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    #[test]
    fn pseudo_pure_entries() {
        let rho0 = pseudo_pure_deviation();
        assert_eq!(rho0.matrix(), &real_diag([0.75, -0.25, -0.25, -0.25]));
        assert_eq!(rho0.as_density().trace(), C64::new(0.0, 0.0));
        let shifted = rho0.as_density().shifted(0.25);
        assert_eq!(shifted, to_density(&StateVector::zero(2)));
    }

    #[test]
    fn observation_cases() {
        let settings = standard_settings();
        let y1 = settings.iter().find(|s| s.label == "y1").unwrap();
        let v = forward_observe(&pseudo_pure_deviation(), y1, &sys());
        assert!(v[0].abs() > 0.1, "{v:?}");

        let zero = DeviationMatrix::zeros(2);
        for s in &settings {
            assert_eq!(forward_observe(&zero, s, &sys()), [0.0; 8]);
        }

        // tr(I_x^1 I_x^1) = 1
        let ix1 = DeviationMatrix::new(Observable::Ix1.operator().matrix().clone()).unwrap();
        let v = forward_observe(&ix1, &settings[0], &sys());
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!(v[1..].iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn reconstruct_round_trips_rho0() {
        let rho0 = pseudo_pure_deviation();
        let obs = observe(&rho0, &standard_settings(), &sys());
        let back = reconstruct(&obs, &sys()).unwrap();
        assert!(back.max_abs_diff(&rho0) < 1e-10);
    }

    #[test]
    fn reconstruct_q2_output() {
        let cfg = AmplifierConfig::two_spin();
        let g12 = build_G(&Schedule::new(4, [0, 1]).unwrap(), &cfg).unwrap();
        let q2 = build_Q(&g12, &Schedule::new(4, [1, 2]).unwrap(), &cfg).unwrap();
        let rho = pseudo_pure_deviation().evolve(&q2).unwrap();
        let back = reconstruct(&observe(&rho, &standard_settings(), &sys()), &sys()).unwrap();
        let expected = real_diag([-0.25, 0.75, -0.25, -0.25]);
        assert!((back.matrix() - expected).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn reconstruct_zero_observations() {
        let obs = observe(&DeviationMatrix::zeros(2), &standard_settings(), &sys());
        let back = reconstruct(&obs, &sys()).unwrap();
        assert!(back.matrix().iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn y_phase_settings_alone_are_rank_deficient() {
        let settings: Vec<_> = standard_settings().into_iter().take(4).collect();
        let obs = observe(&pseudo_pure_deviation(), &settings, &sys());
        assert_eq!(
            reconstruct(&obs, &sys()),
            Err(Error::RankDeficient {
                rank: 14,
                required: 15
            })
        );
    }

    #[test]
    fn error_report_cases() {
        let theory = to_density(&StateVector::zero(2));
        let r = error_report(&theory, &theory).unwrap();
        assert_eq!(
            (
                r.max_relative_error_nonzero,
                r.max_small_element,
                r.imaginary_fraction
            ),
            (0.0, 0.0, 0.0)
        );

        let exp = DensityMatrix::new(real_diag([0.9, 0.0, 0.0, 0.0])).unwrap();
        let r = error_report(&exp, &theory).unwrap();
        assert!((r.max_relative_error_nonzero - 0.1).abs() < 1e-12);

        assert_eq!(
            error_report(&theory, &DensityMatrix::zeros(2)),
            Err(Error::ZeroTheory)
        );
    }
}
