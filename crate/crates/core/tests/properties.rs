use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qsched_core::gates::{
    coupled_evolution, rotation, selective_phase, walsh_hadamard, Axis, Spin,
};
use qsched_core::linalg::{
    equal_up_to_global_phase, DensityMatrix, DeviationMatrix, Operator, StateVector, C64,
};
use qsched_core::nmr::{
    optimize_sequence, refocused_delay, sequence_unitary, PulseElement, PulseSequence, SpinSystem,
};
use qsched_core::protocol::{simulate_protocol, Party, PartyRole, ProtocolEvent};
use qsched_core::scheduling::{
    amplifier_circuit, marked_probability, measure_distribution, run_generalized, AmplifierConfig,
    FactorTag, Schedule,
};
use qsched_core::tomography::{forward_observe, observe, reconstruct, standard_settings};

fn gaussian_matrix(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

fn random_unitary(seed: u64, dim: usize) -> Operator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Operator::unitary(gaussian_matrix(&mut rng, dim).qr().q()).expect("QR factor is unitary")
}

fn random_state(seed: u64, dim: usize) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::normalized(amps).unwrap()
}

fn random_deviation(seed: u64) -> DeviationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(&mut rng, 4);
    let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    DeviationMatrix::from_density(&DensityMatrix::new(h).unwrap())
}

fn spin() -> impl Strategy<Value = Spin> {
    prop_oneof![Just(Spin::One), Just(Spin::Two), Just(Spin::Both)]
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y)]
}

/// Rational degrees (multiples of 1/8) so the text format is exact.
fn element() -> impl Strategy<Value = PulseElement> {
    prop_oneof![
        4 => (spin(), axis(), -2880i32..=2880).prop_map(|(s, a, k)| PulseElement::rf(s, a, k as f64 / 8.0)),
        2 => (spin(), axis(), prop::sample::select(vec![-360.0, -180.0, -90.0, 90.0, 180.0, 360.0]))
            .prop_map(|(s, a, d)| PulseElement::rf(s, a, d)),
        1 => (1u32..=4000).prop_map(|k| PulseElement::delay(k as f64 * 1e-6)),
        1 => (1u32..=15, prop::sample::select(vec![1u32, 2, 4]))
            .prop_map(|(n, d)| PulseElement::jdelay(n, d)),
    ]
}

fn sequence(max: usize) -> impl Strategy<Value = PulseSequence> {
    prop::collection::vec(element(), 0..=max).prop_map(PulseSequence::new)
}

fn schedule(n_slots: usize) -> impl Strategy<Value = Schedule> {
    prop::collection::btree_set(0..n_slots, 0..=n_slots)
        .prop_map(move |s| Schedule::new(n_slots, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_unitaries_preserve_norm(seed in any::<u64>(), n in 1usize..=3) {
        let u = random_unitary(seed, 1 << n);
        prop_assert!(u.unitarity_defect() <= 1e-12);
        let psi = random_state(seed ^ 0x5eed, 1 << n);
        let out = u.apply(&psi).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(u.adjoint().adjoint(), u);
    }

    #[test]
    fn protocol_locality(
        (alice, bob) in (2usize..=4).prop_flat_map(|n| (schedule(1 << n), schedule(1 << n))),
        m_outer in 1usize..=3,
        two_spin in any::<bool>(),
    ) {
        let n = alice.n_qubits();
        let cfg = if two_spin && n == 2 {
            AmplifierConfig::two_spin()
        } else {
            AmplifierConfig::generalized(walsh_hadamard(n), "W", PI / 2.0)
        }
        .with_outer_iterations(m_outer);
        let t = simulate_protocol(&Party::alice(alice.clone()), &Party::bob(bob.clone()), &cfg).unwrap();
        prop_assert!(t.validate().is_ok());
        prop_assert_eq!(t.exchanges, m_outer);
        prop_assert_eq!(t.bob_phase_events(), m_outer);
        let at_alice = t.events.iter().filter(|e| matches!(
            e,
            ProtocolEvent::Apply { tag: FactorTag::BobPhase, location: PartyRole::Alice, .. }
        )).count();
        prop_assert_eq!(at_alice, 0);
        let direct = run_generalized(&alice, &bob, &cfg).unwrap();
        prop_assert_eq!(&t.final_outcome.final_state, &direct.final_state);
        let total: f64 = direct.distribution.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn optimizer_preserves_unitary(seq in sequence(16)) {
        let sys = SpinSystem::default().with_offsets(120.0, -75.0);
        let opt = optimize_sequence(&seq);
        prop_assert!(opt.len() <= seq.len());
        let r = equal_up_to_global_phase(
            &sequence_unitary(&seq, &sys),
            &sequence_unitary(&opt, &sys),
            1e-9,
        ).unwrap();
        prop_assert!(r.equivalent, "residual {}", r.max_residual);
        prop_assert_eq!(optimize_sequence(&opt), opt);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phase_equivalence_is_an_equivalence(seed in any::<u64>(), a in -PI..PI, b in -PI..PI) {
        let u = random_unitary(seed, 4);
        let v = u.scale(C64::from_polar(1.0, a));
        let w = v.scale(C64::from_polar(1.0, b));
        let tol = 1e-10;
        prop_assert!(equal_up_to_global_phase(&u, &u, tol).unwrap().equivalent);
        prop_assert!(equal_up_to_global_phase(&u, &v, tol).unwrap().equivalent);
        prop_assert!(equal_up_to_global_phase(&v, &u, tol).unwrap().equivalent);
        prop_assert!(equal_up_to_global_phase(&u, &w, tol).unwrap().equivalent);

        let psi = random_state(seed, 4);
        let phi = psi.scale(C64::from_polar(1.0, a));
        let r = equal_up_to_global_phase(&psi, &phi, tol).unwrap();
        prop_assert!(r.equivalent);
        prop_assert!((r.global_phase - C64::from_polar(1.0, a)).norm() < 1e-10);
    }

    #[test]
    fn rotations_compose(s in spin(), ax in axis(), a in -4.0 * PI..4.0 * PI, b in -4.0 * PI..4.0 * PI) {
        let ra = rotation(s, ax, a, 2);
        let id = &ra * &rotation(s, ax, -a, 2);
        prop_assert!(id.max_abs_diff(&Operator::identity(2)) <= 1e-12);
        let sum = &rotation(s, ax, b, 2) * &ra;
        prop_assert!(sum.max_abs_diff(&rotation(s, ax, a + b, 2)) <= 1e-12);
    }

    #[test]
    fn phases_and_couplings_add(
        marked in prop::collection::btree_set(0usize..4, 0..=4),
        a in -PI..PI, b in -PI..PI,
        t1 in 0.0..0.05f64, t2 in 0.0..0.05f64, j in 1.0..500.0f64,
    ) {
        let marked: Vec<usize> = marked.into_iter().collect();
        let pa = selective_phase(&marked, a, 2).unwrap();
        let pb = selective_phase(&marked, b, 2).unwrap();
        prop_assert!((&pa * &pb).max_abs_diff(&selective_phase(&marked, a + b, 2).unwrap()) <= 1e-12);
        let c = &coupled_evolution(t1, j) * &coupled_evolution(t2, j);
        prop_assert!(c.max_abs_diff(&coupled_evolution(t1 + t2, j)) <= 1e-12);
    }

    #[test]
    fn text_format_round_trips(seq in sequence(20)) {
        let text = seq.to_string();
        let back: PulseSequence = text.parse().unwrap();
        prop_assert_eq!(back, seq);
    }

    #[test]
    fn tomography_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let sys = SpinSystem::default();
        let (r1, r2) = (random_deviation(s1), random_deviation(s2));
        let combo = DeviationMatrix::new(
            r1.matrix() * C64::new(a, 0.0) + r2.matrix() * C64::new(b, 0.0),
        ).unwrap();
        for setting in standard_settings() {
            let (o1, o2) = (forward_observe(&r1, &setting, &sys), forward_observe(&r2, &setting, &sys));
            let oc = forward_observe(&combo, &setting, &sys);
            for k in 0..8 {
                prop_assert!((oc[k] - (a * o1[k] + b * o2[k])).abs() <= 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tomography_round_trip(seed in any::<u64>()) {
        let sys = SpinSystem::default();
        let rho = random_deviation(seed);
        let back = reconstruct(&observe(&rho, &standard_settings(), &sys), &sys).unwrap();
        prop_assert!(back.max_abs_diff(&rho) <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn refocused_delay_cancels_offsets(
        tau in 0.0..0.02f64,
        o1 in -500.0..=500.0f64,
        o2 in -500.0..=500.0f64,
    ) {
        let sys = SpinSystem::default().with_offsets(o1, o2);
        let r = equal_up_to_global_phase(
            &coupled_evolution(tau, sys.coupling_hz),
            &sequence_unitary(&refocused_delay(tau), &sys),
            1e-10,
        ).unwrap();
        prop_assert!(r.equivalent, "residual {}", r.max_residual);
    }

    #[test]
    fn half_density_is_degenerate(
        (n, marked) in prop::sample::select(vec![2usize, 3, 4]).prop_flat_map(|n| {
            (Just(n), prop::sample::subsequence((0..1usize << n).collect::<Vec<_>>(), 1usize << (n - 1)))
        }),
        m in 1usize..=8,
    ) {
        let alice = Schedule::new(1 << n, marked.iter().copied()).unwrap();
        let cfg = AmplifierConfig::original(n, m, 1);
        let state = amplifier_circuit(&alice, &cfg).unwrap().apply(&StateVector::zero(n)).unwrap();
        let p = marked_probability(&measure_distribution(&state), &marked);
        prop_assert!((p - 0.5).abs() <= 1e-10, "p = {}", p);
    }
}

#[test]
fn schedule_bits_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = 1usize << rng.random_range(1..=5);
        let bits: String = (0..n)
            .map(|_| if rng.random_bool(0.5) { '1' } else { '0' })
            .collect();
        assert_eq!(Schedule::from_bits(&bits).unwrap().to_bits(), bits);
    }
}
