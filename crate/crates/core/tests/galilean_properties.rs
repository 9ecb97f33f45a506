use ncham_core::algebra::StateVector;
use ncham_core::galilean::*;
use ncham_core::C64;
use proptest::prelude::*;

/// Coherent test states with amplitudes of modulus 1.5 and 1.8.
fn coherent_states(rep: &TruncatedRep) -> Vec<StateVector> {
    let s = std::f64::consts::SQRT_2;
    vec![
        rep.gaussian_state(1.8 * s, 0.0, 1.0).unwrap(),
        rep.gaussian_state(1.5 * s * 0.6, 1.5 * s * 0.8, 1.0).unwrap(),
    ]
}

fn full_audit(rep: &TruncatedRep, t: f64) -> RelationReport {
    let states = coherent_states(rep);
    let mut report = verify_ccr(rep, &states).unwrap();
    report.extend(verify_boost_and_free_hamiltonian(&GalileanGenerators::free(rep.clone()), t, &states).unwrap());
    report
}

#[test]
fn oscillator_residuals_shrink_under_doubling() {
    let small = build_rep(RepMode::Oscillator { length: 1.0 }, 32, 1.0, 1.0).unwrap();
    let large = small.resized(64).unwrap();
    let (a, b) = (full_audit(&small, 0.7), full_audit(&large, 0.7));
    assert!(a.max_residual() < 1e-7, "{a}");
    for id in a.relation_ids() {
        let (ra, rb) = (a.max_for(id).unwrap(), b.max_for(id).unwrap());
        // relations that already hold to rounding at the smaller size have nothing left to shrink
        assert!(ra <= 1e-13 || ra / rb >= 4.0, "{id}: {ra:e} -> {rb:e}");
    }
}

#[test]
fn grid_residuals_shrink_under_doubling() {
    let audit = |n| {
        let rep = build_rep(RepMode::Grid { extent: 6.0 }, n, 1.0, 1.0).unwrap();
        let psi = rep.gaussian_state(0.3, 0.5, 0.5).unwrap();
        verify_ccr(&rep, &[psi]).unwrap().max_residual()
    };
    let (r32, r64) = (audit(32), audit(64));
    assert!(r32 / r64 >= 4.0, "{r32:e} -> {r64:e}");
    assert!(r64 < 1e-8);
}

#[test]
fn grid_trace_of_commutator_is_exactly_zero() {
    for n in [8, 32, 64] {
        let rep = build_rep(RepMode::Grid { extent: 4.0 }, n, 0.9, 1.0).unwrap();
        assert_eq!(ccr_trace(&rep), C64::new(0.0, 0.0));
    }
}

#[test]
fn spin_block_is_exact() {
    let rep = build_rep(RepMode::Grid { extent: 4.0 }, 16, 0.6, 1.0).unwrap();
    let r = verify_spin_block(&rep);
    assert!(r.max_for("spin_algebra").unwrap() < 1e-14);
    assert_eq!(r.max_for("spin_position"), Some(0.0));
    assert_eq!(r.max_for("spin_momentum"), Some(0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oscillator_trace_is_zero(n in 4usize..40, hbar in 0.1f64..3.0, length in 0.3f64..3.0) {
        let rep = build_rep(RepMode::Oscillator { length }, n, hbar, 1.0).unwrap();
        prop_assert!(ccr_trace(&rep).norm() < 1e-12 * hbar * n as f64);
    }

    #[test]
    fn low_levels_satisfy_the_ccr(n in 8usize..40, seed in any::<u64>()) {
        let rep = build_rep(RepMode::Oscillator { length: 1.0 }, n, 1.0, 1.0).unwrap();
        let mut rng = ncham_core::random::seeded(seed);
        let amps: Vec<C64> = (0..n).map(|k| if k < n / 2 { ncham_core::random::complex(&mut rng) } else { C64::new(0.0, 0.0) }).collect();
        let psi = StateVector::from_slice(&amps).unwrap();
        prop_assert!(verify_ccr(&rep, &[psi]).unwrap().max_residual() < 1e-10);
    }

    #[test]
    fn boost_relations_hold_at_any_time(t in -3.0f64..3.0, mass in 0.5f64..3.0) {
        let rep = build_rep(RepMode::Oscillator { length: 1.0 }, 48, 1.0, mass).unwrap();
        let g = GalileanGenerators::free(rep.clone());
        prop_assert!(g.max_adjoint_deviation(t) < 1e-12);
        let r = verify_boost_and_free_hamiltonian(&g, t, &coherent_states(&rep)).unwrap();
        prop_assert!(r.max_residual() < 1e-7);
    }
}

#[test]
fn edge_states_are_rejected() {
    let rep = build_rep(RepMode::Grid { extent: 5.0 }, 64, 1.0, 1.0).unwrap();
    let edge = StateVector::basis(64, 1);
    let g = GalileanGenerators::free(rep.clone());
    assert!(matches!(verify_ccr(&rep, std::slice::from_ref(&edge)), Err(ncham_core::Error::PreconditionViolated(_))));
    assert!(matches!(
        verify_boost_and_free_hamiltonian(&g, 0.0, &[edge]),
        Err(ncham_core::Error::PreconditionViolated(_))
    ));
}
