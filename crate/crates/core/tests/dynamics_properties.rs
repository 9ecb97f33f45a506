use ncham_core::algebra::HermitianSpectrum;
use ncham_core::dynamics::{
    classical_evolve_rk4, heisenberg_cross_check, heisenberg_evolve, picture_equivalence_check, schrodinger_evolve,
    ClassicalHamiltonianSystem, Gahs, PhasePoint,
};
use ncham_core::galilean::{build_rep, RepMode};
use ncham_core::random::{self, seeded};
use ncham_core::symplectic::QuantumSymplectic;
use proptest::prelude::*;

fn random_system(seed: u64, n: usize, hbar: f64) -> (Gahs, ncham_core::random::Rng) {
    let mut rng = seeded(seed);
    let q = QuantumSymplectic::full_matrix(n, hbar).unwrap();
    let h = random::hermitian(&mut rng, n);
    (Gahs::quantum(&q, h).unwrap(), rng)
}

fn times(t_end: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn schrodinger_evolution_is_unitary(seed in any::<u64>(), hbar in 0.1f64..2.0) {
        let (sys, mut rng) = random_system(seed, 4, hbar);
        let psi = random::state_vector(&mut rng, 4);
        let traj = schrodinger_evolve(&sys, &psi, &times(5.0, 20)).unwrap();
        for (_, s) in traj.iter() {
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pictures_agree(seed in any::<u64>(), t in -3.0f64..3.0) {
        let (sys, mut rng) = random_system(seed, 4, 1.0);
        let psi = random::state_vector(&mut rng, 4);
        let a = random::hermitian(&mut rng, 4);
        prop_assert!(picture_equivalence_check(&sys, &psi, &a, t).unwrap() < 1e-10);
    }

    #[test]
    fn conserved_quantities_are_constant(seed in any::<u64>()) {
        let (sys, mut rng) = random_system(seed, 4, 0.8);
        // any function of H commutes with H
        let spec = HermitianSpectrum::new(sys.hamiltonian()).unwrap();
        let f = random::uniform(&mut rng);
        let a = spec.map(|l| ncham_core::C64::new((f * l).sin() + l * l, 0.0));
        let traj = heisenberg_evolve(&sys, &a, &times(4.0, 16)).unwrap();
        for (_, at) in traj.iter() {
            prop_assert!(at.max_abs_diff(&a) < 1e-10);
        }
    }
}

#[test]
fn rk4_heisenberg_converges_at_fourth_order() {
    for seed in [1u64, 2, 3] {
        let (sys, mut rng) = random_system(seed, 4, 1.0);
        let a0 = random::hermitian(&mut rng, 4);
        let grid = times(1.0, 4);
        let coarse = heisenberg_cross_check(&sys, &a0, &grid, 0.05).unwrap();
        let fine = heisenberg_cross_check(&sys, &a0, &grid, 0.025).unwrap();
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "seed {seed}: ratio {ratio} ({coarse:e} / {fine:e})");
    }
}

/// Largest gap between quantum and classical means over one period of a
/// truncated oscillator, starting from the coherent state at `(x0, p0)`.
fn ehrenfest_gap(n: usize, hbar: f64, mass: f64, omega: f64, x0: f64, p0: f64) -> f64 {
    let length = (hbar / (mass * omega)).sqrt();
    let rep = build_rep(RepMode::Oscillator { length }, n, hbar, mass).unwrap();
    let (x, p) = (rep.x(), rep.p());
    let h = &(p * p).scale_real(0.5 / mass) + &(x * x).scale_real(0.5 * mass * omega * omega);
    let sys = Gahs::quantum(&QuantumSymplectic::full_matrix(n, hbar).unwrap(), h).unwrap();
    let psi = rep.gaussian_state(x0, p0, 1.0).unwrap();
    let period = 2.0 * std::f64::consts::PI / omega;
    let grid = times(period, 64);
    let xt = heisenberg_evolve(&sys, x, &grid).unwrap();
    let pt = heisenberg_evolve(&sys, p, &grid).unwrap();
    let classical = classical_evolve_rk4(
        &ClassicalHamiltonianSystem::harmonic(mass, omega),
        &PhasePoint::one(x0, p0),
        &grid,
        1e-3,
    )
    .unwrap();
    let mut gap = 0.0_f64;
    for ((xq, pq), z) in xt.values().iter().zip(pt.values()).zip(classical.values()) {
        gap = gap
            .max((psi.expectation(xq).unwrap().re - z.q[0]).abs())
            .max((psi.expectation(pq).unwrap().re - z.p[0]).abs());
    }
    gap
}

#[test]
fn ehrenfest_is_exact_for_the_oscillator() {
    assert!(ehrenfest_gap(40, 1.0, 1.0, 1.0, 1.0, 0.5) < 1e-6);
    assert!(ehrenfest_gap(40, 0.5, 2.0, 1.5, -0.4, 0.8) < 1e-6);
}

#[test]
fn position_expectation_sanity() {
    // ⟨x⟩ of the coherent state equals its label
    let rep = build_rep(RepMode::Oscillator { length: 1.0 }, 40, 1.0, 1.0).unwrap();
    let psi = rep.gaussian_state(1.2, -0.3, 1.0).unwrap();
    assert!((psi.expectation(rep.x()).unwrap().re - 1.2).abs() < 1e-12);
    assert!((psi.expectation(rep.p()).unwrap().re + 0.3).abs() < 1e-12);
}
