mod common;

use ncham_core::algebra::{mix, transition_probability, DensityMatrix, PSD_TOL};
use ncham_core::random::{self, seeded};
use ncham_core::io::{matrix_from_text, matrix_to_text};
use ncham_core::C64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn commutator_jacobi(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let [a, b, c] = [0; 3].map(|_| random::element(&mut rng, 4));
        let sum = &(&a.bracket(&b).bracket(&c) + &b.bracket(&c).bracket(&a)) + &c.bracket(&a).bracket(&b);
        prop_assert!(sum.max_abs() < 1e-12, "{}", sum.max_abs());
    }

    #[test]
    fn derivations_obey_leibniz(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = seeded(seed);
        let d = common::derivation(&mut rng, n);
        let a = random::element(&mut rng, n);
        let b = random::element(&mut rng, n);
        let lhs = d.apply(&(&a * &b));
        let rhs = &(&d.apply(&a) * &b) + &(&a * &d.apply(&b));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn transition_probability_is_unitarily_invariant(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = seeded(seed);
        let phi = random::state_vector(&mut rng, n);
        let psi = random::state_vector(&mut rng, n);
        let u = random::unitary(&mut rng, n);
        let before = transition_probability(&phi, &psi).unwrap();
        let after = transition_probability(&phi.transformed(&u).unwrap(), &psi.transformed(&u).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&before));
    }

    #[test]
    fn mixtures_are_density_matrices(seed in any::<u64>(), k in 1usize..=4, n in 2usize..=4) {
        let mut rng = seeded(seed);
        let states: Vec<DensityMatrix> = (0..k).map(|_| random::density_matrix(&mut rng, n)).collect();
        let raw: Vec<f64> = (0..k).map(|_| random::uniform(&mut rng).abs() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let rho = mix(&states, &weights).unwrap();
        let m = rho.as_element();
        prop_assert!((m.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(m.is_self_adjoint(1e-12));
        // revalidating runs the positivity check
        prop_assert!(DensityMatrix::new(m.clone()).is_ok());
        let spec = ncham_core::algebra::HermitianSpectrum::new(m).unwrap();
        prop_assert!(spec.eigenvalues.iter().all(|&l| l >= PSD_TOL));
    }

    #[test]
    fn matrix_text_round_trip(seed in any::<u64>(), n in 1usize..=6) {
        let a = random::element(&mut seeded(seed), n);
        prop_assert_eq!(matrix_from_text(&matrix_to_text(&a)).unwrap(), a);
    }
}
