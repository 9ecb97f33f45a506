//! Seeded sampling of matrices and states.
//!
//! All randomness flows through [`Rng`], the ChaCha8 stream cipher used as a
//! counter-based generator. A seed is a single `u64` fed to
//! `ChaCha8Rng::seed_from_u64`; each real number is drawn with
//! `Rng::random::<f64>()` (53-bit uniform on `[0, 1)`) and mapped affinely.
//! Complex entries draw the real part first, then the imaginary part, in
//! row-major order.

use nalgebra::DVector;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraElement, DensityMatrix, HermitianSpectrum, StateVector};
use crate::C64;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[-1, 1)`.
pub fn uniform(rng: &mut Rng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

pub fn complex(rng: &mut Rng) -> C64 {
    let re = uniform(rng);
    let im = uniform(rng);
    C64::new(re, im)
}

/// Matrix with independent uniform complex entries.
pub fn element(rng: &mut Rng, n: usize) -> AlgebraElement {
    let entries: Vec<C64> = (0..n * n).map(|_| complex(rng)).collect();
    AlgebraElement::from_rows(n, &entries).expect("entry count matches")
}

/// `(M + M*) / 2` for a uniform `M`.
pub fn hermitian(rng: &mut Rng, n: usize) -> AlgebraElement {
    let m = element(rng, n);
    (&m + &m.adjoint()).scale_real(0.5)
}

/// Uniform matrix with its trace removed.
pub fn traceless(rng: &mut Rng, n: usize) -> AlgebraElement {
    element(rng, n).traceless_part()
}

/// `exp(-i H)` for a Hermitian `H` with entries scaled by π.
pub fn unitary(rng: &mut Rng, n: usize) -> AlgebraElement {
    let h = hermitian(rng, n).scale_real(std::f64::consts::PI);
    HermitianSpectrum::new(&h)
        .expect("hermitian by construction")
        .unitary(1.0)
}

pub fn state_vector(rng: &mut Rng, n: usize) -> StateVector {
    let amps: Vec<C64> = (0..n).map(|_| complex(rng)).collect();
    StateVector::new(DVector::from_vec(amps))
        .unwrap_or_else(|_| StateVector::basis(n, 0))
}

/// `M M* / tr(M M*)`, which is full rank with probability one.
pub fn density_matrix(rng: &mut Rng, n: usize) -> DensityMatrix {
    let m = element(rng, n);
    let g = &m * &m.adjoint();
    let tr = g.trace().re;
    let rho = g.scale_real(1.0 / tr);
    // symmetrize so that the Hermiticity check sees exact equality
    let rho = (&rho + &rho.adjoint()).scale_real(0.5);
    DensityMatrix::new(rho).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = element(&mut seeded(9), 3);
        let b = element(&mut seeded(9), 3);
        assert_eq!(a, b);
        assert_ne!(a, element(&mut seeded(10), 3));
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = seeded(1);
        let u = unitary(&mut rng, 4);
        let p = &u * &u.adjoint();
        assert!(p.max_abs_diff(&AlgebraElement::identity(4)) < 1e-12);
    }

    #[test]
    fn traceless_has_zero_trace() {
        let t = traceless(&mut seeded(2), 5);
        assert!(t.trace().norm() < 1e-14);
    }
}
