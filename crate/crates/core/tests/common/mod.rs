#![allow(dead_code)]

use ncham_core::algebra::{AlgebraElement, Derivation};
use ncham_core::calculus::{wedge, KForm};
use ncham_core::random::{self, Rng};

pub fn derivation(rng: &mut Rng, n: usize) -> Derivation {
    Derivation::inner(random::element(rng, n))
}

/// `A dB`, i.e. `X ↦ A X(B)`.
pub fn one_form(rng: &mut Rng, n: usize) -> KForm {
    let a = random::element(rng, n);
    let b = random::element(rng, n);
    KForm::new(1, n, move |x| &a * &x[0].apply(&b))
}

/// Sum of two wedges of random 1-forms.
pub fn two_form(rng: &mut Rng, n: usize) -> KForm {
    let w1 = wedge(&one_form(rng, n), &one_form(rng, n));
    let w2 = wedge(&one_form(rng, n), &one_form(rng, n));
    w1.add(&w2).unwrap()
}

pub fn form_of_degree(rng: &mut Rng, n: usize, degree: usize) -> KForm {
    match degree {
        0 => KForm::zero_form(random::element(rng, n)),
        1 => one_form(rng, n),
        _ => two_form(rng, n),
    }
}

/// `count` tuples of `arity` random derivations.
pub fn arg_tuples(rng: &mut Rng, n: usize, arity: usize, count: usize) -> Vec<Vec<Derivation>> {
    (0..count)
        .map(|_| (0..arity).map(|_| derivation(rng, n)).collect())
        .collect()
}

pub fn max_abs(a: &AlgebraElement) -> f64 {
    a.max_abs()
}
