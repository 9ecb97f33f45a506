//! Exterior calculus over inner derivations of a matrix algebra.
//!
//! A k-form is stored as an evaluation rule on k derivations, so every
//! operation here composes closures rather than manipulating tensors.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{self, check_dims, AlgebraElement, Derivation};
use crate::{Error, Result, C64};

/// Closure tolerance for the derivation basis.
pub const CLOSURE_TOL: f64 = 1e-10;

/// An algebra `M_n(C)` together with a Lie algebra of inner derivations.
#[derive(Clone, Debug)]
pub struct Ads {
    algebra_dim: usize,
    derivation_basis: Vec<Derivation>,
    algebra_generators: Vec<AlgebraElement>,
    full: bool,
}

impl Ads {
    /// Validates that `derivation_basis` closes under brackets.
    pub fn new(algebra_dim: usize, derivation_basis: Vec<Derivation>) -> Result<Self> {
        if algebra_dim == 0 || derivation_basis.is_empty() {
            return Err(Error::InvalidInput("empty algebraic differential system".into()));
        }
        for d in &derivation_basis {
            check_dims(algebra_dim, d.dim())?;
        }
        let mut algebra_generators: Vec<AlgebraElement> = derivation_basis
            .iter()
            .map(Derivation::effective_generator)
            .collect();
        algebra_generators.push(AlgebraElement::identity(algebra_dim));
        let ads = Self {
            algebra_dim,
            derivation_basis,
            algebra_generators,
            full: false,
        };
        let residual = ads.closure_residual();
        if residual > CLOSURE_TOL {
            return Err(Error::InvalidInput(format!(
                "derivation basis not closed under brackets (residual {residual:.3e})"
            )));
        }
        Ok(ads)
    }

    /// All inner derivations of `M_n(C)`, indexed by a traceless basis:
    /// off-diagonal matrix units followed by `E_kk - E_{k+1,k+1}`.
    pub fn full_matrix(n: usize) -> Self {
        let mut basis = Vec::with_capacity(n * n - 1);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    basis.push(Derivation::inner(AlgebraElement::matrix_unit(n, i, j)));
                }
            }
        }
        for k in 0..n.saturating_sub(1) {
            let mut d = vec![0.0; n];
            d[k] = 1.0;
            d[k + 1] = -1.0;
            basis.push(Derivation::inner(AlgebraElement::real_diagonal(&d)));
        }
        let algebra_generators = (0..n)
            .flat_map(|i| (0..n).map(move |j| AlgebraElement::matrix_unit(n, i, j)))
            .collect();
        Self {
            algebra_dim: n,
            derivation_basis: basis,
            algebra_generators,
            full: true,
        }
    }

    /// Whether this is [`Ads::full_matrix`], whose center is known to be trivial.
    pub fn is_full_matrix(&self) -> bool {
        self.full
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    pub fn derivation_basis(&self) -> &[Derivation] {
        &self.derivation_basis
    }

    pub fn algebra_generators(&self) -> &[AlgebraElement] {
        &self.algebra_generators
    }

    pub fn has_trivial_center(&self) -> Result<bool> {
        if self.full {
            return Ok(true);
        }
        algebra::has_trivial_center(&self.algebra_generators)
    }

    /// Coordinates of a derivation in the basis, by least squares on
    /// traceless generators. Returns the coefficients and the residual.
    pub fn coordinates(&self, x: &Derivation) -> (DVector<C64>, f64) {
        let basis = self.generator_matrix();
        let target = flatten(&x.effective_generator().traceless_part());
        let svd = basis.clone().svd(true, true);
        let coeffs = svd
            .solve(&target, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(basis.ncols()));
        let residual = (&basis * &coeffs - &target).camax();
        (coeffs, residual)
    }

    /// Largest residual when expanding a basis bracket in the basis.
    pub fn closure_residual(&self) -> f64 {
        let b = &self.derivation_basis;
        let mut worst = 0.0_f64;
        for i in 0..b.len() {
            for j in (i + 1)..b.len() {
                let (_, r) = self.coordinates(&b[i].bracket(&b[j]));
                worst = worst.max(r);
            }
        }
        worst
    }

    fn generator_matrix(&self) -> DMatrix<C64> {
        let cols: Vec<DVector<C64>> = self
            .derivation_basis
            .iter()
            .map(|d| flatten(&d.effective_generator().traceless_part()))
            .collect();
        DMatrix::from_columns(&cols)
    }
}

fn flatten(a: &AlgebraElement) -> DVector<C64> {
    DVector::from_iterator(a.dim() * a.dim(), a.matrix().iter().cloned())
}

type FormFn = dyn Fn(&[Derivation]) -> AlgebraElement + Send + Sync;

/// Alternating multilinear map from `degree` derivations to the algebra.
#[derive(Clone)]
pub struct KForm {
    degree: usize,
    dim: usize,
    eval: Arc<FormFn>,
}

impl fmt::Debug for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KForm")
            .field("degree", &self.degree)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl KForm {
    /// Builds a form from an evaluation rule. The rule receives exactly
    /// `degree` arguments and is trusted to be alternating and multilinear.
    pub fn new(
        degree: usize,
        dim: usize,
        eval: impl Fn(&[Derivation]) -> AlgebraElement + Send + Sync + 'static,
    ) -> Self {
        Self {
            degree,
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn zero_form(a: AlgebraElement) -> Self {
        let dim = a.dim();
        Self::new(0, dim, move |_| a.clone())
    }

    pub fn zero(degree: usize, dim: usize) -> Self {
        Self::new(degree, dim, move |_| AlgebraElement::zeros(dim))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, args: &[Derivation]) -> Result<AlgebraElement> {
        if args.len() != self.degree {
            return Err(Error::InvalidInput(format!(
                "{}-form evaluated on {} arguments",
                self.degree,
                args.len()
            )));
        }
        for a in args {
            check_dims(self.dim, a.dim())?;
        }
        Ok(self.call(args))
    }

    /// Value of a 0-form.
    pub fn value(&self) -> Result<AlgebraElement> {
        self.eval(&[])
    }

    pub(crate) fn call(&self, args: &[Derivation]) -> AlgebraElement {
        (self.eval)(args)
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        if self.degree != other.degree {
            return Err(Error::InvalidInput(format!(
                "cannot add forms of degree {} and {}",
                self.degree, other.degree
            )));
        }
        check_dims(self.dim, other.dim)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(KForm::new(self.degree, self.dim, move |x| {
            &a.call(x) + &b.call(x)
        }))
    }

    pub fn scale(&self, c: C64) -> KForm {
        let a = self.clone();
        KForm::new(self.degree, self.dim, move |x| a.call(x).scale(c))
    }

    pub fn sub(&self, other: &KForm) -> Result<KForm> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Largest entrywise distance between two forms over argument tuples.
    pub fn distance_on(&self, other: &KForm, args: &[Vec<Derivation>]) -> f64 {
        args.iter()
            .map(|x| self.call(x).max_abs_diff(&other.call(x)))
            .fold(0.0, f64::max)
    }
}

/// All permutations of `0..n` with their signs.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn go(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if rest.is_empty() {
            out.push((prefix.clone(), sign));
            return;
        }
        for k in 0..rest.len() {
            let v = rest.remove(k);
            prefix.push(v);
            // moving element k to the front costs k transpositions
            let s = if k % 2 == 0 { sign } else { -sign };
            go(prefix, rest, s, out);
            prefix.pop();
            rest.insert(k, v);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), 1.0, &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `i_X T`; a 0-form maps to the zero 0-form.
pub fn interior_product(x: &Derivation, t: &KForm) -> KForm {
    if t.degree == 0 {
        return KForm::zero(0, t.dim);
    }
    let (x, t) = (x.clone(), t.clone());
    KForm::new(t.degree - 1, t.dim, move |args| {
        let mut full = Vec::with_capacity(args.len() + 1);
        full.push(x.clone());
        full.extend_from_slice(args);
        t.call(&full)
    })
}

/// Exterior product with the `1/(p! q!)` permutation-sum normalization.
pub fn wedge(a: &KForm, b: &KForm) -> KForm {
    let (p, q) = (a.degree, b.degree);
    let dim = a.dim;
    let perms = signed_permutations(p + q);
    let norm = 1.0 / (factorial(p) * factorial(q));
    let (a, b) = (a.clone(), b.clone());
    KForm::new(p + q, dim, move |args| {
        let mut acc = AlgebraElement::zeros(dim);
        let mut left = Vec::with_capacity(p);
        let mut right = Vec::with_capacity(q);
        for (perm, sign) in &perms {
            left.clear();
            right.clear();
            left.extend(perm[..p].iter().map(|&i| args[i].clone()));
            right.extend(perm[p..].iter().map(|&i| args[i].clone()));
            let term = &a.call(&left) * &b.call(&right);
            acc = &acc + &term.scale_real(*sign);
        }
        acc.scale_real(norm)
    })
}

/// `d ω`, defined by its evaluation on `k + 1` derivations.
pub fn exterior_derivative(w: &KForm) -> KForm {
    let k = w.degree;
    let dim = w.dim;
    let w = w.clone();
    KForm::new(k + 1, dim, move |args| {
        let mut acc = AlgebraElement::zeros(dim);
        for i in 0..=k {
            let rest: Vec<Derivation> = without(args, &[i]);
            let term = args[i].apply(&w.call(&rest));
            acc = &acc + &term.scale_real(parity(i));
        }
        for i in 0..=k {
            for j in (i + 1)..=k {
                let mut rest = vec![args[i].bracket(&args[j])];
                rest.extend(without(args, &[i, j]));
                acc = &acc + &w.call(&rest).scale_real(parity(i + j));
            }
        }
        acc
    })
}

fn parity(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn without(args: &[Derivation], skip: &[usize]) -> Vec<Derivation> {
    args.iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, d)| d.clone())
        .collect()
}

/// `L_Y X = [Y, X]`.
pub fn lie_derivative_derivation(y: &Derivation, x: &Derivation) -> Derivation {
    y.bracket(x)
}

/// `(L_Y T)(X_1..X_k) = Y(T(X_1..X_k)) - Σ_i T(.., [Y, X_i], ..)`.
pub fn lie_derivative_form(y: &Derivation, t: &KForm) -> KForm {
    let (y, t) = (y.clone(), t.clone());
    let dim = t.dim;
    KForm::new(t.degree, dim, move |args| {
        let mut acc = y.apply(&t.call(args));
        let mut shifted = args.to_vec();
        for i in 0..args.len() {
            shifted[i] = y.bracket(&args[i]);
            acc = &acc - &t.call(&shifted);
            shifted[i] = args[i].clone();
        }
        acc
    })
}

type MapFn = dyn Fn(&AlgebraElement) -> AlgebraElement + Send + Sync;

type BoxedMap = Box<dyn Fn(&AlgebraElement) -> AlgebraElement + Send + Sync>;

/// Bijective map of `M_n(C)` preserving products and adjoints, given by its
/// forward and inverse actions. It may be linear or antilinear.
#[derive(Clone)]
pub struct AdsMorphism {
    dim: usize,
    forward: Arc<MapFn>,
    inverse: Option<Arc<MapFn>>,
}

impl fmt::Debug for AdsMorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdsMorphism")
            .field("dim", &self.dim)
            .field("invertible", &self.inverse.is_some())
            .finish_non_exhaustive()
    }
}

impl AdsMorphism {
    pub fn from_maps(
        dim: usize,
        forward: impl Fn(&AlgebraElement) -> AlgebraElement + Send + Sync + 'static,
        inverse: Option<BoxedMap>,
    ) -> Self {
        Self {
            dim,
            forward: Arc::new(forward),
            inverse: inverse.map(Arc::from),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_maps(dim, |a| a.clone(), Some(Box::new(|a| a.clone())))
    }

    /// `A ↦ S A S⁻¹`.
    pub fn conjugation(s: &AlgebraElement) -> Result<Self> {
        let s_inv = invert(s)?;
        let (s1, si1) = (s.clone(), s_inv.clone());
        let (s2, si2) = (s.clone(), s_inv);
        Ok(Self::from_maps(
            s.dim(),
            move |a| &(&s1 * a) * &si1,
            Some(Box::new(move |b| &(&si2 * b) * &s2)),
        ))
    }

    /// `A ↦ U⁻¹ A U`, the Heisenberg-picture action of `U`.
    pub fn unitary_conjugation(u: &AlgebraElement) -> Result<Self> {
        Self::conjugation(&invert(u)?)
    }

    /// `A ↦ conj(U⁻¹ A U)`: unitary conjugation followed by entrywise
    /// complex conjugation, which makes the map antilinear.
    pub fn antiunitary(u: &AlgebraElement) -> Result<Self> {
        let inner = Self::unitary_conjugation(u)?;
        let (f, g) = (inner.clone(), inner);
        Ok(Self::from_maps(
            u.dim(),
            move |a| f.apply(a).conj(),
            Some(Box::new(move |b| {
                g.apply_inverse(&b.conj()).expect("invertible by construction")
            })),
        ))
    }

    /// `Ψ ∘ Φ`, applying `phi` first.
    pub fn compose(psi: &AdsMorphism, phi: &AdsMorphism) -> Result<Self> {
        check_dims(psi.dim, phi.dim)?;
        let (p1, f1) = (psi.clone(), phi.clone());
        let inverse: Option<BoxedMap> =
            match (&psi.inverse, &phi.inverse) {
                (Some(pi), Some(fi)) => {
                    let (pi, fi) = (pi.clone(), fi.clone());
                    Some(Box::new(move |b| fi(&pi(b))))
                }
                _ => None,
            };
        Ok(Self::from_maps(psi.dim, move |a| p1.apply(&f1.apply(a)), inverse))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        (self.forward)(a)
    }

    pub fn apply_inverse(&self, b: &AlgebraElement) -> Result<AlgebraElement> {
        self.inverse
            .as_ref()
            .map(|inv| inv(b))
            .ok_or(Error::SingularMorphism)
    }

    /// Largest violation of multiplicativity, *-preservation and
    /// invertibility over sample elements.
    pub fn homomorphism_residual(&self, samples: &[AlgebraElement]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for a in samples {
            worst = worst.max(self.apply(&a.adjoint()).max_abs_diff(&self.apply(a).adjoint()));
            worst = worst.max(self.apply_inverse(&self.apply(a))?.max_abs_diff(a));
            for b in samples {
                let lhs = self.apply(&(a * b));
                let rhs = &self.apply(a) * &self.apply(b);
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
        }
        Ok(worst)
    }
}

fn invert(s: &AlgebraElement) -> Result<AlgebraElement> {
    let inv = s.inverse().ok_or(Error::SingularMorphism)?;
    // reject numerically singular matrices whose inverse round-trips badly
    let check = (&inv * s).max_abs_diff(&AlgebraElement::identity(s.dim()));
    if !check.is_finite() || check > 1e-8 {
        return Err(Error::SingularMorphism);
    }
    Ok(inv)
}

/// `Φ_* X`; for an inner derivation this is `D_{Φ(A)}`.
pub fn pushforward(phi: &AdsMorphism, x: &Derivation) -> Result<Derivation> {
    if !phi.is_invertible() {
        return Err(Error::SingularMorphism);
    }
    check_dims(phi.dim, x.dim())?;
    Ok(Derivation::inner(phi.apply(&x.effective_generator())))
}

/// `(Φ* T)(X_1..X_k) = Φ⁻¹[T(Φ_* X_1, .., Φ_* X_k)]`.
pub fn pullback(phi: &AdsMorphism, t: &KForm) -> Result<KForm> {
    if !phi.is_invertible() {
        return Err(Error::SingularMorphism);
    }
    check_dims(phi.dim, t.dim)?;
    let (phi, t) = (phi.clone(), t.clone());
    Ok(KForm::new(t.degree, t.dim, move |args| {
        let pushed: Vec<Derivation> = args
            .iter()
            .map(|x| Derivation::inner(phi.apply(&x.effective_generator())))
            .collect();
        phi.apply_inverse(&t.call(&pushed))
            .expect("invertibility checked")
    }))
}

/// The 1-form `X ↦ X(A) = (dA)(X)`.
pub fn differential(a: &AlgebraElement) -> KForm {
    exterior_derivative(&KForm::zero_form(a.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, seeded, Rng};

    fn rand_der(rng: &mut Rng, n: usize) -> Derivation {
        Derivation::inner(random::traceless(rng, n))
    }

    fn canonical(n: usize) -> KForm {
        KForm::new(2, n, |x| x[0].effective_generator().bracket(&x[1].effective_generator()))
    }

    #[test]
    fn permutation_signs() {
        let perms = signed_permutations(3);
        assert_eq!(perms.len(), 6);
        let sum: f64 = perms.iter().map(|p| p.1).sum();
        assert_eq!(sum, 0.0);
        let find = |v: &[usize]| perms.iter().find(|p| p.0 == v).unwrap().1;
        assert_eq!(find(&[0, 1, 2]), 1.0);
        assert_eq!(find(&[1, 0, 2]), -1.0);
        assert_eq!(find(&[1, 2, 0]), 1.0);
        assert_eq!(find(&[2, 1, 0]), -1.0);
    }

    #[test]
    fn interior_product_examples() {
        let mut rng = seeded(1);
        let x = rand_der(&mut rng, 3);
        let a = KForm::zero_form(random::element(&mut rng, 3));
        let ia = interior_product(&x, &a);
        assert_eq!(ia.degree(), 0);
        assert_eq!(ia.value().unwrap().max_abs(), 0.0);

        let w = wedge(&differential(&random::element(&mut rng, 3)), &differential(&random::element(&mut rng, 3)));
        let iix = interior_product(&x, &interior_product(&x, &w));
        assert!(iix.value().unwrap().max_abs() < 1e-12);

        let av = random::element(&mut rng, 3);
        let bv = random::element(&mut rng, 3);
        let got = interior_product(&Derivation::inner(av.clone()), &canonical(3))
            .eval(&[Derivation::inner(bv.clone())])
            .unwrap();
        assert!(got.max_abs_diff(&av.bracket(&bv)) < 1e-14);
    }

    #[test]
    fn wedge_examples() {
        let mut rng = seeded(2);
        let a = random::element(&mut rng, 3);
        let b = random::element(&mut rng, 3);
        let ab = wedge(&KForm::zero_form(a.clone()), &KForm::zero_form(b.clone()));
        assert_eq!(ab.degree(), 0);
        assert!(ab.value().unwrap().max_abs_diff(&(&a * &b)) < 1e-15);

        let c = random::element(&mut rng, 3);
        let d = random::element(&mut rng, 3);
        let w = wedge(&differential(&a), &differential(&b));
        let got = w
            .eval(&[Derivation::inner(c.clone()), Derivation::inner(d.clone())])
            .unwrap();
        let expected = &(&c.bracket(&a) * &d.bracket(&b)) - &(&d.bracket(&a) * &c.bracket(&b));
        assert!(got.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn wedge_normalization_matches_half_bracket_identity() {
        // With 1/(p!q!), (α∧β)(X,Y) = α(X)β(Y) − α(Y)β(X) for 1-forms, so
        // dA∧dB on (D_C, D_D) carries no stray factor of 1/2.
        let mut rng = seeded(3);
        let a = random::element(&mut rng, 2);
        let b = random::element(&mut rng, 2);
        let x = rand_der(&mut rng, 2);
        let y = rand_der(&mut rng, 2);
        let (da, db) = (differential(&a), differential(&b));
        let w = wedge(&da, &db).eval(&[x.clone(), y.clone()]).unwrap();
        let direct = &(&x.apply(&a) * &y.apply(&b)) - &(&y.apply(&a) * &x.apply(&b));
        assert!(w.max_abs_diff(&direct) < 1e-13);
    }

    #[test]
    fn exterior_derivative_examples() {
        let mut rng = seeded(4);
        let di = differential(&AlgebraElement::identity(3));
        assert_eq!(di.degree(), 1);
        assert!(di.eval(&[rand_der(&mut rng, 3)]).unwrap().max_abs() < 1e-15);

        let a = random::element(&mut rng, 3);
        let dda = exterior_derivative(&differential(&a));
        let args = [rand_der(&mut rng, 3), rand_der(&mut rng, 3)];
        assert!(dda.eval(&args).unwrap().max_abs() < 1e-12);

        let av = random::element(&mut rng, 3);
        let bv = random::element(&mut rng, 3);
        let cv = random::element(&mut rng, 3);
        let (da, db) = (Derivation::inner(av.clone()), Derivation::inner(bv.clone()));
        let dw = exterior_derivative(&differential(&cv)).eval(&[da.clone(), db.clone()]).unwrap();
        let expected = &(&da.apply(&bv.bracket(&cv)) - &db.apply(&av.bracket(&cv)))
            - &av.bracket(&bv).bracket(&cv);
        assert!(dw.max_abs_diff(&expected) < 1e-12);
        // and the expansion is itself zero by the Jacobi identity
        assert!(expected.max_abs() < 1e-12);
    }

    #[test]
    fn lie_derivative_examples() {
        let mut rng = seeded(5);
        let y = rand_der(&mut rng, 2);
        assert!(lie_derivative_derivation(&y, &y).effective_generator().max_abs() < 1e-15);
        let got = lie_derivative_derivation(
            &Derivation::inner(AlgebraElement::pauli_x()),
            &Derivation::inner(AlgebraElement::pauli_y()),
        );
        let want = AlgebraElement::pauli_z().scale(C64::new(0.0, 2.0));
        assert!(got.effective_generator().max_abs_diff(&want) < 1e-15);

        let l_i = lie_derivative_form(&y, &KForm::zero_form(AlgebraElement::identity(2)));
        assert!(l_i.value().unwrap().max_abs() < 1e-15);

        let omega = canonical(3);
        let z = rand_der(&mut rng, 3);
        let lw = lie_derivative_form(&z, &omega);
        let args = [rand_der(&mut rng, 3), rand_der(&mut rng, 3)];
        assert!(lw.eval(&args).unwrap().max_abs() < 1e-12);

        let a = random::element(&mut rng, 3);
        let lhs = lie_derivative_form(&z, &differential(&a));
        let rhs = exterior_derivative(&lie_derivative_form(&z, &KForm::zero_form(a)));
        let x = [rand_der(&mut rng, 3)];
        assert!(lhs.eval(&x).unwrap().max_abs_diff(&rhs.eval(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn pushforward_and_pullback_examples() {
        let mut rng = seeded(6);
        let x = rand_der(&mut rng, 3);
        let id = AdsMorphism::identity(3);
        let px = pushforward(&id, &x).unwrap();
        assert!(px.effective_generator().max_abs_diff(&x.effective_generator()) < 1e-15);

        let u = random::unitary(&mut rng, 3);
        let phi = AdsMorphism::conjugation(&u).unwrap();
        let a = random::element(&mut rng, 3);
        let got = pushforward(&phi, &Derivation::inner(a.clone())).unwrap();
        let want = &(&u * &a) * &u.adjoint();
        assert!(got.effective_generator().max_abs_diff(&want) < 1e-12);

        let singular = AlgebraElement::real_diagonal(&[1.0, 0.0, 1.0]);
        assert_eq!(AdsMorphism::conjugation(&singular).unwrap_err(), Error::SingularMorphism);
        let proj = AdsMorphism::from_maps(3, |a| a.clone(), None);
        assert_eq!(pushforward(&proj, &x).unwrap_err(), Error::SingularMorphism);
        assert_eq!(pullback(&proj, &canonical(3)).unwrap_err(), Error::SingularMorphism);

        let t = canonical(3);
        let args = vec![vec![rand_der(&mut rng, 3), rand_der(&mut rng, 3)]];
        assert!(pullback(&id, &t).unwrap().distance_on(&t, &args) < 1e-15);
    }

    #[test]
    fn antiunitary_morphism_is_a_star_automorphism() {
        let mut rng = seeded(7);
        let u = random::unitary(&mut rng, 3);
        let phi = AdsMorphism::antiunitary(&u).unwrap();
        let samples: Vec<_> = (0..4).map(|_| random::element(&mut rng, 3)).collect();
        assert!(phi.homomorphism_residual(&samples).unwrap() < 1e-12);
        let a = &samples[0];
        let lhs = phi.apply(&a.scale(crate::I));
        assert!(lhs.max_abs_diff(&phi.apply(a).scale(-crate::I)) < 1e-12);
    }

    #[test]
    fn ads_closure() {
        let ads = Ads::full_matrix(3);
        assert_eq!(ads.derivation_basis().len(), 8);
        assert!(ads.closure_residual() < 1e-12);
        assert!(ads.has_trivial_center().unwrap());

        let pauli = vec![
            Derivation::inner(AlgebraElement::pauli_x()),
            Derivation::inner(AlgebraElement::pauli_y()),
            Derivation::inner(AlgebraElement::pauli_z()),
        ];
        assert!(Ads::new(2, pauli.clone()).is_ok());
        let open = vec![pauli[0].clone(), pauli[1].clone()];
        assert!(matches!(Ads::new(2, open), Err(Error::InvalidInput(_))));
        let abelian = Ads::new(2, vec![pauli[2].clone()]).unwrap();
        assert!(!abelian.has_trivial_center().unwrap());
    }

    #[test]
    fn eval_checks_arity() {
        let w = canonical(2);
        assert!(w.eval(&[Derivation::zero(2)]).is_err());
        assert!(w.eval(&[Derivation::zero(2), Derivation::zero(3)]).is_err());
    }
}
