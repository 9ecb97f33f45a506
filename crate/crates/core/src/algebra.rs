//! Finite-dimensional matrix *-algebras, inner derivations and quantum states.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64, I};

/// Structural identities hold to this absolute tolerance.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a positive semidefinite matrix.
pub const PSD_TOL: f64 = -1e-10;

/// Element of the matrix algebra `M_n(C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    m: DMatrix<C64>,
}

impl AlgebraElement {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionError(m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        Ok(Self { m })
    }

    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::wrap(DMatrix::from_fn(n, n, f))
    }

    /// Builds an element from row-major entries.
    pub fn from_rows(n: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionError(entries.len(), n * n));
        }
        Ok(Self::wrap(DMatrix::from_row_slice(n, n, entries)))
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self::wrap(DMatrix::zeros(n, n))
    }

    pub fn scalar(n: usize, c: C64) -> Self {
        Self::identity(n).scale(c)
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self::wrap(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn real_diagonal(d: &[f64]) -> Self {
        let c: Vec<C64> = d.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(&c)
    }

    /// Matrix unit `E_ij`.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = C64::new(1.0, 0.0);
        Self::wrap(m)
    }

    pub fn pauli_x() -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Self::wrap(DMatrix::from_row_slice(2, 2, &[z, o, o, z]))
    }

    pub fn pauli_y() -> Self {
        let z = C64::new(0.0, 0.0);
        Self::wrap(DMatrix::from_row_slice(2, 2, &[z, -I, I, z]))
    }

    pub fn pauli_z() -> Self {
        Self::real_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Conjugate transpose, the *-operation of the algebra.
    pub fn adjoint(&self) -> Self {
        Self::wrap(self.m.adjoint())
    }

    /// Entrywise complex conjugation (antilinear, multiplicative).
    pub fn conj(&self) -> Self {
        Self::wrap(self.m.map(|z| z.conj()))
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::wrap(&self.m * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self::wrap(self.m.map(|z| z * c))
    }

    /// `AB - BA`. Panics if the dimensions differ; see [`commutator`] for the checked form.
    pub fn bracket(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "commutator of mismatched dimensions");
        Self::wrap(&self.m * &other.m - &other.m * &self.m)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.m
            .iter()
            .zip(other.m.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// The part of `self` with the scalar component removed.
    pub fn traceless_part(&self) -> Self {
        let n = self.dim();
        let t = self.trace() / n as f64;
        self - &Self::scalar(n, t)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.m * v
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::wrap(self.m.kronecker(&other.m))
    }

    pub fn inverse(&self) -> Option<Self> {
        self.m.clone().try_inverse().map(Self::wrap)
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement::wrap(&self.m + &rhs.m)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement::wrap(&self.m - &rhs.m)
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement::wrap(&self.m * &rhs.m)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement::wrap(-&self.m)
    }
}

impl Add for AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: AlgebraElement) -> AlgebraElement {
        AlgebraElement::wrap(self.m + rhs.m)
    }
}

impl Sub for AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: AlgebraElement) -> AlgebraElement {
        AlgebraElement::wrap(self.m - rhs.m)
    }
}

impl Mul for AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: AlgebraElement) -> AlgebraElement {
        AlgebraElement::wrap(self.m * rhs.m)
    }
}

/// Conjugate transpose.
pub fn adjoint(a: &AlgebraElement) -> AlgebraElement {
    a.adjoint()
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.bracket(b))
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionError(a, b))
    }
}

/// Inner derivation `c·D_A`, acting as `B ↦ c[A, B]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    generator: AlgebraElement,
    scale: C64,
}

impl Derivation {
    pub fn inner(generator: AlgebraElement) -> Self {
        Self {
            generator,
            scale: C64::new(1.0, 0.0),
        }
    }

    pub fn scaled(generator: AlgebraElement, scale: C64) -> Self {
        Self { generator, scale }
    }

    pub fn zero(n: usize) -> Self {
        Self::inner(AlgebraElement::zeros(n))
    }

    pub fn generator(&self) -> &AlgebraElement {
        &self.generator
    }

    pub fn scale(&self) -> C64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// `scale · A`, so that the derivation is `D_{effective_generator}`.
    pub fn effective_generator(&self) -> AlgebraElement {
        self.generator.scale(self.scale)
    }

    /// Panics on dimension mismatch; see [`Derivation::try_apply`].
    pub fn apply(&self, b: &AlgebraElement) -> AlgebraElement {
        self.generator.bracket(b).scale(self.scale)
    }

    pub fn try_apply(&self, b: &AlgebraElement) -> Result<AlgebraElement> {
        check_dims(self.dim(), b.dim())?;
        Ok(self.apply(b))
    }

    /// `[D_A, D_B] = D_{[A,B]}` with the scales multiplied through.
    pub fn bracket(&self, other: &Derivation) -> Derivation {
        Derivation::scaled(
            self.generator.bracket(&other.generator),
            self.scale * other.scale,
        )
    }

    /// Linear combination `Σ c_i X_i` of inner derivations.
    pub fn combination(terms: &[(C64, &Derivation)]) -> Result<Derivation> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidInput("empty linear combination".into()))?;
        let n = first.1.dim();
        let mut acc = AlgebraElement::zeros(n);
        for (c, d) in terms {
            check_dims(n, d.dim())?;
            acc = &acc + &d.effective_generator().scale(*c);
        }
        Ok(Derivation::inner(acc))
    }

    pub fn scaled_by(&self, c: C64) -> Derivation {
        Derivation::scaled(self.generator.clone(), self.scale * c)
    }

    /// Largest action difference over a set of probe elements.
    pub fn action_distance(&self, other: &Derivation, probes: &[AlgebraElement]) -> f64 {
        probes
            .iter()
            .map(|p| self.apply(p).max_abs_diff(&other.apply(p)))
            .fold(0.0, f64::max)
    }
}

/// Checked form of [`Derivation::bracket`].
pub fn derivation_bracket(a: &Derivation, b: &Derivation) -> Result<Derivation> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.bracket(b))
}

/// Whether the only matrices commuting with every element of `basis` are
/// multiples of the identity. Solved as a null-space computation of the
/// stacked commutation constraints.
pub fn has_trivial_center(basis: &[AlgebraElement]) -> Result<bool> {
    Ok(center_dimension(basis)? == 1)
}

/// Dimension of the commutant of `basis` inside `M_n(C)`.
pub fn center_dimension(basis: &[AlgebraElement]) -> Result<usize> {
    let first = basis
        .first()
        .ok_or_else(|| Error::InvalidInput("empty basis".into()))?;
    let n = first.dim();
    let eye = DMatrix::<C64>::identity(n, n);
    let mut gram = DMatrix::<C64>::zeros(n * n, n * n);
    for b in basis {
        check_dims(n, b.dim())?;
        // vec([M, B]) = (Bᵀ ⊗ I − I ⊗ B) vec(M) for column-major vec
        let c = b.matrix().transpose().kronecker(&eye) - eye.kronecker(b.matrix());
        gram += c.adjoint() * &c;
    }
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, &l| a.max(l.abs()));
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&l| l.abs() <= 1e-10 * scale)
        .count())
}

/// Unit vector in `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Normalizes the given amplitudes.
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if amps.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidInput("state vector has zero norm".into()));
        }
        Ok(Self {
            amps: amps.unscale(norm),
        })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amps))
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = C64::new(1.0, 0.0);
        Self { amps: v }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn transformed(&self, u: &AlgebraElement) -> Result<StateVector> {
        check_dims(self.dim(), u.dim())?;
        StateVector::new(u.apply(&self.amps))
    }

    /// `⟨ψ, A ψ⟩`.
    pub fn expectation(&self, a: &AlgebraElement) -> Result<C64> {
        check_dims(self.dim(), a.dim())?;
        Ok(self.amps.dotc(&a.apply(&self.amps)))
    }

    pub(crate) fn from_raw(amps: DVector<C64>) -> Self {
        Self { amps }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: AlgebraElement,
}

impl DensityMatrix {
    pub fn new(rho: AlgebraElement) -> Result<Self> {
        let herm = rho.max_abs_diff(&rho.adjoint());
        if herm > STRUCTURAL_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > STRUCTURAL_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min_eig = SymmetricEigen::new(rho.matrix().clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { rho })
    }

    pub fn pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self {
            rho: AlgebraElement::wrap(v * v.adjoint()),
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            rho: AlgebraElement::identity(n).scale_real(1.0 / n as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn as_element(&self) -> &AlgebraElement {
        &self.rho
    }
}

/// Convex combination of states.
pub fn mix(states: &[DensityMatrix], weights: &[f64]) -> Result<DensityMatrix> {
    if states.is_empty() {
        return Err(Error::InvalidWeights("no states to mix".into()));
    }
    if states.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} states but {} weights",
            states.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidWeights(format!("negative weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > STRUCTURAL_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    let n = states[0].dim();
    let mut acc = AlgebraElement::zeros(n);
    for (s, &w) in states.iter().zip(weights) {
        check_dims(n, s.dim())?;
        acc = &acc + &s.rho.scale_real(w);
    }
    DensityMatrix::new(acc)
}

/// `tr(ρ A)`.
pub fn expectation(state: &DensityMatrix, a: &AlgebraElement) -> Result<C64> {
    check_dims(state.dim(), a.dim())?;
    Ok((state.rho.matrix() * a.matrix()).trace())
}

/// `|⟨φ, ψ⟩|²`.
pub fn transition_probability(phi: &StateVector, psi: &StateVector) -> Result<f64> {
    Ok(phi.inner(psi)?.norm_sqr().min(1.0))
}

/// Eigendecomposition of a self-adjoint element, used for exponentials.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianSpectrum {
    pub fn new(h: &AlgebraElement) -> Result<Self> {
        let dev = h.max_abs_diff(&h.adjoint());
        if dev > STRUCTURAL_TOL * h.max_abs().max(1.0) {
            return Err(Error::InvalidHamiltonian(format!(
                "not self-adjoint (deviation {dev:.3e})"
            )));
        }
        let eig = SymmetricEigen::new(h.matrix().clone());
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().cloned().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// `f(H)` for a scalar function applied to the spectrum.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> AlgebraElement {
        let d: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut scaled = self.vectors.clone();
        for (j, dj) in d.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= *dj;
        }
        AlgebraElement::wrap(scaled * self.vectors.adjoint())
    }

    /// `exp(-i θ H)`.
    pub fn unitary(&self, theta: f64) -> AlgebraElement {
        self.map(|l| (-I * l * theta).exp())
    }

    pub fn eigenvector(&self, k: usize) -> StateVector {
        StateVector::from_raw(self.vectors.column(k).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, seeded};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn adjoint_examples() {
        let id = AlgebraElement::identity(3);
        assert_eq!(adjoint(&id), id);
        let ii = AlgebraElement::scalar(2, I);
        assert!(adjoint(&ii).max_abs_diff(&AlgebraElement::scalar(2, -I)) == 0.0);
        // (σx σy)* = σy σx
        let sx = AlgebraElement::pauli_x();
        let sy = AlgebraElement::pauli_y();
        let lhs = adjoint(&(&sx * &sy));
        let rhs = &sy * &sx;
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
        // oracle: σx σy = i σz, so its adjoint is -i σz
        let expected = AlgebraElement::from_rows(2, &[c(0., -1.), c(0., 0.), c(0., 0.), c(0., 1.)]).unwrap();
        assert!(lhs.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn adjoint_reverses_products() {
        let mut rng = seeded(11);
        for _ in 0..20 {
            let a = random::element(&mut rng, 4);
            let b = random::element(&mut rng, 4);
            let lhs = adjoint(&(&a * &b));
            let rhs = &adjoint(&b) * &adjoint(&a);
            assert!(lhs.max_abs_diff(&rhs) < STRUCTURAL_TOL);
            assert_eq!(adjoint(&adjoint(&a)), a);
        }
    }

    #[test]
    fn commutator_examples() {
        let mut rng = seeded(1);
        let a = random::element(&mut rng, 3);
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
        let sz = AlgebraElement::pauli_z();
        let got = commutator(&AlgebraElement::pauli_x(), &AlgebraElement::pauli_y()).unwrap();
        assert!(got.max_abs_diff(&sz.scale(c(0.0, 2.0))) < 1e-15);
        let b = random::element(&mut rng, 3);
        assert!(commutator(&AlgebraElement::identity(3), &b).unwrap().max_abs() < 1e-15);
        assert_eq!(
            commutator(&a, &AlgebraElement::identity(2)),
            Err(Error::DimensionError(3, 2))
        );
    }

    #[test]
    fn derivation_bracket_examples() {
        let mut rng = seeded(2);
        let da = Derivation::inner(random::element(&mut rng, 2));
        assert!(derivation_bracket(&da, &da).unwrap().effective_generator().max_abs() < 1e-15);

        let dx = Derivation::inner(AlgebraElement::pauli_x());
        let dy = Derivation::inner(AlgebraElement::pauli_y());
        let lhs = derivation_bracket(&dx, &dy).unwrap();
        let rhs = Derivation::inner(AlgebraElement::pauli_z().scale(c(0.0, 2.0)));
        for _ in 0..20 {
            let probe = random::element(&mut rng, 2);
            // apply both sides of [D_x, D_y] = D_{2iσz}
            let commuted = &dx.apply(&dy.apply(&probe)) - &dy.apply(&dx.apply(&probe));
            assert!(commuted.max_abs_diff(&rhs.apply(&probe)) < 1e-13);
            assert!(lhs.apply(&probe).max_abs_diff(&rhs.apply(&probe)) < 1e-13);
        }

        let di = Derivation::inner(AlgebraElement::identity(2));
        let b = Derivation::inner(random::element(&mut rng, 2));
        assert!(derivation_bracket(&di, &b).unwrap().effective_generator().max_abs() < 1e-15);
        assert!(derivation_bracket(&di, &Derivation::zero(3)).is_err());
    }

    #[test]
    fn center_of_pauli_and_matrix_units() {
        let pauli = vec![
            AlgebraElement::pauli_x(),
            AlgebraElement::pauli_y(),
            AlgebraElement::pauli_z(),
            AlgebraElement::identity(2),
        ];
        assert!(has_trivial_center(&pauli).unwrap());
        assert!(!has_trivial_center(&[AlgebraElement::identity(2)]).unwrap());
        let units: Vec<_> = (0..3)
            .flat_map(|i| (0..3).map(move |j| AlgebraElement::matrix_unit(3, i, j)))
            .collect();
        assert_eq!(center_dimension(&units).unwrap(), 1);
        // diagonal matrices form a commutative algebra with a 2-dim commutant in M_2
        let diag = vec![AlgebraElement::pauli_z(), AlgebraElement::identity(2)];
        assert_eq!(center_dimension(&diag).unwrap(), 2);
        assert!(matches!(has_trivial_center(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mix_examples() {
        let mut rng = seeded(3);
        let rho = random::density_matrix(&mut rng, 3);
        let m = mix(std::slice::from_ref(&rho), &[1.0]).unwrap();
        assert!(m.as_element().max_abs_diff(rho.as_element()) < 1e-15);
        let m = mix(&[rho.clone(), rho.clone()], &[0.3, 0.7]).unwrap();
        assert!(m.as_element().max_abs_diff(rho.as_element()) < 1e-15);

        let up = DensityMatrix::pure(&StateVector::basis(2, 0));
        let down = DensityMatrix::pure(&StateVector::basis(2, 1));
        let half = mix(&[up, down], &[0.5, 0.5]).unwrap();
        assert!(half
            .as_element()
            .max_abs_diff(DensityMatrix::maximally_mixed(2).as_element())
            < 1e-15);

        assert!(matches!(mix(std::slice::from_ref(&rho), &[0.9]), Err(Error::InvalidWeights(_))));
        assert!(matches!(
            mix(&[rho.clone(), rho.clone()], &[1.5, -0.5]),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn expectation_examples() {
        let mixed = DensityMatrix::maximally_mixed(4);
        let e = expectation(&mixed, &AlgebraElement::identity(4)).unwrap();
        assert!((e - c(1.0, 0.0)).norm() < 1e-15);
        let up = DensityMatrix::pure(&StateVector::basis(2, 0));
        let e = expectation(&up, &AlgebraElement::pauli_z()).unwrap();
        assert!((e - c(1.0, 0.0)).norm() < 1e-15);

        let mut rng = seeded(4);
        let r1 = random::density_matrix(&mut rng, 3);
        let r2 = random::density_matrix(&mut rng, 3);
        let a = random::hermitian(&mut rng, 3);
        let m = mix(&[r1.clone(), r2.clone()], &[0.25, 0.75]).unwrap();
        let lhs = expectation(&m, &a).unwrap();
        let rhs = expectation(&r1, &a).unwrap() * 0.25 + expectation(&r2, &a).unwrap() * 0.75;
        assert!((lhs - rhs).norm() < 1e-12);
        assert!(lhs.im.abs() < 1e-12);
        assert!(expectation(&m, &AlgebraElement::identity(2)).is_err());
    }

    #[test]
    fn transition_probability_examples() {
        let mut rng = seeded(5);
        let psi = random::state_vector(&mut rng, 4);
        assert!((transition_probability(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
        let e1 = StateVector::basis(3, 0);
        let e2 = StateVector::basis(3, 1);
        assert_eq!(transition_probability(&e1, &e2).unwrap(), 0.0);
        let plus = StateVector::from_slice(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let p = transition_probability(&plus, &StateVector::basis(2, 0)).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(transition_probability(&e1, &plus).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = AlgebraElement::identity(2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let non_psd = AlgebraElement::real_diagonal(&[1.5, -0.5]);
        assert!(DensityMatrix::new(non_psd).is_err());
        let non_herm = AlgebraElement::from_rows(2, &[c(0.5, 0.), c(0.1, 0.), c(0.0, 0.), c(0.5, 0.)]).unwrap();
        assert!(DensityMatrix::new(non_herm).is_err());
    }

    #[test]
    fn spectrum_exponential_is_unitary() {
        let mut rng = seeded(6);
        let h = random::hermitian(&mut rng, 5);
        let spec = HermitianSpectrum::new(&h).unwrap();
        let u = spec.unitary(0.7);
        let uu = &u.adjoint() * &u;
        assert!(uu.max_abs_diff(&AlgebraElement::identity(5)) < 1e-12);
        assert!(HermitianSpectrum::new(&random::element(&mut rng, 3)).is_err());
    }
}
