//! Symplectic structures on algebraic differential systems.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::algebra::{check_dims, AlgebraElement, Derivation};
use crate::calculus::{AdsMorphism, Ads, KForm};
use crate::{Error, Result, C64, I};

/// Agreement required between the analytic and solved Hamiltonian derivations.
pub const SOLVE_TOL: f64 = 1e-10;
/// Tolerance for the canonical-transformation sweep.
pub const CANONICAL_TOL: f64 = 1e-10;

/// `ω_c(D_A, D_B) = [A, B]`.
pub fn canonical_two_form(ads: &Ads) -> Result<KForm> {
    if !ads.has_trivial_center()? {
        return Err(Error::DegenerateStructure(
            "algebra has a nontrivial center".into(),
        ));
    }
    Ok(canonical_unchecked(ads.algebra_dim()))
}

fn canonical_unchecked(n: usize) -> KForm {
    KForm::new(2, n, |x| {
        x[0].effective_generator().bracket(&x[1].effective_generator())
    })
}

/// A closed nondegenerate 2-form on an ADS.
#[derive(Clone, Debug)]
pub struct Gass {
    ads: Ads,
    omega: KForm,
    beta: C64,
    canonical: bool,
    solver: Arc<OnceLock<CoefficientSolver>>,
}

/// Least-squares inverse of the map `Y ↦ i_Y ω` on basis coordinates.
#[derive(Debug)]
struct CoefficientSolver {
    tensor: DMatrix<C64>,
    pseudo_inverse: DMatrix<C64>,
    rank: usize,
}

impl CoefficientSolver {
    fn new(ads: &Ads, omega: &KForm) -> Result<Self> {
        let basis = ads.derivation_basis();
        let m = basis.len();
        let n2 = ads.algebra_dim().pow(2);
        let mut tensor = DMatrix::<C64>::zeros(m * n2, m);
        for (i, xi) in basis.iter().enumerate() {
            for (j, xj) in basis.iter().enumerate() {
                let v = omega.eval(&[xi.clone(), xj.clone()])?;
                for (k, z) in v.matrix().iter().enumerate() {
                    tensor[(j * n2 + k, i)] = *z;
                }
            }
        }
        let svd = tensor.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cutoff = 1e-10 * smax.max(f64::MIN_POSITIVE);
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        let pseudo_inverse = svd
            .pseudo_inverse(cutoff)
            .map_err(|e| Error::NumericsError(e.to_string()))?;
        Ok(Self {
            tensor,
            pseudo_inverse,
            rank,
        })
    }
}

impl Gass {
    /// `β ω_c` on `ads`.
    pub fn canonical(ads: Ads, beta: C64) -> Result<Self> {
        if beta.norm() == 0.0 || !beta.is_finite() {
            return Err(Error::DegenerateStructure(format!("symplectic scale {beta}")));
        }
        let omega = canonical_two_form(&ads)?.scale(beta);
        if ads.is_full_matrix() {
            // ω_c(D_A, ·) = 0 forces A central, so the form is nondegenerate
            // on all inner derivations; the solver is built on first use.
            return Ok(Self {
                ads,
                omega,
                beta,
                canonical: true,
                solver: Arc::new(OnceLock::new()),
            });
        }
        let mut g = Self::build(ads, omega, beta)?;
        g.canonical = true;
        Ok(g)
    }

    /// General 2-form; nondegeneracy is certified by a rank check on the
    /// coefficient tensor. Closedness is the caller's responsibility and can
    /// be probed with [`Gass::closure_defect`].
    pub fn new(ads: Ads, omega: KForm, beta: C64) -> Result<Self> {
        if omega.degree() != 2 {
            return Err(Error::InvalidInput(format!(
                "symplectic form must have degree 2, got {}",
                omega.degree()
            )));
        }
        check_dims(ads.algebra_dim(), omega.dim())?;
        Self::build(ads, omega, beta)
    }

    fn build(ads: Ads, omega: KForm, beta: C64) -> Result<Self> {
        let solver = CoefficientSolver::new(&ads, &omega)?;
        let m = ads.derivation_basis().len();
        if solver.rank < m {
            return Err(Error::DegenerateStructure(format!(
                "coefficient tensor has rank {} < {m}",
                solver.rank
            )));
        }
        Ok(Self {
            ads,
            omega,
            beta,
            canonical: false,
            solver: Arc::new(OnceLock::from(solver)),
        })
    }

    fn solver(&self) -> Result<&CoefficientSolver> {
        if let Some(s) = self.solver.get() {
            return Ok(s);
        }
        let built = CoefficientSolver::new(&self.ads, &self.omega)?;
        Ok(self.solver.get_or_init(|| built))
    }

    pub fn ads(&self) -> &Ads {
        &self.ads
    }

    pub fn omega(&self) -> &KForm {
        &self.omega
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.ads.algebra_dim()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Largest value of `dω` on the given derivation triples.
    pub fn closure_defect(&self, triples: &[[Derivation; 3]]) -> f64 {
        let dw = crate::calculus::exterior_derivative(&self.omega);
        triples
            .iter()
            .map(|t| dw.call(t).max_abs())
            .fold(0.0, f64::max)
    }

    /// Solves `i_Y ω = -dA` for `Y` in the span of the derivation basis.
    pub fn hamiltonian_derivation_solve(&self, a: &AlgebraElement) -> Result<Derivation> {
        check_dims(self.dim(), a.dim())?;
        let basis = self.ads.derivation_basis();
        let n2 = self.dim().pow(2);
        let mut rhs = DVector::<C64>::zeros(basis.len() * n2);
        for (j, xj) in basis.iter().enumerate() {
            let v = xj.apply(a);
            for (k, z) in v.matrix().iter().enumerate() {
                rhs[j * n2 + k] = -*z;
            }
        }
        let solver = self.solver()?;
        let coeffs = &solver.pseudo_inverse * &rhs;
        let residual = (&solver.tensor * &coeffs - &rhs).camax();
        let scale = rhs.camax().max(1.0);
        if residual > SOLVE_TOL * scale {
            return Err(Error::DegenerateStructure(format!(
                "no Hamiltonian derivation (residual {residual:.3e})"
            )));
        }
        let terms: Vec<(C64, &Derivation)> = coeffs.iter().cloned().zip(basis.iter()).collect();
        Derivation::combination(&terms)
    }

    /// `Y_A`. Canonical structures use `β⁻¹ D_A` directly; others solve.
    /// The generator is returned traceless, since scalars act as zero.
    pub fn hamiltonian_derivation(&self, a: &AlgebraElement) -> Result<Derivation> {
        check_dims(self.dim(), a.dim())?;
        if self.canonical {
            Ok(Derivation::scaled(a.traceless_part(), self.beta.inv()))
        } else {
            self.hamiltonian_derivation_solve(a)
        }
    }

    /// `{A, B} = Y_A(B)`.
    pub fn poisson_bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        check_dims(self.dim(), b.dim())?;
        Ok(self.hamiltonian_derivation(a)?.apply(b))
    }
}

/// Free-function form of [`Gass::hamiltonian_derivation`].
pub fn hamiltonian_derivation(g: &Gass, a: &AlgebraElement) -> Result<Derivation> {
    g.hamiltonian_derivation(a)
}

/// Free-function form of [`Gass::poisson_bracket`].
pub fn poisson_bracket(g: &Gass, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    g.poisson_bracket(a, b)
}

/// Canonical structure with `β = -iħ`.
#[derive(Clone, Debug)]
pub struct QuantumSymplectic {
    gass: Gass,
    hbar: f64,
}

impl QuantumSymplectic {
    pub fn new(ads: Ads, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidInput(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self {
            gass: Gass::canonical(ads, -I * hbar)?,
            hbar,
        })
    }

    /// Quantum structure on all of `M_n(C)`.
    pub fn full_matrix(n: usize, hbar: f64) -> Result<Self> {
        Self::new(Ads::full_matrix(n), hbar)
    }

    pub fn gass(&self) -> &Gass {
        &self.gass
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn beta(&self) -> C64 {
        self.gass.beta
    }

    pub fn dim(&self) -> usize {
        self.gass.dim()
    }

    /// `{A, B}_Q = (-iħ)⁻¹ [A, B]`.
    pub fn poisson_bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        self.gass.poisson_bracket(a, b)
    }
}

/// Whether `Φ(β[A,B]) = β[Φ(A), Φ(B)]` across all pairs of algebra generators.
pub fn is_canonical_transformation(q: &QuantumSymplectic, phi: &AdsMorphism) -> bool {
    if phi.dim() != q.dim() || !phi.is_invertible() {
        return false;
    }
    let beta = q.beta();
    let gens = q.gass.ads.algebra_generators();
    let images: Vec<AlgebraElement> = gens.iter().map(|a| phi.apply(a)).collect();
    for (a, fa) in gens.iter().zip(&images) {
        for (b, fb) in gens.iter().zip(&images) {
            let lhs = phi.apply(&a.bracket(b).scale(beta));
            let rhs = fa.bracket(fb).scale(beta);
            let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
            if lhs.max_abs_diff(&rhs) > CANONICAL_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// `δA = ε{T, A}_Q` with `T = -ħG`, equal to `-iε[G, A]`.
pub fn infinitesimal_canonical_generator(
    q: &QuantumSymplectic,
    g: &AlgebraElement,
    a: &AlgebraElement,
    eps: f64,
) -> Result<AlgebraElement> {
    check_dims(q.dim(), g.dim())?;
    let dev = g.max_abs_diff(&g.adjoint());
    if dev > crate::algebra::STRUCTURAL_TOL * g.max_abs().max(1.0) {
        return Err(Error::InvalidGenerator(dev));
    }
    let t = g.scale_real(-q.hbar);
    Ok(q.poisson_bracket(&t, a)?.scale_real(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::HermitianSpectrum;
    use crate::random::{self, seeded};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn canonical_form_examples() {
        let ads = Ads::full_matrix(2);
        let w = canonical_two_form(&ads).unwrap();
        let mut rng = seeded(1);
        let a = Derivation::inner(random::element(&mut rng, 2));
        assert!(w.eval(&[a.clone(), a]).unwrap().max_abs() < 1e-15);
        let got = w
            .eval(&[
                Derivation::inner(AlgebraElement::pauli_x()),
                Derivation::inner(AlgebraElement::pauli_y()),
            ])
            .unwrap();
        assert!(got.max_abs_diff(&AlgebraElement::pauli_z().scale(c(0., 2.))) < 1e-15);

        let abelian = Ads::new(2, vec![Derivation::inner(AlgebraElement::pauli_z())]).unwrap();
        assert!(matches!(canonical_two_form(&abelian), Err(Error::DegenerateStructure(_))));
    }

    #[test]
    fn hamiltonian_derivation_examples() {
        let g = Gass::canonical(Ads::full_matrix(2), c(1., 0.)).unwrap();
        let yi = g.hamiltonian_derivation(&AlgebraElement::identity(2)).unwrap();
        assert!(yi.effective_generator().max_abs() < 1e-15);
        let ys = g.hamiltonian_derivation_solve(&AlgebraElement::identity(2)).unwrap();
        assert!(ys.effective_generator().max_abs() < 1e-12);

        let y = g.hamiltonian_derivation(&AlgebraElement::pauli_x()).unwrap();
        let got = y.apply(&AlgebraElement::pauli_y());
        assert!(got.max_abs_diff(&AlgebraElement::pauli_z().scale(c(0., 2.))) < 1e-15);

        let hbar = 0.7;
        let q = QuantumSymplectic::full_matrix(3, hbar).unwrap();
        assert_eq!(q.beta(), c(0.0, -hbar));
        let mut rng = seeded(2);
        let a = random::element(&mut rng, 3);
        let ya = q.gass().hamiltonian_derivation(&a).unwrap();
        let want = a.traceless_part().scale(c(0.0, -hbar).inv());
        assert!(ya.effective_generator().max_abs_diff(&want) < 1e-15);
        let solved = q.gass().hamiltonian_derivation_solve(&a).unwrap();
        let probe = random::element(&mut rng, 3);
        assert!(solved.apply(&probe).max_abs_diff(&ya.apply(&probe)) < 1e-10);
    }

    #[test]
    fn noncanonical_gass_uses_the_solve() {
        let ads = Ads::full_matrix(2);
        let w = canonical_two_form(&ads).unwrap().scale(c(2.0, 0.0));
        let g = Gass::new(ads, w, c(2.0, 0.0)).unwrap();
        assert!(!g.is_canonical());
        let y = g.hamiltonian_derivation(&AlgebraElement::pauli_x()).unwrap();
        let got = y.apply(&AlgebraElement::pauli_y());
        assert!(got.max_abs_diff(&AlgebraElement::pauli_z().scale(c(0., 1.))) < 1e-12);

        let ads = Ads::full_matrix(2);
        let zero = KForm::zero(2, 2);
        assert!(matches!(Gass::new(ads, zero, c(1., 0.)), Err(Error::DegenerateStructure(_))));
    }

    #[test]
    fn poisson_bracket_examples() {
        let hbar = 1.3;
        let q = QuantumSymplectic::full_matrix(3, hbar).unwrap();
        let mut rng = seeded(3);
        let a = random::element(&mut rng, 3);
        assert!(q.poisson_bracket(&a, &a).unwrap().max_abs() < 1e-15);

        // [X, P] = iħI has no finite-dimensional solution; apply the
        // bracket's defining scale to that commutator value instead
        let comm = AlgebraElement::identity(3).scale(c(0.0, hbar));
        let pb = comm.scale(q.beta().inv());
        assert!(pb.max_abs_diff(&AlgebraElement::identity(3).scale(c(-1.0, 0.0))) < 1e-15);

        let b = random::element(&mut rng, 3);
        let cc = random::element(&mut rng, 3);
        let lhs = q.poisson_bracket(&a, &(&b * &cc)).unwrap();
        let rhs = &(&q.poisson_bracket(&a, &b).unwrap() * &cc) + &(&b * &q.poisson_bracket(&a, &cc).unwrap());
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn canonical_transformation_examples() {
        let q = QuantumSymplectic::full_matrix(3, 1.0).unwrap();
        assert!(is_canonical_transformation(&q, &AdsMorphism::identity(3)));
        let mut rng = seeded(4);
        let u = random::unitary(&mut rng, 3);
        assert!(is_canonical_transformation(&q, &AdsMorphism::unitary_conjugation(&u).unwrap()));
        assert!(!is_canonical_transformation(&q, &AdsMorphism::antiunitary(&u).unwrap()));

        let real = Gass::canonical(Ads::full_matrix(3), c(1.0, 0.0)).unwrap();
        let anti = AdsMorphism::antiunitary(&u).unwrap();
        let a = random::element(&mut rng, 3);
        let b = random::element(&mut rng, 3);
        let lhs = anti.apply(&a.bracket(&b).scale(real.beta()));
        let rhs = anti.apply(&a).bracket(&anti.apply(&b)).scale(real.beta());
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn infinitesimal_generator_examples() {
        let hbar = 0.9;
        let q = QuantumSymplectic::full_matrix(3, hbar).unwrap();
        let mut rng = seeded(5);
        let a = random::element(&mut rng, 3);
        let d = infinitesimal_canonical_generator(&q, &AlgebraElement::identity(3), &a, 0.1).unwrap();
        assert!(d.max_abs() < 1e-15);

        let g = random::hermitian(&mut rng, 3);
        let spec = HermitianSpectrum::new(&g).unwrap();
        let errs: Vec<f64> = [1e-2, 1e-3]
            .iter()
            .map(|&eps| {
                // U = exp(iεG), U⁻¹ A U
                let u = spec.unitary(-eps);
                let moved = &(&u.adjoint() * &a) * &u;
                let delta = infinitesimal_canonical_generator(&q, &g, &a, eps).unwrap();
                (&moved - &a).max_abs_diff(&delta)
            })
            .collect();
        let c2 = errs[0] / 1e-4;
        assert!(errs[1] <= 1.5 * c2 * 1e-6, "{errs:?}");

        assert!(matches!(
            infinitesimal_canonical_generator(&q, &random::element(&mut rng, 3), &a, 0.1),
            Err(Error::InvalidGenerator(_))
        ));
    }

    #[test]
    fn generator_is_bracket_with_minus_hbar_g() {
        let hbar = 2.0;
        let q = QuantumSymplectic::full_matrix(2, hbar).unwrap();
        let g = AlgebraElement::pauli_x().scale_real(0.5);
        let b = AlgebraElement::pauli_y().scale_real(0.5);
        let t = g.scale_real(-hbar);
        // {T, B}_Q = (i/ħ)(-ħ)[σx/2, σy/2] = -i·(iσz/2) = σz/2
        let pb = q.poisson_bracket(&t, &b).unwrap();
        assert!(pb.max_abs_diff(&AlgebraElement::pauli_z().scale_real(0.5)) < 1e-15);
        let eps = 1e-3;
        let delta = infinitesimal_canonical_generator(&q, &g, &b, eps).unwrap();
        assert!(delta.max_abs_diff(&pb.scale_real(eps)) < 1e-15);
    }
}
