//! Randomized checks of the algebraic identities behind the calculus, the
//! Poisson structure and canonical maps.

use ncham_core::algebra::Derivation;
use ncham_core::calculus::{exterior_derivative, interior_product, lie_derivative_form, wedge, Ads, AdsMorphism, KForm};
use ncham_core::dynamics::{picture_equivalence_check, Gahs};
use ncham_core::io::fmt_f64;
use ncham_core::random::{self, seeded, Rng};
use ncham_core::symplectic::{is_canonical_transformation, Gass, QuantumSymplectic};
use ncham_core::{Result, C64, I};

use crate::config::ExperimentConfig;
use crate::runner::Output;
use crate::CliError;

pub const CALCULUS_TOL: f64 = 1e-12;
pub const GASS_TOL: f64 = 1e-11;
pub const PICTURE_TOL: f64 = 1e-10;

/// Largest residual of one identity over a batch of random trials.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyRow {
    pub property: &'static str,
    pub trials: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl PropertyRow {
    fn collect(property: &'static str, tolerance: f64, residuals: impl IntoIterator<Item = Result<f64>>) -> Result<Self> {
        let mut trials = 0;
        let mut max_residual = 0.0_f64;
        for r in residuals {
            trials += 1;
            max_residual = max_residual.max(r?);
        }
        Ok(Self {
            property,
            trials,
            max_residual,
            tolerance,
        })
    }

    pub fn pass(&self) -> bool {
        self.max_residual < self.tolerance
    }
}

fn derivation(rng: &mut Rng, n: usize) -> Derivation {
    Derivation::inner(random::element(rng, n))
}

/// `A dB`.
fn one_form(rng: &mut Rng, n: usize) -> KForm {
    let a = random::element(rng, n);
    let b = random::element(rng, n);
    KForm::new(1, n, move |x| &a * &x[0].apply(&b))
}

fn form(rng: &mut Rng, n: usize, degree: usize) -> KForm {
    match degree {
        0 => KForm::zero_form(random::element(rng, n)),
        1 => one_form(rng, n),
        _ => {
            let w1 = wedge(&one_form(rng, n), &one_form(rng, n));
            let w2 = wedge(&one_form(rng, n), &one_form(rng, n));
            w1.add(&w2).expect("same degree and dimension")
        }
    }
}

fn args(rng: &mut Rng, n: usize, arity: usize) -> Vec<Vec<Derivation>> {
    (0..2).map(|_| (0..arity).map(|_| derivation(rng, n)).collect()).collect()
}

/// Distance between two forms on the sample arguments, scaled by the size
/// of the values compared.
fn rel_distance(a: &KForm, b: &KForm, args: &[Vec<Derivation>]) -> Result<f64> {
    let mut scale = 1.0_f64;
    for x in args {
        scale = scale.max(a.eval(x)?.max_abs()).max(b.eval(x)?.max_abs());
    }
    Ok(a.distance_on(b, args) / scale)
}

/// `d² = 0`, the Cartan formula, the antiderivation rule for `i_X` and
/// `[L_X, L_Y] = L_[X,Y]` on `M_3` and `M_4`.
pub fn calculus_audit(rng: &mut Rng, trials: usize) -> Result<Vec<PropertyRow>> {
    let d_squared = PropertyRow::collect(
        "d_squared",
        CALCULUS_TOL,
        (0..trials).map(|k| {
            let degree = k % 2;
            let w = form(rng, 3, degree);
            let dd = exterior_derivative(&exterior_derivative(&w));
            rel_distance(&dd, &KForm::zero(degree + 2, 3), &args(rng, 3, degree + 2))
        }),
    )?;
    let cartan = PropertyRow::collect(
        "cartan_formula",
        CALCULUS_TOL,
        (0..trials).map(|k| {
            let (degree, n) = (1 + k % 2, 3 + (k / 2) % 2);
            let w = form(rng, n, degree);
            let y = derivation(rng, n);
            let lhs = lie_derivative_form(&y, &w);
            let rhs = interior_product(&y, &exterior_derivative(&w)).add(&exterior_derivative(&interior_product(&y, &w)))?;
            rel_distance(&lhs, &rhs, &args(rng, n, degree))
        }),
    )?;
    let antiderivation = PropertyRow::collect(
        "interior_antiderivation",
        CALCULUS_TOL,
        (0..trials).map(|k| {
            let (p, q) = (1 + k % 2, 1 + (k / 2) % 2);
            let a = form(rng, 3, p);
            let b = form(rng, 3, q);
            let x = derivation(rng, 3);
            let sign = C64::new(if p.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0);
            let lhs = interior_product(&x, &wedge(&a, &b));
            let rhs = wedge(&interior_product(&x, &a), &b).add(&wedge(&a, &interior_product(&x, &b)).scale(sign))?;
            rel_distance(&lhs, &rhs, &args(rng, 3, p + q - 1))
        }),
    )?;
    let lie = PropertyRow::collect(
        "lie_bracket_representation",
        CALCULUS_TOL,
        (0..trials).map(|k| {
            let n = 3 + k % 2;
            let w = one_form(rng, n);
            let x = derivation(rng, n);
            let y = derivation(rng, n);
            let lhs = lie_derivative_form(&x, &lie_derivative_form(&y, &w))
                .sub(&lie_derivative_form(&y, &lie_derivative_form(&x, &w)))?;
            let rhs = lie_derivative_form(&x.bracket(&y), &w);
            rel_distance(&lhs, &rhs, &args(rng, n, 1))
        }),
    )?;
    Ok(vec![d_squared, cartan, antiderivation, lie])
}

/// Jacobi, homomorphism and Leibniz identities of the Poisson bracket of
/// the canonical structure, for `β = -iħ` and `β = 1` alternately, and the
/// agreement of the analytic Hamiltonian derivation with the solved one.
pub fn gass_audit(rng: &mut Rng, trials: usize, hbar: f64) -> Result<Vec<PropertyRow>> {
    let betas = [-I * hbar, C64::new(1.0, 0.0)];
    let g4 = [Gass::canonical(Ads::full_matrix(4), betas[0])?, Gass::canonical(Ads::full_matrix(4), betas[1])?];
    let g3 = Gass::canonical(Ads::full_matrix(3), betas[0])?;
    let small = [Gass::canonical(Ads::full_matrix(2), betas[0])?, g3.clone()];

    let jacobi = PropertyRow::collect(
        "poisson_jacobi",
        GASS_TOL,
        (0..trials).map(|k| {
            let g = &g4[k % 2];
            let [a, b, c] = [0; 3].map(|_| random::element(rng, 4));
            let pb = |x: &_, y: &_| g.poisson_bracket(x, y);
            let sum = &(&pb(&a, &pb(&b, &c)?)? + &pb(&b, &pb(&c, &a)?)?) + &pb(&c, &pb(&a, &b)?)?;
            Ok(sum.max_abs())
        }),
    )?;
    let homomorphism = PropertyRow::collect(
        "hamiltonian_homomorphism",
        GASS_TOL,
        (0..trials).map(|k| {
            let g = &g4[k % 2];
            let [a, b, c] = [0; 3].map(|_| random::element(rng, 4));
            let ya = g.hamiltonian_derivation(&a)?;
            let yb = g.hamiltonian_derivation(&b)?;
            let yab = g.hamiltonian_derivation(&g.poisson_bracket(&a, &b)?)?;
            Ok(ya.bracket(&yb).apply(&c).max_abs_diff(&yab.apply(&c)))
        }),
    )?;
    let leibniz = PropertyRow::collect(
        "poisson_leibniz",
        GASS_TOL,
        (0..trials).map(|_| {
            let [a, b, c] = [0; 3].map(|_| random::element(rng, 3));
            let lhs = g3.poisson_bracket(&a, &(&b * &c))?;
            let rhs = &(&g3.poisson_bracket(&a, &b)? * &c) + &(&b * &g3.poisson_bracket(&a, &c)?);
            Ok(lhs.max_abs_diff(&rhs))
        }),
    )?;
    let solved = PropertyRow::collect(
        "hamiltonian_derivation",
        GASS_TOL,
        (0..trials).map(|k| {
            let g = &small[k % 2];
            let n = g.dim();
            let a = random::element(rng, n);
            let analytic = g.hamiltonian_derivation(&a)?;
            let solved = g.hamiltonian_derivation_solve(&a)?;
            let probes: Vec<_> = (0..3).map(|_| random::element(rng, n)).collect();
            Ok(analytic.action_distance(&solved, &probes))
        }),
    )?;
    Ok(vec![jacobi, homomorphism, leibniz, solved])
}

/// For random unitaries on `M_3`: whether conjugation is canonical for
/// `β = -iħ`, and whether the antiunitary map is.
pub fn canonical_audit(rng: &mut Rng, trials: usize, hbar: f64) -> Result<Vec<(bool, bool)>> {
    let q = QuantumSymplectic::full_matrix(3, hbar)?;
    (0..trials)
        .map(|_| {
            let u = random::unitary(rng, 3);
            Ok((
                is_canonical_transformation(&q, &AdsMorphism::unitary_conjugation(&u)?),
                is_canonical_transformation(&q, &AdsMorphism::antiunitary(&u)?),
            ))
        })
        .collect()
}

/// Schrödinger-side against Heisenberg-side expectations on random 4×4
/// systems at random times in `[-3, 3]`.
pub fn picture_audit(rng: &mut Rng, trials: usize, hbar: f64) -> Result<PropertyRow> {
    let q = QuantumSymplectic::full_matrix(4, hbar)?;
    PropertyRow::collect(
        "picture_equivalence",
        PICTURE_TOL,
        (0..trials).map(|_| {
            let sys = Gahs::quantum(&q, random::hermitian(rng, 4))?;
            let psi = random::state_vector(rng, 4);
            let a = random::hermitian(rng, 4);
            let t = 3.0 * random::uniform(rng);
            picture_equivalence_check(&sys, &psi, &a, t)
        }),
    )
}

pub(super) fn run(c: &ExperimentConfig, out: &mut Output) -> std::result::Result<(), CliError> {
    let mut rng = seeded(c.seed);
    let (trials, hbar) = (c.int("trials"), c.float("hbar"));
    let mut rows = calculus_audit(&mut rng, trials)?;
    rows.extend(gass_audit(&mut rng, trials, hbar)?);
    rows.push(picture_audit(&mut rng, c.int("picture_trials"), hbar)?);
    let mut table = String::from("property,trials,max_residual,tolerance,pass\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            r.property,
            r.trials,
            fmt_f64(r.max_residual),
            fmt_f64(r.tolerance),
            r.pass()
        ));
    }
    out.table("properties", &table)?;

    let canonical = canonical_audit(&mut rng, c.int("canonical_trials"), hbar)?;
    let mut flags = String::from("trial,unitary_canonical,antiunitary_canonical\n");
    for (k, (u, a)) in canonical.iter().enumerate() {
        flags.push_str(&format!("{k},{u},{a}\n"));
    }
    out.table("canonical", &flags)?;

    let dichotomy = canonical.iter().all(|&(u, a)| u && !a);
    out.summary("all_properties_pass", rows.iter().all(PropertyRow::pass));
    out.summary("dichotomy_holds", dichotomy);
    Ok(())
}
