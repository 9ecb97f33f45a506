//! Hamiltonian dynamics: quantum evolution on a symplectic matrix algebra and
//! classical flows on flat phase space.

use std::fmt;
use std::sync::Arc;

use crate::algebra::{check_dims, AlgebraElement, HermitianSpectrum, StateVector, STRUCTURAL_TOL};
use crate::calculus::{pullback, AdsMorphism};
use crate::symplectic::{Gass, QuantumSymplectic};
use crate::{Error, Result, C64};

/// Tolerance for isomorphism checks between Hamiltonian systems.
pub const ISOMORPHISM_TOL: f64 = 1e-10;

/// A symplectic structure together with a self-adjoint Hamiltonian.
#[derive(Clone, Debug)]
pub struct Gahs {
    gass: Gass,
    hamiltonian: AlgebraElement,
    spectrum: HermitianSpectrum,
}

impl Gahs {
    pub fn new(gass: Gass, hamiltonian: AlgebraElement) -> Result<Self> {
        check_dims(gass.dim(), hamiltonian.dim())?;
        let dev = hamiltonian.max_abs_diff(&hamiltonian.adjoint());
        if dev > STRUCTURAL_TOL * hamiltonian.max_abs().max(1.0) {
            return Err(Error::InvalidHamiltonian(format!(
                "not self-adjoint (deviation {dev:.3e})"
            )));
        }
        let spectrum = HermitianSpectrum::new(&hamiltonian)?;
        Ok(Self {
            gass,
            hamiltonian,
            spectrum,
        })
    }

    pub fn quantum(q: &QuantumSymplectic, hamiltonian: AlgebraElement) -> Result<Self> {
        Self::new(q.gass().clone(), hamiltonian)
    }

    pub fn gass(&self) -> &Gass {
        &self.gass
    }

    pub fn hamiltonian(&self) -> &AlgebraElement {
        &self.hamiltonian
    }

    pub fn spectrum(&self) -> &HermitianSpectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// `ħ` when the scale has the quantum form `β = -iħ`.
    pub fn hbar(&self) -> Result<f64> {
        let b = self.gass.beta();
        if b.re == 0.0 && b.im < 0.0 {
            Ok(-b.im)
        } else {
            Err(Error::InvalidInput(format!("scale {b} is not of the form -iħ")))
        }
    }

    /// `U(t) = exp(-iHt/ħ)`.
    pub fn propagator(&self, t: f64) -> Result<AlgebraElement> {
        let hbar = self.hbar()?;
        Ok(self.spectrum.unitary(t / hbar))
    }

    /// Right-hand side `{H, A} = β⁻¹[H, A]`.
    pub fn flow(&self, a: &AlgebraElement) -> AlgebraElement {
        self.hamiltonian.bracket(a).scale(self.gass.beta().inv())
    }
}

/// Sampled evolution with strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    times: Vec<f64>,
    values: Vec<T>,
}

impl<T> Trajectory<T> {
    pub fn new(times: Vec<f64>, values: Vec<T>) -> Result<Self> {
        validate_times(&times)?;
        if times.len() != values.len() {
            return Err(Error::DimensionError(times.len(), values.len()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().cloned().zip(self.values.iter())
    }

    pub fn last(&self) -> Option<&T> {
        self.values.last()
    }
}

/// Rejects empty, non-finite or non-increasing time grids.
pub fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Flat numeric view of a trajectory value for CSV export.
pub trait Flatten {
    fn column_names(&self) -> Vec<String>;
    fn flatten(&self) -> Vec<f64>;
}

impl Flatten for AlgebraElement {
    fn column_names(&self) -> Vec<String> {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (0..n).flat_map(move |j| [format!("re_{i}_{j}"), format!("im_{i}_{j}")]))
            .collect()
    }

    fn flatten(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .flat_map(|(i, j)| {
                let z = self.get(i, j);
                [z.re, z.im]
            })
            .collect()
    }
}

impl Flatten for StateVector {
    fn column_names(&self) -> Vec<String> {
        (0..self.dim())
            .flat_map(|i| [format!("re_{i}"), format!("im_{i}")])
            .collect()
    }

    fn flatten(&self) -> Vec<f64> {
        self.amplitudes().iter().flat_map(|z| [z.re, z.im]).collect()
    }
}

/// Point `(q, p)` of a `2n`-dimensional phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(Error::DimensionError(q.len(), p.len()));
        }
        Ok(Self { q, p })
    }

    pub fn one(q: f64, p: f64) -> Self {
        Self { q: vec![q], p: vec![p] }
    }

    pub fn n_dof(&self) -> usize {
        self.q.len()
    }
}

impl Flatten for PhasePoint {
    fn column_names(&self) -> Vec<String> {
        let n = self.n_dof();
        (0..n)
            .map(|i| format!("q{i}"))
            .chain((0..n).map(|i| format!("p{i}")))
            .collect()
    }

    fn flatten(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).cloned().collect()
    }
}

/// `A(t) = U(t)⁻¹ A0 U(t)` measured from the first grid time.
pub fn heisenberg_evolve(
    sys: &Gahs,
    a0: &AlgebraElement,
    t_grid: &[f64],
) -> Result<Trajectory<AlgebraElement>> {
    check_dims(sys.dim(), a0.dim())?;
    validate_times(t_grid)?;
    let beta_inv = sys.gass.beta().inv();
    let t0 = t_grid[0];
    let values = t_grid
        .iter()
        .map(|&t| {
            // A(t) = exp(tH/β) A0 exp(-tH/β), which is U⁻¹A0U for β = -iħ
            let s = t - t0;
            let left = sys.spectrum.map(|l| (beta_inv * l * s).exp());
            let right = sys.spectrum.map(|l| (-beta_inv * l * s).exp());
            &(&left * a0) * &right
        })
        .collect();
    Trajectory::new(t_grid.to_vec(), values)
}

/// Classical RK4 integration of `dA/dt = {H, A}` with steps no longer than `max_dt`.
pub fn heisenberg_evolve_rk4(
    sys: &Gahs,
    a0: &AlgebraElement,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Trajectory<AlgebraElement>> {
    check_dims(sys.dim(), a0.dim())?;
    validate_times(t_grid)?;
    check_step(max_dt)?;
    let mut values = Vec::with_capacity(t_grid.len());
    let mut a = a0.clone();
    values.push(a.clone());
    for w in t_grid.windows(2) {
        let (steps, h) = substeps(w[1] - w[0], max_dt);
        for _ in 0..steps {
            a = rk4_step(&a, h, |x| sys.flow(x));
        }
        values.push(a.clone());
    }
    Trajectory::new(t_grid.to_vec(), values)
}

fn check_step(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("step must be positive, got {dt}")))
    }
}

pub(crate) fn substeps(span: f64, max_dt: f64) -> (usize, f64) {
    let steps = ((span / max_dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

fn rk4_step(a: &AlgebraElement, h: f64, f: impl Fn(&AlgebraElement) -> AlgebraElement) -> AlgebraElement {
    let k1 = f(a);
    let k2 = f(&(a + &k1.scale_real(h / 2.0)));
    let k3 = f(&(a + &k2.scale_real(h / 2.0)));
    let k4 = f(&(a + &k3.scale_real(h)));
    let sum = &(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4);
    a + &sum.scale_real(h / 6.0)
}

/// Largest entrywise gap between the RK4 and exact Heisenberg trajectories.
pub fn heisenberg_cross_check(
    sys: &Gahs,
    a0: &AlgebraElement,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<f64> {
    let exact = heisenberg_evolve(sys, a0, t_grid)?;
    let rk = heisenberg_evolve_rk4(sys, a0, t_grid, max_dt)?;
    Ok(exact
        .values()
        .iter()
        .zip(rk.values())
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max))
}

/// `ψ(t) = exp(-iH(t - t0)/ħ) ψ0` with `t0` the first grid time.
pub fn schrodinger_evolve(
    sys: &Gahs,
    psi0: &StateVector,
    t_grid: &[f64],
) -> Result<Trajectory<StateVector>> {
    check_dims(sys.dim(), psi0.dim())?;
    validate_times(t_grid)?;
    let t0 = t_grid[0];
    let values = t_grid
        .iter()
        .map(|&t| psi0.transformed(&sys.propagator(t - t0)?))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(t_grid.to_vec(), values)
}

/// `|⟨ψ(t), Aψ(t)⟩ - ⟨ψ0, A(t)ψ0⟩|`.
pub fn picture_equivalence_check(
    sys: &Gahs,
    psi0: &StateVector,
    a: &AlgebraElement,
    t: f64,
) -> Result<f64> {
    check_dims(sys.dim(), a.dim())?;
    let u = sys.propagator(t)?;
    let schrodinger = psi0.transformed(&u)?.expectation(a)?;
    let a_t = &(&u.adjoint() * a) * &u;
    let heisenberg = psi0.expectation(&a_t)?;
    Ok((schrodinger - heisenberg).norm())
}

type ScalarFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// Real Hamiltonian on `R^{2n}` with symplectic form `Σ dp_i ∧ dq^i`.
#[derive(Clone)]
pub struct ClassicalHamiltonianSystem {
    n_dof: usize,
    hamiltonian: Arc<ScalarFn>,
    gradient: Option<Arc<GradFn>>,
    separable: bool,
}

impl fmt::Debug for ClassicalHamiltonianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicalHamiltonianSystem")
            .field("n_dof", &self.n_dof)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("separable", &self.separable)
            .finish()
    }
}

impl ClassicalHamiltonianSystem {
    pub fn new(n_dof: usize, h: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            n_dof,
            hamiltonian: Arc::new(h),
            gradient: None,
            separable: false,
        }
    }

    /// Supplies `(∂H/∂q, ∂H/∂p)` analytically.
    pub fn with_gradient(
        mut self,
        grad: impl Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    /// Declares `H = T(p) + V(q)`, enabling the leapfrog integrator.
    pub fn separable(mut self) -> Self {
        self.separable = true;
        self
    }

    /// `p²/2m + mω²q²/2` in one degree of freedom.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        let k = mass * omega * omega;
        Self::new(1, move |q, p| p[0] * p[0] / (2.0 * mass) + 0.5 * k * q[0] * q[0])
            .with_gradient(move |q, p| (vec![k * q[0]], vec![p[0] / mass]))
            .separable()
    }

    pub fn free_particle(mass: f64) -> Self {
        Self::new(1, move |_, p| p[0] * p[0] / (2.0 * mass))
            .with_gradient(move |_, p| (vec![0.0], vec![p[0] / mass]))
            .separable()
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn energy(&self, z: &PhasePoint) -> f64 {
        (self.hamiltonian)(&z.q, &z.p)
    }

    /// `(∂H/∂q, ∂H/∂p)`, analytic if supplied, else central differences.
    pub fn gradient(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (gq, gp) = match &self.gradient {
            Some(g) => g(q, p),
            None => (
                fd_gradient(|x| (self.hamiltonian)(x, p), q),
                fd_gradient(|x| (self.hamiltonian)(q, x), p),
            ),
        };
        if gq.iter().chain(&gp).all(|v| v.is_finite()) {
            Ok((gq, gp))
        } else {
            Err(Error::NumericsError("non-finite Hamiltonian gradient".into()))
        }
    }
}

/// Central-difference step `ε^{1/3} · max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Integrates Hamilton's equations, sampling at `t_grid` with steps of at
/// most `max_dt`. Separable systems use velocity Verlet (leapfrog), others RK4.
pub fn classical_evolve(
    sys: &ClassicalHamiltonianSystem,
    z0: &PhasePoint,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Trajectory<PhasePoint>> {
    if z0.n_dof() != sys.n_dof {
        return Err(Error::DimensionError(z0.n_dof(), sys.n_dof));
    }
    validate_times(t_grid)?;
    check_step(max_dt)?;
    let mut z = z0.clone();
    let mut values = vec![z.clone()];
    for w in t_grid.windows(2) {
        let (steps, h) = substeps(w[1] - w[0], max_dt);
        for _ in 0..steps {
            z = if sys.separable {
                leapfrog_step(sys, &z, h)?
            } else {
                classical_rk4_step(sys, &z, h)?
            };
        }
        values.push(z.clone());
    }
    Trajectory::new(t_grid.to_vec(), values)
}

fn leapfrog_step(sys: &ClassicalHamiltonianSystem, z: &PhasePoint, h: f64) -> Result<PhasePoint> {
    let (gq, _) = sys.gradient(&z.q, &z.p)?;
    let p_half: Vec<f64> = z.p.iter().zip(&gq).map(|(p, g)| p - 0.5 * h * g).collect();
    let (_, gp) = sys.gradient(&z.q, &p_half)?;
    let q: Vec<f64> = z.q.iter().zip(&gp).map(|(q, g)| q + h * g).collect();
    let (gq, _) = sys.gradient(&q, &p_half)?;
    let p = p_half.iter().zip(&gq).map(|(p, g)| p - 0.5 * h * g).collect();
    Ok(PhasePoint { q, p })
}

fn classical_rk4_step(sys: &ClassicalHamiltonianSystem, z: &PhasePoint, h: f64) -> Result<PhasePoint> {
    let field = |q: &[f64], p: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let (gq, gp) = sys.gradient(q, p)?;
        Ok((gp, gq.iter().map(|g| -g).collect()))
    };
    let axpy = |x: &[f64], a: f64, d: &[f64]| -> Vec<f64> {
        x.iter().zip(d).map(|(x, d)| x + a * d).collect()
    };
    let (k1q, k1p) = field(&z.q, &z.p)?;
    let (k2q, k2p) = field(&axpy(&z.q, h / 2.0, &k1q), &axpy(&z.p, h / 2.0, &k1p))?;
    let (k3q, k3p) = field(&axpy(&z.q, h / 2.0, &k2q), &axpy(&z.p, h / 2.0, &k2p))?;
    let (k4q, k4p) = field(&axpy(&z.q, h, &k3q), &axpy(&z.p, h, &k3p))?;
    let combine = |x: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    Ok(PhasePoint {
        q: combine(&z.q, &k1q, &k2q, &k3q, &k4q),
        p: combine(&z.p, &k1p, &k2p, &k3p, &k4p),
    })
}

/// Classical RK4 regardless of separability; used where phase accuracy
/// matters more than long-time energy behavior.
pub fn classical_evolve_rk4(
    sys: &ClassicalHamiltonianSystem,
    z0: &PhasePoint,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Trajectory<PhasePoint>> {
    let mut general = sys.clone();
    general.separable = false;
    classical_evolve(&general, z0, t_grid, max_dt)
}

/// `Σ_i (∂f/∂p_i ∂g/∂q^i - ∂g/∂p_i ∂f/∂q^i)` by central differences.
pub fn classical_poisson_bracket(
    f: impl Fn(&[f64], &[f64]) -> f64,
    g: impl Fn(&[f64], &[f64]) -> f64,
    z: &PhasePoint,
) -> f64 {
    let fq = fd_gradient(|x| f(x, &z.p), &z.q);
    let fp = fd_gradient(|x| f(&z.q, x), &z.p);
    let gq = fd_gradient(|x| g(x, &z.p), &z.q);
    let gp = fd_gradient(|x| g(&z.q, x), &z.p);
    (0..z.n_dof())
        .map(|i| fp[i] * gq[i] - gp[i] * fq[i])
        .sum()
}

/// Whether `Φ*ω₂ = ω₁` on all basis pairs and `Φ(H₁) = H₂`.
pub fn gahs_isomorphism_check(sys1: &Gahs, sys2: &Gahs, phi: &AdsMorphism) -> bool {
    if sys1.dim() != sys2.dim() || phi.dim() != sys1.dim() {
        return false;
    }
    let Ok(pulled) = pullback(phi, sys2.gass.omega()) else {
        return false;
    };
    let basis = sys1.gass.ads().derivation_basis();
    for x in basis {
        for y in basis {
            let args = [x.clone(), y.clone()];
            let (Ok(lhs), Ok(rhs)) = (pulled.eval(&args), sys1.gass.omega().eval(&args)) else {
                return false;
            };
            let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
            if lhs.max_abs_diff(&rhs) > ISOMORPHISM_TOL * scale {
                return false;
            }
        }
    }
    let image = phi.apply(&sys1.hamiltonian);
    let scale = image.max_abs().max(sys2.hamiltonian.max_abs()).max(1.0);
    image.max_abs_diff(&sys2.hamiltonian) <= ISOMORPHISM_TOL * scale
}

/// `⟨ψ, A ψ⟩` along a state trajectory.
pub fn expectation_series(traj: &Trajectory<StateVector>, a: &AlgebraElement) -> Result<Vec<C64>> {
    traj.values().iter().map(|psi| psi.expectation(a)).collect()
}
