//! Hamilton–Jacobi fluid and Madelung decomposition in one dimension.
//!
//! The classical side evolves an action `S` and a density `ρ` under
//! `∂S/∂t = -H(q, ∂S/∂q)` and `∂ρ/∂t = -∂(vρ)/∂q` with `v = ∂S/∂q / m`.
//! The quantum side writes a wave function as `ψ = √ρ̃ exp(iS̃/ħ)` and
//! measures how well `(ρ̃, S̃)` satisfy the same pair plus the quantum
//! potential `-(ħ²/2m) Δ√ρ̃ / √ρ̃`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{classical_evolve, fd_step, substeps, validate_times, ClassicalHamiltonianSystem, PhasePoint, Trajectory};
use crate::grid::{FftPair, SpatialGrid};
use crate::random::Rng;
use crate::{Error, Result, C64, I};

/// `|ψ|` at or below this value leaves the phase undefined.
pub const NODE_THRESHOLD: f64 = 1e-10;
/// A caustic is declared when `|∂v/∂q|` exceeds this factor over the
/// nominal step.
pub const CAUSTIC_FACTOR: f64 = 50.0;
/// Density floor, relative to the maximum, below which residuals and gaps
/// are not evaluated.
pub const DENSITY_FLOOR: f64 = 1e-3;
const NORM_TOL: f64 = 1e-8;
const COURANT: f64 = 0.8;

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Real potential `V(q)`, with an optional analytic derivative.
#[derive(Clone)]
pub struct Potential {
    v: Arc<ScalarFn>,
    dv: Option<Arc<ScalarFn>>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential").field("analytic_derivative", &self.dv.is_some()).finish()
    }
}

impl Potential {
    pub fn from_fn(v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { v: Arc::new(v), dv: None }
    }

    pub fn with_derivative(mut self, dv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dv = Some(Arc::new(dv));
        self
    }

    pub fn zero() -> Self {
        Self::from_fn(|_| 0.0).with_derivative(|_| 0.0)
    }

    /// `mω²q²/2`.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        let k = mass * omega * omega;
        Self::from_fn(move |q| 0.5 * k * q * q).with_derivative(move |q| k * q)
    }

    pub fn eval(&self, q: f64) -> f64 {
        (self.v)(q)
    }

    pub fn derivative(&self, q: f64) -> f64 {
        match &self.dv {
            Some(dv) => dv(q),
            None => {
                let h = fd_step(q);
                (self.eval(q + h) - self.eval(q - h)) / (2.0 * h)
            }
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        grid.points().into_iter().map(|q| self.eval(q)).collect()
    }
}

/// Separable `H = p²/2m + V(q)`.
#[derive(Clone, Debug)]
pub struct FluidHamiltonian {
    mass: f64,
    potential: Potential,
}

impl FluidHamiltonian {
    pub fn new(mass: f64, potential: Potential) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { mass, potential })
    }

    pub fn free(mass: f64) -> Result<Self> {
        Self::new(mass, Potential::zero())
    }

    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        Self::new(mass, Potential::harmonic(mass, omega))
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn energy(&self, q: f64, p: f64) -> f64 {
        p * p / (2.0 * self.mass) + self.potential.eval(q)
    }

    /// The same Hamiltonian as a particle system for `classical_evolve`.
    pub fn classical_system(&self) -> ClassicalHamiltonianSystem {
        let (m, v1, v2) = (self.mass, self.potential.clone(), self.potential.clone());
        ClassicalHamiltonianSystem::new(1, move |q, p| p[0] * p[0] / (2.0 * m) + v1.eval(q[0]))
            .with_gradient(move |q, p| (vec![v2.derivative(q[0])], vec![p[0] / m]))
            .separable()
    }
}

fn integral(grid: &SpatialGrid, f: &[f64]) -> f64 {
    f.iter().sum::<f64>() * grid.dx()
}

fn check_len(grid: &SpatialGrid, len: usize) -> Result<()> {
    if len == grid.n() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{len} samples on a {}-point grid", grid.n())))
    }
}

/// Wave function sampled on a periodic grid with `Σ|ψ|² dx = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWaveFunction {
    grid: SpatialGrid,
    psi: Vec<C64>,
    hbar: f64,
}

impl GridWaveFunction {
    /// Validates the unit norm within `1e-8`.
    pub fn new(grid: SpatialGrid, psi: Vec<C64>, hbar: f64) -> Result<Self> {
        check_len(&grid, psi.len())?;
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidInput(format!("hbar must be positive, got {hbar}")));
        }
        let w = Self { grid, psi, hbar };
        let norm = w.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!("wave function norm is {norm}, expected 1")));
        }
        Ok(w)
    }

    pub fn normalized(grid: SpatialGrid, psi: Vec<C64>, hbar: f64) -> Result<Self> {
        check_len(&grid, psi.len())?;
        let norm = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidInput("wave function has zero norm".into()));
        }
        Self::new(grid, psi.into_iter().map(|z| z / norm).collect(), hbar)
    }

    /// `exp(-(x-x0)²/(4σ²) + i p0 x/ħ)`, so that `|ψ|²` has standard deviation `σ`.
    pub fn gaussian(grid: SpatialGrid, x0: f64, p0: f64, sigma: f64, hbar: f64) -> Result<Self> {
        let psi = grid
            .points()
            .into_iter()
            .map(|x| (-(x - x0).powi(2) / (4.0 * sigma * sigma) + I * (p0 * x / hbar)).exp())
            .collect();
        Self::normalized(grid, psi, hbar)
    }

    /// `√ρ exp(iS/ħ)`, renormalized.
    pub fn from_fields(grid: SpatialGrid, rho: &[f64], s: &[f64], hbar: f64) -> Result<Self> {
        check_len(&grid, rho.len())?;
        check_len(&grid, s.len())?;
        let psi = rho
            .iter()
            .zip(s)
            .map(|(r, s)| r.max(0.0).sqrt() * (I * (s / hbar)).exp())
            .collect();
        Self::normalized(grid, psi, hbar)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn psi(&self) -> &[C64] {
        &self.psi
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn norm(&self) -> f64 {
        (self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn mean_position(&self) -> f64 {
        let x = self.grid.points();
        self.psi.iter().zip(&x).map(|(z, x)| z.norm_sqr() * x).sum::<f64>() * self.grid.dx()
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let u = (I * theta).exp();
        Self {
            psi: self.psi.iter().map(|z| z * u).collect(),
            ..self.clone()
        }
    }

    /// `min_θ max_j |ψ_j - e^{iθ} φ_j|`, with `θ` from the overlap phase.
    pub fn phase_aligned_distance(&self, other: &GridWaveFunction) -> f64 {
        let overlap: C64 = other.psi.iter().zip(&self.psi).map(|(a, b)| a.conj() * b).sum();
        let u = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
        self.psi
            .iter()
            .zip(&other.psi)
            .fold(0.0, |m, (a, b)| m.max((a - u * b).norm()))
    }
}

/// Density and action of a wave function, `ψ = √ρ exp(iS/ħ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MadelungFields {
    grid: SpatialGrid,
    rho: Vec<f64>,
    s: Vec<f64>,
    hbar: f64,
    defined: Vec<bool>,
}

impl MadelungFields {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `false` where `|ψ|` is at a node and the phase is undefined.
    pub fn phase_defined(&self) -> &[bool] {
        &self.defined
    }

    pub fn undefined_points(&self) -> Vec<usize> {
        self.defined.iter().enumerate().filter(|(_, d)| !**d).map(|(j, _)| j).collect()
    }

    pub fn compose(&self) -> Result<GridWaveFunction> {
        GridWaveFunction::from_fields(self.grid, &self.rho, &self.s, self.hbar)
    }
}

/// Phase unwrapped outward from index `start`, in radians.
fn unwrap_phase(psi: &[C64], start: usize) -> Vec<f64> {
    let n = psi.len();
    let mut phase = vec![0.0; n];
    phase[start] = psi[start].arg();
    for j in start + 1..n {
        phase[j] = phase[j - 1] + (psi[j] * psi[j - 1].conj()).arg();
    }
    for j in (0..start).rev() {
        phase[j] = phase[j + 1] + (psi[j] * psi[j + 1].conj()).arg();
    }
    phase
}

fn argmax(v: impl Iterator<Item = f64>) -> usize {
    v.enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// `ρ = |ψ|²` and `S = ħ · phase`, unwrapped outward from the density
/// maximum. Points with `|ψ| ≤ NODE_THRESHOLD` are reported in the mask.
pub fn madelung_decompose(psi: &GridWaveFunction) -> MadelungFields {
    let rho = psi.density();
    let start = argmax(rho.iter().cloned());
    let s = unwrap_phase(&psi.psi, start).into_iter().map(|ph| psi.hbar * ph).collect();
    let defined = psi.psi.iter().map(|z| z.norm() > NODE_THRESHOLD).collect();
    MadelungFields {
        grid: psi.grid,
        rho,
        s,
        hbar: psi.hbar,
        defined,
    }
}

/// Two-coordinate decomposition of `ψ(x1, x2)`. The phase is unwrapped
/// along the row through the density maximum, then down every column.
pub fn madelung_decompose_2d(psi: &DMatrix<C64>, hbar: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let rho = psi.map(|z| z.norm_sqr());
    let start = argmax(rho.iter().cloned());
    let (r0, c0) = (start % psi.nrows(), start / psi.nrows());
    let row: Vec<C64> = psi.row(r0).iter().cloned().collect();
    let row_phase = unwrap_phase(&row, c0);
    let mut s = DMatrix::zeros(psi.nrows(), psi.ncols());
    for c in 0..psi.ncols() {
        let col: Vec<C64> = psi.column(c).iter().cloned().collect();
        let ph = unwrap_phase(&col, r0);
        let offset = row_phase[c] - ph[r0];
        for r in 0..psi.nrows() {
            s[(r, c)] = hbar * (ph[r] + offset);
        }
    }
    (rho, s)
}

/// Strang split-step Fourier evolution of `iħ ψ_t = -(ħ²/2m) ψ_xx + V ψ`.
pub fn split_step_evolve(
    psi0: &GridWaveFunction,
    mass: f64,
    potential: &Potential,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Trajectory<GridWaveFunction>> {
    validate_times(t_grid)?;
    check_step(max_dt)?;
    let grid = psi0.grid;
    let hbar = psi0.hbar;
    let fft = FftPair::new(grid.n());
    let v = potential.sample(&grid);
    let k = grid.wavenumbers();
    let mut psi = psi0.psi.clone();
    let mut out = vec![psi0.clone()];
    for span in t_grid.windows(2) {
        let (steps, dt) = substeps(span[1] - span[0], max_dt);
        let half_v: Vec<C64> = v.iter().map(|v| (-I * (v * dt / (2.0 * hbar))).exp()).collect();
        let kin: Vec<C64> = k.iter().map(|k| (-I * (hbar * k * k * dt / (2.0 * mass))).exp()).collect();
        for _ in 0..steps {
            psi.iter_mut().zip(&half_v).for_each(|(z, u)| *z *= u);
            fft.forward(&mut psi);
            psi.iter_mut().zip(&kin).for_each(|(z, u)| *z *= u);
            fft.inverse(&mut psi);
            psi.iter_mut().zip(&half_v).for_each(|(z, u)| *z *= u);
        }
        out.push(GridWaveFunction {
            grid,
            psi: psi.clone(),
            hbar,
        });
    }
    Trajectory::new(t_grid.to_vec(), out)
}

/// Crank–Nicolson evolution with the second-order periodic Laplacian.
pub fn crank_nicolson_evolve(
    psi0: &GridWaveFunction,
    mass: f64,
    potential: &Potential,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Trajectory<GridWaveFunction>> {
    validate_times(t_grid)?;
    check_step(max_dt)?;
    let grid = psi0.grid;
    let (n, hbar, dx) = (grid.n(), psi0.hbar, grid.dx());
    let v = potential.sample(&grid);
    let kin = hbar * hbar / (2.0 * mass * dx * dx);
    let h = DMatrix::from_fn(n, n, |a, b| {
        let d = (a + n - b) % n;
        let mut e = if d == 0 { C64::new(2.0 * kin + v[a], 0.0) } else { C64::new(0.0, 0.0) };
        if d == 1 || d == n - 1 {
            e -= kin;
        }
        e
    });
    let mut psi = DVector::from_vec(psi0.psi.clone());
    let mut out = vec![psi0.clone()];
    let mut cached: Option<(f64, DMatrix<C64>)> = None;
    for span in t_grid.windows(2) {
        let (steps, dt) = substeps(span[1] - span[0], max_dt);
        if cached.as_ref().is_none_or(|(d, _)| *d != dt) {
            let a = &h * (I * (dt / (2.0 * hbar)));
            let id = DMatrix::<C64>::identity(n, n);
            let lhs = (&id + &a).lu();
            let step = lhs
                .solve(&(&id - &a))
                .ok_or_else(|| Error::NumericsError("Crank-Nicolson matrix is singular".into()))?;
            cached = Some((dt, step));
        }
        let step = &cached.as_ref().expect("set above").1;
        for _ in 0..steps {
            psi = step * &psi;
        }
        out.push(GridWaveFunction {
            grid,
            psi: psi.iter().cloned().collect(),
            hbar,
        });
    }
    Trajectory::new(t_grid.to_vec(), out)
}

fn check_step(max_dt: f64) -> Result<()> {
    if max_dt > 0.0 && max_dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("step must be positive, got {max_dt}")))
    }
}

/// Fields entering the fluid equations at one time, by central differences.
#[derive(Clone, Debug)]
pub struct FluidSlice {
    pub rho: Vec<f64>,
    pub rho_t: Vec<f64>,
    pub s_x: Vec<f64>,
    pub s_t: Vec<f64>,
    /// Points with density above [`DENSITY_FLOOR`] times the maximum.
    pub defined: Vec<bool>,
}

/// Central-difference fluid fields at `cur` from its neighbours `dt` apart.
/// Phase differences are taken as `arg(ψ_a ψ_b*)`, so no unwrapping enters.
pub fn fluid_slice(prev: &GridWaveFunction, cur: &GridWaveFunction, next: &GridWaveFunction, dt: f64) -> Result<FluidSlice> {
    check_len(&cur.grid, prev.psi.len())?;
    check_len(&cur.grid, next.psi.len())?;
    let n = cur.grid.n();
    let (hbar, dx) = (cur.hbar, cur.grid.dx());
    let rho = cur.density();
    let rho_t = (0..n)
        .map(|j| (next.psi[j].norm_sqr() - prev.psi[j].norm_sqr()) / (2.0 * dt))
        .collect();
    let s_t = (0..n)
        .map(|j| hbar * (next.psi[j] * prev.psi[j].conj()).arg() / (2.0 * dt))
        .collect();
    let s_x = (0..n)
        .map(|j| {
            let (l, r) = ((j + n - 1) % n, (j + 1) % n);
            hbar * (cur.psi[r] * cur.psi[l].conj()).arg() / (2.0 * dx)
        })
        .collect();
    let floor = DENSITY_FLOOR * rho.iter().cloned().fold(0.0, f64::max);
    let defined = rho.iter().map(|r| *r > floor).collect();
    Ok(FluidSlice {
        rho,
        rho_t,
        s_x,
        s_t,
        defined,
    })
}

/// `-(ħ²/2m) Δ√ρ / √ρ` by second-order central differences (periodic).
pub fn quantum_potential(grid: &SpatialGrid, rho: &[f64], hbar: f64, mass: f64) -> Vec<f64> {
    let n = grid.n();
    let dx2 = grid.dx() * grid.dx();
    let a: Vec<f64> = rho.iter().map(|r| r.max(0.0).sqrt()).collect();
    (0..n)
        .map(|j| {
            let lap = (a[(j + 1) % n] - 2.0 * a[j] + a[(j + n - 1) % n]) / dx2;
            -(hbar * hbar / (2.0 * mass)) * lap / a[j]
        })
        .collect()
}

/// Pointwise residuals of the continuity and Hamilton–Jacobi equations.
#[derive(Clone, Debug)]
pub struct FluidResiduals {
    pub continuity: Vec<f64>,
    pub hamilton_jacobi: Vec<f64>,
    pub defined: Vec<bool>,
}

impl FluidResiduals {
    pub fn sup_continuity(&self) -> f64 {
        masked_sup(&self.continuity, &self.defined)
    }

    pub fn sup_hamilton_jacobi(&self) -> f64 {
        masked_sup(&self.hamilton_jacobi, &self.defined)
    }
}

fn masked_sup(v: &[f64], mask: &[bool]) -> f64 {
    v.iter().zip(mask).filter(|(_, m)| **m).fold(0.0, |a, (x, _)| a.max(x.abs()))
}

/// Residuals of `ρ_t + (ρ S_x/m)_x` and `S_t + S_x²/2m + V [+ Q]`.
///
/// With `hbar = None` this is the classical evaluator; with `Some(ħ)` the
/// quantum potential is added. `Some(0.0)` reproduces the classical result.
pub fn fluid_residuals(
    grid: &SpatialGrid,
    slice: &FluidSlice,
    hamiltonian: &FluidHamiltonian,
    hbar: Option<f64>,
) -> FluidResiduals {
    let n = grid.n();
    let (m, dx) = (hamiltonian.mass, grid.dx());
    let v = hamiltonian.potential.sample(grid);
    let flux: Vec<f64> = slice.rho.iter().zip(&slice.s_x).map(|(r, sx)| r * sx / m).collect();
    let continuity = (0..n)
        .map(|j| slice.rho_t[j] + (flux[(j + 1) % n] - flux[(j + n - 1) % n]) / (2.0 * dx))
        .collect();
    let mut hj: Vec<f64> = (0..n)
        .map(|j| slice.s_t[j] + slice.s_x[j] * slice.s_x[j] / (2.0 * m) + v[j])
        .collect();
    if let Some(h) = hbar {
        let q = quantum_potential(grid, &slice.rho, h, m);
        hj.iter_mut().zip(q).for_each(|(r, q)| *r += q);
    }
    FluidResiduals {
        continuity,
        hamilton_jacobi: hj,
        defined: slice.defined.clone(),
    }
}

/// Madelung residuals at every interior sample of a uniformly spaced
/// Schrödinger trajectory.
pub fn madelung_residuals(
    traj: &Trajectory<GridWaveFunction>,
    hamiltonian: &FluidHamiltonian,
) -> Result<Vec<FluidResiduals>> {
    let times = traj.times();
    if times.len() < 3 {
        return Err(Error::InvalidInput("need at least three time samples".into()));
    }
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(Error::InvalidInput("time samples must be uniformly spaced".into()));
    }
    let vals = traj.values();
    vals.windows(3)
        .map(|w| {
            let slice = fluid_slice(&w[0], &w[1], &w[2], dt)?;
            Ok(fluid_residuals(&w[1].grid, &slice, hamiltonian, Some(w[1].hbar)))
        })
        .collect()
}

/// Density and action of the classical Hamilton–Jacobi fluid.
#[derive(Clone, Debug)]
pub struct ClassicalHJState {
    grid: SpatialGrid,
    rho: Vec<f64>,
    s: Vec<f64>,
    hamiltonian: FluidHamiltonian,
}

impl ClassicalHJState {
    /// Validates `∫ρ dx = 1` within `1e-8`, `ρ ≥ 0` and finite values.
    pub fn new(grid: SpatialGrid, rho: Vec<f64>, s: Vec<f64>, hamiltonian: FluidHamiltonian) -> Result<Self> {
        check_len(&grid, rho.len())?;
        check_len(&grid, s.len())?;
        if grid.n() < 8 {
            return Err(Error::InvalidInput("fluid grid needs at least 8 points".into()));
        }
        if rho.iter().chain(&s).any(|v| !v.is_finite()) || rho.iter().any(|r| *r < 0.0) {
            return Err(Error::InvalidInput("density must be finite and nonnegative".into()));
        }
        let mass = integral(&grid, &rho);
        if (mass - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!("density integrates to {mass}, expected 1")));
        }
        Ok(Self {
            grid,
            rho,
            s,
            hamiltonian,
        })
    }

    /// Samples `ρ0` and `S0`, normalizing the density.
    pub fn from_fns(
        grid: SpatialGrid,
        rho0: impl Fn(f64) -> f64,
        s0: impl Fn(f64) -> f64,
        hamiltonian: FluidHamiltonian,
    ) -> Result<Self> {
        let x = grid.points();
        let rho: Vec<f64> = x.iter().map(|&q| rho0(q)).collect();
        let total = integral(&grid, &rho);
        if !(total > 0.0) {
            return Err(Error::InvalidInput("density has zero mass".into()));
        }
        let rho = rho.into_iter().map(|r| r / total).collect();
        Self::new(grid, rho, x.iter().map(|&q| s0(q)).collect(), hamiltonian)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn hamiltonian(&self) -> &FluidHamiltonian {
        &self.hamiltonian
    }

    pub fn total_probability(&self) -> f64 {
        integral(&self.grid, &self.rho)
    }

    /// `∂S/∂q`.
    pub fn momentum_field(&self) -> Vec<f64> {
        gradient(&self.s, self.grid.dx(), None)
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.momentum_field().into_iter().map(|p| p / self.hamiltonian.mass).collect()
    }

    /// `(∫ρ S_x dx, ∫ρ S_x² dx)`.
    pub fn momentum_moments(&self) -> (f64, f64) {
        let p = self.momentum_field();
        let m1 = self.rho.iter().zip(&p).map(|(r, p)| r * p).sum::<f64>() * self.grid.dx();
        let m2 = self.rho.iter().zip(&p).map(|(r, p)| r * p * p).sum::<f64>() * self.grid.dx();
        (m1, m2)
    }

    pub fn mean_position(&self) -> f64 {
        let x = self.grid.points();
        self.rho.iter().zip(&x).map(|(r, x)| r * x).sum::<f64>() * self.grid.dx()
    }
}

/// Derivative at `j`. With `upwind = Some(v)`, the stencil leans against the
/// flow direction (five points, third order); otherwise it is central
/// (fourth order). At an inflow edge, where no upwind stencil fits, the
/// derivative is extrapolated linearly from the two nearest nodes that have
/// one; a one-sided stencil there would reach downwind and grow without
/// bound. Other edges use one-sided fourth-order stencils.
fn derivative_at(f: &[f64], j: usize, dx: f64, upwind: Option<f64>) -> f64 {
    let n = f.len();
    let extrapolate = |a: usize, b: usize, steps: f64| {
        let (da, db) = (derivative_at(f, a, dx, upwind), derivative_at(f, b, dx, upwind));
        da + steps * (da - db)
    };
    match upwind {
        Some(v) if v > 0.0 && j < 3 => return extrapolate(3, 4, (3 - j) as f64),
        Some(v) if v < 0.0 && j + 4 > n => return extrapolate(n - 4, n - 5, (j + 4 - n) as f64),
        _ => {}
    }
    let c = |k: isize| f[(j as isize + k) as usize];
    let fits = |lo: isize, hi: isize| j as isize + lo >= 0 && j as isize + hi < n as isize;
    let d = match upwind {
        Some(v) if v > 0.0 && fits(-3, 1) => -c(-3) + 6.0 * c(-2) - 18.0 * c(-1) + 10.0 * c(0) + 3.0 * c(1),
        Some(v) if v < 0.0 && fits(-1, 3) => c(3) - 6.0 * c(2) + 18.0 * c(1) - 10.0 * c(0) - 3.0 * c(-1),
        _ if fits(-2, 2) => c(-2) - 8.0 * c(-1) + 8.0 * c(1) - c(2),
        _ if fits(0, 4) => -25.0 * c(0) + 48.0 * c(1) - 36.0 * c(2) + 16.0 * c(3) - 3.0 * c(4),
        _ => 25.0 * c(0) - 48.0 * c(-1) + 36.0 * c(-2) - 16.0 * c(-3) + 3.0 * c(-4),
    };
    d / (12.0 * dx)
}

fn gradient(f: &[f64], dx: f64, upwind: Option<&[f64]>) -> Vec<f64> {
    (0..f.len())
        .map(|j| derivative_at(f, j, dx, upwind.map(|v| v[j])))
        .collect()
}

/// Upwind-biased fluxes through the `n + 1` cell faces, fifth order where
/// the stencil fits and third order next to the edges. The outer faces are
/// closed, so the density update conserves `Σρ dx` exactly.
fn face_fluxes(flux: &[f64], p: &[f64]) -> Vec<f64> {
    let n = flux.len();
    let mut faces = vec![0.0; n + 1];
    for i in 0..n - 1 {
        let u = p[i] + p[i + 1];
        let f = |k: isize| flux[(i as isize + k) as usize];
        faces[i + 1] = if u > 0.0 && i >= 2 && i + 2 < n {
            (2.0 * f(-2) - 13.0 * f(-1) + 47.0 * f(0) + 27.0 * f(1) - 3.0 * f(2)) / 60.0
        } else if u < 0.0 && i >= 1 && i + 3 < n {
            (2.0 * f(3) - 13.0 * f(2) + 47.0 * f(1) + 27.0 * f(0) - 3.0 * f(-1)) / 60.0
        } else if u > 0.0 && i >= 1 {
            (-flux[i - 1] + 5.0 * flux[i] + 2.0 * flux[i + 1]) / 6.0
        } else if u < 0.0 && i + 2 < n {
            (2.0 * flux[i] + 5.0 * flux[i + 1] - flux[i + 2]) / 6.0
        } else {
            0.5 * (flux[i] + flux[i + 1])
        };
    }
    faces
}

/// Cubic Lagrange interpolation of grid samples at position `q`.
fn interpolate(grid: &SpatialGrid, f: &[f64], q: f64) -> f64 {
    let n = f.len();
    let s = (q - grid.point(0)) / grid.dx();
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = s - base as f64;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * f[base + a];
    }
    acc
}

struct HjSystem<'a> {
    grid: &'a SpatialGrid,
    mass: f64,
    v: Vec<f64>,
}

#[derive(Clone)]
struct HjVars {
    s: Vec<f64>,
    rho: Vec<f64>,
    tracers: Vec<f64>,
}

impl HjVars {
    fn axpy(&self, h: f64, d: &HjVars) -> HjVars {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + h * y).collect();
        HjVars {
            s: f(&self.s, &d.s),
            rho: f(&self.rho, &d.rho),
            tracers: f(&self.tracers, &d.tracers),
        }
    }
}

impl HjSystem<'_> {
    fn momentum(&self, s: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        let central = gradient(s, dx, None);
        gradient(s, dx, Some(&central))
    }

    fn rhs(&self, y: &HjVars) -> HjVars {
        let dx = self.grid.dx();
        let p = self.momentum(&y.s);
        let ds = p.iter().zip(&self.v).map(|(p, v)| -(p * p / (2.0 * self.mass) + v)).collect();
        let flux: Vec<f64> = y.rho.iter().zip(&p).map(|(r, p)| r * p / self.mass).collect();
        let faces = face_fluxes(&flux, &p);
        let drho = faces.windows(2).map(|w| -(w[1] - w[0]) / dx).collect();
        let tracers = y
            .tracers
            .iter()
            .map(|&q| interpolate(self.grid, &p, q) / self.mass)
            .collect();
        HjVars {
            s: ds,
            rho: drho,
            tracers,
        }
    }

    fn step(&self, y: &HjVars, dt: f64) -> HjVars {
        let k1 = self.rhs(y);
        let k2 = self.rhs(&y.axpy(dt / 2.0, &k1));
        let k3 = self.rhs(&y.axpy(dt / 2.0, &k2));
        let k4 = self.rhs(&y.axpy(dt, &k3));
        let n = |f: fn(&HjVars) -> &Vec<f64>| -> Vec<f64> {
            (0..f(y).len())
                .map(|j| f(y)[j] + dt / 6.0 * (f(&k1)[j] + 2.0 * f(&k2)[j] + 2.0 * f(&k3)[j] + f(&k4)[j]))
                .collect()
        };
        HjVars {
            s: n(|v| &v.s),
            rho: n(|v| &v.rho),
            tracers: n(|v| &v.tracers),
        }
    }

    fn max_speed(&self, s: &[f64]) -> f64 {
        self.momentum(s).iter().fold(0.0_f64, |m, p| m.max(p.abs())) / self.mass
    }

    fn max_velocity_gradient(&self, s: &[f64]) -> f64 {
        let dx = self.grid.dx();
        let n = s.len();
        (1..n - 1)
            .map(|j| ((s[j + 1] - 2.0 * s[j] + s[j - 1]) / (dx * dx) / self.mass).abs())
            .fold(0.0, |m, g| if g.is_nan() { f64::INFINITY } else { m.max(g) })
    }
}

fn run_hj(
    state: &ClassicalHJState,
    tracers: Vec<f64>,
    t_grid: &[f64],
    max_dt: f64,
    mut observe: impl FnMut(f64, &HjVars, &HjSystem) -> Result<()>,
) -> Result<()> {
    validate_times(t_grid)?;
    check_step(max_dt)?;
    let sys = HjSystem {
        grid: &state.grid,
        mass: state.hamiltonian.mass,
        v: state.hamiltonian.potential.sample(&state.grid),
    };
    let mut y = HjVars {
        s: state.s.clone(),
        rho: state.rho.clone(),
        tracers,
    };
    let threshold = CAUSTIC_FACTOR / max_dt;
    let mut t = t_grid[0];
    observe(t, &y, &sys)?;
    for &t_end in &t_grid[1..] {
        while t < t_end {
            let speed = sys.max_speed(&y.s);
            let limit = if speed > 0.0 { COURANT * state.grid.dx() / speed } else { max_dt };
            let remaining = t_end - t;
            let dt = max_dt.min(limit);
            let dt = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
            y = sys.step(&y, dt);
            t = if dt == remaining { t_end } else { t + dt };
            let g = sys.max_velocity_gradient(&y.s);
            if g > threshold || !y.rho.iter().chain(&y.s).all(|v| v.is_finite()) {
                return Err(Error::CausticError { time: t, gradient: g });
            }
        }
        observe(t, &y, &sys)?;
    }
    Ok(())
}

/// Method-of-lines RK4 integration of the Hamilton–Jacobi pair.
///
/// Each step is the smaller of `max_dt` and a Courant limit from the current
/// maximum speed. A caustic is reported once `|∂v/∂q|` exceeds
/// `CAUSTIC_FACTOR / max_dt`.
pub fn hj_evolve(state: &ClassicalHJState, t_grid: &[f64], max_dt: f64) -> Result<Trajectory<ClassicalHJState>> {
    let mut out = Vec::with_capacity(t_grid.len());
    run_hj(state, Vec::new(), t_grid, max_dt, |_, y, _| {
        out.push(ClassicalHJState {
            rho: y.rho.clone(),
            s: y.s.clone(),
            ..state.clone()
        });
        Ok(())
    })?;
    Trajectory::new(t_grid.to_vec(), out)
}

/// Follows `q̇ = v(q, t)` alongside the fluid; `p(t) = ∂S/∂q` at `q(t)`.
pub fn integrate_characteristics(
    state: &ClassicalHJState,
    q0: f64,
    t_grid: &[f64],
    max_dt: f64,
) -> Result<Trajectory<PhasePoint>> {
    let grid = state.grid;
    let (lo, hi) = (grid.point(1), grid.point(grid.n() - 3));
    let mut out = Vec::with_capacity(t_grid.len());
    run_hj(state, vec![q0], t_grid, max_dt, |t, y, sys| {
        let q = y.tracers[0];
        if !(lo..=hi).contains(&q) {
            return Err(Error::DomainExit { time: t, position: q });
        }
        let p = interpolate(&grid, &sys.momentum(&y.s), q);
        out.push(PhasePoint::one(q, p));
        Ok(())
    })?;
    Trajectory::new(t_grid.to_vec(), out)
}

/// Momentum moments of the ridge `ρ(q) δ(p - ∂S/∂q)`, from the fields and
/// from sampled characteristics.
#[derive(Clone, Debug)]
pub struct RidgeMoments {
    pub field_mean_p: f64,
    pub field_mean_p2: f64,
    pub sample_mean_p: f64,
    pub sample_mean_p2: f64,
}

impl RidgeMoments {
    pub fn max_relative_gap(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        rel(self.field_mean_p, self.sample_mean_p).max(rel(self.field_mean_p2, self.sample_mean_p2))
    }
}

/// Evolves the fluid to time `t` and compares its momentum moments with
/// those of `n_samples` characteristics. Initial positions are drawn from
/// the piecewise-linear interpolant of `ρ0` by stratified inverse-CDF
/// sampling and moved by Hamilton's equations from `(q0, ∂S0/∂q(q0))`.
pub fn ridge_moments(state: &ClassicalHJState, t: f64, n_samples: usize, rng: &mut Rng, max_dt: f64) -> Result<RidgeMoments> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let traj = hj_evolve(state, &[0.0, t], max_dt)?;
    let (field_mean_p, field_mean_p2) = traj.last().expect("two samples").momentum_moments();

    let grid = state.grid;
    let x = grid.points();
    let dx = grid.dx();
    let mut cdf = vec![0.0; x.len()];
    for j in 1..x.len() {
        cdf[j] = cdf[j - 1] + 0.5 * (state.rho[j] + state.rho[j - 1]) * dx;
    }
    let total = *cdf.last().expect("nonempty");
    let p0 = state.momentum_field();
    let system = state.hamiltonian.classical_system();
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..n_samples {
        let u = (i as f64 + 0.5 * (crate::random::uniform(rng) + 1.0)) / n_samples as f64 * total;
        let j = cdf.partition_point(|c| *c < u).clamp(1, x.len() - 1);
        let q0 = x[j - 1] + invert_linear_cell(state.rho[j - 1], state.rho[j], dx, u - cdf[j - 1]);
        let z0 = PhasePoint::one(q0, interpolate(&grid, &p0, q0));
        let path = classical_evolve(&system, &z0, &[0.0, t], max_dt)?;
        let p = path.last().expect("two samples").p[0];
        m1 += p;
        m2 += p * p;
    }
    let n = n_samples as f64;
    Ok(RidgeMoments {
        field_mean_p,
        field_mean_p2,
        sample_mean_p: m1 / n,
        sample_mean_p2: m2 / n,
    })
}

/// Offset `s ∈ [0, dx]` at which a density rising linearly from `a` to `b`
/// over the cell has accumulated mass `w`.
fn invert_linear_cell(a: f64, b: f64, dx: f64, w: f64) -> f64 {
    let k = (b - a) / (2.0 * dx);
    // root of k s² + a s = w in the cell, in a form stable as k → 0
    let denom = a + (a * a + 4.0 * k * w).max(0.0).sqrt();
    (2.0 * w / denom.max(f64::MIN_POSITIVE)).clamp(0.0, dx)
}

/// Quantum-versus-classical fluid gaps at one `ħ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceRow {
    pub hbar: f64,
    pub sup_gap_rho: f64,
    /// Sup gap of `S̃ - S` after removing the constant offset at the
    /// density maximum.
    pub sup_gap_s: f64,
    pub mean_position_gap: f64,
}

#[derive(Clone, Debug)]
pub struct CorrespondenceReport {
    pub time: f64,
    pub rows: Vec<CorrespondenceRow>,
    /// Both gaps decrease strictly along the sweep.
    pub monotone: bool,
}

/// Initial data and solver controls for [`correspondence_experiment`].
#[derive(Clone, Debug)]
pub struct CorrespondenceSetup {
    pub initial: ClassicalHJState,
    pub time: f64,
    pub quantum_dt: f64,
    pub classical_dt: f64,
}

/// Evolves `ψ0 = √ρ0 exp(iS0/ħ)` by split-step and `(ρ0, S0)` by the
/// Hamilton–Jacobi solver, then compares the decomposed quantum fields with
/// the classical ones where the classical density exceeds the floor.
pub fn correspondence_experiment(setup: &CorrespondenceSetup, hbars: &[f64]) -> Result<CorrespondenceReport> {
    if hbars.is_empty() {
        return Err(Error::InvalidInput("empty hbar sweep".into()));
    }
    let init = &setup.initial;
    let grid = init.grid;
    let times = [0.0, setup.time];
    let classical = if setup.time > 0.0 {
        hj_evolve(init, &times, setup.classical_dt)?.last().expect("two samples").clone()
    } else {
        init.clone()
    };
    let floor = DENSITY_FLOOR * classical.rho.iter().cloned().fold(0.0, f64::max);
    let anchor = argmax(classical.rho.iter().cloned());
    let mut rows = Vec::with_capacity(hbars.len());
    for &hbar in hbars {
        let psi0 = GridWaveFunction::from_fields(grid, &init.rho, &init.s, hbar)?;
        let psi = if setup.time > 0.0 {
            let h = &init.hamiltonian;
            split_step_evolve(&psi0, h.mass, &h.potential, &times, setup.quantum_dt)?
                .last()
                .expect("two samples")
                .clone()
        } else {
            psi0
        };
        let fields = madelung_decompose(&psi);
        let offset = fields.s[anchor] - classical.s[anchor];
        let (mut gr, mut gs) = (0.0_f64, 0.0_f64);
        for j in 0..grid.n() {
            if classical.rho[j] > floor && fields.defined[j] {
                gr = gr.max((fields.rho[j] - classical.rho[j]).abs());
                gs = gs.max((fields.s[j] - classical.s[j] - offset).abs());
            }
        }
        rows.push(CorrespondenceRow {
            hbar,
            sup_gap_rho: gr,
            sup_gap_s: gs,
            mean_position_gap: (psi.mean_position() - classical.mean_position()).abs(),
        });
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].sup_gap_rho < w[0].sup_gap_rho && w[1].sup_gap_s < w[0].sup_gap_s);
    Ok(CorrespondenceReport {
        time: setup.time,
        rows,
        monotone,
    })
}
