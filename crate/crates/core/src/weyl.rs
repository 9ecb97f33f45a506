//! Discrete Weyl–Wigner correspondence on a periodic phase-space grid.
//!
//! Conventions:
//! - An operator acts through its kernel as `(Aψ)_i = Σ_l K_il ψ_l dx`, so the
//!   identity has kernel `δ_il / dx`.
//! - `W(x, p) = Σ_b K(x + b/2, x - b/2) e^{-ipb/ħ} db` with `b = k·dx`,
//!   `k ∈ [-n/2, n/2)`. Odd `k` need the kernel at half-integer points, which
//!   are filled in by trigonometric interpolation along each diagonal.
//! - This normalization gives `W(I) = 1`, and the trace pairing is
//!   `tr(AB) = Σ A_W B_W · dx dp / (2πħ)`.
//! - The transform and its inverse need a Fourier-dual grid,
//!   `dx · dp · n = 2πħ`. Star products and brackets work on any grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::algebra::AlgebraElement;
use crate::dynamics::{substeps, validate_times, Trajectory};
use crate::grid::{momentum_matrix, position_matrix, FftPair, SpatialGrid};
use crate::{Error, Result, C64, I};

/// Boundary magnitude, relative to the sup norm, above which quantization
/// may alias.
pub const ALIASING_THRESHOLD: f64 = 1e-10;
/// Cauchy threshold of the regular-limit test.
pub const REGULAR_LIMIT_TOL: f64 = 1e-4;

/// Uniform phase-space grid with `nx × np` points and Planck constant `hbar`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpaceGrid {
    nx: usize,
    np: usize,
    x_extent: f64,
    p_extent: f64,
    hbar: f64,
}

impl PhaseSpaceGrid {
    pub fn new(nx: usize, np: usize, x_extent: f64, p_extent: f64, hbar: f64) -> Result<Self> {
        for n in [nx, np] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::InvalidInput(format!("grid size {n} is not a power of two")));
            }
        }
        for (name, v) in [("x_extent", x_extent), ("p_extent", p_extent), ("hbar", hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            nx,
            np,
            x_extent,
            p_extent,
            hbar,
        })
    }

    /// Fourier-dual grid: `np = nx` and `dp = 2πħ / (nx · dx)`.
    pub fn dual(n: usize, x_extent: f64, hbar: f64) -> Result<Self> {
        let p_extent = PI * hbar * n as f64 / (2.0 * x_extent);
        Self::new(n, n, x_extent, p_extent, hbar)
    }

    /// Dual grid with equal extents, `X = P = sqrt(π ħ n / 2)`.
    pub fn balanced(n: usize, hbar: f64) -> Result<Self> {
        Self::dual(n, (PI * hbar * n as f64 / 2.0).sqrt(), hbar)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn x_extent(&self) -> f64 {
        self.x_extent
    }

    pub fn p_extent(&self) -> f64 {
        self.p_extent
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_extent / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_extent / self.np as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.x_extent + j as f64 * self.dx()
    }

    pub fn p(&self, m: usize) -> f64 {
        -self.p_extent + m as f64 * self.dp()
    }

    pub fn spatial(&self) -> SpatialGrid {
        SpatialGrid::new(self.nx, self.x_extent).expect("validated at construction")
    }

    pub fn is_dual(&self) -> bool {
        let target = 2.0 * PI * self.hbar;
        self.nx == self.np && (self.dx() * self.dp() * self.nx as f64 - target).abs() <= 1e-12 * target
    }

    /// Same sampling points with a different `ħ`; the result is generally not dual.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::new(self.nx, self.np, self.x_extent, self.p_extent, hbar)
    }

    /// Cell measure `dx dp / (2πħ)` of the trace pairing.
    pub fn cell_weight(&self) -> f64 {
        self.dx() * self.dp() / (2.0 * PI * self.hbar)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Polynomial `Σ c_ij x^i p^j` with complex coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<(u32, u32), C64>,
}

impl Poly {
    pub fn monomial(i: u32, j: u32, c: C64) -> Self {
        let mut p = Self::default();
        p.push(i, j, c);
        p
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, C64::new(1.0, 0.0))
    }

    pub fn p() -> Self {
        Self::monomial(0, 1, C64::new(1.0, 0.0))
    }

    /// `c0 + cx x + cp p + cxx x² + cxp xp + cpp p²` with real coefficients.
    pub fn quadratic(c: [f64; 6]) -> Self {
        let powers = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        let mut p = Self::default();
        for ((i, j), v) in powers.into_iter().zip(c) {
            p.push(i, j, C64::new(v, 0.0));
        }
        p
    }

    fn push(&mut self, i: u32, j: u32, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry((i, j)).or_default();
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&(i, j));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn max_x_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    pub fn max_p_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.1).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, p: f64) -> C64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c * x.powi(i as i32) * p.powi(j as i32))
            .sum()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (&(i, j), &c) in &other.terms {
            out.push(i, j, c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Poly {
        let mut out = Poly::default();
        for (&(i, j), &c) in &self.terms {
            out.push(i, j, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (&(i1, j1), &c1) in &self.terms {
            for (&(i2, j2), &c2) in &other.terms {
                out.push(i1 + i2, j1 + j2, c1 * c2);
            }
        }
        out
    }

    /// `∂x^a ∂p^b`.
    pub fn partial(&self, a: u32, b: u32) -> Poly {
        let falling = |n: u32, k: u32| -> f64 { (0..k).map(|t| (n - t) as f64).product() };
        let mut out = Poly::default();
        for (&(i, j), &c) in &self.terms {
            if i >= a && j >= b {
                out.push(i - a, j - b, c * falling(i, a) * falling(j, b));
            }
        }
        out
    }

    /// Exact Moyal product; the series terminates for polynomials.
    pub fn star(&self, other: &Poly, hbar: f64) -> Poly {
        let order = self.degree().min(other.degree());
        let mut out = Poly::default();
        for n in 0..=order {
            let pref = (I * hbar / 2.0).powu(n) / factorial(n);
            for k in 0..=n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let c = pref * binomial(n, k) * sign;
                let term = self.partial(n - k, k).mul(&other.partial(k, n - k));
                out = out.add(&term.scale(c));
            }
        }
        out
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Complex field on a phase-space grid, optionally tagged with an exact
/// polynomial form that the star product can use analytically.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    grid: PhaseSpaceGrid,
    values: DMatrix<C64>,
    poly: Option<Poly>,
}

impl WignerField {
    pub fn from_values(grid: PhaseSpaceGrid, values: DMatrix<C64>) -> Result<Self> {
        if values.nrows() != grid.nx || values.ncols() != grid.np {
            return Err(Error::GridMismatch(format!(
                "values are {}x{}, grid is {}x{}",
                values.nrows(),
                values.ncols(),
                grid.nx,
                grid.np
            )));
        }
        Ok(Self {
            grid,
            values,
            poly: None,
        })
    }

    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> C64) -> Self {
        let values = DMatrix::from_fn(grid.nx, grid.np, |j, m| f(grid.x(j), grid.p(m)));
        Self {
            grid,
            values,
            poly: None,
        }
    }

    pub fn from_real_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, p| C64::new(f(x, p), 0.0))
    }

    pub fn polynomial(grid: PhaseSpaceGrid, poly: Poly) -> Self {
        let mut w = Self::from_fn(grid, |x, p| poly.eval(x, p));
        w.poly = Some(poly);
        w
    }

    pub fn constant(grid: PhaseSpaceGrid, c: C64) -> Self {
        Self::polynomial(grid, Poly::constant(c))
    }

    pub fn position(grid: PhaseSpaceGrid) -> Self {
        Self::polynomial(grid, Poly::x())
    }

    pub fn momentum(grid: PhaseSpaceGrid) -> Self {
        Self::polynomial(grid, Poly::p())
    }

    /// `p²/2m + mω²x²/2`.
    pub fn harmonic_hamiltonian(grid: PhaseSpaceGrid, mass: f64, omega: f64) -> Self {
        let k = 0.5 * mass * omega * omega;
        Self::polynomial(grid, Poly::quadratic([0.0, 0.0, 0.0, k, 0.0, 0.5 / mass]))
    }

    /// `exp(-((x-x0)² + (p-p0)²)/(2σ²))`, independent of `ħ`.
    pub fn gaussian(grid: PhaseSpaceGrid, x0: f64, p0: f64, sigma: f64) -> Self {
        let s2 = 2.0 * sigma * sigma;
        Self::from_real_fn(grid, |x, p| (-((x - x0).powi(2) + (p - p0).powi(2)) / s2).exp())
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    pub fn poly(&self) -> Option<&Poly> {
        self.poly.as_ref()
    }

    pub fn get(&self, j: usize, m: usize) -> C64 {
        self.values[(j, m)]
    }

    /// Drops the polynomial tag, forcing sampled arithmetic.
    pub fn sampled(&self) -> Self {
        Self {
            poly: None,
            ..self.clone()
        }
    }

    /// Same values on the grid with a different `ħ`.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Ok(Self {
            grid: self.grid.with_hbar(hbar)?,
            ..self.clone()
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// Sup norm over the central half of the grid in each direction.
    pub fn interior_max_abs(&self) -> f64 {
        let (nx, np) = (self.grid.nx, self.grid.np);
        let mut worst = 0.0_f64;
        for j in nx / 4..3 * nx / 4 {
            for m in np / 4..3 * np / 4 {
                worst = worst.max(self.values[(j, m)].norm());
            }
        }
        worst
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |a, z| a.max(z.im.abs()))
    }

    /// Largest magnitude on the outermost rows and columns.
    pub fn boundary_max(&self) -> f64 {
        let (nx, np) = (self.grid.nx, self.grid.np);
        let mut worst = 0.0_f64;
        for j in 0..nx {
            worst = worst.max(self.values[(j, 0)].norm()).max(self.values[(j, np - 1)].norm());
        }
        for m in 0..np {
            worst = worst.max(self.values[(0, m)].norm()).max(self.values[(nx - 1, m)].norm());
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &WignerField) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |a, (u, v)| a.max((u - v).norm()))
    }

    fn combine(&self, other: &WignerField, f: impl Fn(C64, C64) -> C64, poly: Option<Poly>) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.zip_map(&other.values, f);
        Ok(Self {
            grid: self.grid,
            values,
            poly,
        })
    }

    pub fn add(&self, other: &WignerField) -> Result<Self> {
        let poly = both(self, other).map(|(a, b)| a.add(b));
        self.combine(other, |a, b| a + b, poly)
    }

    pub fn sub(&self, other: &WignerField) -> Result<Self> {
        let poly = both(self, other).map(|(a, b)| a.add(&b.scale(C64::new(-1.0, 0.0))));
        self.combine(other, |a, b| a - b, poly)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &WignerField) -> Result<Self> {
        let poly = both(self, other).map(|(a, b)| a.mul(b));
        self.combine(other, |a, b| a * b, poly)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.map(|z| z * c),
            poly: self.poly.as_ref().map(|p| p.scale(c)),
        }
    }

    /// `∂x^a ∂p^b`, analytic for polynomial fields and spectral otherwise.
    pub fn partial(&self, a: u32, b: u32) -> Self {
        match &self.poly {
            Some(poly) => Self::polynomial(self.grid, poly.partial(a, b)),
            None => Self {
                grid: self.grid,
                values: spectral_partial(&self.grid, &self.values, a, b),
                poly: None,
            },
        }
    }

    /// `∫ A_W dx dp / (2πħ)`, the operator trace.
    pub fn trace(&self) -> C64 {
        self.values.sum() * self.grid.cell_weight()
    }
}

fn both<'a>(a: &'a WignerField, b: &'a WignerField) -> Option<(&'a Poly, &'a Poly)> {
    Some((a.poly.as_ref()?, b.poly.as_ref()?))
}

/// `tr(AB) = Σ A_W B_W · dx dp / (2πħ)`.
pub fn trace_pairing(a: &WignerField, b: &WignerField) -> Result<C64> {
    a.grid.check_same(&b.grid)?;
    Ok(a.values.component_mul(&b.values).sum() * a.grid.cell_weight())
}

fn spectral_partial(grid: &PhaseSpaceGrid, v: &DMatrix<C64>, a: u32, b: u32) -> DMatrix<C64> {
    let mut out = v.clone();
    if a > 0 {
        let fft = FftPair::new(grid.nx);
        let len = 2.0 * grid.x_extent;
        for m in 0..grid.np {
            let col: Vec<C64> = out.column(m).iter().cloned().collect();
            let d = fft.derivative(&col, len, a);
            out.column_mut(m).iter_mut().zip(d).for_each(|(o, z)| *o = z);
        }
    }
    if b > 0 {
        let fft = FftPair::new(grid.np);
        let len = 2.0 * grid.p_extent;
        for j in 0..grid.nx {
            let row: Vec<C64> = out.row(j).iter().cloned().collect();
            let d = fft.derivative(&row, len, b);
            out.row_mut(j).iter_mut().zip(d).for_each(|(o, z)| *o = z);
        }
    }
    out
}

/// Operator kernel sampled on a spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorKernel {
    grid: SpatialGrid,
    k: DMatrix<C64>,
}

impl OperatorKernel {
    pub fn new(grid: SpatialGrid, k: DMatrix<C64>) -> Result<Self> {
        if k.nrows() != grid.n() || k.ncols() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "kernel is {}x{}, grid has {} points",
                k.nrows(),
                k.ncols(),
                grid.n()
            )));
        }
        Ok(Self { grid, k })
    }

    /// Kernel of the operator with matrix `m` acting on grid samples.
    pub fn from_operator(grid: SpatialGrid, m: &AlgebraElement) -> Result<Self> {
        Self::new(grid, m.matrix() / C64::new(grid.dx(), 0.0))
    }

    pub fn identity(grid: SpatialGrid) -> Self {
        Self {
            grid,
            k: DMatrix::identity(grid.n(), grid.n()) / C64::new(grid.dx(), 0.0),
        }
    }

    pub fn position(grid: SpatialGrid) -> Self {
        Self {
            grid,
            k: position_matrix(&grid) / C64::new(grid.dx(), 0.0),
        }
    }

    /// `-iħ d/dx` by spectral differentiation.
    pub fn momentum(grid: SpatialGrid, hbar: f64) -> Self {
        Self {
            grid,
            k: momentum_matrix(&grid, hbar) / C64::new(grid.dx(), 0.0),
        }
    }

    /// `ψ ψ*` after normalizing `Σ|ψ|² dx = 1`.
    pub fn pure_state(grid: SpatialGrid, psi: &[C64]) -> Result<Self> {
        if psi.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} samples on a {}-point grid",
                psi.len(),
                grid.n()
            )));
        }
        let norm = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("wave function has zero norm".into()));
        }
        let v = DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Ok(Self {
            grid,
            k: &v * v.adjoint(),
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &DMatrix<C64> {
        &self.k
    }

    /// Matrix acting on grid samples, `K · dx`.
    pub fn operator(&self) -> AlgebraElement {
        AlgebraElement::wrap(&self.k * C64::new(self.grid.dx(), 0.0))
    }

    /// Kernel of the product `AB`.
    pub fn compose(&self, other: &OperatorKernel) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("kernels on different grids".into()));
        }
        Ok(Self {
            grid: self.grid,
            k: &self.k * &other.k * C64::new(self.grid.dx(), 0.0),
        })
    }

    pub fn trace(&self) -> C64 {
        self.k.trace() * self.grid.dx()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        let scale = self.k.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
        (&self.k - self.k.adjoint()).iter().all(|z| z.norm() <= tol * scale)
    }

    pub fn max_abs_diff(&self, other: &OperatorKernel) -> f64 {
        self.k
            .iter()
            .zip(other.k.iter())
            .fold(0.0, |a, (u, v)| a.max((u - v).norm()))
    }
}

fn require_dual(kernel_grid: &SpatialGrid, grid: &PhaseSpaceGrid) -> Result<()> {
    if !grid.is_dual() {
        return Err(Error::GridMismatch(
            "Wigner transform requires a Fourier-dual phase-space grid".into(),
        ));
    }
    if kernel_grid.n() != grid.nx || (kernel_grid.extent() - grid.x_extent).abs() > 1e-12 * grid.x_extent {
        return Err(Error::GridMismatch(format!(
            "kernel grid ({} points, extent {}) does not match phase-space grid ({} points, extent {})",
            kernel_grid.n(),
            kernel_grid.extent(),
            grid.nx,
            grid.x_extent
        )));
    }
    Ok(())
}

fn offsets(n: usize) -> impl Iterator<Item = i64> {
    let h = (n / 2) as i64;
    -h..h
}

/// Wigner symbol of a kernel on a Fourier-dual grid.
pub fn wigner_transform(kernel: &OperatorKernel, grid: &PhaseSpaceGrid) -> Result<WignerField> {
    require_dual(&kernel.grid, grid)?;
    let n = grid.nx;
    let ni = n as i64;
    let fft = FftPair::new(n);
    // f[(j, k mod n)] = K(j + k/2, j - k/2)
    let mut f = DMatrix::<C64>::zeros(n, n);
    let mut diag = vec![C64::new(0.0, 0.0); n];
    for k in offsets(n) {
        for (a, d) in diag.iter_mut().enumerate() {
            *d = kernel.k[(a, (a as i64 - k).rem_euclid(ni) as usize)];
        }
        // diag is centred at a - k/2; sample it at a = j + k/2
        let base = if k % 2 == 0 {
            k / 2
        } else {
            fft.shift(&mut diag, 0.5);
            (k - 1) / 2
        };
        let col = k.rem_euclid(ni) as usize;
        for j in 0..n {
            f[(j, col)] = diag[(j as i64 + base).rem_euclid(ni) as usize];
        }
    }
    // W(j, m) = dx Σ_k (-1)^k f(j, k) e^{-2πi mk/n}, using p_m = (m - n/2)·dp
    let dx = grid.dx();
    let mut values = DMatrix::<C64>::zeros(n, n);
    let mut row = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for (k, r) in row.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *r = f[(j, k)] * sign * dx;
        }
        fft.forward(&mut row);
        for (m, r) in row.iter().enumerate() {
            values[(j, m)] = *r;
        }
    }
    WignerField::from_values(*grid, values)
}

/// Result of Weyl quantization with the aliasing guard.
#[derive(Clone, Debug)]
pub struct Quantized {
    pub kernel: OperatorKernel,
    /// Boundary magnitude of the symbol when it exceeds [`ALIASING_THRESHOLD`]
    /// times its sup norm.
    pub aliasing_risk: Option<f64>,
}

/// Inverse of [`wigner_transform`].
pub fn weyl_quantize(w: &WignerField) -> Result<Quantized> {
    let grid = &w.grid;
    let spatial = grid.spatial();
    require_dual(&spatial, grid)?;
    let n = grid.nx;
    let ni = n as i64;
    let fft = FftPair::new(n);
    let dx = grid.dx();
    let mut f = DMatrix::<C64>::zeros(n, n);
    let mut row = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for (m, r) in row.iter_mut().enumerate() {
            *r = w.values[(j, m)];
        }
        fft.inverse(&mut row);
        for (k, r) in row.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            f[(j, k)] = r * sign / dx;
        }
    }
    let mut k_mat = DMatrix::<C64>::zeros(n, n);
    let mut diag = vec![C64::new(0.0, 0.0); n];
    for k in offsets(n) {
        let col = k.rem_euclid(ni) as usize;
        let base = if k % 2 == 0 { k / 2 } else { (k - 1) / 2 };
        for (a, d) in diag.iter_mut().enumerate() {
            *d = f[((a as i64 - base).rem_euclid(ni) as usize, col)];
        }
        if k % 2 != 0 {
            fft.shift(&mut diag, -0.5);
        }
        for (a, d) in diag.iter().enumerate() {
            k_mat[(a, (a as i64 - k).rem_euclid(ni) as usize)] = *d;
        }
    }
    let boundary = w.boundary_max();
    Ok(Quantized {
        kernel: OperatorKernel::new(spatial, k_mat)?,
        aliasing_risk: (boundary > ALIASING_THRESHOLD * w.max_abs()).then_some(boundary),
    })
}

/// `A ⋆ B`, the symbol of the operator product.
///
/// Polynomial pairs use the terminating Moyal series exactly. A polynomial
/// against a sampled field uses the same finite series with spectral
/// derivatives of the sampled factor. Two sampled fields are multiplied by
/// twisted convolution of their Fourier modes, with output modes outside the
/// grid band discarded.
pub fn star_product(a: &WignerField, b: &WignerField) -> Result<WignerField> {
    a.grid.check_same(&b.grid)?;
    let hbar = a.grid.hbar;
    match (&a.poly, &b.poly) {
        (Some(pa), Some(pb)) => Ok(WignerField::polynomial(a.grid, pa.star(pb, hbar))),
        (Some(pa), None) => Ok(series_product(pa, b, hbar, true, false)),
        (None, Some(pb)) => Ok(series_product(pb, a, hbar, false, false)),
        (None, None) => Ok(twisted_convolution(a, b)),
    }
}

/// Moyal series with one polynomial factor. With `odd_only`, returns
/// `f⋆g - g⋆f` instead, which keeps only the odd orders (doubled).
fn series_product(poly: &Poly, field: &WignerField, hbar: f64, poly_left: bool, odd_only: bool) -> WignerField {
    let grid = field.grid;
    let mut cache: BTreeMap<(u32, u32), DMatrix<C64>> = BTreeMap::new();
    let mut acc = DMatrix::<C64>::zeros(grid.nx, grid.np);
    for n in 0..=poly.degree() {
        if odd_only && n % 2 == 0 {
            continue;
        }
        let pref = (I * hbar / 2.0).powu(n) / factorial(n) * if odd_only { 2.0 } else { 1.0 };
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            // left factor takes ∂x^{n-k} ∂p^k, right factor ∂p^{n-k} ∂x^k
            let (poly_ord, field_ord) = if poly_left {
                ((n - k, k), (k, n - k))
            } else {
                ((k, n - k), (n - k, k))
            };
            let dpoly = poly.partial(poly_ord.0, poly_ord.1);
            if dpoly.terms.is_empty() {
                continue;
            }
            let dfield = cache
                .entry(field_ord)
                .or_insert_with(|| spectral_partial(&grid, &field.values, field_ord.0, field_ord.1));
            let c = pref * binomial(n, k) * sign;
            for m in 0..grid.np {
                let p = grid.p(m);
                for j in 0..grid.nx {
                    acc[(j, m)] += c * dpoly.eval(grid.x(j), p) * dfield[(j, m)];
                }
            }
        }
    }
    WignerField {
        grid,
        values: acc,
        poly: None,
    }
}

fn fft2(values: &DMatrix<C64>, inverse: bool) -> DMatrix<C64> {
    let (nx, np) = values.shape();
    let (fx, fp) = (FftPair::new(nx), FftPair::new(np));
    let mut out = values.clone();
    let mut buf = vec![C64::new(0.0, 0.0); nx.max(np)];
    for m in 0..np {
        let b = &mut buf[..nx];
        b.iter_mut().zip(out.column(m).iter()).for_each(|(d, s)| *d = *s);
        if inverse {
            fx.inverse(b)
        } else {
            fx.forward(b)
        }
        out.column_mut(m).iter_mut().zip(b.iter()).for_each(|(d, s)| *d = *s);
    }
    for j in 0..nx {
        let b = &mut buf[..np];
        b.iter_mut().zip(out.row(j).iter()).for_each(|(d, s)| *d = *s);
        if inverse {
            fp.inverse(b)
        } else {
            fp.forward(b)
        }
        out.row_mut(j).iter_mut().zip(b.iter()).for_each(|(d, s)| *d = *s);
    }
    out
}

fn twisted_convolution(a: &WignerField, b: &WignerField) -> WignerField {
    let grid = a.grid;
    let (nx, np) = (grid.nx, grid.np);
    let hbar = grid.hbar;
    let norm = (nx * np) as f64;
    // spectra in centred order: index i holds signed frequency i - n/2
    let centre = |m: &DMatrix<C64>| {
        DMatrix::from_fn(nx, np, |i, l| {
            m[((i + nx / 2) % nx, (l + np / 2) % np)] / norm
        })
    };
    let fa = centre(&fft2(&a.values, false));
    let fb = centre(&fft2(&b.values, false));
    let s: Vec<f64> = (0..nx)
        .map(|i| 2.0 * PI * (i as f64 - (nx / 2) as f64) / (2.0 * grid.x_extent))
        .collect();
    let r: Vec<f64> = (0..np)
        .map(|l| 2.0 * PI * (l as f64 - (np / 2) as f64) / (2.0 * grid.p_extent))
        .collect();
    // e[(i, l)] = exp(-iħ/2 · s_i r_l)
    let e = DMatrix::from_fn(nx, np, |i, l| (-I * (0.5 * hbar * s[i] * r[l])).exp());
    let cutoff = fa.iter().fold(0.0_f64, |m, z| m.max(z.norm())) * 1e-18;
    let mut c = DMatrix::<C64>::zeros(nx, np);
    let (hx, hp) = ((nx / 2) as i64, (np / 2) as i64);
    for l1 in 0..np {
        for i1 in 0..nx {
            let f = fa[(i1, l1)];
            if f.norm() <= cutoff {
                continue;
            }
            let (da, db) = (i1 as i64 - hx, l1 as i64 - hp);
            // output index i1 + i2 - n/2 must stay on the grid
            let i2_lo = (-da).max(0) as usize;
            let i2_hi = (nx as i64 - da).min(nx as i64) as usize;
            let l2_lo = (-db).max(0) as usize;
            let l2_hi = (np as i64 - db).min(np as i64) as usize;
            for l2 in l2_lo..l2_hi {
                let lo = (l2 as i64 + db) as usize;
                // phase exp(-iħ/2 (s1 r2 - r1 s2)) = e(i1, l2) · conj(e(i2, l1))
                let g = f * e[(i1, l2)];
                for i2 in i2_lo..i2_hi {
                    let io = (i2 as i64 + da) as usize;
                    c[(io, lo)] += g * fb[(i2, l2)] * e[(i2, l1)].conj();
                }
            }
        }
    }
    let uncentred = DMatrix::from_fn(nx, np, |i, l| {
        c[((i + nx / 2) % nx, (l + np / 2) % np)] * norm
    });
    WignerField {
        grid,
        values: fft2(&uncentred, true),
        poly: None,
    }
}

/// `(-iħ)⁻¹ (A⋆B - B⋆A)`.
pub fn moyal_bracket(a: &WignerField, b: &WignerField) -> Result<WignerField> {
    a.grid.check_same(&b.grid)?;
    let hbar = a.grid.hbar;
    let inv_beta = (-I * hbar).inv();
    match (&a.poly, &b.poly) {
        (Some(pa), Some(pb)) => {
            let comm = pa.star(pb, hbar).add(&pb.star(pa, hbar).scale(C64::new(-1.0, 0.0)));
            Ok(WignerField::polynomial(a.grid, comm.scale(inv_beta)))
        }
        (Some(pa), None) => Ok(series_product(pa, b, hbar, true, true).scale(inv_beta)),
        (None, Some(pb)) => Ok(series_product(pb, a, hbar, true, true).scale(-inv_beta)),
        (None, None) => {
            let ab = twisted_convolution(a, b);
            let ba = twisted_convolution(b, a);
            Ok(ab.sub(&ba)?.scale(inv_beta))
        }
    }
}

/// `f_p g_x - g_p f_x`.
pub fn classical_bracket(f: &WignerField, g: &WignerField) -> Result<WignerField> {
    let fx = f.partial(1, 0);
    let fp = f.partial(0, 1);
    let gx = g.partial(1, 0);
    let gp = g.partial(0, 1);
    fp.mul(&gx)?.sub(&gp.mul(&fx)?)
}

/// Interior sup norm of `f⋆g - fg + (iħ/2){f, g}_cl`.
pub fn semiclassical_expansion_residual(f: &WignerField, g: &WignerField) -> Result<f64> {
    let hbar = f.grid.hbar;
    let star = star_product(f, g)?;
    let pb = classical_bracket(f, g)?;
    let r = star.sub(&f.mul(g)?)?.add(&pb.scale(I * (hbar / 2.0)))?;
    Ok(r.interior_max_abs())
}

/// Slope of `log(y)` against `log(x)` by least squares.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput("need at least two points of equal length".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::NumericsError("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Outcome of the `ħ → 0` membership test.
#[derive(Clone, Debug)]
pub struct RegularLimitReport {
    pub hbars: Vec<f64>,
    /// Sup-norm distance between consecutive members.
    pub cauchy_gaps: Vec<f64>,
    pub sup_norms: Vec<f64>,
    /// Sup norm of the spectral gradient of each member.
    pub gradient_norms: Vec<f64>,
    pub converged: bool,
    pub regular: bool,
    /// The smallest-`ħ` member, standing in for the limit.
    pub limit: WignerField,
}

/// Tests whether a family indexed by decreasing `ħ` converges to a smooth
/// limit: the last consecutive gap must fall below [`REGULAR_LIMIT_TOL`] and
/// the gradients must stay bounded.
pub fn regular_limit_check(family: &[WignerField]) -> Result<RegularLimitReport> {
    if family.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "regular limit needs at least 4 members, got {}",
            family.len()
        )));
    }
    let shape = |w: &WignerField| (w.grid.nx, w.grid.np, w.grid.x_extent, w.grid.p_extent);
    if family.iter().any(|w| shape(w) != shape(&family[0])) {
        return Err(Error::GridMismatch("family members sampled on different grids".into()));
    }
    let hbars: Vec<f64> = family.iter().map(|w| w.grid.hbar).collect();
    if hbars.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("hbar values must decrease".into()));
    }
    let cauchy_gaps: Vec<f64> = family.windows(2).map(|w| w[0].max_abs_diff(&w[1])).collect();
    let sup_norms: Vec<f64> = family.iter().map(WignerField::max_abs).collect();
    let gradient_norms: Vec<f64> = family
        .iter()
        .map(|w| {
            let w = w.sampled();
            w.partial(1, 0).max_abs().max(w.partial(0, 1).max_abs())
        })
        .collect();
    let last_gap = *cauchy_gaps.last().expect("at least three gaps");
    let converged = last_gap < REGULAR_LIMIT_TOL && last_gap <= cauchy_gaps[0];
    let grad_growth = gradient_norms.last().unwrap() / gradient_norms[0].max(f64::MIN_POSITIVE);
    Ok(RegularLimitReport {
        hbars,
        cauchy_gaps,
        sup_norms,
        gradient_norms,
        converged,
        regular: converged && grad_growth < 10.0,
        limit: family.last().unwrap().clone(),
    })
}

/// Interior sup-norm gap between `{f, g}_M` and `{f, g}_cl` at each `ħ`.
pub fn moyal_classical_gaps(f: &WignerField, g: &WignerField, hbars: &[f64]) -> Result<Vec<f64>> {
    hbars
        .iter()
        .map(|&h| {
            let (fh, gh) = (f.with_hbar(h)?, g.with_hbar(h)?);
            let m = moyal_bracket(&fh, &gh)?;
            let c = classical_bracket(&fh, &gh)?;
            Ok(m.sub(&c)?.interior_max_abs())
        })
        .collect()
}

/// Which evolution law a Wigner field follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    /// Observable symbols: `dA/dt = {H, A}_M`.
    Observable,
    /// State symbols (density kernels): `dρ/dt = -{H, ρ}_M`.
    State,
}

/// RK4 integration of the Moyal equation sampled at `t_grid`.
pub fn moyal_evolve(
    h: &WignerField,
    w0: &WignerField,
    t_grid: &[f64],
    max_dt: f64,
    picture: Picture,
) -> Result<Trajectory<WignerField>> {
    h.grid.check_same(&w0.grid)?;
    validate_times(t_grid)?;
    if !(max_dt > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {max_dt}")));
    }
    let sign = match picture {
        Picture::Observable => 1.0,
        Picture::State => -1.0,
    };
    let rhs = |w: &WignerField| -> Result<WignerField> {
        Ok(moyal_bracket(h, w)?.scale(C64::new(sign, 0.0)))
    };
    let mut w = w0.sampled();
    let mut values = vec![w.clone()];
    for span in t_grid.windows(2) {
        let (steps, dt) = substeps(span[1] - span[0], max_dt);
        for _ in 0..steps {
            let k1 = rhs(&w)?;
            let k2 = rhs(&w.add(&k1.scale(C64::new(dt / 2.0, 0.0)))?)?;
            let k3 = rhs(&w.add(&k2.scale(C64::new(dt / 2.0, 0.0)))?)?;
            let k4 = rhs(&w.add(&k3.scale(C64::new(dt, 0.0)))?)?;
            let incr = k1.add(&k2.scale(C64::new(2.0, 0.0)))?.add(&k3.scale(C64::new(2.0, 0.0)))?.add(&k4)?;
            w = w.add(&incr.scale(C64::new(dt / 6.0, 0.0)))?;
        }
        values.push(w.clone());
    }
    Trajectory::new(t_grid.to_vec(), values)
}

/// Gaussian wave packet `(πσ²)^{-1/4} exp(-(x-x0)²/(2σ²) + i p0 x/ħ)` sampled
/// on a grid and normalized with `Σ|ψ|² dx = 1`.
pub fn gaussian_packet(grid: &SpatialGrid, x0: f64, p0: f64, sigma: f64, hbar: f64) -> Vec<C64> {
    let raw: Vec<C64> = grid
        .points()
        .iter()
        .map(|&x| (-(x - x0).powi(2) / (2.0 * sigma * sigma) + I * (p0 * x / hbar)).exp())
        .collect();
    let norm = (raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
    raw.into_iter().map(|z| z / norm).collect()
}
