//! Uniform periodic grids and FFT helpers.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result, C64, I};

/// Periodic grid `x_j = -X + j·dx`, `dx = 2X/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    extent: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("grid size must be even and >= 2, got {n}")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidInput(format!("grid extent must be positive, got {extent}")));
        }
        Ok(Self { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn length(&self) -> f64 {
        2.0 * self.extent
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.extent + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Angular wavenumbers in FFT order; the Nyquist mode is negative.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.length();
        (0..self.n).map(|j| signed_index(j, self.n) as f64 * dk).collect()
    }

    /// Fraction of `Σ|f|²` carried by the outermost `width` points on each side.
    pub fn edge_fraction(&self, f: &[C64], width: usize) -> f64 {
        let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let w = width.min(self.n / 2);
        let edge: f64 = f[..w].iter().chain(&f[self.n - w..]).map(|z| z.norm_sqr()).sum();
        edge / total
    }
}

/// Maps FFT index `j` to its signed frequency in `[-n/2, n/2)`.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Forward and inverse FFT plans of one size. Plans are immutable and may
/// be shared; scratch buffers are per call.
#[derive(Clone)]
pub struct FftPair {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("n", &self.n).finish()
    }
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized `Σ_j f_j e^{-2πi jk/n}`.
    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    /// `(1/n) Σ_k F_k e^{2πi jk/n}`.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Samples `f` at `j + shift` (in grid units) by trigonometric
    /// interpolation. Every mode, Nyquist included, gets a unit-modulus
    /// phase so a shift of `+s` is undone exactly by `-s`.
    pub fn shift(&self, buf: &mut [C64], shift: f64) {
        self.forward(buf);
        for (k, z) in buf.iter_mut().enumerate() {
            let freq = signed_index(k, self.n) as f64;
            *z *= (I * (2.0 * PI * freq * shift / self.n as f64)).exp();
        }
        self.inverse(buf);
    }

    /// `d^order f / dx^order` for samples with spacing `length / n`.
    pub fn derivative(&self, f: &[C64], length: f64, order: u32) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        let dk = 2.0 * PI / length;
        for (k, z) in buf.iter_mut().enumerate() {
            let idx = signed_index(k, self.n);
            // the Nyquist mode has no consistent odd derivative
            if order % 2 == 1 && idx == -(self.n as i64) / 2 {
                *z = C64::new(0.0, 0.0);
                continue;
            }
            *z *= (I * (idx as f64 * dk)).powu(order);
        }
        self.inverse(&mut buf);
        buf
    }
}

/// Diagonal matrix of grid points.
pub fn position_matrix(grid: &SpatialGrid) -> DMatrix<C64> {
    let d: Vec<C64> = grid.points().into_iter().map(|x| C64::new(x, 0.0)).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
}

/// `-iħ d/dx` as a dense spectral matrix, `F⁻¹ diag(ħk) F`.
pub fn momentum_matrix(grid: &SpatialGrid, hbar: f64) -> DMatrix<C64> {
    let n = grid.n();
    let k = grid.wavenumbers();
    // circulant: entry (a, l) depends only on (a - l) mod n
    let column: Vec<C64> = (0..n)
        .map(|d| {
            k.iter()
                .enumerate()
                .map(|(idx, kk)| hbar * kk * (I * (2.0 * PI * (idx * d) as f64 / n as f64)).exp())
                .sum::<C64>()
                / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |a, l| column[(a + n - l) % n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new(8, 2.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.points()[0], -2.0);
        assert_eq!(g.points()[7], 1.5);
        assert!(SpatialGrid::new(7, 1.0).is_err());
        assert!(SpatialGrid::new(8, 0.0).is_err());
        let k = g.wavenumbers();
        assert_eq!(k[4], -4.0 * 2.0 * PI / 4.0);
    }

    #[test]
    fn spectral_derivative_of_periodic_function() {
        let g = SpatialGrid::new(32, PI).unwrap();
        let f: Vec<C64> = g.points().iter().map(|&x| C64::new((2.0 * x).sin(), 0.0)).collect();
        let fft = FftPair::new(32);
        let d = fft.derivative(&f, g.length(), 1);
        for (x, z) in g.points().iter().zip(&d) {
            assert!((z.re - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
        let d2 = fft.derivative(&f, g.length(), 2);
        for (x, z) in g.points().iter().zip(&d2) {
            assert!((z.re + 4.0 * (2.0 * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn half_shift_round_trips() {
        let fft = FftPair::new(16);
        let orig: Vec<C64> = (0..16).map(|j| C64::new((j as f64).cos(), (j * j) as f64)).collect();
        let mut buf = orig.clone();
        fft.shift(&mut buf, 0.5);
        fft.shift(&mut buf, -0.5);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn momentum_matrix_is_hermitian_and_differentiates() {
        let g = SpatialGrid::new(16, PI).unwrap();
        let p = momentum_matrix(&g, 1.5);
        assert!((&p - p.adjoint()).iter().all(|z| z.norm() < 1e-12));
        let psi: Vec<C64> = g.points().iter().map(|&x| (I * 3.0 * x).exp()).collect();
        let out = &p * nalgebra::DVector::from_vec(psi.clone());
        for (o, v) in out.iter().zip(&psi) {
            assert!((o - v * 4.5).norm() < 1e-11);
        }
    }
}
