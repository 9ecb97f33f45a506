//! Position and momentum on truncated spaces, and state-wise checks of the
//! Galilean commutation relations.
//!
//! No finite matrices satisfy `[X, P] = iħI`: the trace of a commutator is
//! zero while `tr(iħI) = iħn`. Every relation below is therefore checked on
//! test states kept away from the truncation edge, never as a matrix
//! identity.

use std::fmt;

use nalgebra::DVector;

use crate::algebra::{AlgebraElement, HermitianSpectrum, StateVector};
use crate::grid::{momentum_matrix, position_matrix, SpatialGrid};
use crate::{Error, Result, C64, I};

/// Largest norm fraction a test state may carry in the edge region.
pub const EDGE_FRACTION_TOL: f64 = 1e-8;

/// How `X` and `P` are discretized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RepMode {
    /// `X` samples a periodic grid of half-width `extent`; `P` is the
    /// spectral derivative times `-iħ`.
    Grid { extent: f64 },
    /// `X = ℓ(a + a†)/√2` and `P = iħ(a† - a)/(ℓ√2)` on the lowest levels of
    /// an oscillator with length scale `ℓ`.
    Oscillator { length: f64 },
}

/// `X` and `P` on a finite space.
#[derive(Clone, Debug)]
pub struct TruncatedRep {
    mode: RepMode,
    size: usize,
    x: AlgebraElement,
    p: AlgebraElement,
    hbar: f64,
    mass: f64,
}

/// Builds `X` and `P` of dimension `size ≥ 4`.
pub fn build_rep(mode: RepMode, size: usize, hbar: f64, mass: f64) -> Result<TruncatedRep> {
    if size < 4 {
        return Err(Error::InvalidInput(format!("representation size must be at least 4, got {size}")));
    }
    for (name, v) in [("hbar", hbar), ("mass", mass)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    let (x, p) = match mode {
        RepMode::Grid { extent } => {
            let grid = SpatialGrid::new(size, extent)?;
            (
                AlgebraElement::from_matrix(position_matrix(&grid))?,
                AlgebraElement::from_matrix(momentum_matrix(&grid, hbar))?,
            )
        }
        RepMode::Oscillator { length } => {
            if !(length > 0.0 && length.is_finite()) {
                return Err(Error::InvalidInput(format!("oscillator length must be positive, got {length}")));
            }
            // a|k⟩ = √k |k-1⟩
            let a = AlgebraElement::from_fn(size, |i, j| {
                if j == i + 1 {
                    C64::new((j as f64).sqrt(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let ad = a.adjoint();
            let s = std::f64::consts::SQRT_2;
            (
                (&a + &ad).scale_real(length / s),
                (&ad - &a).scale(I * (hbar / (length * s))),
            )
        }
    };
    Ok(TruncatedRep {
        mode,
        size,
        x,
        p,
        hbar,
        mass,
    })
}

impl TruncatedRep {
    pub fn mode(&self) -> RepMode {
        self.mode
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn x(&self) -> &AlgebraElement {
        &self.x
    }

    pub fn p(&self) -> &AlgebraElement {
        &self.p
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Same mode and parameters at another size.
    pub fn resized(&self, size: usize) -> Result<Self> {
        build_rep(self.mode, size, self.hbar, self.mass)
    }

    /// Indices of the edge region: the outer eighth of the grid on each side,
    /// or the top quarter of the oscillator levels (at least two).
    pub fn edge_indices(&self) -> Vec<usize> {
        let n = self.size;
        match self.mode {
            RepMode::Grid { .. } => {
                let w = (n / 8).max(1);
                (0..w).chain(n - w..n).collect()
            }
            RepMode::Oscillator { .. } => (n - (n / 4).max(2)..n).collect(),
        }
    }

    /// Norm fraction of `psi` in the edge region.
    pub fn edge_fraction(&self, psi: &StateVector) -> f64 {
        let a = psi.amplitudes();
        self.edge_indices().into_iter().map(|k| a[k].norm_sqr()).sum::<f64>() / a.norm_squared()
    }

    /// Grid mode: normalized samples of `f`. Oscillator mode: normalized
    /// amplitudes `f(k)` on level `k`.
    pub fn state_from_fn(&self, f: impl Fn(f64) -> C64) -> Result<StateVector> {
        let amps: Vec<C64> = match self.mode {
            RepMode::Grid { extent } => SpatialGrid::new(self.size, extent)?.points().into_iter().map(f).collect(),
            RepMode::Oscillator { .. } => (0..self.size).map(|k| f(k as f64)).collect(),
        };
        StateVector::from_slice(&amps)
    }

    /// Gaussian `exp(-(x-x0)²/(4σ²) + i p0 x/ħ)` (grid mode) or the
    /// truncated coherent state with amplitudes `αᵏ/√k!` (oscillator mode,
    /// `α = (x0 + i p0 ℓ²/ħ)/(ℓ√2)`).
    pub fn gaussian_state(&self, x0: f64, p0: f64, sigma: f64) -> Result<StateVector> {
        let hbar = self.hbar;
        match self.mode {
            RepMode::Grid { .. } => self.state_from_fn(|x| {
                (-(x - x0).powi(2) / (4.0 * sigma * sigma) + I * (p0 * x / hbar)).exp()
            }),
            RepMode::Oscillator { length } => {
                let alpha = C64::new(x0, p0 * length * length / hbar) / (length * std::f64::consts::SQRT_2);
                let mut amp = C64::new(1.0, 0.0);
                let amps: Vec<C64> = (0..self.size)
                    .map(|k| {
                        if k > 0 {
                            amp *= alpha / (k as f64).sqrt();
                        }
                        amp
                    })
                    .collect();
                StateVector::from_slice(&amps)
            }
        }
    }

    fn check_states(&self, states: &[StateVector]) -> Result<()> {
        if states.is_empty() {
            return Err(Error::InvalidInput("no test states supplied".into()));
        }
        for (k, s) in states.iter().enumerate() {
            if s.dim() != self.size {
                return Err(Error::DimensionError(s.dim(), self.size));
            }
            let frac = self.edge_fraction(s);
            if frac >= EDGE_FRACTION_TOL {
                return Err(Error::PreconditionViolated(format!(
                    "test state {k} carries norm fraction {frac:.3e} on the truncation edge"
                )));
            }
        }
        Ok(())
    }
}

/// One checked relation on one test state.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationRow {
    pub relation_id: String,
    pub state_id: usize,
    pub residual: f64,
}

/// Residual table of a verification run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationReport {
    pub rows: Vec<RelationRow>,
}

impl RelationReport {
    fn push(&mut self, relation_id: &str, state_id: usize, residual: f64) {
        self.rows.push(RelationRow {
            relation_id: relation_id.to_string(),
            state_id,
            residual,
        });
    }

    pub fn extend(&mut self, other: RelationReport) {
        self.rows.extend(other.rows);
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    /// Largest residual of one relation, or `None` if it was not checked.
    pub fn max_for(&self, relation_id: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.relation_id == relation_id)
            .map(|r| r.residual)
            .reduce(f64::max)
    }

    pub fn relation_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !ids.contains(&r.relation_id.as_str()) {
                ids.push(&r.relation_id);
            }
        }
        ids
    }
}

impl fmt::Display for RelationReport {
    /// CSV with header `relation_id,state_id,residual`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relation_id,state_id,residual")?;
        for r in &self.rows {
            writeln!(f, "{},{},{:.16e}", r.relation_id, r.state_id, r.residual)?;
        }
        Ok(())
    }
}

/// `‖(A - B)ψ‖` for a commutator identity `A = B`.
fn residual(lhs: &AlgebraElement, rhs: &AlgebraElement, psi: &StateVector) -> f64 {
    let v: &DVector<C64> = psi.amplitudes();
    ((lhs - rhs).apply(v)).norm()
}

/// Checks `[X, P] = iħ` on each test state.
pub fn verify_ccr(rep: &TruncatedRep, states: &[StateVector]) -> Result<RelationReport> {
    rep.check_states(states)?;
    let comm = rep.x.bracket(&rep.p);
    let target = AlgebraElement::scalar(rep.size, I * rep.hbar);
    let mut report = RelationReport::default();
    for (k, s) in states.iter().enumerate() {
        report.push("ccr", k, residual(&comm, &target, s));
    }
    Ok(report)
}

/// `tr([X, P])`; zero in every finite representation.
pub fn ccr_trace(rep: &TruncatedRep) -> C64 {
    rep.x.bracket(&rep.p).trace()
}

/// Free-particle Galilean generators built from a representation.
#[derive(Clone, Debug)]
pub struct GalileanGenerators {
    rep: TruncatedRep,
    h: AlgebraElement,
}

impl GalileanGenerators {
    /// `H = P²/2m`.
    pub fn free(rep: TruncatedRep) -> Self {
        let h = (&rep.p * &rep.p).scale_real(0.5 / rep.mass);
        Self { rep, h }
    }

    /// `H = P²/2m + V(X)`, with `V` applied to the diagonal of `X` (grid mode only).
    pub fn with_potential(rep: TruncatedRep, v: impl Fn(f64) -> f64) -> Result<Self> {
        let RepMode::Grid { .. } = rep.mode else {
            return Err(Error::InvalidInput("potentials need the grid representation".into()));
        };
        let diag: Vec<f64> = (0..rep.size).map(|k| v(rep.x.get(k, k).re)).collect();
        let free = Self::free(rep);
        let h = &free.h + &AlgebraElement::real_diagonal(&diag);
        Ok(Self { h, ..free })
    }

    pub fn rep(&self) -> &TruncatedRep {
        &self.rep
    }

    pub fn hamiltonian(&self) -> &AlgebraElement {
        &self.h
    }

    /// Boost generator `G(t) = P t - m X`; the central term is set to zero.
    pub fn boost(&self, t: f64) -> AlgebraElement {
        &self.rep.p.scale_real(t) - &self.rep.x.scale_real(self.rep.mass)
    }

    /// Largest deviation from self-adjointness among `X`, `P`, `H` and
    /// `G(t)`, each relative to its largest entry (at least 1).
    pub fn max_adjoint_deviation(&self, t: f64) -> f64 {
        [&self.rep.x, &self.rep.p, &self.h, &self.boost(t)]
            .into_iter()
            .map(|a| a.max_abs_diff(&a.adjoint()) / a.max_abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// `U(ε) = exp(-iεT/ħ)`, whose first-order form is `I - i(ε/ħ)T`.
pub fn generator_unitary(generator: &AlgebraElement, eps: f64, hbar: f64) -> Result<AlgebraElement> {
    Ok(HermitianSpectrum::new(generator)?.unitary(eps / hbar))
}

/// Checks the boost and free-Hamiltonian relations at time `t`:
/// `[G, X] = -iħt`, `[P, G] = iħm`, `[H, G] = iħP`, `[H, P] = 0` and
/// `[H, X] = -(iħ/m) P`.
pub fn verify_boost_and_free_hamiltonian(
    g: &GalileanGenerators,
    t: f64,
    states: &[StateVector],
) -> Result<RelationReport> {
    let rep = &g.rep;
    rep.check_states(states)?;
    let (n, hbar, m) = (rep.size, rep.hbar, rep.mass);
    let boost = g.boost(t);
    let zero = AlgebraElement::zeros(n);
    let checks = [
        ("boost_position", boost.bracket(&rep.x), AlgebraElement::scalar(n, -I * hbar * t)),
        ("momentum_boost", rep.p.bracket(&boost), AlgebraElement::scalar(n, I * hbar * m)),
        ("hamiltonian_boost", g.h.bracket(&boost), rep.p.scale(I * hbar)),
        ("hamiltonian_momentum", g.h.bracket(&rep.p), zero),
        ("hamiltonian_position", g.h.bracket(&rep.x), rep.p.scale(-I * hbar / m)),
    ];
    let mut report = RelationReport::default();
    for (id, lhs, rhs) in &checks {
        for (k, s) in states.iter().enumerate() {
            report.push(id, k, residual(lhs, rhs, s));
        }
    }
    Ok(report)
}

/// Spin operators `(ħ/2) σ_k`.
pub fn spin_operators(hbar: f64) -> [AlgebraElement; 3] {
    [
        AlgebraElement::pauli_x().scale_real(hbar / 2.0),
        AlgebraElement::pauli_y().scale_real(hbar / 2.0),
        AlgebraElement::pauli_z().scale_real(hbar / 2.0),
    ]
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Checks `[S_j, S_k] = iħ ε_jkl S_l` on the spin factor and that
/// `X ⊗ I` and `P ⊗ I` commute with `I ⊗ S_k`. Residuals are matrix
/// sup norms; `state_id` is the spin index `k` (or `3j + k` for pairs).
pub fn verify_spin_block(rep: &TruncatedRep) -> RelationReport {
    let s = spin_operators(rep.hbar);
    let mut report = RelationReport::default();
    for j in 0..3 {
        for k in 0..3 {
            let mut rhs = AlgebraElement::zeros(2);
            for (l, sl) in s.iter().enumerate() {
                rhs = &rhs + &sl.scale(I * (rep.hbar * levi_civita(j, k, l)));
            }
            report.push("spin_algebra", 3 * j + k, s[j].bracket(&s[k]).max_abs_diff(&rhs));
        }
    }
    let id_space = AlgebraElement::identity(rep.size);
    let id_spin = AlgebraElement::identity(2);
    let x = rep.x.kron(&id_spin);
    let p = rep.p.kron(&id_spin);
    for (k, sk) in s.iter().enumerate() {
        let big = id_space.kron(sk);
        report.push("spin_position", k, x.bracket(&big).max_abs());
        report.push("spin_momentum", k, p.bracket(&big).max_abs());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_validation() {
        assert!(matches!(
            build_rep(RepMode::Grid { extent: 5.0 }, 3, 1.0, 1.0),
            Err(Error::InvalidInput(_))
        ));
        assert!(build_rep(RepMode::Oscillator { length: 1.0 }, 4, 1.0, 1.0).is_ok());
    }

    #[test]
    fn grid_mode_position_is_diagonal() {
        let rep = build_rep(RepMode::Grid { extent: 5.0 }, 64, 1.0, 1.0).unwrap();
        let pts = SpatialGrid::new(64, 5.0).unwrap().points();
        for (i, &xi) in pts.iter().enumerate() {
            for j in 0..64 {
                let want = if i == j { xi } else { 0.0 };
                assert_eq!(rep.x().get(i, j), C64::new(want, 0.0));
            }
        }
        assert!(rep.p().is_self_adjoint(1e-12));
        assert_eq!(ccr_trace(&rep), C64::new(0.0, 0.0));
    }

    #[test]
    fn oscillator_corner_obstruction() {
        let hbar = 0.7;
        let rep = build_rep(RepMode::Oscillator { length: 1.3 }, 5, hbar, 1.0).unwrap();
        assert!(rep.x().is_self_adjoint(1e-12) && rep.p().is_self_adjoint(1e-12));
        let c = rep.x().bracket(rep.p());
        let want = AlgebraElement::diagonal(&[1.0, 1.0, 1.0, 1.0, -4.0].map(|d| I * hbar * d));
        assert!(c.max_abs_diff(&want) < 1e-14);
        assert!(ccr_trace(&rep).norm() < 1e-14);
    }

    #[test]
    fn ccr_on_safe_states() {
        let rep = build_rep(RepMode::Grid { extent: 10.0 }, 128, 1.0, 1.0).unwrap();
        let psi = rep.gaussian_state(0.5, 0.3, 1.0).unwrap();
        assert!(verify_ccr(&rep, &[psi]).unwrap().max_residual() < 1e-8);

        let osc = build_rep(RepMode::Oscillator { length: 1.0 }, 16, 1.0, 1.0).unwrap();
        let low = osc.state_from_fn(|k| if k < 8.0 { C64::new(1.0 + k, -0.5 * k) } else { C64::new(0.0, 0.0) }).unwrap();
        assert!(verify_ccr(&osc, &[low]).unwrap().max_residual() < 1e-10);

        let top = StateVector::basis(16, 15);
        assert!(matches!(verify_ccr(&osc, &[top]), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn boost_relations() {
        let rep = build_rep(RepMode::Grid { extent: 10.0 }, 128, 1.0, 2.0).unwrap();
        let g = GalileanGenerators::free(rep.clone());
        let states = [rep.gaussian_state(0.0, 0.0, 1.0).unwrap(), rep.gaussian_state(-0.5, 0.5, 1.0).unwrap()];
        let at_zero = verify_boost_and_free_hamiltonian(&g, 0.0, &states).unwrap();
        assert!(at_zero.max_for("boost_position").unwrap() < 1e-12);
        let r = verify_boost_and_free_hamiltonian(&g, 0.8, &states).unwrap();
        assert!(r.max_residual() < 1e-7, "{r}");
        assert!(r.max_for("hamiltonian_momentum").unwrap() < 1e-10);
        assert_eq!(r.rows.len(), 10);
    }

    #[test]
    fn boost_unitary_shifts_momentum() {
        let (hbar, m, eps) = (0.8, 1.5, 0.3);
        let rep = build_rep(RepMode::Grid { extent: 10.0 }, 128, hbar, m).unwrap();
        let g = GalileanGenerators::free(rep.clone());
        assert!(g.max_adjoint_deviation(0.7) < 1e-12, "{}", g.max_adjoint_deviation(0.7));
        // U = exp(iεmX/ħ) for G(0) = -mX, so U†PU = P + εm
        let u = generator_unitary(&g.boost(0.0), eps, hbar).unwrap();
        let psi = rep.gaussian_state(0.4, -0.2, 1.0).unwrap();
        let before = psi.expectation(rep.p()).unwrap().re;
        let after = psi.transformed(&u).unwrap().expectation(rep.p()).unwrap().re;
        assert!((after - before - eps * m).abs() < 1e-9, "{before} {after}");
    }

    #[test]
    fn spin_block_relations() {
        let rep = build_rep(RepMode::Oscillator { length: 1.0 }, 4, 1.3, 1.0).unwrap();
        let r = verify_spin_block(&rep);
        assert!(r.max_for("spin_algebra").unwrap() < 1e-14);
        assert_eq!(r.max_for("spin_position").unwrap(), 0.0);
        assert_eq!(r.max_for("spin_momentum").unwrap(), 0.0);
        // [S_x, S_y] = iħ S_z by a direct 2x2 computation
        let [sx, sy, sz] = spin_operators(1.3);
        let xy = &(&sx * &sy) - &(&sy * &sx);
        assert!(xy.max_abs_diff(&sz.scale(I * 1.3)) < 1e-15);
    }

    #[test]
    fn report_csv() {
        let mut r = RelationReport::default();
        r.push("ccr", 0, 0.5);
        assert_eq!(r.to_string(), "relation_id,state_id,residual\nccr,0,5.0000000000000000e-1\n");
    }
}
