use std::f64::consts::PI;

use ncham_core::dynamics::{classical_evolve_rk4, heisenberg_evolve, ClassicalHamiltonianSystem, Gahs, PhasePoint};
use ncham_core::galilean::{build_rep, RepMode, EDGE_FRACTION_TOL};
use ncham_core::symplectic::QuantumSymplectic;
use ncham_core::Error;

use super::{csv, time_grid};
use crate::config::ExperimentConfig;
use crate::runner::Output;
use crate::CliError;

pub(super) fn run(c: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let (hbar, mass, omega) = (c.float("hbar"), c.float("mass"), c.float("omega"));
    let (x0, p0) = (c.float("x0"), c.float("p0"));
    let n = c.int("levels");

    let length = (hbar / (mass * omega)).sqrt();
    let rep = build_rep(RepMode::Oscillator { length }, n, hbar, mass)?;
    let psi = rep.gaussian_state(x0, p0, 1.0)?;
    let edge = rep.edge_fraction(&psi);
    if edge >= EDGE_FRACTION_TOL {
        return Err(Error::PreconditionViolated(format!(
            "initial state has norm fraction {edge:.3e} in the top levels; raise `levels`"
        ))
        .into());
    }

    let (x, p) = (rep.x(), rep.p());
    let h = &(p * p).scale_real(0.5 / mass) + &(x * x).scale_real(0.5 * mass * omega * omega);
    let sys = Gahs::quantum(&QuantumSymplectic::full_matrix(n, hbar)?, h)?;
    let times = time_grid(c.float("periods") * 2.0 * PI / omega, c.int("samples"));
    let xt = heisenberg_evolve(&sys, x, &times)?;
    let pt = heisenberg_evolve(&sys, p, &times)?;
    let classical = classical_evolve_rk4(
        &ClassicalHamiltonianSystem::harmonic(mass, omega),
        &PhasePoint::one(x0, p0),
        &times,
        c.float("classical_dt"),
    )?;

    let mut rows = Vec::with_capacity(times.len());
    for (((&t, xq), pq), z) in times.iter().zip(xt.values()).zip(pt.values()).zip(classical.values()) {
        let (xm, pm) = (psi.expectation(xq)?.re, psi.expectation(pq)?.re);
        let gap = (xm - z.q[0]).abs().max((pm - z.p[0]).abs());
        rows.push([t, xm, pm, z.q[0], z.p[0], gap]);
    }
    let max_gap = rows.iter().map(|r| r[5]).fold(0.0, f64::max);
    out.table("ehrenfest", &csv("t,x_quantum,p_quantum,x_classical,p_classical,gap", &rows))?;
    out.real("edge_fraction", edge);
    out.real("max_gap", max_gap);
    Ok(())
}
