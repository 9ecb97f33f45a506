use ncham_core::fluid::{
    correspondence_experiment, fluid_residuals, fluid_slice, hj_evolve, quantum_potential, split_step_evolve,
    ClassicalHJState, CorrespondenceSetup, FluidHamiltonian, GridWaveFunction,
};
use ncham_core::grid::SpatialGrid;
use ncham_core::io::{correspondence_csv, fluid_snapshot_csv};

use super::{csv, time_grid};
use crate::config::ExperimentConfig;
use crate::runner::Output;
use crate::CliError;

/// Relative density below which the quantum potential is not reported.
const QP_DENSITY_FLOOR: f64 = 1e-3;

pub(super) fn run(c: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let grid = SpatialGrid::new(c.int("grid_n"), c.float("extent"))?;
    let mass = c.float("mass");
    let (sigma, x0, p0, chirp) = (c.float("sigma"), c.float("x0"), c.float("p0"), c.float("chirp"));
    let (time, qdt, cdt) = (c.float("time"), c.float("quantum_dt"), c.float("classical_dt"));
    let hbars = c.list("hbar_list");
    let h = FluidHamiltonian::free(mass)?;
    let initial = ClassicalHJState::from_fns(
        grid,
        move |q| (-(q - x0).powi(2) / (2.0 * sigma * sigma)).exp(),
        move |q| p0 * (q - x0) + chirp * (q - x0).powi(2),
        h.clone(),
    )?;

    let snapshot_times = time_grid(time, c.int("snapshots"));
    out.table(
        "snapshot_times",
        &csv("index,t", snapshot_times.iter().enumerate().map(|(k, &t)| [k as f64, t])),
    )?;
    // The Hamiltonian is time independent, so each interval restarts from
    // the previous snapshot and a caustic still leaves the earlier ones.
    let mut state = initial.clone();
    out.table("classical_snapshot_000", &fluid_snapshot_csv(&grid, state.rho(), state.s())?)?;
    for (k, w) in snapshot_times.windows(2).enumerate() {
        let traj = hj_evolve(&state, w, cdt)?;
        state = traj.last().expect("two output times").clone();
        out.table(&format!("classical_snapshot_{:03}", k + 1), &fluid_snapshot_csv(&grid, state.rho(), state.s())?)?;
    }

    let setup = CorrespondenceSetup {
        initial: initial.clone(),
        time,
        quantum_dt: qdt,
        classical_dt: cdt,
    };
    let report = correspondence_experiment(&setup, hbars)?;
    out.table("correspondence", &correspondence_csv(&report))?;
    out.summary("monotone", report.monotone);

    // Madelung residuals at the final time, from centred differences in t.
    let mut madelung = Vec::with_capacity(hbars.len());
    for &hbar in hbars {
        let psi0 = GridWaveFunction::from_fields(grid, initial.rho(), initial.s(), hbar)?;
        let traj = split_step_evolve(&psi0, mass, h.potential(), &[0.0, time - qdt, time, time + qdt], qdt)?;
        let v = traj.values();
        let slice = fluid_slice(&v[1], &v[2], &v[3], qdt)?;
        let r = fluid_residuals(&grid, &slice, &h, Some(hbar));
        madelung.push([hbar, r.sup_continuity(), r.sup_hamilton_jacobi()]);
    }
    out.table("madelung", &csv("hbar,sup_continuity,sup_hamilton_jacobi", &madelung))?;

    // Quantum potential of the frozen initial density.
    let peak = initial.rho().iter().cloned().fold(0.0, f64::max);
    let qp_rows: Vec<[f64; 2]> = hbars
        .iter()
        .map(|&hbar| {
            let q = quantum_potential(&grid, initial.rho(), hbar, mass);
            let sup = q
                .iter()
                .zip(initial.rho())
                .filter(|(_, &r)| r >= QP_DENSITY_FLOOR * peak)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max);
            [hbar, sup]
        })
        .collect();
    out.table("quantum_potential", &csv("hbar,sup_quantum_potential", &qp_rows))?;

    let last = report.rows.last().expect("hbar_list holds at least two values");
    out.real("final_sup_gap_rho", last.sup_gap_rho);
    out.real("final_sup_gap_S", last.sup_gap_s);
    Ok(())
}
