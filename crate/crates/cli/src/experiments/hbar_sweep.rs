use ncham_core::weyl::{log_log_slope, semiclassical_expansion_residual, PhaseSpaceGrid, WignerField};

use super::csv;
use crate::config::ExperimentConfig;
use crate::runner::Output;
use crate::CliError;

/// Residual of `f ⋆ g - g ⋆ f = iħ{f, g} + O(ħ³)` for two fixed smooth
/// symbols on a fixed window, one row per `ħ`, plus the fitted exponent.
pub(super) fn run(c: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let (n, extent) = (c.int("grid_n"), c.float("extent"));
    let hbars = c.list("hbar_list");
    let mut residuals = Vec::with_capacity(hbars.len());
    for &hbar in hbars {
        let grid = PhaseSpaceGrid::new(n, n, extent, extent, hbar)?;
        let f = WignerField::from_real_fn(grid, |x, p| (-((x - 0.5).powi(2) + p * p) / 2.0).exp());
        let g = WignerField::from_real_fn(grid, |x, p| (-(x * x + (p - 0.3).powi(2)) / 1.5).exp() * (1.0 + 0.3 * x));
        residuals.push(semiclassical_expansion_residual(&f, &g)?);
    }
    out.table("residuals", &csv("hbar,residual", hbars.iter().zip(&residuals).map(|(&h, &r)| [h, r])))?;
    let slope = log_log_slope(hbars, &residuals)?;
    out.table("fit", &csv("points,slope", [[hbars.len() as f64, slope]]))?;
    out.real("slope", slope);
    Ok(())
}
