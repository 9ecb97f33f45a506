use ncham_core::galilean::{
    build_rep, ccr_trace, verify_boost_and_free_hamiltonian, verify_ccr, verify_spin_block, GalileanGenerators,
    RelationReport, RepMode, TruncatedRep,
};
use ncham_core::io::fmt_f64;

use crate::config::ExperimentConfig;
use crate::runner::Output;
use crate::CliError;

/// Residuals at or below this level are rounding noise and need not shrink.
/// Products of `n × n` spectral matrices carry errors of order `n² ε`, so
/// at sizes well above 100 the floor itself can be exceeded by rounding.
pub const ROUNDING_FLOOR: f64 = 1e-12;

fn audit(c: &ExperimentConfig, rep: &TruncatedRep) -> Result<RelationReport, CliError> {
    let width = c.float("width");
    let states = c
        .list("x0_list")
        .iter()
        .zip(c.list("p0_list"))
        .map(|(&x0, &p0)| rep.gaussian_state(x0, p0, width))
        .collect::<ncham_core::Result<Vec<_>>>()?;
    let mut report = verify_ccr(rep, &states)?;
    let generators = GalileanGenerators::free(rep.clone());
    report.extend(verify_boost_and_free_hamiltonian(&generators, c.float("time"), &states)?);
    Ok(report)
}

pub(super) fn run(c: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let mode = match c.text("mode") {
        "grid" => RepMode::Grid { extent: c.float("extent") },
        _ => RepMode::Oscillator { length: c.float("length") },
    };
    let size = c.int("size");
    let rep = build_rep(mode, size, c.float("hbar"), c.float("mass"))?;
    let small = audit(c, &rep)?;
    out.table("relations", &small.to_string())?;
    let large = audit(c, &rep.resized(2 * size)?)?;
    out.table("relations_doubled", &large.to_string())?;

    let mut convergence = String::from("relation_id,residual,residual_doubled,ratio,shrinks\n");
    let mut all_shrink = true;
    for id in small.relation_ids() {
        let (a, b) = (small.max_for(id).unwrap_or(0.0), large.max_for(id).unwrap_or(0.0));
        let ratio = if b > 0.0 { a / b } else { f64::INFINITY };
        let shrinks = a <= ROUNDING_FLOOR || ratio >= 4.0;
        all_shrink &= shrinks;
        convergence.push_str(&format!("{id},{},{},{},{shrinks}\n", fmt_f64(a), fmt_f64(b), fmt_f64(ratio)));
    }
    out.table("convergence", &convergence)?;
    out.table("spin", &verify_spin_block(&rep).to_string())?;

    let trace = ccr_trace(&rep);
    out.real("trace_re", trace.re);
    out.real("trace_im", trace.im);
    out.real("max_residual", small.max_residual());
    out.real("max_residual_doubled", large.max_residual());
    out.summary("all_shrink", all_shrink);
    Ok(())
}
