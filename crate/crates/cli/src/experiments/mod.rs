//! The experiment registry: identifiers, parameter tables and drivers.

mod audit;
mod free_packet;
mod galilean;
mod hbar_sweep;
mod oscillator;

pub use audit::{calculus_audit, canonical_audit, gass_audit, picture_audit, PropertyRow};

use ncham_core::io::fmt_f64;

use crate::config::{ExperimentConfig, Kind, ParamSpec};
use crate::runner::Output;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    OscillatorCorrespondence,
    FreePacket,
    HbarSweep,
    GalileanAudit,
    GassPropertyAudit,
}

const POSITIVE: Kind = Kind::Float { min: 1e-3, max: 1e3 };
const COORD: Kind = Kind::Float { min: -100.0, max: 100.0 };

const OSCILLATOR_PARAMS: &[ParamSpec] = &[
    ParamSpec { key: "hbar", kind: Kind::Float { min: 1e-3, max: 10.0 }, default: "1", doc: "Planck constant" },
    ParamSpec { key: "mass", kind: POSITIVE, default: "1", doc: "particle mass" },
    ParamSpec { key: "omega", kind: POSITIVE, default: "1", doc: "oscillator frequency" },
    ParamSpec { key: "levels", kind: Kind::Int { min: 8, max: 256 }, default: "40", doc: "truncation size" },
    ParamSpec { key: "x0", kind: COORD, default: "1", doc: "initial position" },
    ParamSpec { key: "p0", kind: COORD, default: "0.5", doc: "initial momentum" },
    ParamSpec { key: "periods", kind: Kind::Float { min: 1e-2, max: 10.0 }, default: "1", doc: "duration in periods" },
    ParamSpec { key: "samples", kind: Kind::Int { min: 1, max: 4096 }, default: "64", doc: "output intervals" },
    ParamSpec { key: "classical_dt", kind: Kind::Float { min: 1e-5, max: 0.1 }, default: "1e-3", doc: "RK4 step of the classical reference" },
];

const FREE_PACKET_PARAMS: &[ParamSpec] = &[
    ParamSpec { key: "hbar_list", kind: Kind::FloatList { min: 1e-4, max: 10.0 }, default: "0.2,0.1,0.05,0.025", doc: "strictly decreasing Planck constants" },
    ParamSpec { key: "grid_n", kind: Kind::PowerOfTwo { min: 64, max: 8192 }, default: "1024", doc: "grid points" },
    ParamSpec { key: "extent", kind: Kind::Float { min: 1.0, max: 1e3 }, default: "10", doc: "grid half-width" },
    ParamSpec { key: "mass", kind: POSITIVE, default: "1", doc: "particle mass" },
    ParamSpec { key: "sigma", kind: Kind::Float { min: 1e-2, max: 100.0 }, default: "0.5", doc: "initial density width" },
    ParamSpec { key: "x0", kind: COORD, default: "0", doc: "initial density centre" },
    ParamSpec { key: "p0", kind: COORD, default: "1", doc: "initial mean momentum" },
    ParamSpec { key: "chirp", kind: Kind::Float { min: -100.0, max: 100.0 }, default: "0.25", doc: "quadratic action coefficient; negative values focus the flow into a caustic at t = m/(2|chirp|)" },
    ParamSpec { key: "time", kind: Kind::Float { min: 1e-3, max: 100.0 }, default: "1", doc: "final time" },
    ParamSpec { key: "quantum_dt", kind: Kind::Float { min: 1e-6, max: 0.1 }, default: "1e-3", doc: "split-step time step" },
    ParamSpec { key: "classical_dt", kind: Kind::Float { min: 1e-5, max: 0.1 }, default: "1e-2", doc: "largest Hamilton-Jacobi step" },
    ParamSpec { key: "snapshots", kind: Kind::Int { min: 1, max: 1000 }, default: "4", doc: "classical snapshot intervals" },
];

const HBAR_SWEEP_PARAMS: &[ParamSpec] = &[
    ParamSpec { key: "hbar_list", kind: Kind::FloatList { min: 1e-6, max: 1.0 }, default: "1e-1,3e-2,1e-2,3e-3,1e-3", doc: "Planck constants to sweep" },
    ParamSpec { key: "grid_n", kind: Kind::PowerOfTwo { min: 16, max: 256 }, default: "64", doc: "points per phase-space axis" },
    ParamSpec { key: "extent", kind: Kind::Float { min: 1.0, max: 100.0 }, default: "8", doc: "phase-space window half-width" },
];

const GALILEAN_PARAMS: &[ParamSpec] = &[
    ParamSpec { key: "mode", kind: Kind::Choice(&["oscillator", "grid"]), default: "oscillator", doc: "discretization of X and P" },
    ParamSpec { key: "size", kind: Kind::Int { min: 4, max: 256 }, default: "32", doc: "representation size (audited again at twice this)" },
    ParamSpec { key: "length", kind: Kind::Float { min: 1e-2, max: 100.0 }, default: "1", doc: "oscillator length scale (oscillator mode)" },
    ParamSpec { key: "extent", kind: Kind::Float { min: 0.1, max: 1e3 }, default: "6", doc: "grid half-width (grid mode)" },
    ParamSpec { key: "width", kind: Kind::Float { min: 1e-2, max: 100.0 }, default: "0.5", doc: "test packet width (grid mode)" },
    ParamSpec { key: "hbar", kind: Kind::Float { min: 1e-3, max: 10.0 }, default: "1", doc: "Planck constant" },
    ParamSpec { key: "mass", kind: POSITIVE, default: "1", doc: "particle mass" },
    ParamSpec { key: "time", kind: COORD, default: "0.7", doc: "boost time parameter" },
    ParamSpec { key: "x0_list", kind: Kind::FloatList { min: -100.0, max: 100.0 }, default: "2.545584412271571,1.272792206135786", doc: "test state positions" },
    ParamSpec { key: "p0_list", kind: Kind::FloatList { min: -100.0, max: 100.0 }, default: "0,1.697056274847714", doc: "test state momenta" },
];

const AUDIT_PARAMS: &[ParamSpec] = &[
    ParamSpec { key: "trials", kind: Kind::Int { min: 1, max: 10_000 }, default: "100", doc: "random trials per identity" },
    ParamSpec { key: "picture_trials", kind: Kind::Int { min: 1, max: 10_000 }, default: "50", doc: "random Schrödinger/Heisenberg comparisons" },
    ParamSpec { key: "canonical_trials", kind: Kind::Int { min: 1, max: 1000 }, default: "20", doc: "random unitaries for the canonical-map check" },
    ParamSpec { key: "hbar", kind: Kind::Float { min: 1e-3, max: 10.0 }, default: "1", doc: "Planck constant" },
];

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::OscillatorCorrespondence,
        Experiment::FreePacket,
        Experiment::HbarSweep,
        Experiment::GalileanAudit,
        Experiment::GassPropertyAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::OscillatorCorrespondence => "oscillator_correspondence",
            Experiment::FreePacket => "free_packet",
            Experiment::HbarSweep => "hbar_sweep",
            Experiment::GalileanAudit => "galilean_audit",
            Experiment::GassPropertyAudit => "gass_property_audit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::OscillatorCorrespondence => {
                "quantum means of a truncated oscillator against the classical trajectory (ehrenfest.csv)"
            }
            Experiment::FreePacket => {
                "Hamilton-Jacobi fluid against Madelung fields of a free packet over a decreasing hbar sweep \
                 (correspondence.csv, madelung.csv, quantum_potential.csv, classical_snapshot_*.csv, snapshot_times.csv)"
            }
            Experiment::HbarSweep => "star-commutator expansion residual against hbar and its log-log slope (residuals.csv, fit.csv)",
            Experiment::GalileanAudit => {
                "state-wise Galilean commutation residuals at two sizes (relations.csv, relations_doubled.csv, convergence.csv, spin.csv)"
            }
            Experiment::GassPropertyAudit => {
                "exterior-calculus, Poisson and canonical-map identities on random matrices (properties.csv, canonical.csv)"
            }
        }
    }

    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            Experiment::OscillatorCorrespondence => OSCILLATOR_PARAMS,
            Experiment::FreePacket => FREE_PACKET_PARAMS,
            Experiment::HbarSweep => HBAR_SWEEP_PARAMS,
            Experiment::GalileanAudit => GALILEAN_PARAMS,
            Experiment::GassPropertyAudit => AUDIT_PARAMS,
        }
    }

    /// Named relations the experiment exercises, recorded in the run record.
    pub fn relations(self) -> &'static [&'static str] {
        match self {
            Experiment::OscillatorCorrespondence => {
                &["heisenberg_flow", "quantum_poisson_bracket", "classical_hamilton_equations", "ehrenfest_quadratic"]
            }
            Experiment::FreePacket => &[
                "hamilton_jacobi_equation",
                "continuity_equation",
                "madelung_decomposition",
                "madelung_continuity",
                "madelung_hamilton_jacobi",
                "quantum_potential",
                "hj_fluid_correspondence",
            ],
            Experiment::HbarSweep => &["star_product", "moyal_bracket", "semiclassical_expansion"],
            Experiment::GalileanAudit => &[
                "ccr",
                "boost_position",
                "momentum_boost",
                "hamiltonian_boost",
                "hamiltonian_momentum",
                "hamiltonian_position",
                "spin_algebra",
                "spin_position",
                "spin_momentum",
                "ccr_trace_obstruction",
            ],
            Experiment::GassPropertyAudit => &[
                "d_squared",
                "cartan_formula",
                "interior_antiderivation",
                "lie_bracket_representation",
                "poisson_jacobi",
                "hamiltonian_homomorphism",
                "poisson_leibniz",
                "hamiltonian_derivation",
                "canonical_transformation",
                "antiunitary_dichotomy",
                "picture_equivalence",
            ],
        }
    }

    /// Constraints that involve more than one parameter.
    pub(crate) fn validate(self, c: &ExperimentConfig) -> Result<(), CliError> {
        match self {
            Experiment::FreePacket => {
                let hbars = c.list("hbar_list");
                if hbars.len() < 2 || hbars.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(c.invalid("hbar_list must hold at least two strictly decreasing values"));
                }
                if c.float("quantum_dt") >= c.float("time") {
                    return Err(c.invalid("quantum_dt must be smaller than time"));
                }
            }
            Experiment::HbarSweep => {
                let hbars = c.list("hbar_list");
                let mut sorted = hbars.to_vec();
                sorted.sort_by(f64::total_cmp);
                if hbars.len() < 2 || sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(c.invalid("hbar_list must hold at least two distinct values"));
                }
            }
            Experiment::GalileanAudit => {
                if c.list("x0_list").len() != c.list("p0_list").len() {
                    return Err(c.invalid("x0_list and p0_list must have the same length"));
                }
            }
            Experiment::OscillatorCorrespondence | Experiment::GassPropertyAudit => {}
        }
        Ok(())
    }

    pub(crate) fn run(self, c: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
        match self {
            Experiment::OscillatorCorrespondence => oscillator::run(c, out),
            Experiment::FreePacket => free_packet::run(c, out),
            Experiment::HbarSweep => hbar_sweep::run(c, out),
            Experiment::GalileanAudit => galilean::run(c, out),
            Experiment::GassPropertyAudit => audit::run(c, out),
        }
    }
}

/// CSV with a header line and one row of reals per item.
fn csv<R: AsRef<[f64]>>(header: &str, rows: impl IntoIterator<Item = R>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// `samples + 1` equally spaced times on `[0, t_end]`.
fn time_grid(t_end: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect()
}
