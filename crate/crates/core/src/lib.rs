//! Hamiltonian mechanics on noncommutative algebras.
//!
//! The crate works with finite-dimensional complex matrix *-algebras `M_n(C)`
//! and builds, on top of them:
//!
//! - [`algebra`]: elements, inner derivations, density matrices and expectations;
//! - [`calculus`]: derivation-based exterior calculus (k-forms, `d`, `i_X`, `L_X`,
//!   induced maps);
//! - [`symplectic`]: the canonical 2-form, Hamiltonian derivations, Poisson
//!   brackets and quantum canonical transformations;
//! - [`dynamics`]: Heisenberg/Schrödinger evolution, the classical flat phase
//!   space and system isomorphisms;
//! - [`weyl`]: Wigner transform, Weyl quantization, star product and Moyal bracket
//!   on a discrete phase-space grid;
//! - [`fluid`]: the Hamilton-Jacobi fluid and the Madelung decomposition;
//! - [`galilean`]: truncated representations of position, momentum and spin and
//!   audits of the Galilean commutation relations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod calculus;
pub mod dynamics;
pub mod error;
pub mod fluid;
pub mod galilean;
pub mod grid;
pub mod io;
pub mod random;
pub mod symplectic;
pub mod weyl;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Version of this library, recorded in experiment run records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
