//! Turing analysis and localised dihedral patterns for two-component
//! reaction-diffusion models.
//!
//! Given a model of the form
//!
//! ```text
//! u_t = lap(u) - fhat(u, v; mu)
//! v_t = D_v lap(v - beta u) - ghat(u, v; mu)
//! ```
//!
//! this crate locates Turing instabilities along uniform steady branches,
//! assembles the local normal-form data (eigenbasis, quadratic and cubic
//! interaction tensors), computes the four qualitative predictors P1-P4 for
//! localised dihedral patterns, solves the dihedral matching conditions,
//! synthesises spot-A and ring initial profiles, and time-integrates the
//! full PDE with a second-order exponential integrator under no-flux
//! boundary conditions.
//!
//! Four vegetation models are built in: `kgs`, `logistic_klausmeier`,
//! `nfc_gilad`, and `von_hardenberg`. Custom models are defined by reaction
//! expressions in a small config format (see [`model::from_config_str`]).
//!
//! The `examples/` directory holds one runnable example per capability;
//! a thin `dihedra` binary exposes the same pipeline as subcommands.

pub mod bessel;
pub mod cli;
pub mod equilibria;
pub mod error;
pub mod expr;
pub mod field;
pub mod linalg;
pub mod model;
pub mod kgs_oracle;
pub mod localform;
pub mod matching;
pub mod profile;
pub mod sim;
pub mod turing;

pub use error::{Error, Result};
pub use model::ModelSpec;
