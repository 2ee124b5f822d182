//! Numerical laboratory for the mass-critical focusing nonlinear Schrödinger
//! equation `i u_t + Δu + |u|^{4/d} u = 0` at threshold mass.
//!
//! The crate constructs the computable objects of the threshold-mass rigidity
//! theory and checks their identities at desk scale:
//!
//! * [`groundstate`] — the radial ground state `Q` solving `ΔQ + Q^{1+4/d} = Q`,
//!   with its variational identities (Pohozaev, sharp Gagliardo–Nirenberg).
//! * [`spectral`] — the linearized operators `L` and `L₋`, their negative
//!   eigenpair, kernel, and the coercivity of the linearized energy form.
//! * [`fields`] — complex fields on periodic grids, the soliton family, the
//!   symmetry group, and the conserved/monotone functionals.
//! * [`modulation`] — decomposition of a near-soliton field into a group
//!   element plus an orthogonal residual, and parameter tracking.
//! * [`evolve`] — a symmetric split-step Fourier integrator with blowup
//!   detection and observation logging.
//! * [`config`] / [`experiments`] — run configuration and the experiment
//!   presets behind the CLI.

pub mod config;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod fields;
pub mod groundstate;
pub mod modulation;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
