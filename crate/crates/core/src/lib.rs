//! Numerical laboratory for the semiclassical double-well nonlinear
//! Schrödinger equation
//!
//! ```text
//! i ψ_τ = H₀ ψ + ε |ψ|^{2σ} ψ,     H₀ = −ħ² Δ + V
//! ```
//!
//! on a periodic box in one or two dimensions. The crate covers the linear
//! spectral problem (tunnelling doublet, splitting, Agmon distance), the full
//! split-step dynamics, the reduced two-mode system and the diagnostics that
//! compare them.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod eigensolver;
pub mod error;
pub mod fit;
pub mod nls;
pub mod potential;
pub mod twomode;

pub use diagnostics::{project, ProjectionData};
pub use discretization::{inner, norm_xs, FieldC, Grid, Hamiltonian, SimConfig, TimeScheme};
pub use eigensolver::{lowest_eigenpairs, SpectralData};
pub use error::{Error, Result};
pub use potential::{agmon_distance, AgmonResult, Potential};
pub use twomode::{TwoModeParams, TwoModeState};
