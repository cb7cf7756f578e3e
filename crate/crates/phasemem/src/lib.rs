//! Correlation analysis of slow phase relaxation in complex collisions.
//!
//! The library models the energy-fluctuating cross sections of heavy-ion
//! scattering through a rotating, decaying intermediate complex. It provides:
//!
//! - [`acf`]: the analytic cross-section energy autocorrelation function
//!   C(ε), the spin off-diagonal S-matrix correlation kernel, and the
//!   Lorentzian random-matrix comparator.
//! - [`tps`]: the time power spectrum P(t,θ) of the decaying rotor, its
//!   spin-diagonal limit and interference fringe visibility.
//! - [`ensemble`]: a Monte Carlo oracle that synthesizes S-matrix element
//!   sequences with exactly the prescribed spin off-diagonal correlation and
//!   builds excitation functions and ensemble ACFs from them.
//! - [`estimator`]: sample energy autocorrelation functions from excitation
//!   function data, with detrending and channel averaging.
//! - [`fit`]: deterministic multistart least-squares fitting of the model
//!   parameters (Γ, β, ħω, d) to a measured or synthetic ACF, and profile
//!   scans over β quantifying the β–d degeneracy.
//! - [`kinematics`]: the spin-window kinematics I(E), ΔE, d↔g and the
//!   touching-spheres rigid-rotor frequency estimate.
//! - [`cli`]: the `phasemem` command-line pipeline (CSV/JSON formats, run
//!   manifests, reproducible seeded runs).
//!
//! Units: energies and widths in MeV, angles in radians, times in ħ/MeV
//! (so Γt/ħ is written Γ·t internally).

pub mod acf;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod fit;
pub mod io;
pub mod kinematics;
pub mod specfun;
pub mod tps;

pub use acf::{lorentzian_acf, model_acf, peak_spacing, smatrix_kernel, ModelParams, PhaseConstant};
pub use error::PhasememError;
pub use specfun::{gaussian_window, legendre_all, AngleGrid, SpinWindow};

/// ħ in MeV·s, used only when converting internal ħ/MeV times to seconds.
pub const HBAR_MEV_S: f64 = 6.582_119_569e-22;
