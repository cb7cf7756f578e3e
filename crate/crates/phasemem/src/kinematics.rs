//! Spin-window kinematics I(E), ΔE, d↔g and the touching-spheres
//! rigid-rotor frequency estimate.

use crate::error::{PhasememError, Result};
use serde::{Deserialize, Serialize};

/// Atomic mass unit in MeV/c².
pub const AMU_MEV: f64 = 931.494;
/// ħc in MeV·fm.
pub const HBARC_MEV_FM: f64 = 197.327;

/// Kinematic inputs of the spin window linearization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowKinematics {
    /// Spin at the center energy, Ī.
    pub i_bar: f64,
    /// Center energy Ē, MeV.
    pub e_bar: f64,
    /// Coulomb barrier B, MeV (user supplied).
    pub barrier: f64,
    /// Window width g.
    pub g: f64,
}

impl WindowKinematics {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_bar > self.barrier) {
            return Err(PhasememError::Domain("e_bar must exceed the barrier".into()));
        }
        if !(self.i_bar > 0.0) {
            return Err(PhasememError::Domain("i_bar must be > 0".into()));
        }
        if !(self.g > 0.0) {
            return Err(PhasememError::Domain("g must be > 0".into()));
        }
        Ok(())
    }
}

/// Result of [`spin_window_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinWindowParams {
    pub i_of_e: f64,
    pub delta_e: f64,
    pub d: f64,
}

/// Linearized window center I(E) = Ī + Ī(E−Ē)/ΔE with ΔE = 2(Ē−B)/Ī
/// evaluated at the center energy, and effective width d = g/|1 − ħω/ΔE|.
pub fn spin_window_params(k: &WindowKinematics, hbar_omega: f64, e: f64) -> Result<SpinWindowParams> {
    k.validate()?;
    if !(hbar_omega > 0.0) {
        return Err(PhasememError::Domain("hbar_omega must be > 0".into()));
    }
    let delta_e = 2.0 * (k.e_bar - k.barrier) / k.i_bar;
    let denom = (1.0 - hbar_omega / delta_e).abs();
    if denom < 1e-9 {
        return Err(PhasememError::Domain(
            "hbar_omega equals delta_e: effective width singular".into(),
        ));
    }
    Ok(SpinWindowParams {
        i_of_e: k.i_bar + k.i_bar * (e - k.e_bar) / delta_e,
        delta_e,
        d: k.g / denom,
    })
}

/// Geometry of the touching-spheres dinuclear configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorGeometry {
    pub a1: u32,
    pub a2: u32,
    /// Radius parameter r0 in fm, within [1.0, 1.5].
    pub r0: f64,
    /// Add the (2/5)MR² self-inertia of each sphere.
    pub include_sphere_self_inertia: bool,
}

impl RotorGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.a1 == 0 || self.a2 == 0 {
            return Err(PhasememError::Domain("mass numbers must be > 0".into()));
        }
        if !(1.0..=1.5).contains(&self.r0) {
            return Err(PhasememError::Domain("r0 must lie in [1.0, 1.5] fm".into()));
        }
        Ok(())
    }
}

/// Moment of inertia report accompanying the frequency estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaReport {
    /// Relative-motion part μR²c², MeV·fm².
    pub orbital: f64,
    /// Sphere self-inertia Σ (2/5)MᵢRᵢ²c², MeV·fm² (zero when excluded).
    pub spheres: f64,
    /// Total ℑc², MeV·fm².
    pub total: f64,
    /// Separation R = r0(a1^{1/3} + a2^{1/3}), fm.
    pub separation_fm: f64,
}

/// Rotational quantum ħω = (ħc)²·j / ℑc² of the touching-spheres rotor.
pub fn rotor_frequency(geom: &RotorGeometry, j: f64) -> Result<(f64, InertiaReport)> {
    geom.validate()?;
    if !(j >= 0.0) {
        return Err(PhasememError::Domain("spin must be >= 0".into()));
    }
    let (a1, a2) = (geom.a1 as f64, geom.a2 as f64);
    let r1 = geom.r0 * a1.cbrt();
    let r2 = geom.r0 * a2.cbrt();
    let r = r1 + r2;
    let mu_c2 = a1 * a2 / (a1 + a2) * AMU_MEV;
    let orbital = mu_c2 * r * r;
    let spheres = if geom.include_sphere_self_inertia {
        0.4 * (a1 * AMU_MEV * r1 * r1 + a2 * AMU_MEV * r2 * r2)
    } else {
        0.0
    };
    let total = orbital + spheres;
    let hbar_omega = HBARC_MEV_FM * HBARC_MEV_FM * j / total;
    Ok((
        hbar_omega,
        InertiaReport {
            orbital,
            spheres,
            total,
            separation_fm: r,
        },
    ))
}
