//! Analytic cross-section energy autocorrelation function, the spin
//! off-diagonal S-matrix correlation kernel and the Lorentzian
//! random-matrix comparator.

use crate::error::{PhasememError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Phase constant entering the oscillatory exponents of the analytic ACF.
///
/// `AsPrintedPi` evaluates the published formula literally (π in every
/// exponent, oscillation period 2ħω in ε). `TwoPi` doubles the constant,
/// which yields the period ħω quoted alongside the formula. Both are kept
/// selectable; the measured peak spacing differs by the factor of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConstant {
    #[default]
    #[serde(rename = "pi", alias = "as_printed_pi")]
    AsPrintedPi,
    TwoPi,
}

impl PhaseConstant {
    pub fn value(self) -> f64 {
        match self {
            PhaseConstant::AsPrintedPi => std::f64::consts::PI,
            PhaseConstant::TwoPi => 2.0 * std::f64::consts::PI,
        }
    }
}

/// Parameters of the correlation model.
///
/// `gamma` is the total decay width Γ, `beta` the spin phase relaxation
/// width, `hbar_omega` the rotational quantum ħω (all MeV) and `d` the
/// effective dimensionless window width entering the Gaussian envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub beta: f64,
    pub hbar_omega: f64,
    pub d: f64,
    #[serde(default)]
    pub phase_constant: PhaseConstant,
}

impl ModelParams {
    pub fn new(gamma: f64, beta: f64, hbar_omega: f64, d: f64) -> Result<Self> {
        Self::with_phase(gamma, beta, hbar_omega, d, PhaseConstant::default())
    }

    pub fn with_phase(
        gamma: f64,
        beta: f64,
        hbar_omega: f64,
        d: f64,
        phase_constant: PhaseConstant,
    ) -> Result<Self> {
        let p = Self {
            gamma,
            beta,
            hbar_omega,
            d,
            phase_constant,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(PhasememError::Domain("gamma must be > 0".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(PhasememError::Domain("beta must be >= 0".into()));
        }
        if !(self.hbar_omega > 0.0) {
            return Err(PhasememError::Domain("hbar_omega must be > 0".into()));
        }
        if !(self.d >= 1.0) {
            return Err(PhasememError::Domain("d must be >= 1".into()));
        }
        Ok(())
    }
}

/// C(ε) samples on an ε ≥ 0 grid, with optional standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub epsilon_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub stderr_values: Option<Vec<f64>>,
}

impl CorrelationSeries {
    pub fn new(
        epsilon_values: Vec<f64>,
        c_values: Vec<f64>,
        stderr_values: Option<Vec<f64>>,
    ) -> Result<Self> {
        if epsilon_values.len() != c_values.len() {
            return Err(PhasememError::GridMismatch(
                "epsilon and C lengths differ".into(),
            ));
        }
        if let Some(s) = &stderr_values {
            if s.len() != c_values.len() {
                return Err(PhasememError::GridMismatch("stderr length differs".into()));
            }
            if s.iter().any(|&v| v < 0.0) {
                return Err(PhasememError::Domain("stderr must be nonnegative".into()));
            }
        }
        if epsilon_values.is_empty() || epsilon_values[0] != 0.0 {
            return Err(PhasememError::Domain(
                "epsilon grid must start at 0".into(),
            ));
        }
        for pair in epsilon_values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(PhasememError::Domain(
                    "epsilon grid must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            epsilon_values,
            c_values,
            stderr_values,
        })
    }

    pub fn len(&self) -> usize {
        self.c_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_values.is_empty()
    }

    /// Series rescaled so that C(0) = 1. Errors if C(0) = 0.
    pub fn normalized(&self) -> Result<Self> {
        let c0 = self.c_values[0];
        if c0 == 0.0 {
            return Err(PhasememError::Domain("C(0) = 0, cannot normalize".into()));
        }
        Ok(Self {
            epsilon_values: self.epsilon_values.clone(),
            c_values: self.c_values.iter().map(|c| c / c0).collect(),
            stderr_values: self
                .stderr_values
                .as_ref()
                .map(|s| s.iter().map(|v| v / c0.abs()).collect()),
        })
    }
}

/// Spin off-diagonal S-matrix correlation kernel
/// Γ / (Γ + β|ΔJ| + iħωΔJ − iε).
pub fn smatrix_kernel(delta_j: i64, epsilon: f64, params: &ModelParams) -> Complex64 {
    let denom = Complex64::new(
        params.gamma + params.beta * delta_j.unsigned_abs() as f64,
        params.hbar_omega * delta_j as f64 - epsilon,
    );
    params.gamma / denom
}

/// Oscillatory factor of the ACF with the Gaussian envelope divided out:
/// Re[X(ε)] / Re[Y] with
/// X = exp[i kc|ε|/(ħω−iβ)] / (1 − exp[i kc(|ε|+iΓ)/(ħω−iβ)]) and
/// Y = 1 / (1 − exp[−kc Γ/(ħω−iβ)]).
fn acf_oscillatory_factor(epsilon: f64, params: &ModelParams) -> f64 {
    let eps = epsilon.abs();
    let kc = params.phase_constant.value();
    // q = kc / (ħω − iβ)
    let q = kc / Complex64::new(params.hbar_omega, -params.beta);
    let x = (Complex64::i() * q * eps).exp()
        / (Complex64::new(1.0, 0.0) - (Complex64::i() * q * Complex64::new(eps, params.gamma)).exp());
    let y = 1.0 / (Complex64::new(1.0, 0.0) - (-q * params.gamma).exp());
    x.re / y.re
}

/// Normalized analytic cross-section energy autocorrelation function:
/// Gaussian envelope exp[−ε²/2(ħω)²d²] times the oscillatory factor.
/// C(0) = 1 by construction.
pub fn model_acf(epsilon: f64, params: &ModelParams) -> f64 {
    let scale = params.hbar_omega * params.d;
    let envelope = (-epsilon * epsilon / (2.0 * scale * scale)).exp();
    envelope * acf_oscillatory_factor(epsilon, params)
}

/// Random-matrix (vanishing spin off-diagonal correlation) comparator
/// C(ε) = 1 / (1 + (ε/Γ)²).
pub fn lorentzian_acf(epsilon: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(PhasememError::Domain("gamma must be > 0".into()));
    }
    let u = epsilon / gamma;
    Ok(1.0 / (1.0 + u * u))
}

/// Mean spacing between consecutive local maxima of the envelope-free ACF
/// factor scanned over (0, scan_range] with the given step. Returns `None`
/// when fewer than two maxima are found.
pub fn peak_spacing(params: &ModelParams, scan_range: f64, scan_step: f64) -> Result<Option<f64>> {
    if !(scan_range > 0.0) {
        return Err(PhasememError::Domain("scan_range must be > 0".into()));
    }
    if !(scan_step > 0.0) || scan_step >= params.hbar_omega / 20.0 {
        return Err(PhasememError::Domain(
            "scan_step must be positive and < hbar_omega / 20".into(),
        ));
    }
    let n = (scan_range / scan_step).floor() as usize;
    if n < 3 {
        return Ok(None);
    }
    // values at eps = 0, step, 2*step, ...; maxima only accepted at eps > 0
    let values: Vec<f64> = (0..=n)
        .map(|i| acf_oscillatory_factor(i as f64 * scan_step, params))
        .collect();
    let mut maxima = Vec::new();
    for i in 1..n {
        if values[i] > values[i - 1] && values[i] >= values[i + 1] {
            maxima.push(i as f64 * scan_step);
        }
    }
    if maxima.len() < 2 {
        return Ok(None);
    }
    let spacing = (maxima.last().unwrap() - maxima[0]) / (maxima.len() - 1) as f64;
    Ok(Some(spacing))
}
