//! Time power spectrum of the decaying rotating intermediate complex,
//! its spin-diagonal (random-matrix) limit and fringe visibility.
//!
//! Times are in units of ħ/MeV, so the decay factor exp(−Γt/ħ) is written
//! exp(−Γ·t) and the rotational angular velocity is ω = ħω (MeV).

use crate::error::{PhasememError, Result};
use crate::specfun::{gaussian_window, legendre_all, AngleGrid, SpinWindow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Parameters of the damped quantum rotor entering P(t,θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    pub gamma: f64,
    pub beta: f64,
    pub hbar_omega: f64,
    /// Average deflection angle Φ, radians.
    pub phi: f64,
    pub window: SpinWindow,
}

impl RotorParams {
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
        Ok(())
    }

    /// Period of one complete revolution, T = 2π/ω, in ħ/MeV.
    pub fn revolution_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.hbar_omega
    }
}

/// P, P_diag and their ratio on a (t, θ) grid.
#[derive(Debug, Clone)]
pub struct TimePowerSpectrum {
    pub t_values: Vec<f64>,
    pub theta_grid: AngleGrid,
    /// Row-major [t][theta].
    pub p: Vec<Vec<f64>>,
    pub p_diag: Vec<Vec<f64>>,
    pub ratio: Vec<Vec<f64>>,
}

/// Window weights and Legendre values shared by one (t, θ) evaluation.
fn window_terms(theta: f64, window: &SpinWindow) -> (Vec<f64>, Vec<f64>) {
    let weights: Vec<f64> = window
        .spins()
        .map(|j| gaussian_window(j as i64, window))
        .collect();
    // cos θ is within [-1, 1] for valid θ up to rounding
    let x = theta.cos().clamp(-1.0, 1.0);
    let p_all = legendre_all(x, window.j_max as usize).expect("cos(theta) in domain");
    let legendre: Vec<f64> = window.spins().map(|j| p_all[j as usize]).collect();
    (weights, legendre)
}

/// Time power spectrum
/// P(t,θ) = H(t) e^{−Γt} Σ_{JJ'} √(W_J W_J') e^{i(Φ−ωt)(J−J') − β|J−J'|t} P_J P_J',
/// realized as a real double sum by Hermitian symmetry.
pub fn time_power_spectrum(t: f64, theta: f64, params: &RotorParams) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let (weights, legendre) = window_terms(theta, &params.window);
    let n = weights.len();
    let omega = params.hbar_omega;
    let rot = params.phi - omega * t;
    let mut sum = 0.0;
    for a in 0..n {
        let wa = weights[a];
        if wa == 0.0 {
            continue;
        }
        sum += wa * legendre[a] * legendre[a];
        for b in (a + 1)..n {
            let wb = weights[b];
            if wb == 0.0 {
                continue;
            }
            let dj = (b - a) as f64;
            sum += 2.0
                * (wa * wb).sqrt()
                * (rot * dj).cos()
                * (-params.beta * dj * t).exp()
                * legendre[a]
                * legendre[b];
        }
    }
    (-params.gamma * t).exp() * sum
}

/// Spin-diagonal limit P_diag(t,θ) = H(t) e^{−Γt} Σ_J W_J P_J(cosθ)²;
/// independent of β, ω and Φ.
pub fn diagonal_spectrum(t: f64, theta: f64, params: &RotorParams) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let (weights, legendre) = window_terms(theta, &params.window);
    let sum: f64 = weights
        .iter()
        .zip(&legendre)
        .map(|(w, p)| w * p * p)
        .sum();
    (-params.gamma * t).exp() * sum
}

/// Fringe visibility (max R − min R)/(max R + min R) of R(θ) = P/P_diag
/// over an n_theta-point grid spanning `theta_window`.
pub fn fringe_visibility(
    t: f64,
    theta_window: (f64, f64),
    params: &RotorParams,
    n_theta: usize,
) -> Result<f64> {
    let (lo, hi) = theta_window;
    if !(lo > 0.0 && hi < std::f64::consts::PI && hi > lo) {
        return Err(PhasememError::Domain(
            "theta window must be a nonempty subset of (0, pi)".into(),
        ));
    }
    if n_theta < 16 {
        return Err(PhasememError::Domain("n_theta must be >= 16".into()));
    }
    let step = (hi - lo) / (n_theta - 1) as f64;
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    let mut any = false;
    for i in 0..n_theta {
        let theta = lo + i as f64 * step;
        let pd = diagonal_spectrum(t, theta, params);
        if pd <= 0.0 {
            continue;
        }
        any = true;
        let r = time_power_spectrum(t, theta, params) / pd;
        r_min = r_min.min(r);
        r_max = r_max.max(r);
    }
    if !any {
        return Err(PhasememError::Domain(
            "diagonal spectrum vanishes on the whole theta window".into(),
        ));
    }
    if r_max + r_min == 0.0 {
        return Ok(0.0);
    }
    Ok((r_max - r_min) / (r_max + r_min))
}

/// Fill P, P_diag and ratio on the full (t, θ) grid. Rows are computed in
/// parallel; each cell is independent so the result does not depend on
/// scheduling.
pub fn spectrum_grid(
    t_values: &[f64],
    theta_grid: &AngleGrid,
    params: &RotorParams,
) -> TimePowerSpectrum {
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = t_values
        .par_iter()
        .map(|&t| {
            let mut p_row = Vec::with_capacity(theta_grid.len());
            let mut d_row = Vec::with_capacity(theta_grid.len());
            let mut r_row = Vec::with_capacity(theta_grid.len());
            for &theta in theta_grid.values() {
                let p = time_power_spectrum(t, theta, params);
                let d = diagonal_spectrum(t, theta, params);
                p_row.push(p);
                d_row.push(d);
                r_row.push(if d != 0.0 { p / d } else { f64::NAN });
            }
            (p_row, d_row, r_row)
        })
        .collect();
    let mut p = Vec::with_capacity(rows.len());
    let mut p_diag = Vec::with_capacity(rows.len());
    let mut ratio = Vec::with_capacity(rows.len());
    for (a, b, c) in rows {
        p.push(a);
        p_diag.push(b);
        ratio.push(c);
    }
    TimePowerSpectrum {
        t_values: t_values.to_vec(),
        theta_grid: theta_grid.clone(),
        p,
        p_diag,
        ratio,
    }
}

/// sinθ-weighted angular integral of P(t,·) over [0, π] by composite
/// Simpson quadrature on `n_points` (forced odd, at least 721).
pub fn angular_integral(t: f64, params: &RotorParams, n_points: usize) -> f64 {
    let n = n_points.max(721) | 1;
    let h = std::f64::consts::PI / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let theta = i as f64 * h;
        let f = time_power_spectrum(t, theta, params) * theta.sin();
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * f;
    }
    sum * h / 3.0
}

/// Closed form of the sinθ-weighted angular integral:
/// e^{−Γt} Σ_J W_J · 2/(2J+1) (Legendre orthogonality kills ΔJ ≠ 0 terms).
pub fn angular_integral_exact(t: f64, params: &RotorParams) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let sum: f64 = params
        .window
        .spins()
        .map(|j| gaussian_window(j as i64, &params.window) * 2.0 / (2 * j + 1) as f64)
        .sum();
    (-params.gamma * t).exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(beta: f64, g: f64) -> RotorParams {
        RotorParams {
            gamma: 0.15,
            beta,
            hbar_omega: 0.75,
            phi: 0.0,
            window: SpinWindow::new(36.0, g).unwrap(),
        }
    }

    fn single_j_window(j: u32) -> SpinWindow {
        SpinWindow {
            center: j as f64,
            width: 1.0,
            j_min: j,
            j_max: j,
        }
    }

    #[test]
    fn zero_before_formation() {
        let p = params(0.03, 1.0);
        assert_eq!(time_power_spectrum(-1.0, 1.0, &p), 0.0);
        assert_eq!(diagonal_spectrum(-1e-9, 1.0, &p), 0.0);
    }

    #[test]
    fn single_j_window_reduces_to_decaying_legendre_square() {
        let w = single_j_window(36);
        for beta in [0.0, 0.1] {
            for phi in [0.0, 0.5] {
                let p = RotorParams {
                    gamma: 0.15,
                    beta,
                    hbar_omega: 0.75,
                    phi,
                    window: w,
                };
                let t = 3.0;
                let theta: f64 = 1.3;
                let leg = legendre_all(theta.cos(), 36).unwrap()[36];
                let expected = (-0.15f64 * t).exp() * leg * leg;
                assert_relative_eq!(time_power_spectrum(t, theta, &p), expected, max_relative = 1e-12);
                assert_relative_eq!(diagonal_spectrum(t, theta, &p), expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn full_revolution_restores_shape() {
        // β=0, Φ=0: P(T,θ) = e^{−ΓT} P(0,θ)
        let p = params(0.0, 2.0);
        let t_rev = p.revolution_period();
        let decay = (-p.gamma * t_rev).exp();
        for i in 1..30 {
            let theta = i as f64 * 0.1;
            assert_relative_eq!(
                time_power_spectrum(t_rev, theta, &p),
                decay * time_power_spectrum(0.0, theta, &p),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn diagonal_independent_of_beta_omega_phi() {
        let base = params(0.0, 2.0);
        let t = 2.5;
        let theta = 1.1;
        let reference = diagonal_spectrum(t, theta, &base);
        for beta in [0.0, 0.03, 0.1] {
            for (hw, phi) in [(0.75, 0.0), (1.5, 0.7)] {
                let p = RotorParams {
                    beta,
                    hbar_omega: hw,
                    phi,
                    ..base
                };
                let v = diagonal_spectrum(t, theta, &p);
                assert_eq!(v.to_bits(), reference.to_bits());
            }
        }
    }

    #[test]
    fn angular_sum_rule() {
        for beta in [0.0, 0.03, 0.1] {
            let p = params(beta, 2.0);
            for t in [0.0, 2.0, 8.0] {
                // high-degree Legendre oscillations need a fine Simpson mesh
                // before the O(h^4) error drops below the 1e-9 tolerance
                let q = angular_integral(t, &p, 8193);
                let exact = angular_integral_exact(t, &p);
                assert_relative_eq!(q, exact, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn nonnegativity_on_grid() {
        let p = params(0.03, 1.0);
        let t_rev = p.revolution_period();
        for i in 0..=20 {
            let t = i as f64 * t_rev / 10.0;
            for k in 0..=90 {
                let theta = k as f64 * std::f64::consts::PI / 90.0;
                let v = time_power_spectrum(t, theta, &p);
                let v0 = time_power_spectrum(0.0, theta, &p);
                assert!(v >= -1e-12 * v0.abs(), "P({t},{theta}) = {v}");
            }
        }
    }

    #[test]
    fn diagonal_limit_at_large_beta_t() {
        // β t = 50 suppresses all off-diagonal terms
        let p = params(0.1, 2.0);
        let t = 50.0 / p.beta;
        for k in 5..=85 {
            let theta = k as f64 * std::f64::consts::PI / 90.0;
            let r = time_power_spectrum(t, theta, &p) / diagonal_spectrum(t, theta, &p);
            assert!((r - 1.0).abs() < 1e-3, "theta={theta}: ratio {r}");
        }
    }

    #[test]
    fn parity_for_even_j_window() {
        // window with only even J: P(t, π−θ) = P(t, θ)
        let w = SpinWindow {
            center: 36.0,
            width: 1.0,
            j_min: 36,
            j_max: 36,
        };
        let p = RotorParams {
            gamma: 0.15,
            beta: 0.0,
            hbar_omega: 0.75,
            phi: 0.0,
            window: w,
        };
        for i in 1..16 {
            let theta = i as f64 * 0.1;
            let a = time_power_spectrum(1.7, theta, &p);
            let b = time_power_spectrum(1.7, std::f64::consts::PI - theta, &p);
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-300);
        }
    }

    #[test]
    fn visibility_trivial_cases() {
        // single-J window: R ≡ 1 so visibility 0
        let p = RotorParams {
            gamma: 0.15,
            beta: 0.0,
            hbar_omega: 0.75,
            phi: 0.0,
            window: single_j_window(36),
        };
        let v = fringe_visibility(1.0, (1.0, 2.0), &p, 32).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(fringe_visibility(1.0, (0.0, 2.0), &p, 32).is_err());
        assert!(fringe_visibility(1.0, (1.0, 2.0), &p, 8).is_err());
    }

    #[test]
    fn visibility_contrast_ordering() {
        let a = params(0.03, 1.0);
        let b = params(0.1, 5.0);
        let t = a.revolution_period() / 4.0;
        let window = (80f64.to_radians(), 100f64.to_radians());
        let va = fringe_visibility(t, window, &a, 64).unwrap();
        let vb = fringe_visibility(t, window, &b, 64).unwrap();
        assert!(va > vb, "visibility A = {va} should exceed B = {vb}");
    }
}
