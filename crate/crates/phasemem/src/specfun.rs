//! Legendre polynomials and the Gaussian spin window shared by all modules.

use crate::error::{PhasememError, Result};
use serde::{Deserialize, Serialize};

/// Grid of scattering angles in radians, strictly increasing, within [0, π].
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    theta_values: Vec<f64>,
}

impl AngleGrid {
    pub fn new(theta_values: Vec<f64>) -> Result<Self> {
        if theta_values.is_empty() {
            return Err(PhasememError::Domain("angle grid is empty".into()));
        }
        for pair in theta_values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(PhasememError::Domain(
                    "angle grid must be strictly increasing".into(),
                ));
            }
        }
        let first = theta_values[0];
        let last = *theta_values.last().unwrap();
        if first < 0.0 || last > std::f64::consts::PI {
            return Err(PhasememError::Domain(
                "angles must lie within [0, pi]".into(),
            ));
        }
        Ok(Self { theta_values })
    }

    /// Uniform grid of `n` angles spanning [lo, hi].
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || hi <= lo {
            return Err(PhasememError::Domain("degenerate angle range".into()));
        }
        let step = (hi - lo) / (n - 1) as f64;
        Self::new((0..n).map(|i| lo + i as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.theta_values
    }

    pub fn len(&self) -> usize {
        self.theta_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_values.is_empty()
    }
}

/// Gaussian J-window W(J) = exp[-(J-I)²/g²] with hard truncation bounds.
///
/// The window is unnormalized; consumers are either scale invariant or
/// normalize downstream. Truncation at I ± 6g keeps the edge weight below
/// e⁻³⁶ of the peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinWindow {
    pub center: f64,
    pub width: f64,
    pub j_min: u32,
    pub j_max: u32,
}

impl SpinWindow {
    /// Window centered at spin `center` with width `width`, truncated at
    /// j_min = max(0, floor(I − 6g)) and j_max = ceil(I + 6g).
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(PhasememError::Domain("spin window width must be > 0".into()));
        }
        if center < 0.0 {
            return Err(PhasememError::Domain(
                "spin window center must be >= 0".into(),
            ));
        }
        let j_min = (center - 6.0 * width).floor().max(0.0) as u32;
        let j_max = (center + 6.0 * width).ceil() as u32;
        Ok(Self {
            center,
            width,
            j_min,
            j_max,
        })
    }

    /// Same window shape re-centered at `center` (used when I depends on E).
    pub fn recentered(&self, center: f64) -> Result<Self> {
        Self::new(center, self.width)
    }

    /// Inclusive range of retained spins.
    pub fn spins(&self) -> impl Iterator<Item = u32> {
        self.j_min..=self.j_max
    }
}

/// All Legendre polynomial values P_0(x) .. P_{j_max}(x) by the three-term
/// recurrence (n+1)P_{n+1} = (2n+1)xP_n − nP_{n-1}.
pub fn legendre_all(x: f64, j_max: usize) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(PhasememError::Domain(format!(
            "legendre argument {x} outside [-1, 1]"
        )));
    }
    let mut p = Vec::with_capacity(j_max + 1);
    p.push(1.0);
    if j_max == 0 {
        return Ok(p);
    }
    p.push(x);
    for n in 1..j_max {
        let next = ((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
        p.push(next);
    }
    Ok(p)
}

/// Gaussian window weight exp[-(j-I)²/g²], zero outside [j_min, j_max].
pub fn gaussian_window(j: i64, window: &SpinWindow) -> f64 {
    if j < window.j_min as i64 || j > window.j_max as i64 {
        return 0.0;
    }
    let u = (j as f64 - window.center) / window.width;
    (-u * u).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_at_one_is_all_ones() {
        let p = legendre_all(1.0, 4).unwrap();
        assert_eq!(p, vec![1.0; 5]);
    }

    #[test]
    fn legendre_closed_forms_at_half() {
        let p = legendre_all(0.5, 2).unwrap();
        assert_relative_eq!(p[0], 1.0);
        assert_relative_eq!(p[1], 0.5);
        assert_relative_eq!(p[2], -0.125);
    }

    /// P_{2m}(0) = (-1)^m binom(2m, m) / 4^m; check degree 36 against the
    /// exact central-binomial value computed in integer arithmetic.
    #[test]
    fn legendre_at_zero_degree_36() {
        // binom(36, 18) computed with u128 to avoid overflow.
        let mut binom: u128 = 1;
        for k in 0..18u128 {
            binom = binom * (36 - k) / (k + 1);
        }
        let expected = binom as f64 / 4f64.powi(18); // m = 18 is even, sign +1
        let p = legendre_all(0.0, 36).unwrap();
        assert_relative_eq!(p[36], expected, max_relative = 1e-12);
        // exact value is 0.132072…; the standard asymptotic sqrt(2/(pi*J)) gives 0.1330
        assert!((expected - 0.1321).abs() < 5e-4);
    }

    #[test]
    fn legendre_rejects_out_of_domain() {
        assert!(legendre_all(1.0 + 1e-9, 3).is_err());
        assert!(legendre_all(-1.5, 3).is_err());
    }

    #[test]
    fn legendre_bounded_up_to_degree_200() {
        for i in 0..=400 {
            let x = -1.0 + i as f64 / 200.0;
            let p = legendre_all(x, 200).unwrap();
            for v in p {
                assert!(v.abs() <= 1.0 + 1e-12, "|P_J({x})| = {} > 1", v.abs());
            }
        }
    }

    #[test]
    fn legendre_prefix_consistency() {
        for &x in &[-0.9, -0.3, 0.0, 0.4, 0.99] {
            let long = legendre_all(x, 50).unwrap();
            for n in 0..50 {
                let short = legendre_all(x, n).unwrap();
                assert_eq!(&long[..=n], short.as_slice());
            }
        }
    }

    #[test]
    fn window_peak_and_one_width() {
        let w = SpinWindow::new(36.0, 2.0).unwrap();
        assert_eq!(gaussian_window(36, &w), 1.0);
        assert_relative_eq!(gaussian_window(38, &w), (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn window_even_symmetry_and_monotone() {
        let w = SpinWindow::new(36.0, 3.0).unwrap();
        for k in 1..=10i64 {
            assert_eq!(gaussian_window(36 - k, &w), gaussian_window(36 + k, &w));
            assert!(gaussian_window(36 + k, &w) < gaussian_window(36 + k - 1, &w));
        }
    }

    #[test]
    fn window_zero_outside_truncation() {
        let w = SpinWindow::new(10.0, 1.0).unwrap();
        assert_eq!(w.j_min, 4);
        assert_eq!(w.j_max, 16);
        assert_eq!(gaussian_window(3, &w), 0.0);
        assert_eq!(gaussian_window(17, &w), 0.0);
        // edge weight relative to peak below 1e-8
        assert!(gaussian_window(w.j_min as i64, &w) <= 1e-8);
        assert!(gaussian_window(w.j_max as i64, &w) <= 1e-8);
    }

    #[test]
    fn window_rejects_bad_width() {
        assert!(SpinWindow::new(10.0, 0.0).is_err());
        assert!(SpinWindow::new(10.0, -1.0).is_err());
    }
}
