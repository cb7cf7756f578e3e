//! Sample energy autocorrelation functions from excitation-function data,
//! with detrending and channel averaging.

use crate::acf::CorrelationSeries;
use crate::error::{PhasememError, Result};
use serde::{Deserialize, Serialize};

/// A channel-tagged cross section series σ(E) on a uniform energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationFunction {
    pub energies: Vec<f64>,
    pub sigma: Vec<f64>,
    pub channel_label: String,
}

impl ExcitationFunction {
    pub fn new(energies: Vec<f64>, sigma: Vec<f64>, channel_label: impl Into<String>) -> Result<Self> {
        if energies.len() != sigma.len() {
            return Err(PhasememError::GridMismatch(
                "energy and sigma lengths differ".into(),
            ));
        }
        if energies.len() < 16 {
            return Err(PhasememError::InsufficientData(
                "excitation function needs at least 16 points".into(),
            ));
        }
        if sigma.iter().any(|&s| s < 0.0) {
            return Err(PhasememError::Domain("sigma must be nonnegative".into()));
        }
        let step = energies[1] - energies[0];
        if !(step > 0.0) {
            return Err(PhasememError::Domain(
                "energies must be strictly increasing".into(),
            ));
        }
        let scale = energies.last().unwrap().abs().max(1.0);
        for (i, pair) in energies.windows(2).enumerate() {
            let d = pair[1] - pair[0];
            if !(d > 0.0) {
                return Err(PhasememError::Domain(
                    "energies must be strictly increasing".into(),
                ));
            }
            if (d - step).abs() > 1e-6 * scale {
                return Err(PhasememError::Domain(format!(
                    "energy grid not uniform at index {i}"
                )));
            }
        }
        Ok(Self {
            energies,
            sigma,
            channel_label: channel_label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    pub fn span(&self) -> f64 {
        self.energies.last().unwrap() - self.energies[0]
    }
}

/// Background removal method for [`detrend`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetrendMethod {
    /// Least-squares polynomial of the given order (≤ 3).
    Poly(usize),
    /// Centered boxcar average of the given width in MeV.
    MovingAverage(f64),
}

/// Split an excitation function into trend and fluctuation, with
/// trend + fluctuation = input exactly and zero-mean fluctuation.
pub fn detrend(xf: &ExcitationFunction, method: DetrendMethod) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = xf.len();
    let trend = match method {
        DetrendMethod::Poly(order) => {
            if order > 3 {
                return Err(PhasememError::Domain(
                    "polynomial detrend order must be <= 3".into(),
                ));
            }
            poly_trend(&xf.energies, &xf.sigma, order)
        }
        DetrendMethod::MovingAverage(window_mev) => {
            if !(window_mev > 0.0) || window_mev > xf.span() / 3.0 {
                return Err(PhasememError::Domain(
                    "moving-average window must be positive and at most 1/3 of the data span".into(),
                ));
            }
            let half = (window_mev / (2.0 * xf.step())).round() as usize;
            if half == 0 {
                return Err(PhasememError::InsufficientData(
                    "moving-average window shorter than the grid step".into(),
                ));
            }
            let mut trend = Vec::with_capacity(n);
            for i in 0..n {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                let m: f64 = xf.sigma[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
                trend.push(m);
            }
            // shift the residual mean into the trend so the fluctuation
            // averages to zero despite edge truncation
            let resid_mean: f64 = xf
                .sigma
                .iter()
                .zip(&trend)
                .map(|(s, t)| s - t)
                .sum::<f64>()
                / n as f64;
            for t in &mut trend {
                *t += resid_mean;
            }
            trend
        }
    };
    let fluctuation: Vec<f64> = xf.sigma.iter().zip(&trend).map(|(s, t)| s - t).collect();
    Ok((fluctuation, trend))
}

/// Least-squares polynomial trend on a centered/scaled abscissa.
fn poly_trend(energies: &[f64], sigma: &[f64], order: usize) -> Vec<f64> {
    let n = energies.len();
    let e0 = (energies[0] + energies[n - 1]) / 2.0;
    let scale = (energies[n - 1] - energies[0]) / 2.0;
    let m = order + 1;
    // normal equations A c = b for the Vandermonde basis in u = (E-e0)/scale
    let u: Vec<f64> = energies.iter().map(|e| (e - e0) / scale).collect();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (ui, si) in u.iter().zip(sigma) {
        let mut pow = vec![1.0; 2 * m - 1];
        for k in 1..2 * m - 1 {
            pow[k] = pow[k - 1] * ui;
        }
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pow[r + c];
            }
            b[r] += pow[r] * si;
        }
    }
    let coeff = solve_small(&mut a, &mut b);
    u.iter()
        .map(|ui| {
            let mut v = 0.0;
            for k in (0..m).rev() {
                v = v * ui + coeff[k];
            }
            v
        })
        .collect()
}

/// Gaussian elimination with partial pivoting for the tiny normal systems.
fn solve_small(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut v = b[r];
        for c in r + 1..n {
            v -= a[r][c] * x[c];
        }
        x[r] = v / a[r][r];
    }
    x
}

/// Sample energy autocorrelation function
/// C(ε_l) = ⟨σ(E+ε_l)σ(E)⟩ / (⟨σ(E+ε_l)⟩⟨σ(E)⟩) − 1,
/// with all means taken over the grid points admissible at lag l.
pub fn sample_acf(xf: &ExcitationFunction, eps_max: f64) -> Result<CorrelationSeries> {
    sample_acf_raw(&xf.energies, &xf.sigma, eps_max)
}

/// Estimator core on bare series; also used for detrended fluctuations,
/// which may dip below zero.
pub(crate) fn sample_acf_raw(
    energies: &[f64],
    sigma: &[f64],
    eps_max: f64,
) -> Result<CorrelationSeries> {
    let n = sigma.len();
    if n < 16 || energies.len() != n {
        return Err(PhasememError::InsufficientData(
            "need at least 16 matched points".into(),
        ));
    }
    let step = energies[1] - energies[0];
    let span = energies[n - 1] - energies[0];
    if eps_max > span / 4.0 + 1e-12 * span {
        return Err(PhasememError::Domain(format!(
            "eps_max {eps_max} exceeds a quarter of the data span {span}"
        )));
    }
    if !(eps_max >= 0.0) {
        return Err(PhasememError::Domain("eps_max must be >= 0".into()));
    }
    let mean_all: f64 = sigma.iter().sum::<f64>() / n as f64;
    if mean_all == 0.0 {
        return Err(PhasememError::Domain(
            "mean cross section is zero, ACF undefined".into(),
        ));
    }
    let l_max = (eps_max / step + 1e-9).floor() as usize;
    let mut eps = Vec::with_capacity(l_max + 1);
    let mut c = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let m = n - l;
        let head = &sigma[..m];
        let tail = &sigma[l..];
        let mean_head: f64 = head.iter().sum::<f64>() / m as f64;
        let mean_tail: f64 = tail.iter().sum::<f64>() / m as f64;
        let mean_prod: f64 = head.iter().zip(tail).map(|(x, y)| x * y).sum::<f64>() / m as f64;
        eps.push(l as f64 * step);
        c.push(mean_prod / (mean_head * mean_tail) - 1.0);
    }
    CorrelationSeries::new(eps, c, None)
}

/// Pointwise unweighted mean of correlation series sharing one ε grid;
/// stderr is the across-channel sample standard error.
pub fn average_channels(series_list: &[CorrelationSeries]) -> Result<CorrelationSeries> {
    if series_list.is_empty() {
        return Err(PhasememError::InsufficientData(
            "no correlation series to average".into(),
        ));
    }
    let grid = &series_list[0].epsilon_values;
    for s in &series_list[1..] {
        if s.epsilon_values.len() != grid.len()
            || s.epsilon_values
                .iter()
                .zip(grid)
                .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(PhasememError::GridMismatch(
                "correlation series have different epsilon grids".into(),
            ));
        }
    }
    let n = series_list.len() as f64;
    let mut mean = vec![0.0; grid.len()];
    for s in series_list {
        for (m, v) in mean.iter_mut().zip(&s.c_values) {
            *m += v / n;
        }
    }
    let stderr: Vec<f64> = (0..grid.len())
        .map(|i| {
            if series_list.len() < 2 {
                return 0.0;
            }
            let var: f64 = series_list
                .iter()
                .map(|s| (s.c_values[i] - mean[i]).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    CorrelationSeries::new(grid.clone(), mean, Some(stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_grid(n: usize, step: f64) -> Vec<f64> {
        (0..n).map(|i| 49.0 + i as f64 * step).collect()
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert!(ExcitationFunction::new(uniform_grid(10, 0.1), vec![1.0; 10], "el").is_err());
        let mut e = uniform_grid(20, 0.1);
        e[10] += 0.05; // breaks uniformity
        assert!(ExcitationFunction::new(e, vec![1.0; 20], "el").is_err());
        assert!(ExcitationFunction::new(uniform_grid(20, 0.1), vec![-1.0; 20], "el").is_err());
    }

    #[test]
    fn detrend_constant_input() {
        let xf = ExcitationFunction::new(uniform_grid(32, 0.25), vec![3.5; 32], "el").unwrap();
        let (fluct, trend) = detrend(&xf, DetrendMethod::MovingAverage(2.0)).unwrap();
        for (f, t) in fluct.iter().zip(&trend) {
            assert_relative_eq!(*f, 0.0, epsilon = 1e-12);
            assert_relative_eq!(*t, 3.5, max_relative = 1e-12);
        }
        let (fluct, _) = detrend(&xf, DetrendMethod::Poly(2)).unwrap();
        for f in fluct {
            assert!(f.abs() < 1e-9);
        }
    }

    #[test]
    fn detrend_window_too_large() {
        let xf = ExcitationFunction::new(uniform_grid(32, 0.25), vec![1.0; 32], "el").unwrap();
        assert!(detrend(&xf, DetrendMethod::MovingAverage(10.0)).is_err());
        assert!(detrend(&xf, DetrendMethod::Poly(4)).is_err());
    }

    #[test]
    fn detrend_recovers_sinusoid_on_linear_trend() {
        // linear trend + sinusoid of period 0.75 MeV; boxcar window 2 MeV
        let step = 0.025;
        let n = 321; // 8 MeV span
        let period = 0.75;
        let amp = 0.3;
        let energies = uniform_grid(n, step);
        let sigma: Vec<f64> = energies
            .iter()
            .map(|e| 5.0 + 0.4 * (e - 49.0) + amp * (2.0 * std::f64::consts::PI * e / period).sin())
            .collect();
        let xf = ExcitationFunction::new(energies, sigma, "el").unwrap();
        let (fluct, trend) = detrend(&xf, DetrendMethod::MovingAverage(2.0)).unwrap();
        // exact split
        for i in 0..n {
            assert_relative_eq!(fluct[i] + trend[i], xf.sigma[i], max_relative = 1e-14);
        }
        // zero mean
        let m: f64 = fluct.iter().sum::<f64>() / n as f64;
        assert!(m.abs() < 1e-12);
        // discrete boxcar response: r = sin(M πΔ/L) / (M sin(πΔ/L))
        let half = (2.0 / (2.0 * step)).round() as usize;
        let m_pts = (2 * half + 1) as f64;
        let x = std::f64::consts::PI * step / period;
        let r = (m_pts * x).sin() / (m_pts * x.sin());
        let expected_amp = amp * (1.0 - r);
        let recovered = fluct[half..n - half]
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(
            (recovered - expected_amp).abs() < 0.05 * expected_amp,
            "recovered {recovered}, expected {expected_amp}"
        );
    }

    #[test]
    fn acf_constant_is_zero() {
        let xf = ExcitationFunction::new(uniform_grid(64, 0.1), vec![2.0; 64], "el").unwrap();
        let acf = sample_acf(&xf, 1.0).unwrap();
        for c in acf.c_values {
            assert!(c.abs() < 1e-13);
        }
    }

    #[test]
    fn acf_sinusoid_closed_form() {
        let step = 0.025;
        let period = 0.75;
        let n_periods = 20.0f64;
        let n = (n_periods * period / step).round() as usize + 1;
        let a = 0.2;
        let energies = uniform_grid(n, step);
        let sigma: Vec<f64> = energies
            .iter()
            .map(|e| 1.0 + a * (2.0 * std::f64::consts::PI * e / period).cos())
            .collect();
        let xf = ExcitationFunction::new(energies, sigma, "el").unwrap();
        let span = xf.span();
        let acf = sample_acf(&xf, span / 4.0).unwrap();
        assert!((acf.c_values[0] - 0.02).abs() < 0.02 * 0.02);
        for (eps, c) in acf.epsilon_values.iter().zip(&acf.c_values) {
            let truth = a * a / 2.0 * (2.0 * std::f64::consts::PI * eps / period).cos();
            assert!(
                (c - truth).abs() < 0.02 * (a * a / 2.0),
                "eps {eps}: {c} vs {truth}"
            );
        }
    }

    #[test]
    fn acf_scale_invariance() {
        let step = 0.05;
        let n = 120;
        let energies = uniform_grid(n, step);
        let sigma: Vec<f64> = (0..n)
            .map(|i| 2.0 + (i as f64 * 0.37).sin() + 0.3 * (i as f64 * 1.7).cos())
            .collect();
        let xf = ExcitationFunction::new(energies.clone(), sigma.clone(), "el").unwrap();
        let scaled =
            ExcitationFunction::new(energies, sigma.iter().map(|s| 7.25 * s).collect(), "el")
                .unwrap();
        let a = sample_acf(&xf, 1.0).unwrap();
        let b = sample_acf(&scaled, 1.0).unwrap();
        for (x, y) in a.c_values.iter().zip(&b.c_values) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn acf_offset_covariance() {
        // adding a constant rescales C by the product of per-lag mean ratios
        let step = 0.05;
        let n = 100;
        let energies = uniform_grid(n, step);
        let sigma: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64 * 0.9).sin()).collect();
        let xf = ExcitationFunction::new(energies.clone(), sigma.clone(), "el").unwrap();
        let c = 2.5;
        let shifted =
            ExcitationFunction::new(energies, sigma.iter().map(|s| s + c).collect(), "el").unwrap();
        let a = sample_acf(&xf, 1.0).unwrap();
        let b = sample_acf(&shifted, 1.0).unwrap();
        for (l, (eps, cb)) in b.epsilon_values.iter().zip(&b.c_values).enumerate() {
            let m = n - l;
            let mh: f64 = sigma[..m].iter().sum::<f64>() / m as f64;
            let mt: f64 = sigma[l..].iter().sum::<f64>() / m as f64;
            let expected = a.c_values[l] * (mh * mt) / ((mh + c) * (mt + c));
            assert_relative_eq!(*cb, expected, max_relative = 1e-10, epsilon = 1e-14);
            let _ = eps;
        }
    }

    #[test]
    fn acf_rejects_degenerate() {
        let xf = ExcitationFunction::new(uniform_grid(32, 0.1), vec![0.0; 32], "el").unwrap();
        assert!(sample_acf(&xf, 0.5).is_err());
        let xf2 = ExcitationFunction::new(uniform_grid(32, 0.1), vec![1.0; 32], "el").unwrap();
        assert!(sample_acf(&xf2, 3.0).is_err()); // beyond quarter span
    }

    #[test]
    fn channel_average_basics() {
        let s1 = CorrelationSeries::new(vec![0.0], vec![0.5], None).unwrap();
        let s2 = CorrelationSeries::new(vec![0.0], vec![1.5], None).unwrap();
        let avg = average_channels(&[s1.clone(), s2]).unwrap();
        assert_relative_eq!(avg.c_values[0], 1.0);
        assert_relative_eq!(avg.stderr_values.as_ref().unwrap()[0], 0.5);

        let same = average_channels(&[s1.clone(), s1.clone()]).unwrap();
        assert_relative_eq!(same.c_values[0], 0.5);
        assert_relative_eq!(same.stderr_values.as_ref().unwrap()[0], 0.0);

        assert!(average_channels(&[]).is_err());
        let other = CorrelationSeries::new(vec![0.0, 0.1], vec![1.0, 0.5], None).unwrap();
        assert!(average_channels(&[s1, other]).is_err());
    }
}
