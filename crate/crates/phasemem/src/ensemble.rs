//! Monte Carlo oracle for the correlation model.
//!
//! Each realization draws complex white Gaussian noise on a time grid and a
//! shared Cauchy random-walk rotation phase, then transforms to the energy
//! domain. The ensemble mean of δS̄^J(E+ε) δS̄^{J'}(E)* is then exactly the
//! analytic spin off-diagonal kernel: the time-domain correlation is
//! H(t) e^{−Γt} e^{−iωΔJ t} E[e^{−iΔJ θ_rot(t)}]
//!   = H(t) e^{−(Γ+β|ΔJ|)t − iωΔJ t},
//! whose transform is Γ/(Γ+β|ΔJ|+iωΔJ−iε) (the Cauchy characteristic
//! function supplies the e^{−β|ΔJ|t} factor). Synthetic excitation
//! functions and ensemble ACFs built on top of this validate the analytic
//! autocorrelation model without assuming its derivation.

use crate::acf::{CorrelationSeries, ModelParams};
use crate::error::{PhasememError, Result};
use crate::estimator::{sample_acf, ExcitationFunction};
use crate::specfun::SpinWindow;
use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Optional linear energy dependence of the window center,
/// I(E) = Ī + Ī (E − Ē)/ΔE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSpinDrift {
    pub e_bar: f64,
    pub delta_e: f64,
}

/// Full configuration of one ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub params: ModelParams,
    pub window: SpinWindow,
    /// Average deflection angle Φ, radians.
    pub phi: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub e_step: f64,
    /// Number of time samples, a power of two ≥ 1024.
    pub n_samples: usize,
    /// Length of the time grid in ħ/MeV; must cover ≥ 10 decay lifetimes.
    pub t_max: f64,
    /// Constant potential-scattering offset σ_d.
    pub sigma_d: f64,
    pub n_realizations: usize,
    pub base_seed: u64,
    /// When set, the window center drifts linearly with E.
    pub spin_drift: Option<LinearSpinDrift>,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.e_max > self.e_min) || !(self.e_step > 0.0) {
            return Err(PhasememError::Config("bad energy grid".into()));
        }
        if self.n_samples < 1024 || !self.n_samples.is_power_of_two() {
            return Err(PhasememError::Config(
                "n_samples must be a power of two >= 1024".into(),
            ));
        }
        if self.t_max < 10.0 / self.params.gamma {
            return Err(PhasememError::Config(format!(
                "t_max {} too small: must cover 10 lifetimes ({})",
                self.t_max,
                10.0 / self.params.gamma
            )));
        }
        let dt = self.dt();
        let dt_decay = 1.0 / (10.0 * self.params.gamma);
        let dt_rot = std::f64::consts::PI
            / (10.0 * self.params.hbar_omega * self.window.j_max.max(1) as f64);
        if dt > dt_decay.min(dt_rot) {
            return Err(PhasememError::Config(format!(
                "time step {dt} too coarse: needs <= {}",
                dt_decay.min(dt_rot)
            )));
        }
        if self.n_realizations == 0 {
            return Err(PhasememError::Config("n_realizations must be > 0".into()));
        }
        if self.sigma_d < 0.0 {
            return Err(PhasememError::Config("sigma_d must be >= 0".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_samples as f64
    }

    pub fn energies(&self) -> Vec<f64> {
        let n = ((self.e_max - self.e_min) / self.e_step).round() as usize + 1;
        (0..n).map(|k| self.e_min + k as f64 * self.e_step).collect()
    }

    /// Window center at energy `e` (fixed unless spin drift is configured).
    pub fn window_center(&self, e: f64) -> f64 {
        match self.spin_drift {
            None => self.window.center,
            Some(d) => self.window.center * (1.0 + (e - d.e_bar) / d.delta_e),
        }
    }
}

/// One realization of δS̄^J(E_k) over the retained J range.
#[derive(Debug, Clone)]
pub struct SMatrixRealization {
    pub j_min: u32,
    pub j_max: u32,
    pub energies: Vec<f64>,
    /// data[j - j_min][k]
    pub data: Vec<Vec<Complex64>>,
}

impl SMatrixRealization {
    pub fn element(&self, j: u32, k: usize) -> Complex64 {
        self.data[(j - self.j_min) as usize][k]
    }

    pub fn n_energies(&self) -> usize {
        self.energies.len()
    }
}

/// Stream roles for the per-realization RNG split.
const STREAM_GAUSSIAN: u64 = 0;
const STREAM_CAUCHY: u64 = 1;

/// Counter-based generator keyed by (base_seed, realization_index, role):
/// the key fills the ChaCha seed, so streams never overlap and any
/// realization can be regenerated independently of evaluation order.
pub fn stream_rng(base_seed: u64, realization_index: u64, role: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&realization_index.to_le_bytes());
    seed[16..24].copy_from_slice(&role.to_le_bytes());
    seed[24..32].copy_from_slice(b"phasemem");
    ChaCha8Rng::from_seed(seed)
}

/// Uniform draw on the open interval (0, 1), endpoints excluded.
fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Standard normal via Box-Muller on open-interval uniforms.
pub(crate) fn standard_normal(rng: &mut impl RngCore) -> (f64, f64) {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    (r * phi.cos(), r * phi.sin())
}

/// Single Cauchy draw with the given scale, by inverse CDF.
fn cauchy_draw(scale: f64, rng: &mut impl RngCore) -> f64 {
    scale * (std::f64::consts::PI * (open_unit(rng) - 0.5)).tan()
}

/// Cumulative Cauchy random walk θ_rot(t_m): θ_rot(0) = 0 and independent
/// increments of scale β·Δt per step. Identically zero for β = 0.
pub fn cauchy_phase_path(n_samples: usize, dt: f64, beta: f64, rng: &mut impl RngCore) -> Vec<f64> {
    let mut path = Vec::with_capacity(n_samples);
    let mut acc = 0.0;
    path.push(0.0);
    if beta == 0.0 {
        path.resize(n_samples, 0.0);
        return path;
    }
    let scale = beta * dt;
    for _ in 1..n_samples {
        acc += cauchy_draw(scale, rng);
        path.push(acc);
    }
    path
}

/// Synthesize one realization of δS̄^J(E_k):
/// δS̄^J(E_k) = √Γ Σ_m exp[iE_k t_m − Γt_m/2 − iJ(ωt_m + θ_rot(t_m))] c_m Δt,
/// with c_m complex white Gaussian noise of variance 1/Δt per sample and a
/// single Cauchy phase path shared by all J.
pub fn synth_smatrix(config: &EnsembleConfig, realization_index: u64) -> Result<SMatrixRealization> {
    config.validate()?;
    let n = config.n_samples;
    let dt = config.dt();
    let gamma = config.params.gamma;
    let omega = config.params.hbar_omega;

    let mut noise_rng = stream_rng(config.base_seed, realization_index, STREAM_GAUSSIAN);
    let noise_sd = (0.5 / dt).sqrt(); // var 1/(2Δt) per quadrature
    let mut cauchy_rng = stream_rng(config.base_seed, realization_index, STREAM_CAUCHY);
    let theta_rot = cauchy_phase_path(n, dt, config.params.beta, &mut cauchy_rng);

    // decay-weighted noise, shared by all J
    let mut base = Vec::with_capacity(n);
    for m in 0..n {
        let t = m as f64 * dt;
        let (re, im) = standard_normal(&mut noise_rng);
        let c = Complex64::new(re * noise_sd, im * noise_sd);
        base.push(c * (-0.5 * gamma * t).exp() * dt);
    }

    // per-J rotational phase factors applied to the shared noise
    let spins: Vec<u32> = config.window.spins().collect();
    let rotated: Vec<Vec<Complex64>> = spins
        .iter()
        .map(|&j| {
            (0..n)
                .map(|m| {
                    let phase = -(j as f64) * (omega * m as f64 * dt + theta_rot[m]);
                    base[m] * Complex64::from_polar(1.0, phase)
                })
                .collect()
        })
        .collect();

    // direct transform onto the requested energies
    let energies = config.energies();
    let sqrt_gamma = gamma.sqrt();
    let mut data = vec![vec![Complex64::new(0.0, 0.0); energies.len()]; spins.len()];
    let mut e_row = vec![Complex64::new(0.0, 0.0); n];
    for (k, &e) in energies.iter().enumerate() {
        for (m, slot) in e_row.iter_mut().enumerate() {
            *slot = Complex64::from_polar(1.0, e * m as f64 * dt);
        }
        for (ji, row) in rotated.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (em, am) in e_row.iter().zip(row) {
                acc += em * am;
            }
            data[ji][k] = sqrt_gamma * acc;
        }
    }

    Ok(SMatrixRealization {
        j_min: config.window.j_min,
        j_max: config.window.j_max,
        energies,
        data,
    })
}

/// Cross section σ(E_k) = σ_d + |δf⁺(E_k)|² + |δf⁻(E_k)|² with
/// δf^(±) = Σ_J (2J+1) W(J; I(E_k), g)^{1/2} δS̄^J(E_k) e^{iJ(Φ±θ)}.
pub fn synth_excitation(
    smatrix: &SMatrixRealization,
    config: &EnsembleConfig,
    theta: f64,
) -> Result<ExcitationFunction> {
    let mut sigma = Vec::with_capacity(smatrix.n_energies());
    for (k, &e) in smatrix.energies.iter().enumerate() {
        let center = config.window_center(e);
        let mut f_plus = Complex64::new(0.0, 0.0);
        let mut f_minus = Complex64::new(0.0, 0.0);
        for j in smatrix.j_min..=smatrix.j_max {
            let u = (j as f64 - center) / config.window.width;
            let w = (-u * u).exp();
            if w == 0.0 {
                continue;
            }
            let amp = (2 * j + 1) as f64 * w.sqrt() * smatrix.element(j, k);
            f_plus += amp * Complex64::from_polar(1.0, j as f64 * (config.phi + theta));
            f_minus += amp * Complex64::from_polar(1.0, j as f64 * (config.phi - theta));
        }
        sigma.push(config.sigma_d + f_plus.norm_sqr() + f_minus.norm_sqr());
    }
    ExcitationFunction::new(smatrix.energies.clone(), sigma, "synthetic")
}

/// Mean and standard error of the sample ACF of synthetic excitation
/// functions across the configured realizations. Realizations run in
/// parallel but are reduced in index order, so results are independent of
/// thread count.
pub fn ensemble_acf(config: &EnsembleConfig, theta: f64, eps_max: f64) -> Result<CorrelationSeries> {
    config.validate()?;
    if config.n_realizations < 2 {
        return Err(PhasememError::Config(
            "ensemble ACF needs at least 2 realizations".into(),
        ));
    }
    let per_real: Vec<Result<CorrelationSeries>> = (0..config.n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let sm = synth_smatrix(config, r)?;
            let xf = synth_excitation(&sm, config, theta)?;
            sample_acf(&xf, eps_max)
        })
        .collect();
    let mut series = Vec::with_capacity(per_real.len());
    for s in per_real {
        series.push(s?);
    }
    crate::estimator::average_channels(&series)
}

/// Exact ensemble-mean ACF of the synthetic cross sections, closed under
/// Wick's theorem. With amplitude correlations
/// R_{s₁s₂}(ε) = Σ_{J,J'} a_J a_{J'} K_{J−J'}(ε) e^{i[J(Φ+s₁θ) − J'(Φ+s₂θ)]},
/// a_J = (2J+1)√W(J) and K the analytic kernel, the covariance of
/// σ = σ_d + |δf⁺|² + |δf⁻|² is Σ_{s₁s₂} |R_{s₁s₂}(ε)|² (the anomalous
/// pairings vanish for circular complex Gaussian noise). Returned
/// normalized to 1 at ε = 0; note the result is nonnegative by
/// construction. This is the analytic target the Monte Carlo estimator
/// must reproduce.
pub fn analytic_ensemble_acf(
    epsilon: f64,
    window: &SpinWindow,
    phi: f64,
    theta: f64,
    params: &ModelParams,
) -> f64 {
    let amp_corr = |s1: f64, s2: f64, eps: f64| -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for j in window.spins() {
            let aj = (2 * j + 1) as f64
                * crate::specfun::gaussian_window(j as i64, window).sqrt();
            for jp in window.spins() {
                let ajp = (2 * jp + 1) as f64
                    * crate::specfun::gaussian_window(jp as i64, window).sqrt();
                let k = crate::acf::smatrix_kernel(j as i64 - jp as i64, eps, params);
                let phase = j as f64 * (phi + s1 * theta) - jp as f64 * (phi + s2 * theta);
                total += aj * ajp * k * Complex64::from_polar(1.0, phase);
            }
        }
        total
    };
    let cov = |eps: f64| -> f64 {
        let mut c = 0.0;
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                c += amp_corr(s1, s2, eps).norm_sqr();
            }
        }
        c
    };
    cov(epsilon) / cov(0.0)
}

/// Pooled estimator of Eq.-3-style C(ε) = ⟨σ(E+ε)σ(E)⟩/⟨σ⟩² − 1 across
/// the whole ensemble: the mean cross section ⟨σ⟩ is estimated once from
/// all realizations and energies, removing the per-realization
/// mean-subtraction bias of the single-series sample ACF. Standard errors
/// are the across-realization spread of the per-realization lag products.
pub fn pooled_acf(
    realizations: &[SMatrixRealization],
    config: &EnsembleConfig,
    theta: f64,
    eps_max: f64,
) -> Result<CorrelationSeries> {
    if realizations.len() < 2 {
        return Err(PhasememError::InsufficientData(
            "pooled ACF needs at least 2 realizations".into(),
        ));
    }
    let functions: Vec<ExcitationFunction> = realizations
        .iter()
        .map(|sm| synth_excitation(sm, config, theta))
        .collect::<Result<_>>()?;
    let n_e = functions[0].len();
    let step = functions[0].step();
    let max_lag = (eps_max / step).floor() as usize;
    if max_lag + 1 >= n_e {
        return Err(PhasememError::Domain(
            "eps_max leaves no admissible energy pairs".into(),
        ));
    }
    let grand_mean = functions
        .iter()
        .flat_map(|xf| xf.sigma.iter())
        .sum::<f64>()
        / (functions.len() * n_e) as f64;
    if grand_mean == 0.0 {
        return Err(PhasememError::Domain("mean cross section is zero".into()));
    }
    let m2 = grand_mean * grand_mean;
    let mut epsilon_values = Vec::with_capacity(max_lag + 1);
    let mut c_values = Vec::with_capacity(max_lag + 1);
    let mut stderr_values = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let per_real: Vec<f64> = functions
            .iter()
            .map(|xf| {
                let s: f64 = (0..n_e - lag)
                    .map(|k| xf.sigma[k + lag] * xf.sigma[k])
                    .sum();
                s / (n_e - lag) as f64 / m2 - 1.0
            })
            .collect();
        let n = per_real.len() as f64;
        let mean = per_real.iter().sum::<f64>() / n;
        let var = per_real.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        epsilon_values.push(lag as f64 * step);
        c_values.push(mean);
        stderr_values.push((var / n).sqrt());
    }
    CorrelationSeries::new(epsilon_values, c_values, Some(stderr_values))
}

/// Empirical correlation ⟨δS̄^J(E+ε) δS̄^{J'}(E)*⟩ at fixed ΔJ and one
/// energy-lag index, averaged over admissible E points and J pairs within a
/// realization, with mean and componentwise stderr across realizations.
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_realizations: usize,
}

/// Estimate the S-matrix correlation kernel from pre-generated realizations.
pub fn empirical_kernel(
    realizations: &[SMatrixRealization],
    delta_j: u32,
    lag: usize,
) -> Result<KernelEstimate> {
    if realizations.len() < 2 {
        return Err(PhasememError::InsufficientData(
            "kernel estimate needs at least 2 realizations".into(),
        ));
    }
    let n_e = realizations[0].n_energies();
    if lag >= n_e {
        return Err(PhasememError::Domain("lag exceeds energy grid".into()));
    }
    let mut per_real = Vec::with_capacity(realizations.len());
    for sm in realizations {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut count = 0usize;
        for j in sm.j_min..=sm.j_max.saturating_sub(delta_j) {
            let hi = j + delta_j;
            if hi > sm.j_max {
                break;
            }
            for k in 0..n_e - lag {
                acc += sm.element(hi, k + lag) * sm.element(j, k).conj();
                count += 1;
            }
        }
        per_real.push(acc / count as f64);
    }
    let n = per_real.len() as f64;
    let mean = per_real.iter().sum::<Complex64>() / n;
    let var_re = per_real.iter().map(|v| (v.re - mean.re).powi(2)).sum::<f64>() / (n - 1.0);
    let var_im = per_real.iter().map(|v| (v.im - mean.im).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KernelEstimate {
        mean,
        stderr_re: (var_re / n).sqrt(),
        stderr_im: (var_im / n).sqrt(),
        n_realizations: per_real.len(),
    })
}

/// Generate all realizations of the configured ensemble in parallel,
/// ordered by realization index.
pub fn generate_realizations(config: &EnsembleConfig) -> Result<Vec<SMatrixRealization>> {
    config.validate()?;
    let out: Vec<Result<SMatrixRealization>> = (0..config.n_realizations as u64)
        .into_par_iter()
        .map(|r| synth_smatrix(config, r))
        .collect();
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acf::smatrix_kernel;

    fn small_config() -> EnsembleConfig {
        EnsembleConfig {
            params: ModelParams::new(0.15, 0.03, 0.75, 1.0).unwrap(),
            window: SpinWindow::new(36.0, 1.0).unwrap(),
            phi: 0.0,
            e_min: 49.0,
            e_max: 57.0,
            e_step: 0.025,
            n_samples: 8192,
            t_max: 70.0,
            sigma_d: 0.0,
            n_realizations: 8,
            base_seed: 42,
            spin_drift: None,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        assert!(c.validate().is_ok());
        c.t_max = 5.0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.n_samples = 3000;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.n_samples = 1024; // dt = 68 ms too coarse for the rotation phase
        assert!(c.validate().is_err());
    }

    #[test]
    fn cauchy_path_zero_scale() {
        let mut rng = stream_rng(1, 0, 1);
        let path = cauchy_phase_path(256, 0.01, 0.0, &mut rng);
        assert!(path.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cauchy_quartiles() {
        // empirical quartiles of single increments at ±scale within 2%
        let beta = 0.4;
        let dt = 0.05;
        let scale = beta * dt;
        let mut rng = stream_rng(7, 0, 1);
        let mut draws: Vec<f64> = (0..100_000).map(|_| cauchy_draw(scale, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let q1 = draws[25_000];
        let q3 = draws[75_000];
        assert!((q1 + scale).abs() < 0.02 * scale, "q1 = {q1}");
        assert!((q3 - scale).abs() < 0.02 * scale, "q3 = {q3}");
    }

    #[test]
    fn cauchy_stability_under_addition() {
        // increment over [t1, t2] in one draw vs as a sum of 8 sub-steps:
        // two-sample Kolmogorov-Smirnov at the 1% level
        let beta = 0.3;
        let total_dt = 0.8;
        let n = 10_000;
        let mut rng_a = stream_rng(11, 0, 1);
        let mut one_step: Vec<f64> = (0..n)
            .map(|_| cauchy_draw(beta * total_dt, &mut rng_a))
            .collect();
        let mut rng_b = stream_rng(11, 1, 1);
        let mut summed: Vec<f64> = (0..n)
            .map(|_| {
                (0..8)
                    .map(|_| cauchy_draw(beta * total_dt / 8.0, &mut rng_b))
                    .sum()
            })
            .collect();
        one_step.sort_by(f64::total_cmp);
        summed.sort_by(f64::total_cmp);
        // KS statistic on the pooled sample
        let mut d_max = 0.0f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < n && j < n {
            if one_step[i] <= summed[j] {
                i += 1;
            } else {
                j += 1;
            }
            d_max = d_max.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        let critical = 1.628 * (2.0 / n as f64).sqrt(); // α = 0.01
        assert!(d_max < critical, "KS D = {d_max}, critical {critical}");
    }

    #[test]
    fn smatrix_determinism() {
        let c = small_config();
        let a = synth_smatrix(&c, 3).unwrap();
        let b = synth_smatrix(&c, 3).unwrap();
        for (ra, rb) in a.data.iter().zip(&b.data) {
            for (x, y) in ra.iter().zip(rb) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        // different realizations differ
        let other = synth_smatrix(&c, 4).unwrap();
        assert!(a.data[0][0] != other.data[0][0]);
    }

    #[test]
    fn shared_noise_coherence_for_frozen_rotor() {
        // with ω = 0 and β = 0 the J dependence disappears entirely
        let mut c = small_config();
        c.params = ModelParams {
            gamma: 0.15,
            beta: 0.0,
            hbar_omega: 1e-300, // effectively zero rotation, keeps validation
            d: 1.0,
            phase_constant: Default::default(),
        };
        let sm = synth_smatrix(&c, 0).unwrap();
        for row in &sm.data[1..] {
            for (x, y) in row.iter().zip(&sm.data[0]) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn smatrix_moments_small_ensemble() {
        // mean → 0 and ⟨|δS|²⟩ → 1 within 3 standard errors
        let mut c = small_config();
        c.n_realizations = 60;
        let reals = generate_realizations(&c).unwrap();
        let est = empirical_kernel(&reals, 0, 0).unwrap();
        assert!(
            (est.mean.re - 1.0).abs() < 3.0 * est.stderr_re,
            "|dS|^2 = {} ± {}",
            est.mean.re,
            est.stderr_re
        );
        // componentwise mean of δS at a few grid points
        let n = reals.len() as f64;
        for (ji, k) in [(0usize, 10usize), (5, 200), (12, 300)] {
            let mean: Complex64 = reals.iter().map(|r| r.data[ji][k]).sum::<Complex64>() / n;
            let var_re = reals
                .iter()
                .map(|r| (r.data[ji][k].re - mean.re).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            let se = (var_re / n).sqrt();
            assert!(mean.re.abs() < 3.5 * se, "mean {} vs se {}", mean.re, se);
        }
    }

    #[test]
    fn empirical_kernel_tracks_analytic_small() {
        let mut c = small_config();
        c.n_realizations = 60;
        let reals = generate_realizations(&c).unwrap();
        for delta_j in 0..=2u32 {
            for lag in [0usize, 20, 40] {
                let eps = lag as f64 * c.e_step;
                let est = empirical_kernel(&reals, delta_j, lag).unwrap();
                let analytic = smatrix_kernel(delta_j as i64, eps, &c.params);
                assert!(
                    (est.mean.re - analytic.re).abs() < 4.0 * est.stderr_re,
                    "dJ={delta_j} lag={lag}: re {} vs {} ± {}",
                    est.mean.re,
                    analytic.re,
                    est.stderr_re
                );
                // at dJ = 0, lag = 0 the normalized kernel is identically real,
                // so the imaginary spread collapses to exactly zero
                assert!(
                    (est.mean.im - analytic.im).abs() < 4.0 * est.stderr_im + 1e-12,
                    "dJ={delta_j} lag={lag}: im {} vs {} ± {}",
                    est.mean.im,
                    analytic.im,
                    est.stderr_im
                );
            }
        }
    }

    #[test]
    fn analytic_acf_normalized_and_nonnegative() {
        let c = small_config();
        for i in 0..=40 {
            let eps = 2.0 * i as f64 / 40.0;
            let v = analytic_ensemble_acf(eps, &c.window, c.phi, 1.2, &c.params);
            assert!(v >= 0.0, "analytic ACF negative at eps={eps}: {v}");
            assert!(v <= 1.0 + 1e-12);
        }
        let at_zero = analytic_ensemble_acf(0.0, &c.window, c.phi, 1.2, &c.params);
        assert!((at_zero - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pooled_acf_matches_analytic_prediction() {
        let mut c = small_config();
        c.n_realizations = 120;
        let theta = std::f64::consts::FRAC_PI_2;
        let reals = generate_realizations(&c).unwrap();
        let pooled = pooled_acf(&reals, &c, theta, 2.0).unwrap();
        let norm = pooled.normalized().unwrap();
        let mut sq = 0.0;
        for (&eps, &v) in norm.epsilon_values.iter().zip(&norm.c_values) {
            let a = analytic_ensemble_acf(eps, &c.window, c.phi, theta, &c.params);
            sq += (v - a).powi(2);
        }
        let rms = (sq / norm.len() as f64).sqrt();
        assert!(rms < 0.08, "pooled vs analytic RMS {rms}");
    }

    #[test]
    fn excitation_sigma_floor_and_single_j() {
        let mut c = small_config();
        c.sigma_d = 1.5;
        let sm = synth_smatrix(&c, 0).unwrap();
        let xf = synth_excitation(&sm, &c, 1.4).unwrap();
        assert!(xf.sigma.iter().all(|&s| s >= c.sigma_d));

        // single-J window: σ − σ_d strictly proportional to |δS|²
        let mut c1 = small_config();
        c1.window = SpinWindow {
            center: 36.0,
            width: 1.0,
            j_min: 36,
            j_max: 36,
        };
        let sm1 = synth_smatrix(&c1, 0).unwrap();
        let xf1 = synth_excitation(&sm1, &c1, 1.4).unwrap();
        let coeff = 2.0 * (73.0f64) * 73.0; // 2(2J+1)² W(Ī)=1
        for (k, &s) in xf1.sigma.iter().enumerate() {
            let expected = coeff * sm1.element(36, k).norm_sqr();
            approx::assert_relative_eq!(s, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn excitation_mean_level() {
        // ensemble mean of σ − σ_d → 2 Σ_J (2J+1)² W(J) within 3 SE
        let mut c = small_config();
        c.n_realizations = 40;
        let reals = generate_realizations(&c).unwrap();
        let theta = 1.5;
        let mut means = Vec::new();
        for sm in &reals {
            let xf = synth_excitation(sm, &c, theta).unwrap();
            means.push(xf.sigma.iter().sum::<f64>() / xf.sigma.len() as f64);
        }
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let se = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let analytic: f64 = c
            .window
            .spins()
            .map(|j| {
                let u = (j as f64 - 36.0) / 1.0;
                2.0 * ((2 * j + 1) as f64).powi(2) * (-u * u).exp()
            })
            .sum();
        assert!(
            (mean - analytic).abs() < 3.0 * se,
            "mean {mean} vs {analytic} ± {se}"
        );
    }

    #[test]
    fn ensemble_acf_stderr_scaling() {
        let mut c = small_config();
        c.n_realizations = 16;
        let a = ensemble_acf(&c, 1.5, 1.0).unwrap();
        c.n_realizations = 64;
        let b = ensemble_acf(&c, 1.5, 1.0).unwrap();
        // quadrupling realizations roughly halves the stderr
        let mean_ratio: f64 = a
            .stderr_values
            .as_ref()
            .unwrap()
            .iter()
            .zip(b.stderr_values.as_ref().unwrap())
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| y / x)
            .sum::<f64>()
            / a.len() as f64;
        assert!(
            (mean_ratio - 0.5).abs() < 0.2,
            "stderr ratio {mean_ratio} not near 0.5"
        );
    }
}
