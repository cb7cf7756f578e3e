//! The `phasemem` command-line pipeline.
//!
//! Subcommands: `model`, `tps`, `simulate`, `acf`, `fit`, `scan`,
//! `kinematics`. Every run writes a manifest JSON next to its outputs.
//! Exit codes: 0 success, 2 usage error, 3 input validation error,
//! 4 numeric contract violation.

use crate::acf::{lorentzian_acf, model_acf, ModelParams, PhaseConstant};
use crate::ensemble::{generate_realizations, synth_excitation, EnsembleConfig, LinearSpinDrift};
use crate::error::{PhasememError, Result};
use crate::estimator::{average_channels, detrend, sample_acf, DetrendMethod, ExcitationFunction};
use crate::fit::{degeneracy_scan, fit_acf, FitConfig, WeightMode};
use crate::io::{
    acf_csv, atomic_write, excitation_csv, fmt_f64, manifest_path, parse_acf_csv,
    parse_excitation_csv, read_to_string, sha256_file, sha256_hex, tps_csv, FileDigest,
    RunManifest,
};
use crate::kinematics::{rotor_frequency, spin_window_params, RotorGeometry, WindowKinematics};
use crate::specfun::{AngleGrid, SpinWindow};
use crate::tps::{spectrum_grid, RotorParams};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "phasemem", version, about = "Correlation analysis of slow phase relaxation in complex collisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic ACF (or the Lorentzian comparator) on an ε grid.
    Model {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Emit the Lorentzian random-matrix ACF instead of the model.
        #[arg(long)]
        lorentzian: bool,
    },
    /// Fill a (t, θ) grid of P, P_diag and their ratio.
    Tps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo ensemble: per-realization excitation functions
    /// plus the ensemble-averaged ACF.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample ACF of excitation-function data.
    Acf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Moving-average detrend window in MeV.
        #[arg(long)]
        detrend_ma: Option<f64>,
        /// Polynomial detrend order (≤ 3).
        #[arg(long, conflicts_with = "detrend_ma")]
        detrend_poly: Option<usize>,
        /// Average the per-channel ACFs into one series.
        #[arg(long)]
        average: bool,
        /// Maximum lag in MeV (default: quarter of the data span).
        #[arg(long)]
        eps_max: Option<f64>,
    },
    /// Fit the model parameters to an ACF file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Profile the fit objective over a β grid.
    Scan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Report spin-window kinematics and the rigid-rotor frequency.
    Kinematics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// The single JSON configuration document shared by all subcommands.
/// Energies in MeV, angles in degrees at this interface.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(rename = "gamma_MeV")]
    pub gamma_mev: f64,
    #[serde(rename = "beta_MeV")]
    pub beta_mev: f64,
    #[serde(rename = "hbar_omega_MeV")]
    pub hbar_omega_mev: f64,
    pub d: f64,
    pub g: f64,
    pub i_bar: f64,
    pub phi_rad: f64,
    #[serde(rename = "e_bar_MeV")]
    pub e_bar_mev: f64,
    #[serde(rename = "barrier_MeV")]
    pub barrier_mev: f64,
    #[serde(rename = "e_min_MeV")]
    pub e_min_mev: f64,
    #[serde(rename = "e_max_MeV")]
    pub e_max_mev: f64,
    #[serde(rename = "de_MeV")]
    pub de_mev: f64,
    pub sigma_d: f64,
    pub n_realizations: usize,
    pub seed: u64,
    pub phase_constant: PhaseConstant,
    pub theta_deg: f64,

    // grids and optional overrides
    #[serde(rename = "eps_max_MeV")]
    pub eps_max_mev: f64,
    #[serde(rename = "eps_step_MeV")]
    pub eps_step_mev: f64,
    pub n_samples: Option<usize>,
    #[serde(rename = "t_max_hbar_MeV")]
    pub t_max_hbar_mev: Option<f64>,
    pub n_time_points: usize,
    pub t_max_over_period: f64,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub n_theta: usize,
    #[serde(rename = "beta_scan_min_MeV")]
    pub beta_scan_min_mev: f64,
    #[serde(rename = "beta_scan_max_MeV")]
    pub beta_scan_max_mev: f64,
    pub n_beta_scan: usize,
    pub fit_grid_resolution: usize,
    pub weight_mode: WeightMode,
    /// Let the window center drift linearly with energy in `simulate`.
    pub spin_drift: bool,

    // kinematics
    pub a1: u32,
    pub a2: u32,
    pub r0_fm: f64,
    pub include_sphere_self_inertia: bool,
    pub j_spin: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma_mev: 0.15,
            beta_mev: 0.1,
            hbar_omega_mev: 0.75,
            d: 5.0,
            g: 1.0,
            i_bar: 36.0,
            phi_rad: 0.0,
            e_bar_mev: 53.0,
            barrier_mev: 35.0,
            e_min_mev: 49.0,
            e_max_mev: 57.0,
            de_mev: 0.025,
            sigma_d: 0.0,
            n_realizations: 400,
            seed: 0,
            phase_constant: PhaseConstant::default(),
            theta_deg: 90.0,
            eps_max_mev: 3.0,
            eps_step_mev: 0.025,
            n_samples: None,
            t_max_hbar_mev: None,
            n_time_points: 9,
            t_max_over_period: 2.0,
            theta_min_deg: 0.0,
            theta_max_deg: 180.0,
            n_theta: 181,
            beta_scan_min_mev: 0.01,
            beta_scan_max_mev: 0.2,
            n_beta_scan: 11,
            fit_grid_resolution: 12,
            weight_mode: WeightMode::default(),
            spin_drift: false,
            a1: 24,
            a2: 28,
            r0_fm: 1.2,
            include_sphere_self_inertia: true,
            j_spin: None,
        }
    }
}

impl RunConfig {
    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::with_phase(
            self.gamma_mev,
            self.beta_mev,
            self.hbar_omega_mev,
            self.d,
            self.phase_constant,
        )
    }

    pub fn spin_window(&self) -> Result<SpinWindow> {
        SpinWindow::new(self.i_bar, self.g)
    }

    pub fn rotor_params(&self) -> Result<RotorParams> {
        let p = RotorParams {
            gamma: self.gamma_mev,
            beta: self.beta_mev,
            hbar_omega: self.hbar_omega_mev,
            phi: self.phi_rad,
            window: self.spin_window()?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Time grid for the ensemble: at least 10 lifetimes, step resolving
    /// both the decay and the fastest rotational phase.
    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        let window = self.spin_window()?;
        let t_max = self.t_max_hbar_mev.unwrap_or(10.5 / self.gamma_mev);
        let n_samples = match self.n_samples {
            Some(n) => n,
            None => {
                let dt_decay = 1.0 / (10.0 * self.gamma_mev);
                let dt_rot = std::f64::consts::PI
                    / (10.0 * self.hbar_omega_mev * window.j_max.max(1) as f64);
                let needed = (t_max / dt_decay.min(dt_rot)).ceil() as usize;
                needed.max(1024).next_power_of_two()
            }
        };
        let config = EnsembleConfig {
            params: self.model_params()?,
            window,
            phi: self.phi_rad,
            e_min: self.e_min_mev,
            e_max: self.e_max_mev,
            e_step: self.de_mev,
            n_samples,
            t_max,
            sigma_d: self.sigma_d,
            n_realizations: self.n_realizations,
            base_seed: self.seed,
            spin_drift: if self.spin_drift {
                let delta_e = 2.0 * (self.e_bar_mev - self.barrier_mev) / self.i_bar;
                Some(LinearSpinDrift {
                    e_bar: self.e_bar_mev,
                    delta_e,
                })
            } else {
                None
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            grid_resolution: self.fit_grid_resolution,
            weight_mode: self.weight_mode,
            phase_constant: self.phase_constant,
            ..FitConfig::default()
        }
    }

    pub fn theta_rad(&self) -> f64 {
        deg_to_rad(self.theta_deg)
    }
}

fn deg_to_rad(deg: f64) -> f64 {
    deg / 180.0 * std::f64::consts::PI
}

/// Run the CLI with the given argv (including the program name).
pub fn execute<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    init_thread_pool();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders --help/--version as "errors" with success status
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let started = std::time::Instant::now();
    match run(cli.command, &argv, started) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PhasememError::NumericContract(_) => 4,
                _ => 3,
            }
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("PHASEMEM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, String)> {
    let text = read_to_string(path)?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| PhasememError::Parse(format!("bad config {}: {e}", path.display())))?;
    Ok((config, sha256_hex(text.as_bytes())))
}

struct ManifestBuilder {
    command_line: String,
    config_digest: String,
    base_seed: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
    started: std::time::Instant,
}

impl ManifestBuilder {
    fn new(argv: &[String], started: std::time::Instant) -> Self {
        Self {
            command_line: argv.join(" "),
            config_digest: String::new(),
            base_seed: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started,
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    fn write(&self, at: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: self.command_line.clone(),
            config_digest: self.config_digest.clone(),
            base_seed: self.base_seed,
            input_file_digests: self.inputs.clone(),
            output_files: self.outputs.clone(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        atomic_write(at, &(json + "\n"))
    }
}

fn run(command: Command, argv: &[String], started: std::time::Instant) -> Result<()> {
    let mut manifest = ManifestBuilder::new(argv, started);
    match command {
        Command::Model { config, out, lorentzian } => {
            let (cfg, digest) = load_config(&config)?;
            manifest.config_digest = digest;
            manifest.base_seed = cfg.seed;
            let params = cfg.model_params()?;
            let n = (cfg.eps_max_mev / cfg.eps_step_mev).round() as usize;
            let mut body = String::from("epsilon_MeV,C\n");
            for i in 0..=n {
                let eps = i as f64 * cfg.eps_step_mev;
                let c = if lorentzian {
                    lorentzian_acf(eps, params.gamma)?
                } else {
                    model_acf(eps, &params)
                };
                body.push_str(&format!("{},{}\n", fmt_f64(eps), fmt_f64(c)));
            }
            let kind = if lorentzian { "lorentzian" } else { "model" };
            let text = format!("# phasemem model ({kind})\n{body}");
            atomic_write(&out, &text)?;
            manifest.outputs.push(out.display().to_string());
            manifest.write(&manifest_path(&out))
        }
        Command::Tps { config, out } => {
            let (cfg, digest) = load_config(&config)?;
            manifest.config_digest = digest;
            manifest.base_seed = cfg.seed;
            let params = cfg.rotor_params()?;
            let period = params.revolution_period();
            let n_t = cfg.n_time_points.max(2);
            let t_values: Vec<f64> = (0..n_t)
                .map(|i| cfg.t_max_over_period * period * i as f64 / (n_t - 1) as f64)
                .collect();
            let theta_grid = AngleGrid::uniform(
                deg_to_rad(cfg.theta_min_deg),
                deg_to_rad(cfg.theta_max_deg),
                cfg.n_theta,
            )?;
            let spectrum = spectrum_grid(&t_values, &theta_grid, &params);
            // runtime contract: spectra must stay nonnegative up to rounding
            for (ti, row) in spectrum.p.iter().enumerate() {
                for (ki, &v) in row.iter().enumerate() {
                    let floor = -1e-12 * spectrum.p[0][ki].abs();
                    if v < floor || !v.is_finite() {
                        return Err(PhasememError::NumericContract(format!(
                            "P(t={}, theta={}) = {v}",
                            spectrum.t_values[ti],
                            theta_grid.values()[ki]
                        )));
                    }
                }
            }
            let text = tps_csv(&spectrum, period, "phasemem tps");
            atomic_write(&out, &text)?;
            manifest.outputs.push(out.display().to_string());
            manifest.write(&manifest_path(&out))
        }
        Command::Simulate { config, out_dir } => {
            let (cfg, digest) = load_config(&config)?;
            manifest.config_digest = digest;
            manifest.base_seed = cfg.seed;
            let ens = cfg.ensemble_config()?;
            let theta = cfg.theta_rad();
            let realizations = generate_realizations(&ens)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut series = Vec::with_capacity(realizations.len());
            let span = ens.e_max - ens.e_min;
            let eps_max = cfg.eps_max_mev.min(span / 4.0);
            for (i, sm) in realizations.iter().enumerate() {
                let xf = synth_excitation(sm, &ens, theta)?;
                let path = out_dir.join(format!("realization_{i:04}.csv"));
                let text = excitation_csv(
                    std::slice::from_ref(&xf),
                    &format!("phasemem simulate realization {i}"),
                );
                atomic_write(&path, &text)?;
                manifest.outputs.push(path.display().to_string());
                series.push(sample_acf(&xf, eps_max)?);
            }
            let mean_acf = average_channels(&series)?;
            let acf_path = out_dir.join("ensemble_acf.csv");
            atomic_write(&acf_path, &acf_csv(&mean_acf, "phasemem simulate ensemble ACF"))?;
            manifest.outputs.push(acf_path.display().to_string());
            manifest.write(&out_dir.join("manifest.json"))
        }
        Command::Acf {
            input,
            out,
            detrend_ma,
            detrend_poly,
            average,
            eps_max,
        } => {
            manifest.input(&input)?;
            let functions = parse_excitation_csv(&read_to_string(&input)?)?;
            let mut series = Vec::with_capacity(functions.len());
            for xf in &functions {
                let eps_cap = eps_max.unwrap_or(xf.span() / 4.0).min(xf.span() / 4.0);
                let acf = match (detrend_ma, detrend_poly) {
                    (Some(w), _) => {
                        let (fluct, _) = detrend(xf, DetrendMethod::MovingAverage(w))?;
                        detrended_acf(xf, &fluct, eps_cap)?
                    }
                    (None, Some(order)) => {
                        let (fluct, _) = detrend(xf, DetrendMethod::Poly(order))?;
                        detrended_acf(xf, &fluct, eps_cap)?
                    }
                    (None, None) => sample_acf(xf, eps_cap)?,
                };
                series.push(acf);
            }
            let result = if average {
                average_channels(&series)?
            } else if series.len() == 1 {
                series.into_iter().next().unwrap()
            } else {
                return Err(PhasememError::Config(
                    "multiple channels present: pass --average to combine them".into(),
                ));
            };
            atomic_write(&out, &acf_csv(&result, "phasemem acf"))?;
            manifest.outputs.push(out.display().to_string());
            manifest.write(&manifest_path(&out))
        }
        Command::Fit { input, out, config } => {
            let (cfg, digest) = match config {
                Some(p) => load_config(&p)?,
                None => (RunConfig::default(), String::new()),
            };
            manifest.config_digest = digest;
            manifest.base_seed = cfg.seed;
            manifest.input(&input)?;
            let target = parse_acf_csv(&read_to_string(&input)?)?;
            let result = fit_acf(&target, &cfg.fit_config())?;
            let json = serde_json::to_string_pretty(&result).expect("fit result serializes");
            atomic_write(&out, &(json + "\n"))?;
            manifest.outputs.push(out.display().to_string());
            manifest.write(&manifest_path(&out))
        }
        Command::Scan { input, out, config } => {
            let (cfg, digest) = match config {
                Some(p) => load_config(&p)?,
                None => (RunConfig::default(), String::new()),
            };
            manifest.config_digest = digest;
            manifest.base_seed = cfg.seed;
            manifest.input(&input)?;
            let target = parse_acf_csv(&read_to_string(&input)?)?;
            if cfg.n_beta_scan < 2 || cfg.beta_scan_max_mev <= cfg.beta_scan_min_mev {
                return Err(PhasememError::Config("bad beta scan grid".into()));
            }
            let beta_grid: Vec<f64> = (0..cfg.n_beta_scan)
                .map(|i| {
                    cfg.beta_scan_min_mev
                        + (cfg.beta_scan_max_mev - cfg.beta_scan_min_mev) * i as f64
                            / (cfg.n_beta_scan - 1) as f64
                })
                .collect();
            let points = degeneracy_scan(&target, &beta_grid, &cfg.fit_config())?;
            let min = points.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min);
            let max = points.iter().map(|p| p.objective).fold(0.0f64, f64::max);
            let degenerate = min > 0.0 && (max - min) / min < 0.10;
            #[derive(Serialize)]
            struct ScanReport {
                degeneracy_flag: bool,
                profile: Vec<crate::fit::ScanPoint>,
            }
            let json = serde_json::to_string_pretty(&ScanReport {
                degeneracy_flag: degenerate,
                profile: points,
            })
            .expect("scan serializes");
            atomic_write(&out, &(json + "\n"))?;
            manifest.outputs.push(out.display().to_string());
            manifest.write(&manifest_path(&out))
        }
        Command::Kinematics { config, out } => {
            let (cfg, digest) = load_config(&config)?;
            manifest.config_digest = digest;
            manifest.base_seed = cfg.seed;
            let kin = WindowKinematics {
                i_bar: cfg.i_bar,
                e_bar: cfg.e_bar_mev,
                barrier: cfg.barrier_mev,
                g: cfg.g,
            };
            let window = spin_window_params(&kin, cfg.hbar_omega_mev, cfg.e_bar_mev)?;
            let geom = RotorGeometry {
                a1: cfg.a1,
                a2: cfg.a2,
                r0: cfg.r0_fm,
                include_sphere_self_inertia: cfg.include_sphere_self_inertia,
            };
            let j = cfg.j_spin.unwrap_or(cfg.i_bar);
            let (hbar_omega_rotor, inertia) = rotor_frequency(&geom, j)?;
            #[derive(Serialize)]
            struct KinReport {
                i_at_e_bar: f64,
                #[serde(rename = "delta_e_MeV")]
                delta_e_mev: f64,
                d: f64,
                #[serde(rename = "rotor_hbar_omega_MeV")]
                rotor_hbar_omega_mev: f64,
                inertia: crate::kinematics::InertiaReport,
                /// Touching-spheres frequency over the configured ħω.
                frequency_ratio: f64,
            }
            let report = KinReport {
                i_at_e_bar: window.i_of_e,
                delta_e_mev: window.delta_e,
                d: window.d,
                rotor_hbar_omega_mev: hbar_omega_rotor,
                inertia,
                frequency_ratio: hbar_omega_rotor / cfg.hbar_omega_mev,
            };
            let json = serde_json::to_string_pretty(&report).expect("kinematics serializes");
            atomic_write(&out, &(json + "\n"))?;
            manifest.outputs.push(out.display().to_string());
            manifest.write(&manifest_path(&out))
        }
    }
}

/// ACF of a detrended excitation function: the fluctuation series shifted
/// back to the original mean level, so the estimator's normalization is
/// unchanged.
fn detrended_acf(
    xf: &ExcitationFunction,
    fluctuation: &[f64],
    eps_max: f64,
) -> Result<crate::acf::CorrelationSeries> {
    let mean = xf.sigma.iter().sum::<f64>() / xf.len() as f64;
    let shifted: Vec<f64> = fluctuation.iter().map(|f| f + mean).collect();
    crate::estimator::sample_acf_raw(&xf.energies, &shifted, eps_max)
}
