//! Deterministic multistart least-squares fitting of the correlation model
//! to a measured or synthetic ACF, profile scans over β, and the Lorentzian
//! comparator fit.

use crate::acf::{lorentzian_acf, model_acf, CorrelationSeries, ModelParams, PhaseConstant};
use crate::error::{PhasememError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Closed parameter intervals searched by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub gamma: (f64, f64),
    pub beta: (f64, f64),
    pub hbar_omega: (f64, f64),
    pub d: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            gamma: (0.01, 1.0),
            beta: (0.0, 1.0),
            hbar_omega: (0.1, 2.0),
            d: (1.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Unit weight at every lag.
    Uniform,
    /// 1/stderr² when the target carries positive standard errors,
    /// uniform otherwise.
    #[default]
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub bounds: ParamBounds,
    /// Multistart grid points per axis.
    pub grid_resolution: usize,
    /// Relative objective tolerance of the simplex refinement.
    pub refine_tolerance: f64,
    /// Evaluation cap per refinement start.
    pub max_evaluations: usize,
    pub weight_mode: WeightMode,
    pub phase_constant: PhaseConstant,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bounds: ParamBounds::default(),
            grid_resolution: 12,
            refine_tolerance: 1e-8,
            max_evaluations: 10_000,
            weight_mode: WeightMode::default(),
            phase_constant: PhaseConstant::default(),
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        for (lo, hi) in [b.gamma, b.beta, b.hbar_omega, b.d] {
            if !(hi >= lo) {
                return Err(PhasememError::Config("empty parameter bound".into()));
            }
        }
        if !(b.gamma.0 > 0.0) {
            return Err(PhasememError::Config("gamma lower bound must be > 0".into()));
        }
        if !(b.beta.0 >= 0.0) || !(b.hbar_omega.0 > 0.0) || !(b.d.0 >= 1.0) {
            return Err(PhasememError::Config("bounds violate parameter domain".into()));
        }
        if self.grid_resolution < 2 {
            return Err(PhasememError::Config("grid resolution must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    /// ε=0 normalization A.
    pub scale: f64,
    pub objective: f64,
    pub n_evaluations: usize,
    pub converged: bool,
}

/// One point of a β profile scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub beta: f64,
    pub objective: f64,
    pub gamma: f64,
    pub hbar_omega: f64,
    pub d: f64,
    pub scale: f64,
}

fn weights(target: &CorrelationSeries, mode: WeightMode) -> Vec<f64> {
    match (mode, &target.stderr_values) {
        (WeightMode::InverseVariance, Some(s)) if s.iter().all(|&v| v > 0.0) => {
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        _ => vec![1.0; target.len()],
    }
}

/// Weighted objective at fixed model parameters, with the scale A profiled
/// out by linear regression through the origin. Returns (objective, A).
pub fn objective_at(
    target: &CorrelationSeries,
    params: &ModelParams,
    mode: WeightMode,
) -> (f64, f64) {
    let w = weights(target, mode);
    objective_with_weights(target, params, &w)
}

fn objective_with_weights(
    target: &CorrelationSeries,
    params: &ModelParams,
    w: &[f64],
) -> (f64, f64) {
    let model: Vec<f64> = target
        .epsilon_values
        .iter()
        .map(|&e| model_acf(e, params))
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((wi, mi), ti) in w.iter().zip(&model).zip(&target.c_values) {
        num += wi * mi * ti;
        den += wi * mi * mi;
    }
    let scale = if den > 0.0 { num / den } else { 0.0 };
    let obj: f64 = w
        .iter()
        .zip(&model)
        .zip(&target.c_values)
        .map(|((wi, mi), ti)| wi * (ti - scale * mi).powi(2))
        .sum();
    (obj, scale)
}

fn clamp(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.clamp(lo, hi)
}

/// Free-parameter vector in fixed order (Γ, β, ħω, d), with an optional
/// frozen β for profile scans.
#[derive(Clone, Copy)]
struct FitSpace {
    bounds: ParamBounds,
    fixed_beta: Option<f64>,
    phase: PhaseConstant,
}

impl FitSpace {
    fn dim(&self) -> usize {
        if self.fixed_beta.is_some() {
            3
        } else {
            4
        }
    }

    fn params(&self, x: &[f64]) -> ModelParams {
        let (gamma, beta, hw, d) = match self.fixed_beta {
            None => (
                clamp(x[0], self.bounds.gamma),
                clamp(x[1], self.bounds.beta),
                clamp(x[2], self.bounds.hbar_omega),
                clamp(x[3], self.bounds.d),
            ),
            Some(b) => (
                clamp(x[0], self.bounds.gamma),
                b,
                clamp(x[1], self.bounds.hbar_omega),
                clamp(x[2], self.bounds.d),
            ),
        };
        ModelParams {
            gamma,
            beta,
            hbar_omega: hw,
            d,
            phase_constant: self.phase,
        }
    }

    fn axes(&self) -> Vec<(f64, f64)> {
        match self.fixed_beta {
            None => vec![self.bounds.gamma, self.bounds.beta, self.bounds.hbar_omega, self.bounds.d],
            Some(_) => vec![self.bounds.gamma, self.bounds.hbar_omega, self.bounds.d],
        }
    }
}

/// Nelder-Mead descent with bound clamping. Returns (best x, best f, evals,
/// converged).
fn nelder_mead<F>(
    start: &[f64],
    space: &FitSpace,
    f: &F,
    tol: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize, bool)
where
    F: Fn(&ModelParams) -> f64,
{
    let dim = space.dim();
    let axes = space.axes();
    let eval = |x: &[f64]| f(&space.params(x));
    let mut evals = 0usize;

    // initial simplex: start plus 5% of each bound width per axis
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = start.to_vec();
    let f0 = eval(&v0);
    evals += 1;
    simplex.push((v0, f0));
    for i in 0..dim {
        let mut v = start.to_vec();
        let width = axes[i].1 - axes[i].0;
        let step = if width > 0.0 { 0.05 * width } else { 0.1 };
        v[i] = clamp(v[i] + step, axes[i]);
        if v[i] == start[i] {
            v[i] = clamp(start[i] - step, axes[i]);
        }
        let fv = eval(&v);
        evals += 1;
        simplex.push((v, fv));
    }

    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        // both stopping tests are invariant under a uniform rescaling of the
        // objective, so fitting c·target follows the exact same simplex path
        let f_flat = (worst - best).abs() <= tol * worst.abs();
        let x_norm: f64 = simplex[0].0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let x_tight = simplex[1..].iter().all(|(v, _)| {
            v.iter()
                .zip(&simplex[0].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                <= tol * (x_norm + 1.0)
        });
        if f_flat || x_tight {
            converged = true;
            break;
        }
        // centroid of all but the worst
        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst_x = simplex[dim].0.clone();
        let mirror = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_x)
                .enumerate()
                .map(|(i, (c, w))| clamp(c + t * (c - w), axes[i]))
                .collect()
        };
        let reflected = mirror(1.0);
        let fr = eval(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = mirror(2.0);
            let fe = eval(&expanded);
            evals += 1;
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[dim].1 {
                mirror(0.5)
            } else {
                mirror(-0.5)
            };
            let fc = eval(&contracted);
            evals += 1;
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink towards the best vertex
                let best_x = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = item
                        .0
                        .iter()
                        .zip(&best_x)
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    let fv = eval(&v);
                    evals += 1;
                    *item = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0.clone(), simplex[0].1, evals, converged)
}

fn grid_axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if hi == lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Deterministic multistart refinement in the given space: full grid at the
/// configured resolution, simplex descent from the best 5 grid points, best
/// result wins with lexicographic tie-breaking.
fn multistart(
    target: &CorrelationSeries,
    space: &FitSpace,
    config: &FitConfig,
) -> Result<FitResult> {
    let w = weights(target, config.weight_mode);
    let obj = |p: &ModelParams| objective_with_weights(target, p, &w).0;

    let axes = space.axes();
    let grids: Vec<Vec<f64>> = axes
        .iter()
        .map(|&a| grid_axis(a, config.grid_resolution))
        .collect();
    let mut points = vec![vec![]];
    for g in &grids {
        let mut next = Vec::with_capacity(points.len() * g.len());
        for p in &points {
            for &v in g {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }

    let scored: Vec<(f64, usize)> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| (obj(&space.params(x)), i))
        .collect();
    let grid_evals = scored.len();
    let mut order: Vec<(f64, usize)> = scored;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let starts: Vec<&Vec<f64>> = order.iter().take(5).map(|&(_, i)| &points[i]).collect();
    let refined: Vec<(Vec<f64>, f64, usize, bool)> = starts
        .par_iter()
        .map(|s| {
            // restart the simplex from its own optimum; helps traverse the
            // β–d ridge within the evaluation budget
            let mut x = s.to_vec();
            let mut best_f = f64::INFINITY;
            let mut used = 0usize;
            let mut conv = false;
            for _ in 0..3 {
                let budget = config.max_evaluations.saturating_sub(used);
                if budget < 2 * space.dim() + 2 {
                    break;
                }
                let (xr, fr, e, c) = nelder_mead(&x, space, &obj, config.refine_tolerance, budget);
                used += e;
                conv = c;
                if fr >= best_f {
                    break;
                }
                best_f = fr;
                x = xr;
            }
            (x, best_f, used, conv)
        })
        .collect();

    let mut best: Option<(&(Vec<f64>, f64, usize, bool), ModelParams)> = None;
    for r in &refined {
        let p = space.params(&r.0);
        let better = match &best {
            None => true,
            Some((b, bp)) => {
                r.1.total_cmp(&b.1)
                    .then(p.gamma.total_cmp(&bp.gamma))
                    .then(p.beta.total_cmp(&bp.beta))
                    .then(p.hbar_omega.total_cmp(&bp.hbar_omega))
                    .then(p.d.total_cmp(&bp.d))
                    == std::cmp::Ordering::Less
            }
        };
        if better {
            best = Some((r, p));
        }
    }
    let (r, params) = best.expect("at least one start");
    let (objective, scale) = objective_with_weights(target, &params, &w);
    let n_evaluations = grid_evals + refined.iter().map(|r| r.2).sum::<usize>();
    Ok(FitResult {
        params,
        scale,
        objective,
        n_evaluations,
        converged: r.3,
    })
}

/// Fit (A, Γ, β, ħω, d) to a correlation series by deterministic multistart
/// least squares.
pub fn fit_acf(target: &CorrelationSeries, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if target.len() < 8 {
        return Err(PhasememError::InsufficientData(
            "fit target needs at least 8 lags".into(),
        ));
    }
    let space = FitSpace {
        bounds: config.bounds,
        fixed_beta: None,
        phase: config.phase_constant,
    };
    multistart(target, &space, config)
}

/// Profile the objective over a fixed β grid, reoptimizing (Γ, ħω, d, A)
/// at every grid point.
pub fn degeneracy_scan(
    target: &CorrelationSeries,
    beta_grid: &[f64],
    config: &FitConfig,
) -> Result<Vec<ScanPoint>> {
    config.validate()?;
    if beta_grid.is_empty() {
        return Err(PhasememError::Config("beta grid is empty".into()));
    }
    if target.len() < 8 {
        return Err(PhasememError::InsufficientData(
            "scan target needs at least 8 lags".into(),
        ));
    }
    for &b in beta_grid {
        if b < config.bounds.beta.0 || b > config.bounds.beta.1 {
            return Err(PhasememError::Config(format!("beta {b} outside bounds")));
        }
    }
    beta_grid
        .iter()
        .map(|&beta| {
            let space = FitSpace {
                bounds: config.bounds,
                fixed_beta: Some(beta),
                phase: config.phase_constant,
            };
            let r = multistart(target, &space, config)?;
            Ok(ScanPoint {
                beta,
                objective: r.objective,
                gamma: r.params.gamma,
                hbar_omega: r.params.hbar_omega,
                d: r.params.d,
                scale: r.scale,
            })
        })
        .collect()
}

/// True when the profile over the β ridge is flat: the variation of the
/// reoptimized objective stays below 10% of its minimum.
pub fn degeneracy_flag(scan: &[ScanPoint]) -> bool {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for p in scan {
        min = min.min(p.objective);
        max = max.max(p.objective);
    }
    scan.len() > 1 && min > 0.0 && (max - min) < 0.10 * min
}

/// Synthetic fit target mimicking an experimentally estimated ACF: the
/// symmetric mixture of the two published parameter-set curves
/// (Γ=0.15, β=0.1, ħω=0.75, d=5) and (Γ=0.15, β=0.03, ħω=0.75, d=1),
/// each normalized to unit L² norm before averaging, renormalized to
/// C(0) = 1 and overlaid with reproducible Gaussian scatter of standard
/// deviation `noise_sigma` (the ε = 0 point is left noise-free).
pub fn paper_like_target(
    eps_max: f64,
    eps_step: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<CorrelationSeries> {
    if !(eps_max > 0.0 && eps_step > 0.0 && eps_max >= 4.0 * eps_step) {
        return Err(PhasememError::Config("bad target grid".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(PhasememError::Config("bad noise sigma".into()));
    }
    let set_a = ModelParams::new(0.15, 0.1, 0.75, 5.0)?;
    let set_b = ModelParams::new(0.15, 0.03, 0.75, 1.0)?;
    let n = (eps_max / eps_step).round() as usize + 1;
    let eps: Vec<f64> = (0..n).map(|i| i as f64 * eps_step).collect();
    let a: Vec<f64> = eps.iter().map(|&e| model_acf(e, &set_a)).collect();
    let b: Vec<f64> = eps.iter().map(|&e| model_acf(e, &set_b)).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&a), norm(&b));
    let mut c: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(&ai, &bi)| 0.5 * (ai / na + bi / nb))
        .collect();
    let c0 = c[0];
    for v in &mut c {
        *v /= c0;
    }
    let mut rng = crate::ensemble::stream_rng(seed, 0, STREAM_TARGET_NOISE);
    for v in c.iter_mut().skip(1) {
        let (g, _) = crate::ensemble::standard_normal(&mut rng);
        *v += noise_sigma * g;
    }
    CorrelationSeries::new(eps, c, None)
}

/// RNG stream role for `paper_like_target` scatter; roles 0 and 1 belong to
/// the ensemble module's Gaussian and Cauchy streams.
const STREAM_TARGET_NOISE: u64 = 2;

/// Best Lorentzian fit A/(1+(ε/Γ)²): 1-D multistart over Γ.
/// Returns (Γ, A, objective).
pub fn fit_lorentzian(
    target: &CorrelationSeries,
    gamma_bounds: (f64, f64),
    config: &FitConfig,
) -> Result<(f64, f64, f64)> {
    if !(gamma_bounds.0 > 0.0 && gamma_bounds.1 >= gamma_bounds.0) {
        return Err(PhasememError::Config("bad gamma bounds".into()));
    }
    let w = weights(target, config.weight_mode);
    let obj_scale = |gamma: f64| -> (f64, f64) {
        let model: Vec<f64> = target
            .epsilon_values
            .iter()
            .map(|&e| lorentzian_acf(e, gamma).unwrap())
            .collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for ((wi, mi), ti) in w.iter().zip(&model).zip(&target.c_values) {
            num += wi * mi * ti;
            den += wi * mi * mi;
        }
        let a = num / den;
        let o = w
            .iter()
            .zip(&model)
            .zip(&target.c_values)
            .map(|((wi, mi), ti)| wi * (ti - a * mi).powi(2))
            .sum();
        (o, a)
    };
    let grid = grid_axis(gamma_bounds, 64.max(config.grid_resolution));
    let mut best_g = grid[0];
    let mut best = obj_scale(best_g);
    for &g in &grid[1..] {
        let o = obj_scale(g);
        if o.0 < best.0 {
            best = o;
            best_g = g;
        }
    }
    // golden-section polish around the best grid point
    let step = (gamma_bounds.1 - gamma_bounds.0) / (grid.len() - 1) as f64;
    let (mut lo, mut hi) = (
        (best_g - step).max(gamma_bounds.0),
        (best_g + step).min(gamma_bounds.1),
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if obj_scale(a).0 < obj_scale(b).0 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let g = (lo + hi) / 2.0;
    let (o, a) = obj_scale(g);
    Ok((g, a, o))
}

/// Evaluate the model on an ε grid (test and CLI helper).
pub fn model_series(params: &ModelParams, eps_max: f64, step: f64) -> Result<CorrelationSeries> {
    if !(step > 0.0 && eps_max >= step) {
        return Err(PhasememError::Domain("bad epsilon grid".into()));
    }
    let n = (eps_max / step).round() as usize;
    let eps: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    let c: Vec<f64> = eps.iter().map(|&e| model_acf(e, params)).collect();
    CorrelationSeries::new(eps, c, None)
}
