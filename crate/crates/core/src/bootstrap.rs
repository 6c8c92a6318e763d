//! Residual bootstrap for the conditional VaR: fixed and recursive designs,
//! the one-step Newton–Raphson shortcut, and EP / RT / SY intervals.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{empirical_quantile, maximize, multistart, var_point_estimate, FitConfig, FitResult, QmlCriterion};
use crate::linalg::Matrix;
use crate::model::{
    filter_sigma, filter_sigma_with, sigma_gradient_with, simulate_with_innovations, Gradients, ModelSpec, Presample,
    ReturnSeries,
};
use crate::scalar::Scalar;
use crate::seed::stream_rng;

/// Minimum number of surviving replicates for interval construction.
pub const MIN_REPLICATES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Resampled innovations scaled by the original fitted volatility path.
    #[default]
    Fixed,
    /// Bootstrap returns generated through the volatility recursion.
    Recursive,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Fixed => "fixed",
            Design::Recursive => "recursive",
        })
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Design::Fixed),
            "recursive" => Ok(Design::Recursive),
            other => Err(Error::InvalidInput(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    /// Re-maximize the bootstrap criterion.
    #[default]
    FullQmle,
    /// One Newton step from `theta_hat`.
    NewtonRaphson,
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorMode::FullQmle => "full-qmle",
            EstimatorMode::NewtonRaphson => "newton-raphson",
        })
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full-qmle" | "full" | "qmle" => Ok(EstimatorMode::FullQmle),
            "newton-raphson" | "nr" => Ok(EstimatorMode::NewtonRaphson),
            other => Err(Error::InvalidInput(format!("unknown estimator mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub design: Design,
    pub estimator_mode: EstimatorMode,
    pub b_replicates: usize,
    pub base_seed: u64,
    pub fit_config: FitConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            design: Design::Fixed,
            estimator_mode: EstimatorMode::FullQmle,
            b_replicates: 499,
            base_seed: 0,
            fit_config: FitConfig::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_replicates == 0 {
            return Err(Error::InvalidInput("number of bootstrap replicates must be at least 1".into()));
        }
        Ok(())
    }
}

/// One bootstrap draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate<T> {
    pub theta_star: ModelSpec<T>,
    pub xi_star: T,
    pub var_star: T,
    /// `(1/n) sum eta*_t^2` of the resampled innovations.
    pub mean_sq_eta: T,
}

fn draw_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn information_inverse<T: Scalar>(d: &Gradients<T>, n: usize) -> Result<Matrix<T>> {
    let r = d.dim();
    let mut j = Matrix::zeros(r);
    for row in d.rows().take(n) {
        for a in 0..r {
            for b in 0..r {
                j[(a, b)] = j[(a, b)] + row[a] * row[b];
            }
        }
    }
    j.scaled(T::one() / T::count(n)).symmetrized().spd_inverse()
}

/// `theta + 1/2 J^{-1} (1/n) sum D_t (eta_t^2 - 1)`, projected onto the box.
fn newton_step<T: Scalar>(theta: &ModelSpec<T>, d: &Gradients<T>, etas: &[T], cfg: &FitConfig) -> Result<ModelSpec<T>> {
    let n = etas.len();
    let jinv = information_inverse(d, n)?;
    let mut score = vec![T::zero(); d.dim()];
    for (row, e) in d.rows().zip(etas) {
        let w = *e * *e - T::one();
        for (s, x) in score.iter_mut().zip(row) {
            *s = *s + *x * w;
        }
    }
    let nt = T::count(n);
    let score: Vec<T> = score.into_iter().map(|s| s / nt).collect();
    let step = jinv.mul_vec(&score);
    let bounds = cfg.bounds(theta.family());
    let params: Vec<T> = theta
        .params()
        .iter()
        .zip(&step)
        .zip(&bounds)
        .map(|((p, s), b)| b.clamp(*p + T::lit(0.5) * *s))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("Newton-Raphson bootstrap step is not finite".into()));
    }
    Ok(ModelSpec::from_params(theta.family(), &params))
}

/// Warm start at `theta_hat`, falling back to the cold multistart.
fn bootstrap_qmle<T: Scalar>(criterion: &QmlCriterion<T>, start: &ModelSpec<T>, starts_from: &[T], cfg: &FitConfig) -> Result<ModelSpec<T>> {
    let family = start.family();
    let warm = maximize(criterion, family, std::slice::from_ref(start), cfg, cfg.warm_step);
    if warm.diagnostics.converged {
        return Ok(warm.spec);
    }
    let cold = maximize(criterion, family, &multistart(starts_from, family, cfg), cfg, cfg.initial_step);
    if cold.diagnostics.converged {
        Ok(cold.spec)
    } else {
        Err(Error::Numerical("bootstrap QMLE did not converge".into()))
    }
}

fn finish<T: Scalar>(
    theta_star: ModelSpec<T>,
    std_resid: Vec<T>,
    series: &ReturnSeries<T>,
    alpha: f64,
    mean_sq_eta: T,
) -> Result<Replicate<T>> {
    let xi_star = empirical_quantile(&std_resid, alpha)?;
    let var_star = -xi_star * filter_sigma(&theta_star, series).next();
    if !var_star.is_finite() {
        return Err(Error::Numerical("bootstrap VaR is not finite".into()));
    }
    Ok(Replicate { theta_star, xi_star, var_star, mean_sq_eta })
}

fn mean_sq<T: Scalar>(xs: &[T]) -> T {
    xs.iter().map(|x| *x * *x).sum::<T>() / T::count(xs.len())
}

/// Fixed-design replicate for the given resampling indices into the residuals.
pub fn fixed_design_replicate_from_indices<T: Scalar>(
    fit: &FitResult<T>,
    series: &ReturnSeries<T>,
    indices: &[usize],
    mode: EstimatorMode,
    cfg: &FitConfig,
) -> Result<Replicate<T>> {
    let n = fit.n();
    if indices.len() != n || series.len() != n {
        return Err(Error::InvalidInput("resampling indices, fit and series lengths differ".into()));
    }
    let etas: Vec<T> = indices.iter().map(|&i| fit.residuals[i]).collect();
    let sig = fit.sigma_path.in_sample();
    let eps_star: Vec<T> = etas.iter().zip(sig).map(|(e, s)| *e * *s).collect();
    let theta_star = match mode {
        EstimatorMode::NewtonRaphson => newton_step(&fit.theta_hat, &fit.d_hats, &etas, cfg)?,
        EstimatorMode::FullQmle => {
            let criterion = QmlCriterion::with_numerators(series.values(), &eps_star);
            bootstrap_qmle(&criterion, &fit.theta_hat, &eps_star, cfg)?
        }
    };
    let path = filter_sigma(&theta_star, series);
    let resid: Vec<T> = eps_star.iter().zip(path.in_sample()).map(|(e, s)| *e / *s).collect();
    finish(theta_star, resid, series, fit.alpha, mean_sq(&etas))
}

/// Recursive-design replicate for the given resampling indices.
pub fn recursive_design_replicate_from_indices<T: Scalar>(
    fit: &FitResult<T>,
    series: &ReturnSeries<T>,
    indices: &[usize],
    mode: EstimatorMode,
    cfg: &FitConfig,
) -> Result<Replicate<T>> {
    let n = fit.n();
    if indices.len() != n || series.len() != n {
        return Err(Error::InvalidInput("resampling indices, fit and series lengths differ".into()));
    }
    let etas: Vec<T> = indices.iter().map(|&i| fit.residuals[i]).collect();
    let (eps_star, _) = simulate_with_innovations(&fit.theta_hat, &etas, fit.sigma_path.init_value);
    let theta_star = match mode {
        EstimatorMode::NewtonRaphson => {
            let path = filter_sigma_with(&fit.theta_hat, &eps_star, Presample::SampleMeans);
            let d = sigma_gradient_with(&fit.theta_hat, &eps_star, &path).relative_to(&path.sigmas);
            let eta_filt: Vec<T> = eps_star.iter().zip(path.in_sample()).map(|(e, s)| *e / *s).collect();
            newton_step(&fit.theta_hat, &d, &eta_filt, cfg)?
        }
        EstimatorMode::FullQmle => {
            let criterion = QmlCriterion::new(&eps_star);
            bootstrap_qmle(&criterion, &fit.theta_hat, &eps_star, cfg)?
        }
    };
    let path = filter_sigma_with(&theta_star, &eps_star, Presample::SampleMeans);
    let resid: Vec<T> = eps_star.iter().zip(path.in_sample()).map(|(e, s)| *e / *s).collect();
    finish(theta_star, resid, series, fit.alpha, mean_sq(&etas))
}

pub fn fixed_design_replicate<T: Scalar, R: Rng + ?Sized>(
    fit: &FitResult<T>,
    series: &ReturnSeries<T>,
    rng: &mut R,
    mode: EstimatorMode,
    cfg: &FitConfig,
) -> Result<Replicate<T>> {
    let idx = draw_indices(fit.n(), rng);
    fixed_design_replicate_from_indices(fit, series, &idx, mode, cfg)
}

pub fn recursive_design_replicate<T: Scalar, R: Rng + ?Sized>(
    fit: &FitResult<T>,
    series: &ReturnSeries<T>,
    rng: &mut R,
    mode: EstimatorMode,
    cfg: &FitConfig,
) -> Result<Replicate<T>> {
    let idx = draw_indices(fit.n(), rng);
    recursive_design_replicate_from_indices(fit, series, &idx, mode, cfg)
}

/// Replicate `index` of a run keyed by `base_seed`.
pub fn replicate_at<T: Scalar>(
    fit: &FitResult<T>,
    series: &ReturnSeries<T>,
    config: &BootstrapConfig,
    index: u64,
) -> Result<Replicate<T>> {
    let mut rng = stream_rng(config.base_seed, index);
    match config.design {
        Design::Fixed => fixed_design_replicate(fit, series, &mut rng, config.estimator_mode, &config.fit_config),
        Design::Recursive => recursive_design_replicate(fit, series, &mut rng, config.estimator_mode, &config.fit_config),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome<T> {
    pub var_stars: Vec<T>,
    pub theta_stars: Vec<Vec<T>>,
    pub xi_stars: Vec<T>,
    pub mean_sq_etas: Vec<T>,
    pub n: usize,
    pub var_hat: T,
    pub theta_hat: Vec<T>,
    pub xi_hat: T,
    pub b_requested: usize,
    pub failed_count: usize,
}

impl<T: Scalar> BootstrapOutcome<T> {
    pub fn len(&self) -> usize {
        self.var_stars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.var_stars.is_empty()
    }

    /// `sqrt(n) (VaR* - VaR_hat)` per surviving replicate.
    pub fn centered_var(&self) -> Vec<T> {
        let rn = T::count(self.n).sqrt();
        self.var_stars.iter().map(|v| rn * (*v - self.var_hat)).collect()
    }
}

/// Runs `B` replicates in parallel. Replicate `b` draws from stream `b` of
/// `base_seed`, so results do not depend on scheduling.
pub fn run_bootstrap<T: Scalar>(
    fit: &FitResult<T>,
    series: &ReturnSeries<T>,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome<T>> {
    config.validate()?;
    config.fit_config.validate(fit.family())?;
    if series.len() != fit.n() {
        return Err(Error::InvalidInput("series does not match the fit".into()));
    }
    let draws: Vec<Result<Replicate<T>>> = (0..config.b_replicates as u64)
        .into_par_iter()
        .map(|b| replicate_at(fit, series, config, b))
        .collect();
    let mut out = BootstrapOutcome {
        var_stars: Vec::with_capacity(draws.len()),
        theta_stars: Vec::with_capacity(draws.len()),
        xi_stars: Vec::with_capacity(draws.len()),
        mean_sq_etas: Vec::with_capacity(draws.len()),
        n: fit.n(),
        var_hat: var_point_estimate(fit).value,
        theta_hat: fit.theta_hat.params(),
        xi_hat: fit.xi_hat,
        b_requested: config.b_replicates,
        failed_count: 0,
    };
    for d in draws {
        match d {
            Ok(r) => {
                out.var_stars.push(r.var_star);
                out.theta_stars.push(r.theta_star.params());
                out.xi_stars.push(r.xi_star);
                out.mean_sq_etas.push(r.mean_sq_eta);
            }
            Err(_) => out.failed_count += 1,
        }
    }
    if out.failed_count == config.b_replicates {
        return Err(Error::AllReplicatesFailed(out.failed_count));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn length(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet<T> {
    pub ep: Interval<T>,
    pub rt: Interval<T>,
    pub sy: Interval<T>,
    pub gamma: f64,
    pub var_hat: T,
}

/// Relative tolerance for the exact construction identities under rounding.
pub const IDENTITY_RTOL: f64 = 1e-12;

pub(crate) fn close<T: Scalar>(a: T, b: T, scale: T) -> bool {
    (a - b).abs() <= T::lit(IDENTITY_RTOL) * scale.abs().max(T::one())
}

impl<T: Scalar> IntervalSet<T> {
    /// Builds the intervals from `sqrt(n) (VaR* - VaR_hat)` replicates.
    pub fn from_centered(var_hat: T, n: usize, centered: &[T], gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if centered.is_empty() {
            return Err(Error::TooFewReplicates { required: 1, actual: 0 });
        }
        let rn = T::count(n).sqrt();
        let g_lo = empirical_quantile(centered, gamma / 2.0)? / rn;
        let g_hi = empirical_quantile(centered, 1.0 - gamma / 2.0)? / rn;
        let abs: Vec<T> = centered.iter().map(|x| x.abs()).collect();
        let h = empirical_quantile(&abs, 1.0 - gamma)? / rn;
        Ok(Self {
            ep: Interval { lo: var_hat - g_hi, hi: var_hat - g_lo },
            rt: Interval { lo: var_hat + g_lo, hi: var_hat + g_hi },
            sy: Interval { lo: var_hat - h, hi: var_hat + h },
            gamma,
            var_hat,
        })
    }

    /// Checks the equal-length and symmetry identities.
    pub fn identities_hold(&self) -> bool {
        let scale = self.var_hat.abs() + self.rt.length().abs() + self.sy.length().abs();
        close(self.ep.length(), self.rt.length(), scale)
            && close(self.sy.hi - self.var_hat, self.var_hat - self.sy.lo, scale)
    }
}

/// RT bounds as the `gamma/2` and `1 - gamma/2` quantiles of the raw `VaR*`.
pub fn rt_reduced_form<T: Scalar>(var_stars: &[T], gamma: f64) -> Result<Interval<T>> {
    Ok(Interval {
        lo: empirical_quantile(var_stars, gamma / 2.0)?,
        hi: empirical_quantile(var_stars, 1.0 - gamma / 2.0)?,
    })
}

/// EP, RT and SY intervals at nominal coverage `1 - gamma`.
pub fn build_intervals<T: Scalar>(outcome: &BootstrapOutcome<T>, gamma: f64) -> Result<IntervalSet<T>> {
    if outcome.len() < MIN_REPLICATES {
        return Err(Error::TooFewReplicates { required: MIN_REPLICATES, actual: outcome.len() });
    }
    let set = IntervalSet::from_centered(outcome.var_hat, outcome.n, &outcome.centered_var(), gamma)?;
    debug_assert!(set.identities_hold());
    debug_assert!({
        let raw = rt_reduced_form(&outcome.var_stars, gamma)?;
        let scale = outcome.var_hat.abs() + set.rt.length();
        close(raw.lo, set.rt.lo, scale) && close(raw.hi, set.rt.hi, scale)
    });
    Ok(set)
}
