//! Two-step estimation: Gaussian QMLE of the volatility parameters, empirical
//! quantile of the residuals, and the conditional VaR point estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    filter_sigma, sigma_gradient, split_sign, Gradients, ModelFamily, ModelSpec, PresampleMoments, ReturnSeries,
    SigmaPath, SIGMA_FLOOR,
};
use crate::optimize::{nelder_mead, Bound, NelderMeadOptions};
use crate::scalar::{mean, Scalar};

/// Minimum sample size accepted by [`estimate_theta`].
pub const MIN_FIT_LEN: usize = 20;

/// Optimizer settings for the QML step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop when the simplex objective spread falls below this.
    pub tolerance: f64,
    /// Simplex size at termination, in transformed coordinates.
    pub x_tolerance: f64,
    /// Total number of starting points (moment start plus perturbations).
    pub restarts: usize,
    /// Per-parameter box; `None` uses [`FitConfig::default_bounds`].
    pub param_bounds: Option<Vec<Bound>>,
    /// Initial simplex edge for cold starts.
    pub initial_step: f64,
    /// Initial simplex edge when warm-starting near an optimum.
    pub warm_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5_000,
            tolerance: 1e-9,
            x_tolerance: 1e-5,
            restarts: 3,
            param_bounds: None,
            initial_step: 0.5,
            warm_step: 0.1,
        }
    }
}

impl FitConfig {
    pub const BETA_MAX: f64 = 0.999;

    pub fn default_bounds(family: ModelFamily) -> Vec<Bound> {
        let mut b = vec![Bound::new(1e-10, f64::INFINITY)];
        b.extend(std::iter::repeat_n(Bound::new(0.0, f64::INFINITY), family.dim() - 2));
        b.push(Bound::new(0.0, Self::BETA_MAX));
        b
    }

    pub fn bounds(&self, family: ModelFamily) -> Vec<Bound> {
        self.param_bounds.clone().unwrap_or_else(|| Self::default_bounds(family))
    }

    pub fn validate(&self, family: ModelFamily) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.x_tolerance > 0.0) {
            return Err(Error::InvalidInput("optimizer tolerances must be positive".into()));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidInput("restarts and max_iterations must be positive".into()));
        }
        let b = self.bounds(family);
        if b.len() != family.dim() {
            return Err(Error::InvalidInput(format!(
                "{} bounds given for a {}-parameter model",
                b.len(),
                family.dim()
            )));
        }
        let last = b.len() - 1;
        if !(b[0].lo > 0.0) || b[1..].iter().any(|x| x.lo < 0.0) || b.iter().any(|x| !(x.hi > x.lo)) {
            return Err(Error::InvalidInput(format!("bounds inconsistent with the parameter space: {b:?}")));
        }
        if !(b[last].hi < 1.0) {
            return Err(Error::InvalidInput("upper bound on beta must be below 1".into()));
        }
        Ok(())
    }

    fn nm_options(&self, step: f64) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iterations: self.max_iterations,
            f_tol: self.tolerance,
            x_tol: self.x_tolerance,
            initial_step: step,
        }
    }
}

/// Gaussian quasi-likelihood `(1/n) sum -1/2 (x_t / sigma_t)^2 - log sigma_t`
/// where `sigma_t(theta)` is filtered from `source` and `x_t` are the
/// numerators. For the plain QMLE both are the observed returns.
#[derive(Debug, Clone)]
pub struct QmlCriterion<T> {
    source: Vec<T>,
    numer_sq: Vec<T>,
    moments: PresampleMoments<T>,
}

impl<T: Scalar> QmlCriterion<T> {
    pub fn new(returns: &[T]) -> Self {
        Self::with_numerators(returns, returns)
    }

    /// Volatilities filtered from `source`, residual numerators from `numerators`.
    pub fn with_numerators(source: &[T], numerators: &[T]) -> Self {
        assert_eq!(source.len(), numerators.len());
        Self {
            source: source.to_vec(),
            numer_sq: numerators.iter().map(|x| *x * *x).collect(),
            moments: PresampleMoments::of(source),
        }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Returns `(sum x_t^2 / sigma_t^2, sum log sigma_t^2)`.
    fn sums(&self, spec: &ModelSpec<T>) -> (T, T) {
        let floor = T::lit(SIGMA_FLOOR);
        let init = self.moments.initial_state(spec);
        let (mut ratio, mut logs) = (T::zero(), T::zero());
        match *spec {
            ModelSpec::Garch { omega, alpha, beta } => {
                let floor2 = floor * floor;
                let mut h = init.max(floor2);
                for (&e, &x2) in self.source.iter().zip(&self.numer_sq) {
                    ratio = ratio + x2 / h;
                    logs = logs + h.ln();
                    h = (omega + alpha * e * e + beta * h).max(floor2);
                }
            }
            ModelSpec::Tgarch { omega, alpha_plus, alpha_minus, beta } => {
                let mut s = init.max(floor);
                for (&e, &x2) in self.source.iter().zip(&self.numer_sq) {
                    ratio = ratio + x2 / (s * s);
                    logs = logs + s.ln();
                    let (pos, neg) = split_sign(e);
                    s = (omega + alpha_plus * pos + alpha_minus * neg + beta * s).max(floor);
                }
                logs = logs + logs;
            }
        }
        (ratio, logs)
    }

    pub fn objective(&self, spec: &ModelSpec<T>) -> T {
        let (ratio, logs) = self.sums(spec);
        -T::lit(0.5) * (ratio + logs) / T::count(self.len())
    }

    /// Mean of the squared standardized numerators at `spec`.
    pub fn mean_sq_standardized(&self, spec: &ModelSpec<T>) -> T {
        self.sums(spec).0 / T::count(self.len())
    }
}

/// QML criterion of a return series at `spec`.
pub fn qml_objective<T: Scalar>(spec: &ModelSpec<T>, series: &ReturnSeries<T>) -> T {
    QmlCriterion::new(series.values()).objective(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics<T> {
    pub iterations: usize,
    pub evaluations: usize,
    pub objective: T,
    /// Optimizer met its tolerance on the best start.
    pub converged: bool,
    /// Per-parameter contact with the box.
    pub at_bound: Vec<bool>,
    pub starts_tried: usize,
}

impl<T> FitDiagnostics<T> {
    pub fn is_interior(&self) -> bool {
        !self.at_bound.iter().any(|b| *b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate<T> {
    pub spec: ModelSpec<T>,
    pub diagnostics: FitDiagnostics<T>,
}

/// Moment-based starting value.
pub fn moment_start<T: Scalar>(returns: &[T], family: ModelFamily) -> ModelSpec<T> {
    let n = T::count(returns.len().max(1));
    match family {
        ModelFamily::Garch => {
            let m = mean(returns);
            let var = returns.iter().map(|x| (*x - m) * (*x - m)).sum::<T>() / n;
            let var = var.max(T::lit(1e-8));
            ModelSpec::Garch { omega: T::lit(0.1) * var, alpha: T::lit(0.1), beta: T::lit(0.8) }
        }
        ModelFamily::Tgarch => {
            let s = (returns.iter().map(|x| x.abs()).sum::<T>() / n).max(T::lit(1e-4));
            ModelSpec::Tgarch {
                omega: T::lit(0.1) * s,
                alpha_plus: T::lit(0.05),
                alpha_minus: T::lit(0.10),
                beta: T::lit(0.8),
            }
        }
    }
}

fn to_internal<T: Scalar>(spec: &ModelSpec<T>, bounds: &[Bound]) -> Vec<T> {
    spec.params().iter().zip(bounds).map(|(x, b)| b.to_internal(*x)).collect()
}

fn to_spec<T: Scalar>(family: ModelFamily, u: &[T], bounds: &[Bound], buf: &mut [T]) -> ModelSpec<T> {
    for ((p, x), b) in buf.iter_mut().zip(u).zip(bounds) {
        *p = b.to_external(*x);
    }
    ModelSpec::from_params(family, buf)
}

/// Maximizes `criterion` from each start in turn and keeps the best point.
pub(crate) fn maximize<T: Scalar>(
    criterion: &QmlCriterion<T>,
    family: ModelFamily,
    starts: &[ModelSpec<T>],
    config: &FitConfig,
    step: f64,
) -> ThetaEstimate<T> {
    let bounds = config.bounds(family);
    let opts = config.nm_options(step);
    let mut buf = vec![T::zero(); family.dim()];
    let mut best: Option<(ModelSpec<T>, T, bool)> = None;
    let (mut iterations, mut evaluations) = (0, 0);

    for start in starts {
        let x0 = to_internal(start, &bounds);
        let m = nelder_mead(
            |u: &[T]| -criterion.objective(&to_spec(family, u, &bounds, &mut buf)),
            &x0,
            &opts,
        );
        iterations += m.iterations;
        evaluations += m.evaluations;
        let spec = to_spec(family, &m.x, &bounds, &mut buf);
        let value = -m.value;
        if best.as_ref().is_none_or(|(_, v, _)| value > *v || !v.is_finite()) {
            best = Some((spec, value, m.converged));
        }
    }
    let (mut spec, mut value, converged) = best.expect("at least one start");

    // Exact line search along the volatility-scale direction: the criterion
    // in log-scale is maximized where the mean squared standardized
    // numerator equals one.
    let m2 = criterion.mean_sq_standardized(&spec);
    if m2.is_finite() && m2 > T::zero() {
        let cand = spec.scale_volatility(m2.sqrt());
        let inside = cand.params().iter().zip(&bounds).all(|(x, b)| {
            let x = x.as_f64();
            x >= b.lo && x <= b.hi
        });
        if inside {
            let v = criterion.objective(&cand);
            evaluations += 1;
            if v >= value {
                spec = cand;
                value = v;
            }
        }
    }

    let at_bound = spec.params().iter().zip(&bounds).map(|(x, b)| b.touches(*x, 1e-6)).collect();
    ThetaEstimate {
        spec,
        diagnostics: FitDiagnostics {
            iterations,
            evaluations,
            objective: value,
            converged: converged && value.is_finite(),
            at_bound,
            starts_tried: starts.len(),
        },
    }
}

/// Deterministic perturbations of the moment start.
pub(crate) fn multistart<T: Scalar>(returns: &[T], family: ModelFamily, config: &FitConfig) -> Vec<ModelSpec<T>> {
    let base = moment_start(returns, family);
    let bounds = config.bounds(family);
    let u0 = to_internal(&base, &bounds);
    let mut buf = vec![T::zero(); family.dim()];
    (0..config.restarts)
        .map(|k| {
            if k == 0 {
                return base;
            }
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let mag = 0.7 * k.div_ceil(2) as f64;
            let u: Vec<T> = u0
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let s = if i % 2 == 0 { sign } else { -sign };
                    *x + T::lit(s * mag)
                })
                .collect();
            to_spec(family, &u, &bounds, &mut buf)
        })
        .collect()
}

/// Gaussian QMLE of the volatility parameters over the configured box.
///
/// Non-convergence is reported in the diagnostics, never as an error.
pub fn estimate_theta<T: Scalar>(
    series: &ReturnSeries<T>,
    family: ModelFamily,
    config: &FitConfig,
) -> Result<ThetaEstimate<T>> {
    if series.len() < MIN_FIT_LEN {
        return Err(Error::SampleTooSmall { required: MIN_FIT_LEN, actual: series.len() });
    }
    config.validate(family)?;
    let criterion = QmlCriterion::new(series.values());
    let starts = multistart(series.values(), family, config);
    Ok(maximize(&criterion, family, &starts, config, config.initial_step))
}

/// 1-based rank `k = ceil(n q)` of the generalized-inverse quantile, clamped to `[1, n]`.
pub fn quantile_rank(n: usize, q: f64) -> usize {
    let x = n as f64 * q;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// `inf { z : F_n(z) >= alpha }` for the empirical cdf of `values`, i.e. the
/// `ceil(n alpha)`-th smallest value.
pub fn empirical_quantile<T: Scalar>(values: &[T], alpha: f64) -> Result<T> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empirical quantile of an empty sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level must lie in (0, 1), got {alpha}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in quantile input".into()));
    }
    let k = quantile_rank(values.len(), alpha);
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(*kth)
}

/// Output of the two-step estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub theta_hat: ModelSpec<T>,
    pub alpha: f64,
    /// `eps_t / sigma_t(theta_hat)`, `t = 1..n`.
    pub residuals: Vec<T>,
    pub xi_hat: T,
    pub sigma_path: SigmaPath<T>,
    /// `D_t = (1/sigma_t) d sigma_t / d theta` at `theta_hat`, `t = 1..n+1`.
    pub d_hats: Gradients<T>,
    pub loglik: T,
    pub converged: bool,
    pub diagnostics: FitDiagnostics<T>,
}

impl<T: Scalar> FitResult<T> {
    /// Builds the second-step quantities at a given volatility parameter.
    pub fn at_theta(
        series: &ReturnSeries<T>,
        theta: ModelSpec<T>,
        alpha: f64,
        diagnostics: FitDiagnostics<T>,
    ) -> Result<Self> {
        let sigma_path = filter_sigma(&theta, series);
        let residuals: Vec<T> = series.values().iter().zip(sigma_path.in_sample()).map(|(e, s)| *e / *s).collect();
        let xi_hat = empirical_quantile(&residuals, alpha)?;
        let grads = sigma_gradient(&theta, series, &sigma_path);
        let d_hats = grads.relative_to(&sigma_path.sigmas);
        let loglik = qml_objective(&theta, series);
        Ok(Self {
            theta_hat: theta,
            alpha,
            residuals,
            xi_hat,
            sigma_path,
            d_hats,
            loglik,
            converged: diagnostics.converged,
            diagnostics,
        })
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn family(&self) -> ModelFamily {
        self.theta_hat.family()
    }

    pub fn is_interior(&self) -> bool {
        self.diagnostics.is_interior()
    }

    pub fn mean_sq_residual(&self) -> T {
        self.residuals.iter().map(|r| *r * *r).sum::<T>() / T::count(self.n())
    }

    /// Score `(1/n) sum D_t (eta_t^2 - 1)`.
    pub fn score(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.d_hats.dim()];
        for (row, r) in self.d_hats.rows().zip(&self.residuals) {
            let w = *r * *r - T::one();
            for (acc, d) in s.iter_mut().zip(row) {
                *acc = *acc + *d * w;
            }
        }
        let n = T::count(self.n());
        s.iter().map(|v| *v / n).collect()
    }
}

/// Runs QMLE, standardizes, and takes the empirical `alpha`-quantile.
pub fn fit_two_step<T: Scalar>(
    series: &ReturnSeries<T>,
    family: ModelFamily,
    alpha: f64,
    config: &FitConfig,
) -> Result<FitResult<T>> {
    let est = estimate_theta(series, family, config)?;
    FitResult::at_theta(series, est.spec, alpha, est.diagnostics)
}

/// Conditional VaR point estimate `-xi_hat * sigma_{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarEstimate<T> {
    pub value: T,
    pub alpha: f64,
    pub sigma_next: T,
    pub xi_hat: T,
}

pub fn var_point_estimate<T: Scalar>(fit: &FitResult<T>) -> VarEstimate<T> {
    var_from_parts(fit.xi_hat, fit.sigma_path.next(), fit.alpha)
}

pub fn var_from_parts<T: Scalar>(xi_hat: T, sigma_next: T, alpha: f64) -> VarEstimate<T> {
    VarEstimate { value: -xi_hat * sigma_next, alpha, sigma_next, xi_hat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::InnovationDist;
    use crate::model::simulate_path;
    use approx::assert_abs_diff_eq;

    #[test]
    fn per_observation_criterion_values() {
        let spec = ModelSpec::garch(0.5, 0.0, 0.5).unwrap();
        // sigma_1^2 = 0.5 / 0.5 = 1 under the sample-mean start since alpha = 0.
        let c = QmlCriterion::new(&[1.0f64]);
        assert_abs_diff_eq!(c.objective(&spec), -0.5, epsilon = 1e-15);
        let spec2 = ModelSpec::garch(2.0, 0.0, 0.5).unwrap();
        let c2 = QmlCriterion::new(&[2.0f64]);
        assert_abs_diff_eq!(c2.objective(&spec2), -0.5 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(c2.objective(&spec2), -1.193_147, epsilon = 1e-6);
    }

    #[test]
    fn quantile_rank_convention() {
        assert_eq!(quantile_rank(4, 0.25), 1);
        assert_eq!(quantile_rank(4, 0.5), 2);
        assert_eq!(quantile_rank(10, 0.3), 3);
        assert_eq!(quantile_rank(499, 0.05), 25);
        assert_eq!(quantile_rank(499, 0.95), 475);
        assert_eq!(quantile_rank(3, 1e-9), 1);
    }

    #[test]
    fn empirical_quantile_examples() {
        let r = [0.5, -1.0, 1.0, -2.0];
        assert_eq!(empirical_quantile(&r, 0.25).unwrap(), -2.0);
        assert_eq!(empirical_quantile(&r, 0.5).unwrap(), -1.0);
        assert!(empirical_quantile::<f64>(&[], 0.5).is_err());
        assert!(empirical_quantile(&r, 1.0).is_err());
    }

    #[test]
    fn empirical_quantile_minimizes_check_loss() {
        let r = [0.3, -1.7, 2.2, -0.4, 0.9, -3.1, 1.4];
        let loss = |z: f64, a: f64| {
            r.iter().map(|x| { let u = x - z; u * (a - if u < 0.0 { 1.0 } else { 0.0 }) }).sum::<f64>()
        };
        for a in [0.1, 0.2, 0.5, 0.7] {
            let q = empirical_quantile(&r, a).unwrap();
            for z in r {
                assert!(loss(q, a) <= loss(z, a) + 1e-12);
            }
        }
    }

    #[test]
    fn var_arithmetic() {
        assert_abs_diff_eq!(var_from_parts(-1.6449, 2.0, 0.05).value, 3.2898, epsilon = 1e-12);
        assert_abs_diff_eq!(var_from_parts(-2.0, 0.5, 0.05).value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn short_series_rejected() {
        let s = ReturnSeries::new(vec![0.1f64; 10]).unwrap();
        assert!(matches!(
            estimate_theta(&s, ModelFamily::Garch, &FitConfig::default()),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = FitConfig { param_bounds: Some(vec![Bound::new(0.0, 1.0); 3]), ..Default::default() };
        assert!(cfg.validate(ModelFamily::Garch).is_err());
        let cfg = FitConfig { tolerance: 0.0, ..Default::default() };
        assert!(cfg.validate(ModelFamily::Garch).is_err());
    }

    #[test]
    fn constant_series_fits_its_level() {
        let c = 1.7f64;
        let s = ReturnSeries::new(vec![c; 400]).unwrap();
        let est = estimate_theta(&s, ModelFamily::Garch, &FitConfig::default()).unwrap();
        let ModelSpec::Garch { omega, alpha, beta } = est.spec else { unreachable!() };
        let uv = omega / (1.0 - alpha - beta);
        // Any point on the ridge omega + (alpha + beta) c^2 = c^2 fits exactly.
        assert!((uv / (c * c) - 1.0).abs() < 0.05, "{:?}", est.spec);
    }

    #[test]
    fn fit_residuals_have_unit_mean_square() {
        let theta = ModelSpec::garch(0.2, 0.1, 0.8).unwrap();
        let p = simulate_path::<f64>(&theta, InnovationDist::StandardNormal, 1500, 500, 5).unwrap();
        let fit = fit_two_step(&p.series, ModelFamily::Garch, 0.05, &FitConfig::default()).unwrap();
        assert!(fit.converged && fit.is_interior());
        assert!((fit.mean_sq_residual() - 1.0).abs() < 1e-3);
        let s = fit.score();
        assert!(s.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-3, "{s:?}");
        assert!(fit.loglik >= qml_objective(&theta, &p.series));
    }

    #[test]
    fn single_precision_fit_tracks_double() {
        let theta = ModelSpec::garch(0.2, 0.1, 0.8).unwrap();
        let p = simulate_path::<f64>(&theta, InnovationDist::StandardNormal, 2000, 500, 9).unwrap();
        let s32 = ReturnSeries::new(p.series.values().iter().map(|v| *v as f32).collect()).unwrap();
        let f64fit = estimate_theta(&p.series, ModelFamily::Garch, &FitConfig::default()).unwrap();
        let cfg32 = FitConfig { tolerance: 1e-6, x_tolerance: 1e-3, ..Default::default() };
        let f32fit = estimate_theta(&s32, ModelFamily::Garch, &cfg32).unwrap();
        for (a, b) in f64fit.spec.params().iter().zip(f32fit.spec.params()) {
            assert!((a - b as f64).abs() < 0.03, "{:?} vs {:?}", f64fit.spec, f32fit.spec);
        }
    }
}
