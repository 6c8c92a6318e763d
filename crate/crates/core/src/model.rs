//! GARCH(1,1) and threshold GARCH(1,1) volatility recursions.
//!
//! Parameter vectors are always ordered `(omega, alpha, beta)` for GARCH and
//! `(omega, alpha_plus, alpha_minus, beta)` for T-GARCH. The GARCH recursion
//! runs on the variance `h_t = sigma_t^2`, the T-GARCH recursion on `sigma_t`
//! itself.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::stream_rng;

/// Lower clamp applied to every filtered volatility.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Garch,
    Tgarch,
}

impl ModelFamily {
    /// Number of volatility parameters `r`.
    pub fn dim(self) -> usize {
        match self {
            Self::Garch => 3,
            Self::Tgarch => 4,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Self::Garch => &["omega", "alpha", "beta"],
            Self::Tgarch => &["omega", "alpha_plus", "alpha_minus", "beta"],
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Garch => "garch",
            Self::Tgarch => "tgarch",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "garch" | "garch11" => Ok(Self::Garch),
            "tgarch" | "tgarch11" => Ok(Self::Tgarch),
            other => Err(Error::InvalidInput(format!("unknown model family `{other}`"))),
        }
    }
}

/// Volatility model together with its parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec<T> {
    Garch { omega: T, alpha: T, beta: T },
    Tgarch { omega: T, alpha_plus: T, alpha_minus: T, beta: T },
}

impl<T: Scalar> ModelSpec<T> {
    pub fn garch(omega: T, alpha: T, beta: T) -> Result<Self> {
        let s = Self::Garch { omega, alpha, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn tgarch(omega: T, alpha_plus: T, alpha_minus: T, beta: T) -> Result<Self> {
        let s = Self::Tgarch { omega, alpha_plus, alpha_minus, beta };
        s.validate()?;
        Ok(s)
    }

    /// Builds a spec from an ordered parameter slice without validation.
    ///
    /// # Panics
    /// If `params.len()` differs from `family.dim()`.
    pub fn from_params(family: ModelFamily, params: &[T]) -> Self {
        assert_eq!(params.len(), family.dim(), "parameter vector length");
        match family {
            ModelFamily::Garch => Self::Garch { omega: params[0], alpha: params[1], beta: params[2] },
            ModelFamily::Tgarch => Self::Tgarch {
                omega: params[0],
                alpha_plus: params[1],
                alpha_minus: params[2],
                beta: params[3],
            },
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            Self::Garch { .. } => ModelFamily::Garch,
            Self::Tgarch { .. } => ModelFamily::Tgarch,
        }
    }

    pub fn dim(&self) -> usize {
        self.family().dim()
    }

    pub fn params(&self) -> Vec<T> {
        match *self {
            Self::Garch { omega, alpha, beta } => vec![omega, alpha, beta],
            Self::Tgarch { omega, alpha_plus, alpha_minus, beta } => {
                vec![omega, alpha_plus, alpha_minus, beta]
            }
        }
    }

    pub fn omega(&self) -> T {
        match *self {
            Self::Garch { omega, .. } | Self::Tgarch { omega, .. } => omega,
        }
    }

    pub fn beta(&self) -> T {
        match *self {
            Self::Garch { beta, .. } | Self::Tgarch { beta, .. } => beta,
        }
    }

    /// Checks `omega > 0`, nonnegative ARCH coefficients and `0 <= beta < 1`.
    pub fn validate(&self) -> Result<()> {
        let p = self.params();
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::ParameterDomain(format!("non-finite parameter in {self:?}")));
        }
        if !(p[0] > T::zero()) {
            return Err(Error::ParameterDomain(format!("omega must be positive, got {}", p[0])));
        }
        let last = p.len() - 1;
        if p[1..last].iter().any(|a| *a < T::zero()) {
            return Err(Error::ParameterDomain(format!("ARCH coefficients must be nonnegative: {self:?}")));
        }
        if !(p[last] >= T::zero() && p[last] < T::one()) {
            return Err(Error::ParameterDomain(format!("beta must lie in [0, 1), got {}", p[last])));
        }
        Ok(())
    }

    /// Parameter that reproduces the same standardized residuals when the
    /// data are multiplied by `c`: every volatility is multiplied by `c`.
    pub fn rescale_for_data(&self, c: T) -> Self {
        match *self {
            Self::Garch { omega, alpha, beta } => Self::Garch { omega: c * c * omega, alpha, beta },
            Self::Tgarch { omega, alpha_plus, alpha_minus, beta } => {
                Self::Tgarch { omega: c * omega, alpha_plus, alpha_minus, beta }
            }
        }
    }

    /// Parameter `theta_lambda` with `sigma(x; theta_lambda) = lambda * sigma(x; theta)`
    /// for fixed data.
    pub fn scale_volatility(&self, lambda: T) -> Self {
        match *self {
            Self::Garch { omega, alpha, beta } => {
                let l2 = lambda * lambda;
                Self::Garch { omega: l2 * omega, alpha: l2 * alpha, beta }
            }
            Self::Tgarch { omega, alpha_plus, alpha_minus, beta } => Self::Tgarch {
                omega: lambda * omega,
                alpha_plus: lambda * alpha_plus,
                alpha_minus: lambda * alpha_minus,
                beta,
            },
        }
    }

    /// Stationary variance `omega / (1 - alpha - beta)` of a GARCH model.
    pub fn unconditional_variance(&self) -> Option<T> {
        match *self {
            Self::Garch { omega, alpha, beta } if alpha + beta < T::one() => {
                Some(omega / (T::one() - alpha - beta))
            }
            _ => None,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelSpec<U> {
        let p: Vec<U> = self.params().iter().map(|x| U::lit(x.as_f64())).collect();
        ModelSpec::from_params(self.family(), &p)
    }
}

/// Observed log-returns `eps_1..eps_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReturnSeries<T> {
    values: Vec<T>,
}

impl<T: Scalar> ReturnSeries<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("return series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite return at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    /// Sub-series `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(Error::InvalidInput(format!(
                "window [{start}, {end}) outside series of length {}",
                self.values.len()
            )));
        }
        Ok(Self { values: self.values[start..end].to_vec() })
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|v| *v * c).collect() }
    }
}

/// How the unobserved presample history enters the truncated filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Presample<T> {
    /// Presample terms `eps_t^2` (GARCH) or `eps_t^+`, `eps_t^-` (T-GARCH),
    /// `t <= 0`, are replaced by their in-sample means, so the start value is
    /// the fixed point of the recursion at those means. It depends on
    /// `theta` and scales exactly with the volatility.
    SampleMeans,
    /// Fixed `sigma_1`, independent of `theta`.
    FixedSigma(T),
}

/// Presample moments of a series.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PresampleMoments<T> {
    pub mean_sq: T,
    pub mean_pos: T,
    pub mean_neg: T,
}

impl<T: Scalar> PresampleMoments<T> {
    pub fn of(eps: &[T]) -> Self {
        let n = T::count(eps.len().max(1));
        let (mut sq, mut pos, mut neg) = (T::zero(), T::zero(), T::zero());
        for &e in eps {
            sq = sq + e * e;
            if e > T::zero() {
                pos = pos + e;
            } else {
                neg = neg - e;
            }
        }
        Self { mean_sq: sq / n, mean_pos: pos / n, mean_neg: neg / n }
    }

    /// Recursion state at t = 1 (variance for GARCH, volatility for T-GARCH).
    pub fn initial_state(&self, spec: &ModelSpec<T>) -> T {
        match *spec {
            ModelSpec::Garch { omega, alpha, beta } => (omega + alpha * self.mean_sq) / (T::one() - beta),
            ModelSpec::Tgarch { omega, alpha_plus, alpha_minus, beta } => {
                (omega + alpha_plus * self.mean_pos + alpha_minus * self.mean_neg) / (T::one() - beta)
            }
        }
    }
}

/// Recursion state at t = 1 for the given presample rule.
pub(crate) fn initial_state<T: Scalar>(spec: &ModelSpec<T>, eps: &[T], presample: Presample<T>) -> T {
    match presample {
        Presample::SampleMeans => PresampleMoments::of(eps).initial_state(spec),
        Presample::FixedSigma(s) => match spec.family() {
            ModelFamily::Garch => s * s,
            ModelFamily::Tgarch => s,
        },
    }
}

/// Filtered volatilities `sigma_1..sigma_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPath<T> {
    pub sigmas: Vec<T>,
    /// `sigma_1`.
    pub init_value: T,
    pub presample: Presample<T>,
}

impl<T: Scalar> SigmaPath<T> {
    /// One-step-ahead volatility `sigma_{n+1}`.
    pub fn next(&self) -> T {
        *self.sigmas.last().expect("nonempty sigma path")
    }

    /// In-sample volatilities `sigma_1..sigma_n`.
    pub fn in_sample(&self) -> &[T] {
        &self.sigmas[..self.sigmas.len() - 1]
    }
}

/// Truncated volatility filter with the default presample rule.
pub fn filter_sigma<T: Scalar>(spec: &ModelSpec<T>, series: &ReturnSeries<T>) -> SigmaPath<T> {
    filter_sigma_with(spec, series.values(), Presample::SampleMeans)
}

/// Truncated volatility filter over raw returns.
pub fn filter_sigma_with<T: Scalar>(spec: &ModelSpec<T>, eps: &[T], presample: Presample<T>) -> SigmaPath<T> {
    let floor = T::lit(SIGMA_FLOOR);
    let mut sigmas = Vec::with_capacity(eps.len() + 1);
    let init = initial_state(spec, eps, presample);
    match *spec {
        ModelSpec::Garch { omega, alpha, beta } => {
            let floor2 = floor * floor;
            let mut h = init.max(floor2);
            sigmas.push(h.sqrt());
            for &e in eps {
                h = (omega + alpha * e * e + beta * h).max(floor2);
                sigmas.push(h.sqrt());
            }
        }
        ModelSpec::Tgarch { omega, alpha_plus, alpha_minus, beta } => {
            let mut s = init.max(floor);
            sigmas.push(s);
            for &e in eps {
                let (pos, neg) = split_sign(e);
                s = (omega + alpha_plus * pos + alpha_minus * neg + beta * s).max(floor);
                sigmas.push(s);
            }
        }
    }
    SigmaPath { init_value: sigmas[0], sigmas, presample }
}

#[inline]
pub(crate) fn split_sign<T: Scalar>(e: T) -> (T, T) {
    if e > T::zero() {
        (e, T::zero())
    } else {
        (T::zero(), -e)
    }
}

/// Row-major `(n + 1) x r` matrix of per-period gradient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    /// Divides row `t` by `sigmas[t]`, giving `D_t = (1/sigma_t) d sigma_t / d theta`.
    pub fn relative_to(&self, sigmas: &[T]) -> Self {
        assert_eq!(sigmas.len(), self.len());
        let mut data = self.data.clone();
        for (row, s) in data.chunks_exact_mut(self.dim).zip(sigmas) {
            for v in row {
                *v = *v / *s;
            }
        }
        Self { dim: self.dim, data }
    }
}

/// Analytic gradients `d sigma_t / d theta`, `t = 1..n+1`.
pub fn sigma_gradient<T: Scalar>(spec: &ModelSpec<T>, series: &ReturnSeries<T>, path: &SigmaPath<T>) -> Gradients<T> {
    sigma_gradient_with(spec, series.values(), path)
}

pub fn sigma_gradient_with<T: Scalar>(spec: &ModelSpec<T>, eps: &[T], path: &SigmaPath<T>) -> Gradients<T> {
    assert_eq!(path.sigmas.len(), eps.len() + 1, "path does not match series");
    let dim = spec.dim();
    let mut data = Vec::with_capacity(dim * (eps.len() + 1));
    let one = T::one();
    let two = T::lit(2.0);
    let beta = spec.beta();
    // Gradient of the recursion state (variance for GARCH, sigma for T-GARCH).
    let mut g = vec![T::zero(); dim];
    if let Presample::SampleMeans = path.presample {
        let m = PresampleMoments::of(eps);
        let state = match spec.family() {
            ModelFamily::Garch => path.sigmas[0] * path.sigmas[0],
            ModelFamily::Tgarch => path.sigmas[0],
        };
        let k = one / (one - beta);
        g[0] = k;
        match spec.family() {
            ModelFamily::Garch => g[1] = m.mean_sq * k,
            ModelFamily::Tgarch => {
                g[1] = m.mean_pos * k;
                g[2] = m.mean_neg * k;
            }
        }
        g[dim - 1] = state * k;
    }
    let push = |data: &mut Vec<T>, g: &[T], sigma: T| match spec.family() {
        ModelFamily::Garch => data.extend(g.iter().map(|v| *v / (two * sigma))),
        ModelFamily::Tgarch => data.extend_from_slice(g),
    };
    push(&mut data, &g, path.sigmas[0]);
    for (t, &e) in eps.iter().enumerate() {
        let sigma_t = path.sigmas[t];
        match spec.family() {
            ModelFamily::Garch => {
                let h = sigma_t * sigma_t;
                g[0] = one + beta * g[0];
                g[1] = e * e + beta * g[1];
                g[2] = h + beta * g[2];
            }
            ModelFamily::Tgarch => {
                let (pos, neg) = split_sign(e);
                g[0] = one + beta * g[0];
                g[1] = pos + beta * g[1];
                g[2] = neg + beta * g[2];
                g[3] = sigma_t + beta * g[3];
            }
        }
        push(&mut data, &g, path.sigmas[t + 1]);
    }
    Gradients { dim, data }
}

/// Output of [`simulate_path`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath<T> {
    pub series: ReturnSeries<T>,
    /// True `sigma_{n+1}`.
    pub true_sigma_next: T,
    /// True `sigma_1..sigma_{n+1}`.
    pub true_sigmas: Vec<T>,
}

/// Start value used for simulation: the unconditional level.
pub fn simulation_start<T: Scalar>(spec: &ModelSpec<T>) -> T {
    match *spec {
        ModelSpec::Garch { omega, beta, .. } => match spec.unconditional_variance() {
            Some(v) => v.sqrt(),
            None => (omega / (T::one() - beta)).sqrt(),
        },
        ModelSpec::Tgarch { omega, beta, .. } => omega / (T::one() - beta),
    }
}

/// Runs the exact recursion on given innovations from `sigma_start`.
///
/// Returns `(eps_1..eps_m, sigma_1..sigma_{m+1})`.
pub fn simulate_with_innovations<T: Scalar>(spec: &ModelSpec<T>, innovations: &[T], sigma_start: T) -> (Vec<T>, Vec<T>) {
    let floor = T::lit(SIGMA_FLOOR);
    let mut eps = Vec::with_capacity(innovations.len());
    let mut sigmas = Vec::with_capacity(innovations.len() + 1);
    let mut sigma = sigma_start.max(floor);
    sigmas.push(sigma);
    for &eta in innovations {
        let e = sigma * eta;
        eps.push(e);
        sigma = match *spec {
            ModelSpec::Garch { omega, alpha, beta } => (omega + alpha * e * e + beta * sigma * sigma).sqrt(),
            ModelSpec::Tgarch { omega, alpha_plus, alpha_minus, beta } => {
                let (pos, neg) = split_sign(e);
                omega + alpha_plus * pos + alpha_minus * neg + beta * sigma
            }
        }
        .max(floor);
        sigmas.push(sigma);
    }
    (eps, sigmas)
}

/// Simulates `n` returns after discarding `burn_in` periods.
pub fn simulate_path<T: Scalar>(
    spec: &ModelSpec<T>,
    dist: InnovationDist,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SimulatedPath<T>> {
    spec.validate()?;
    dist.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("path length must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    // The final draw would drive eps_{n+1}; it is generated to keep the
    // stream layout fixed but not used.
    let etas: Vec<T> = (0..burn_in + n + 1).map(|_| T::lit(dist.sample(&mut rng))).collect();
    let (eps, sigmas) = simulate_with_innovations(spec, &etas[..burn_in + n], simulation_start(spec));
    let true_sigmas = sigmas[burn_in..].to_vec();
    Ok(SimulatedPath {
        series: ReturnSeries::new(eps[burn_in..].to_vec())?,
        true_sigma_next: *true_sigmas.last().expect("n >= 1"),
        true_sigmas,
    })
}
