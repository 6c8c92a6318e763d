//! Rolling-window VaR with bootstrap and asymptotic intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_interval, plug_in_components_with, KdeBandwidth};
use crate::bootstrap::{build_intervals, run_bootstrap, BootstrapConfig, IntervalSet};
use crate::data::DatedReturns;
use crate::error::{Error, Result};
use crate::estimation::{fit_two_step, var_point_estimate, FitConfig};
use crate::model::ModelFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window_n: usize,
    pub steps: usize,
    pub family: ModelFamily,
    pub alpha: f64,
    pub gamma: f64,
    pub bootstrap: BootstrapConfig,
    pub include_asymptotic: bool,
    pub fit_config: FitConfig,
    pub bandwidth: KdeBandwidth,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window_n: 5_100,
            steps: 125,
            family: ModelFamily::Tgarch,
            alpha: 0.05,
            gamma: 0.05,
            bootstrap: BootstrapConfig::default(),
            include_asymptotic: true,
            fit_config: FitConfig::default(),
            bandwidth: KdeBandwidth::default(),
        }
    }
}

impl RollingConfig {
    /// `n_returns` is the number of returns, one less than the number of prices.
    pub fn validate(&self, n_returns: usize) -> Result<()> {
        self.bootstrap.validate()?;
        self.fit_config.validate(self.family)?;
        self.bandwidth.validate()?;
        if self.steps == 0 || self.window_n == 0 {
            return Err(Error::InvalidInput("window length and number of steps must be positive".into()));
        }
        if self.window_n + self.steps > n_returns + 1 {
            return Err(Error::InvalidInput(format!(
                "{} windows of {} returns need {} returns, series has {n_returns}",
                self.steps,
                self.window_n,
                self.window_n + self.steps - 1
            )));
        }
        Ok(())
    }
}

/// Result for one window; `failure` is set when the window could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window: usize,
    /// Date of the last return in the window.
    pub date: String,
    pub var_hat: Option<f64>,
    pub theta_hat: Option<Vec<f64>>,
    pub xi_hat: Option<f64>,
    pub intervals: Option<IntervalSet<f64>>,
    pub rt_lo: Option<f64>,
    pub rt_hi: Option<f64>,
    pub asy_lo: Option<f64>,
    pub asy_hi: Option<f64>,
    /// Sample standard deviations of the bootstrap parameter draws.
    pub theta_boot_sd: Option<Vec<f64>>,
    pub boot_failed: usize,
    pub failure: Option<String>,
}

fn column_sd(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows.first().map_or(0, Vec::len);
    (0..dim)
        .map(|j| crate::stats::sample_sd(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect()
}

/// Window `w` bootstraps with seed `base_seed + w`, so a single window
/// reproduces a direct call with the base seed.
pub fn run_window(data: &DatedReturns, cfg: &RollingConfig, w: usize) -> WindowRecord {
    let end = w + cfg.window_n;
    let mut rec = WindowRecord {
        window: w,
        date: data.dates[end - 1].clone(),
        var_hat: None,
        theta_hat: None,
        xi_hat: None,
        intervals: None,
        rt_lo: None,
        rt_hi: None,
        asy_lo: None,
        asy_hi: None,
        theta_boot_sd: None,
        boot_failed: 0,
        failure: None,
    };
    let result = (|| -> Result<()> {
        let series = data.returns.window(w, end)?;
        let fit = fit_two_step(&series, cfg.family, cfg.alpha, &cfg.fit_config)?;
        rec.var_hat = Some(var_point_estimate(&fit).value);
        rec.theta_hat = Some(fit.theta_hat.params());
        rec.xi_hat = Some(fit.xi_hat);
        if cfg.include_asymptotic {
            let asy = plug_in_components_with(&fit, &cfg.bandwidth).and_then(|c| asymptotic_interval(&fit, &c, cfg.gamma));
            if let Ok(a) = asy {
                rec.asy_lo = Some(a.lo);
                rec.asy_hi = Some(a.hi);
            }
        }
        let boot = BootstrapConfig { base_seed: cfg.bootstrap.base_seed.wrapping_add(w as u64), ..cfg.bootstrap.clone() };
        let outcome = run_bootstrap(&fit, &series, &boot)?;
        rec.boot_failed = outcome.failed_count;
        rec.theta_boot_sd = Some(column_sd(&outcome.theta_stars));
        let iv = build_intervals(&outcome, cfg.gamma)?;
        rec.rt_lo = Some(iv.rt.lo);
        rec.rt_hi = Some(iv.rt.hi);
        rec.intervals = Some(iv);
        Ok(())
    })();
    if let Err(e) = result {
        rec.failure = Some(e.to_string());
    }
    rec
}

/// Fits every window `[w, w + n)` for `w < steps`, in parallel.
pub fn rolling_var(data: &DatedReturns, cfg: &RollingConfig) -> Result<Vec<WindowRecord>> {
    cfg.validate(data.returns.len())?;
    if data.dates.len() != data.returns.len() {
        return Err(Error::Validation("dates and returns differ in length".into()));
    }
    Ok((0..cfg.steps).into_par_iter().map(|w| run_window(data, cfg, w)).collect())
}
