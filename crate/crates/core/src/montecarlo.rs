//! Coverage experiments: simulate paths from a known model, build intervals
//! for the conditional VaR, and count how often they contain the truth.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_interval, plug_in_components_with, KdeBandwidth};
use crate::bootstrap::{build_intervals, run_bootstrap, BootstrapConfig, Interval, IntervalSet};
use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::estimation::{fit_two_step, var_point_estimate, FitConfig};
use crate::model::{simulate_path, ModelSpec};
use crate::seed::child_seed;

/// Named data-generating processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    GarchHigh,
    GarchLow,
    TgarchHigh,
    TgarchLow,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::GarchHigh, Preset::GarchLow, Preset::TgarchHigh, Preset::TgarchLow];

    pub fn spec(self) -> ModelSpec<f64> {
        let garch_omega = 0.05 * 400.0 / 252.0;
        let tgarch_omega = 0.05 * 20.0 / 252f64.sqrt();
        match self {
            Preset::GarchHigh => ModelSpec::Garch { omega: garch_omega, alpha: 0.15, beta: 0.8 },
            Preset::GarchLow => ModelSpec::Garch { omega: garch_omega, alpha: 0.4, beta: 0.55 },
            Preset::TgarchHigh => {
                ModelSpec::Tgarch { omega: tgarch_omega, alpha_plus: 0.05, alpha_minus: 0.10, beta: 0.8 }
            }
            Preset::TgarchLow => {
                ModelSpec::Tgarch { omega: tgarch_omega, alpha_plus: 0.1, alpha_minus: 0.3, beta: 0.55 }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::GarchHigh => "garch-high",
            Preset::GarchLow => "garch-low",
            Preset::TgarchHigh => "tgarch-high",
            Preset::TgarchLow => "tgarch-low",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: ModelSpec<f64>,
    pub dist: InnovationDist,
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub s_sims: usize,
    pub bootstrap: BootstrapConfig,
    pub include_asymptotic: bool,
    pub master_seed: u64,
    pub burn_in: usize,
    pub fit_config: FitConfig,
    pub bandwidth: KdeBandwidth,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::GarchHigh, InnovationDist::NormalizedStudentT { nu: 6 })
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults: n = 500, S = 200, B = 499.
    pub fn preset(preset: Preset, dist: InnovationDist) -> Self {
        Self {
            spec: preset.spec(),
            dist,
            n: 500,
            alpha: 0.05,
            gamma: 0.10,
            s_sims: 200,
            bootstrap: BootstrapConfig { b_replicates: 499, ..Default::default() },
            include_asymptotic: false,
            master_seed: 0,
            burn_in: 500,
            fit_config: FitConfig::default(),
            bandwidth: KdeBandwidth::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.dist.validate()?;
        self.bootstrap.validate()?;
        self.fit_config.validate(self.spec.family())?;
        self.bandwidth.validate()?;
        if self.s_sims == 0 {
            return Err(Error::InvalidInput("number of simulations must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidInput("alpha and gamma must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Seeds of simulation `s`: `(path, bootstrap)`.
    pub fn sim_seeds(&self, s: usize) -> (u64, u64) {
        let s = s as u64;
        (child_seed(self.master_seed, 2 * s), child_seed(self.master_seed, 2 * s + 1))
    }
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub sim: usize,
    pub true_var: f64,
    pub var_hat: f64,
    pub theta_hat: Vec<f64>,
    pub xi_hat: f64,
    pub intervals: IntervalSet<f64>,
    pub asymptotic: Option<Interval<f64>>,
    pub boot_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFailure {
    pub sim: usize,
    pub reason: String,
}

/// Coverage tallies for one interval type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub avg_coverage: f64,
    pub below: f64,
    pub above: f64,
    pub avg_length: f64,
    pub covered_count: usize,
    pub below_count: usize,
    pub above_count: usize,
    pub sims: usize,
}

impl IntervalStats {
    fn from_intervals<'a>(truths_and_intervals: impl Iterator<Item = (f64, &'a Interval<f64>)>) -> Self {
        let mut st = IntervalStats::default();
        let mut len = 0.0;
        for (truth, iv) in truths_and_intervals {
            st.sims += 1;
            len += iv.length();
            if truth < iv.lo {
                st.below_count += 1;
            } else if truth > iv.hi {
                st.above_count += 1;
            } else {
                st.covered_count += 1;
            }
        }
        if st.sims > 0 {
            let pct = |c: usize| 100.0 * c as f64 / st.sims as f64;
            st.avg_coverage = pct(st.covered_count);
            st.below = pct(st.below_count);
            st.above = pct(st.above_count);
            st.avg_length = len / st.sims as f64;
        }
        st
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub ep: IntervalStats,
    pub rt: IntervalStats,
    pub sy: IntervalStats,
    pub asymptotic: Option<IntervalStats>,
    /// RT minus EP average coverage, in percentage points.
    pub ep_rt_gap: f64,
    pub failed_sims: usize,
    /// Bootstrap replicates dropped across all sims.
    pub failed_replicates: usize,
    #[serde(skip)]
    pub wall_time: f64,
}

impl CoverageReport {
    pub fn from_records(records: &[SimRecord], failed_sims: usize, include_asymptotic: bool) -> Self {
        let ep = IntervalStats::from_intervals(records.iter().map(|r| (r.true_var, &r.intervals.ep)));
        let rt = IntervalStats::from_intervals(records.iter().map(|r| (r.true_var, &r.intervals.rt)));
        let sy = IntervalStats::from_intervals(records.iter().map(|r| (r.true_var, &r.intervals.sy)));
        let asymptotic = include_asymptotic.then(|| {
            IntervalStats::from_intervals(records.iter().filter_map(|r| r.asymptotic.as_ref().map(|a| (r.true_var, a))))
        });
        Self {
            ep_rt_gap: rt.avg_coverage - ep.avg_coverage,
            ep,
            rt,
            sy,
            asymptotic,
            failed_sims,
            failed_replicates: records.iter().map(|r| r.boot_failed).sum(),
            wall_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub report: CoverageReport,
    pub records: Vec<SimRecord>,
    pub failures: Vec<SimFailure>,
}

/// Runs one simulation of the experiment.
pub fn run_sim(cfg: &ExperimentConfig, sim: usize, true_xi: f64) -> Result<SimRecord> {
    let (path_seed, boot_seed) = cfg.sim_seeds(sim);
    let path = simulate_path(&cfg.spec, cfg.dist, cfg.n, cfg.burn_in, path_seed)?;
    let fit = fit_two_step(&path.series, cfg.spec.family(), cfg.alpha, &cfg.fit_config)?;
    if !fit.converged {
        return Err(Error::Numerical("QML optimizer did not converge".into()));
    }
    let boot_cfg = BootstrapConfig { base_seed: boot_seed, ..cfg.bootstrap.clone() };
    let outcome = run_bootstrap(&fit, &path.series, &boot_cfg)?;
    let intervals = build_intervals(&outcome, cfg.gamma)?;
    let asymptotic = if cfg.include_asymptotic {
        plug_in_components_with(&fit, &cfg.bandwidth)
            .and_then(|c| asymptotic_interval(&fit, &c, cfg.gamma))
            .ok()
            .map(|a| Interval { lo: a.lo, hi: a.hi })
    } else {
        None
    };
    Ok(SimRecord {
        sim,
        true_var: -true_xi * path.true_sigma_next,
        var_hat: var_point_estimate(&fit).value,
        theta_hat: fit.theta_hat.params(),
        xi_hat: fit.xi_hat,
        intervals,
        asymptotic,
        boot_failed: outcome.failed_count,
    })
}

/// Runs all simulations in parallel and aggregates in simulation order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let true_xi = cfg.dist.quantile(cfg.alpha);
    let results: Vec<Result<SimRecord>> = (0..cfg.s_sims).into_par_iter().map(|s| run_sim(cfg, s, true_xi)).collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (sim, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(SimFailure { sim, reason: e.to_string() }),
        }
    }
    let mut report = CoverageReport::from_records(&records, failures.len(), cfg.include_asymptotic);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(ExperimentOutput { report, records, failures })
}

/// RT minus EP coverage gap per labelled report.
pub fn gap_table(reports: &BTreeMap<String, CoverageReport>) -> Result<Vec<(String, f64)>> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("gap table needs at least one report".into()));
    }
    Ok(reports.iter().map(|(k, r)| (k.clone(), r.ep_rt_gap)).collect())
}

/// Aligned text table: one row per interval type.
pub fn format_report(report: &CoverageReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>9} {:>8} {:>8} {:>9}", "interval", "coverage", "below", "above", "length");
    let mut row = |name: &str, s: &IntervalStats| {
        let _ = writeln!(
            out,
            "{:<10} {:>9.2} {:>8.2} {:>8.2} {:>9.4}",
            name, s.avg_coverage, s.below, s.above, s.avg_length
        );
    };
    row("EP", &report.ep);
    row("RT", &report.rt);
    row("SY", &report.sy);
    if let Some(a) = &report.asymptotic {
        row("asymptotic", a);
    }
    let _ = writeln!(out, "RT-EP gap {:.2}pp, failed sims {}", report.ep_rt_gap, report.failed_sims);
    out
}
