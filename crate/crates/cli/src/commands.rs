use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use serde::Serialize;
use varboot::asymptotics::{asymptotic_interval, plug_in_components_with, sigma_alpha_matrix, AsymptoticInterval};
use varboot::data::{load_prices, load_returns, save_returns, write_returns, DatedReturns};
use varboot::montecarlo::{format_report, run_experiment, SimRecord};
use varboot::stats::sample_sd;
use varboot::{
    build_intervals, fit_two_step, population_components, rolling_var, run_bootstrap, simulate_path,
    var_point_estimate, BootstrapConfig, CsvFormat, Design, EstimatorMode, ExperimentConfig, FitConfig, FitResult,
    InnovationDist, IntervalSet, KdeBandwidth, ModelFamily, ModelSpec, PopulationComponents, Preset, RollingConfig,
    WindowRecord,
};

use crate::config::{options, Parsed};
use crate::error::{CliError, CliResult};

pub const FULL_SCALE: usize = 2_000;

#[derive(Debug, Serialize)]
pub struct Failure {
    pub scope: &'static str,
    pub index: Option<usize>,
    pub reason: String,
}

/// Envelope shared by every JSON output.
#[derive(Debug, Serialize)]
pub struct Envelope<C, R> {
    pub config: C,
    pub results: R,
    pub failures: Vec<Failure>,
    pub version: &'static str,
    pub seed: Option<u64>,
}

impl<C, R> Envelope<C, R> {
    pub fn new(config: C, results: R, failures: Vec<Failure>, seed: Option<u64>) -> Self {
        Self { config, results, failures, version: env!("CARGO_PKG_VERSION"), seed }
    }
}

/// What a command produced: JSON for the envelope, or plain text.
pub enum Output {
    Json(String),
    Text(String),
}

fn json<C: Serialize, R: Serialize>(env: Envelope<C, R>) -> CliResult<Output> {
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(Output::Json(s))
}

fn require<T>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Config(format!("missing required setting '{what}'")))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub prices: bool,
    pub format: CsvFormat,
}

impl InputSpec {
    fn resolve(path: Option<PathBuf>, prices: Option<bool>, date: Option<String>, value: Option<String>) -> CliResult<Self> {
        let prices = prices.unwrap_or(false);
        let mut format = if prices { CsvFormat::prices() } else { CsvFormat::returns() };
        if let Some(d) = date {
            format.date_column = d;
        }
        if let Some(v) = value {
            format.value_column = v;
        }
        Ok(Self { path: require(path, "input")?, prices, format })
    }

    fn load(&self) -> CliResult<DatedReturns> {
        Ok(if self.prices {
            DatedReturns::from_prices(&load_prices(&self.path, &self.format)?)?
        } else {
            load_returns(&self.path, &self.format)?
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Param {
    pub name: &'static str,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

fn params(spec: &ModelSpec<f64>, se: Option<&[f64]>) -> Vec<Param> {
    spec.family()
        .param_names()
        .iter()
        .zip(spec.params())
        .enumerate()
        .map(|(i, (name, value))| Param { name, value, se: se.map(|s| s[i]) })
        .collect()
}

fn resolve_spec(preset: Option<Parsed<Preset>>, family: Option<Parsed<ModelFamily>>, values: Option<Vec<f64>>) -> CliResult<ModelSpec<f64>> {
    match (values, family) {
        (Some(v), Some(f)) => {
            if v.len() != f.0.dim() {
                return Err(CliError::Config(format!("{} needs {} parameters, got {}", f.0, f.0.dim(), v.len())));
            }
            let spec = ModelSpec::from_params(f.0, &v);
            spec.validate()?;
            Ok(spec)
        }
        (Some(_), None) => Err(CliError::Config("explicit parameters need a model family".into())),
        (None, _) => Ok(preset.map_or(Preset::GarchHigh, |p| p.0).spec()),
    }
}

fn fit_config(base: Option<FitConfig>, restarts: Option<usize>) -> FitConfig {
    let mut cfg = base.unwrap_or_default();
    if let Some(r) = restarts {
        cfg.restarts = r;
    }
    cfg
}

fn bandwidth(exponent: Option<f64>) -> KdeBandwidth {
    KdeBandwidth { exponent: exponent.unwrap_or(0.2), ..Default::default() }
}

// ---------------------------------------------------------------- simulate

options! {
    /// Simulate a return path.
    pub struct SimulateOpts {
        /// Named data-generating process.
        #[arg(long)]
        preset: Parsed<Preset>,
        /// Model family for explicit parameters.
        #[arg(long)]
        family: Parsed<ModelFamily>,
        /// Comma-separated parameters, e.g. 0.05,0.1,0.85.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        /// Innovation law: normal or t<nu>.
        #[arg(long)]
        dist: Parsed<InnovationDist>,
        /// Number of returns.
        #[arg(long)]
        n: usize,
        /// Simulated periods discarded before the sample.
        #[arg(long)]
        burn_in: usize,
        /// Random seed.
        #[arg(long)]
        seed: u64,
        /// VaR level for the reported true VaR.
        #[arg(long)]
        alpha: f64,
        /// Write the path here; without it the CSV goes to stdout.
        #[arg(long)]
        csv: PathBuf,
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateConfig {
    pub spec: ModelSpec<f64>,
    pub dist: InnovationDist,
    pub n: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct SimulateResults {
    pub n: usize,
    pub true_sigma_next: f64,
    pub true_var: f64,
}

pub fn simulate(o: SimulateOpts) -> CliResult<Output> {
    let cfg = SimulateConfig {
        spec: resolve_spec(o.preset, o.family, o.params)?,
        dist: o.dist.map_or(InnovationDist::StandardNormal, |d| d.0),
        n: o.n.unwrap_or(500),
        burn_in: o.burn_in.unwrap_or(500),
        alpha: o.alpha.unwrap_or(0.05),
        csv: o.csv,
    };
    let seed = o.seed.unwrap_or(0);
    let path = simulate_path(&cfg.spec, cfg.dist, cfg.n, cfg.burn_in, seed)?;
    let results = SimulateResults {
        n: cfg.n,
        true_sigma_next: path.true_sigma_next,
        true_var: -cfg.dist.quantile(cfg.alpha) * path.true_sigma_next,
    };
    let data = DatedReturns::undated(path.series);
    match &cfg.csv {
        Some(p) => {
            save_returns(p, &data)?;
            json(Envelope::new(cfg, results, vec![], Some(seed)))
        }
        None => {
            let mut buf = Vec::new();
            write_returns(&mut buf, &data)?;
            Ok(Output::Text(String::from_utf8(buf).expect("CSV output is UTF-8")))
        }
    }
}

// --------------------------------------------------------------------- fit

options! {
    /// Two-step estimate of the conditional VaR.
    pub struct FitOpts {
        /// CSV file with `date,return` rows (or prices with --prices).
        #[arg(long)]
        input: PathBuf,
        /// Input holds `date,close` prices instead of returns.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        prices: bool,
        /// Name of the date column.
        #[arg(long)]
        date_column: String,
        /// Name of the price or return column.
        #[arg(long)]
        value_column: String,
        /// Model family: garch or tgarch.
        #[arg(long)]
        family: Parsed<ModelFamily>,
        /// VaR level.
        #[arg(long)]
        alpha: f64,
        /// Also report asymptotic standard errors and interval.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        asymptotic: bool,
        /// One minus the nominal interval coverage.
        #[arg(long)]
        gamma: f64,
        /// Kernel bandwidth rate, h ~ n^(-exponent).
        #[arg(long)]
        bandwidth_exponent: f64,
        /// Number of optimizer starts.
        #[arg(long)]
        restarts: usize,
        #[arg(skip)]
        fit: FitConfig,
    }
}

#[derive(Debug, Serialize)]
pub struct FitRunConfig {
    pub input: InputSpec,
    pub family: ModelFamily,
    pub alpha: f64,
    pub gamma: f64,
    pub asymptotic: bool,
    pub bandwidth: KdeBandwidth,
    pub fit: FitConfig,
}

#[derive(Debug, Serialize)]
pub struct AsymptoticSummary {
    pub kappa: f64,
    pub p_alpha: f64,
    pub f_xi: f64,
    pub bandwidth: Option<f64>,
    pub lambda_alpha: f64,
    pub zeta_alpha: f64,
    pub xi_se: f64,
    pub interval: AsymptoticInterval<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub n: usize,
    pub family: ModelFamily,
    pub params: Vec<Param>,
    pub xi_hat: f64,
    pub sigma_next: f64,
    pub var_hat: f64,
    pub loglik: f64,
    pub converged: bool,
    pub at_bound: Vec<bool>,
    pub iterations: usize,
    pub mean_sq_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<AsymptoticSummary>,
}

fn summarize(fit: &FitResult<f64>, asy: Option<(KdeBandwidth, f64)>, failures: &mut Vec<Failure>) -> FitSummary {
    let mut se = None;
    let asymptotic = asy.and_then(|(bw, gamma)| {
        let res = (|| {
            let comps = plug_in_components_with(fit, &bw)?;
            let sigma = sigma_alpha_matrix(&comps)?;
            let interval = asymptotic_interval(fit, &comps, gamma)?;
            Ok::<_, varboot::Error>((comps, sigma, interval))
        })();
        match res {
            Ok((c, sigma, interval)) => {
                let n = fit.n() as f64;
                let r = fit.d_hats.dim();
                se = Some((0..r).map(|k| (sigma.mat[(k, k)] / n).sqrt()).collect::<Vec<_>>());
                Some(AsymptoticSummary {
                    kappa: c.kappa,
                    p_alpha: c.p_alpha,
                    f_xi: c.f_xi,
                    bandwidth: c.bandwidth,
                    lambda_alpha: c.lambda_alpha(),
                    zeta_alpha: c.zeta_alpha(),
                    xi_se: (sigma.mat[(r, r)] / n).sqrt(),
                    interval,
                })
            }
            Err(e) => {
                failures.push(Failure { scope: "asymptotic", index: None, reason: e.to_string() });
                None
            }
        }
    });
    let var = var_point_estimate(fit);
    FitSummary {
        n: fit.n(),
        family: fit.family(),
        params: params(&fit.theta_hat, se.as_deref()),
        xi_hat: fit.xi_hat,
        sigma_next: var.sigma_next,
        var_hat: var.value,
        loglik: fit.loglik,
        converged: fit.converged,
        at_bound: fit.diagnostics.at_bound.clone(),
        iterations: fit.diagnostics.iterations,
        mean_sq_residual: fit.mean_sq_residual(),
        asymptotic,
    }
}

pub fn fit(o: FitOpts) -> CliResult<Output> {
    let cfg = FitRunConfig {
        input: InputSpec::resolve(o.input, o.prices, o.date_column, o.value_column)?,
        family: o.family.map_or(ModelFamily::Garch, |f| f.0),
        alpha: o.alpha.unwrap_or(0.05),
        gamma: o.gamma.unwrap_or(0.05),
        asymptotic: o.asymptotic.unwrap_or(false),
        bandwidth: bandwidth(o.bandwidth_exponent),
        fit: fit_config(o.fit, o.restarts),
    };
    let data = cfg.input.load()?;
    let fit = fit_two_step(&data.returns, cfg.family, cfg.alpha, &cfg.fit)?;
    let mut failures = Vec::new();
    if !fit.converged {
        failures.push(Failure { scope: "fit", index: None, reason: "optimizer did not converge".into() });
    }
    let summary = summarize(&fit, cfg.asymptotic.then_some((cfg.bandwidth, cfg.gamma)), &mut failures);
    json(Envelope::new(cfg, summary, failures, None))
}

// --------------------------------------------------------------- bootstrap

options! {
    /// Bootstrap confidence intervals for one series.
    pub struct BootstrapOpts {
        /// CSV file with `date,return` rows (or prices with --prices).
        #[arg(long)]
        input: PathBuf,
        /// Input holds `date,close` prices instead of returns.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        prices: bool,
        /// Name of the date column.
        #[arg(long)]
        date_column: String,
        /// Name of the price or return column.
        #[arg(long)]
        value_column: String,
        /// Model family: garch or tgarch.
        #[arg(long)]
        family: Parsed<ModelFamily>,
        /// VaR level.
        #[arg(long)]
        alpha: f64,
        /// One minus the nominal interval coverage.
        #[arg(long)]
        gamma: f64,
        /// Number of bootstrap replicates.
        #[arg(long)]
        b: usize,
        /// fixed or recursive.
        #[arg(long)]
        design: Parsed<Design>,
        /// full-qmle or newton-raphson.
        #[arg(long)]
        mode: Parsed<EstimatorMode>,
        /// Random seed.
        #[arg(long)]
        seed: u64,
        /// Also compute the asymptotic interval.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        asymptotic: bool,
        /// Kernel bandwidth rate, h ~ n^(-exponent).
        #[arg(long)]
        bandwidth_exponent: f64,
        /// Number of optimizer starts.
        #[arg(long)]
        restarts: usize,
        #[arg(skip)]
        fit: FitConfig,
    }
}

#[derive(Debug, Serialize)]
pub struct BootstrapRunConfig {
    pub input: InputSpec,
    pub family: ModelFamily,
    pub alpha: f64,
    pub gamma: f64,
    pub asymptotic: bool,
    pub bandwidth: KdeBandwidth,
    pub bootstrap: BootstrapConfig,
}

#[derive(Debug, Serialize)]
pub struct BootstrapResults {
    pub fit: FitSummary,
    pub intervals: IntervalSet<f64>,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub theta_star_sd: Vec<f64>,
    pub xi_star_sd: f64,
}

fn column_sd(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows.first().map_or(0, Vec::len);
    (0..dim).map(|j| sample_sd(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
}

pub fn bootstrap(o: BootstrapOpts) -> CliResult<Output> {
    let fit_cfg = fit_config(o.fit, o.restarts);
    let cfg = BootstrapRunConfig {
        input: InputSpec::resolve(o.input, o.prices, o.date_column, o.value_column)?,
        family: o.family.map_or(ModelFamily::Garch, |f| f.0),
        alpha: o.alpha.unwrap_or(0.05),
        gamma: o.gamma.unwrap_or(0.05),
        asymptotic: o.asymptotic.unwrap_or(false),
        bandwidth: bandwidth(o.bandwidth_exponent),
        bootstrap: BootstrapConfig {
            design: o.design.map_or(Design::Fixed, |d| d.0),
            estimator_mode: o.mode.map_or(EstimatorMode::FullQmle, |m| m.0),
            b_replicates: o.b.unwrap_or(499),
            base_seed: o.seed.unwrap_or(0),
            fit_config: fit_cfg.clone(),
        },
    };
    let data = cfg.input.load()?;
    let fit = fit_two_step(&data.returns, cfg.family, cfg.alpha, &fit_cfg)?;
    let mut failures = Vec::new();
    if !fit.converged {
        failures.push(Failure { scope: "fit", index: None, reason: "optimizer did not converge".into() });
    }
    let outcome = run_bootstrap(&fit, &data.returns, &cfg.bootstrap)?;
    let intervals = build_intervals(&outcome, cfg.gamma)?;
    if outcome.failed_count > 0 {
        failures.push(Failure {
            scope: "replicates",
            index: None,
            reason: format!("{} of {} replicates failed", outcome.failed_count, outcome.b_requested),
        });
    }
    let results = BootstrapResults {
        fit: summarize(&fit, cfg.asymptotic.then_some((cfg.bandwidth, cfg.gamma)), &mut failures),
        intervals,
        replicates: outcome.len(),
        failed_replicates: outcome.failed_count,
        theta_star_sd: column_sd(&outcome.theta_stars),
        xi_star_sd: sample_sd(&outcome.xi_stars),
    };
    let seed = cfg.bootstrap.base_seed;
    json(Envelope::new(cfg, results, failures, Some(seed)))
}

// ---------------------------------------------------------------------- mc

options! {
    /// Monte Carlo coverage experiment.
    pub struct McOpts {
        /// Named data-generating process: garch-high, garch-low, tgarch-high or tgarch-low.
        #[arg(long)]
        preset: Parsed<Preset>,
        /// Model family: garch or tgarch.
        #[arg(long)]
        family: Parsed<ModelFamily>,
        /// Comma-separated parameters, e.g. 0.05,0.1,0.85.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        /// Innovation law: normal or t<nu>.
        #[arg(long)]
        dist: Parsed<InnovationDist>,
        /// Number of returns.
        #[arg(long)]
        n: usize,
        /// Number of simulated paths.
        #[arg(long)]
        s: usize,
        /// Number of bootstrap replicates.
        #[arg(long)]
        b: usize,
        /// VaR level.
        #[arg(long)]
        alpha: f64,
        /// One minus the nominal interval coverage.
        #[arg(long)]
        gamma: f64,
        /// fixed or recursive.
        #[arg(long)]
        design: Parsed<Design>,
        /// full-qmle or newton-raphson.
        #[arg(long)]
        mode: Parsed<EstimatorMode>,
        /// Random seed.
        #[arg(long)]
        seed: u64,
        /// Simulated periods discarded before the sample.
        #[arg(long)]
        burn_in: usize,
        /// Also compute the asymptotic interval.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        asymptotic: bool,
        /// Kernel bandwidth rate, h ~ n^(-exponent).
        #[arg(long)]
        bandwidth_exponent: f64,
        /// S = B = 2000; slow.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        full_scale: bool,
        /// Include per-simulation records in the output.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        records: bool,
        /// Print a text table to stderr.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        table: bool,
        /// Number of optimizer starts.
        #[arg(long)]
        restarts: usize,
        #[arg(skip)]
        fit: FitConfig,
    }
}

#[derive(Debug, Serialize)]
pub struct McResults {
    pub report: varboot::CoverageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<SimRecord>>,
}

pub fn mc(o: McOpts) -> CliResult<Output> {
    let dist = o.dist.map_or(InnovationDist::NormalizedStudentT { nu: 6 }, |d| d.0);
    let mut cfg = ExperimentConfig::preset(Preset::GarchHigh, dist);
    cfg.spec = resolve_spec(o.preset, o.family, o.params)?;
    let full = o.full_scale.unwrap_or(false);
    if full {
        cfg.s_sims = FULL_SCALE;
        cfg.bootstrap.b_replicates = FULL_SCALE;
        eprintln!("warning: full scale runs {FULL_SCALE} simulations of {FULL_SCALE} replicates each; expect hours");
    }
    if let Some(v) = o.n {
        cfg.n = v;
    }
    if let Some(v) = o.s {
        cfg.s_sims = v;
    }
    if let Some(v) = o.b {
        cfg.bootstrap.b_replicates = v;
    }
    if let Some(v) = o.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = o.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = o.design {
        cfg.bootstrap.design = v.0;
    }
    if let Some(v) = o.mode {
        cfg.bootstrap.estimator_mode = v.0;
    }
    if let Some(v) = o.burn_in {
        cfg.burn_in = v;
    }
    cfg.master_seed = o.seed.unwrap_or(0);
    cfg.include_asymptotic = o.asymptotic.unwrap_or(false);
    cfg.bandwidth = bandwidth(o.bandwidth_exponent);
    cfg.fit_config = fit_config(o.fit, o.restarts);
    cfg.bootstrap.fit_config = cfg.fit_config.clone();

    let out = run_experiment(&cfg)?;
    if o.table.unwrap_or(false) {
        eprint!("{}", format_report(&out.report));
        eprintln!("wall time {:.1}s", out.report.wall_time);
    }
    let failures = out
        .failures
        .into_iter()
        .map(|f| Failure { scope: "simulation", index: Some(f.sim), reason: f.reason })
        .collect();
    let results = McResults { report: out.report, records: o.records.unwrap_or(false).then_some(out.records) };
    let seed = cfg.master_seed;
    json(Envelope::new(cfg, results, failures, Some(seed)))
}

// ----------------------------------------------------------------- rolling

options! {
    /// Rolling-window VaR on a price file.
    pub struct RollingOpts {
        /// CSV with `date,close` rows (or returns with --returns).
        #[arg(long)]
        input: PathBuf,
        /// Input holds `date,return` rows instead of prices.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        returns: bool,
        /// Name of the date column.
        #[arg(long)]
        date_column: String,
        /// Name of the price or return column.
        #[arg(long)]
        value_column: String,
        /// Observations per window.
        #[arg(long)]
        window: usize,
        /// Number of windows.
        #[arg(long)]
        steps: usize,
        /// Model family: garch or tgarch.
        #[arg(long)]
        family: Parsed<ModelFamily>,
        /// VaR level.
        #[arg(long)]
        alpha: f64,
        /// One minus the nominal interval coverage.
        #[arg(long)]
        gamma: f64,
        /// Number of bootstrap replicates.
        #[arg(long)]
        b: usize,
        /// fixed or recursive.
        #[arg(long)]
        design: Parsed<Design>,
        /// full-qmle or newton-raphson.
        #[arg(long)]
        mode: Parsed<EstimatorMode>,
        /// Random seed.
        #[arg(long)]
        seed: u64,
        /// Also compute the asymptotic interval.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        asymptotic: bool,
        /// Kernel bandwidth rate, h ~ n^(-exponent).
        #[arg(long)]
        bandwidth_exponent: f64,
        /// Also write one CSV row per window here.
        #[arg(long)]
        csv: PathBuf,
        /// Number of optimizer starts.
        #[arg(long)]
        restarts: usize,
        #[arg(skip)]
        fit: FitConfig,
    }
}

#[derive(Debug, Serialize)]
pub struct RollingRunConfig {
    pub input: InputSpec,
    pub rolling: RollingConfig,
}

fn write_window_csv(path: &PathBuf, recs: &[WindowRecord]) -> CliResult<()> {
    let mut f = io::BufWriter::new(File::create(path)?);
    writeln!(f, "date,var_hat,rt_lo,rt_hi,asy_lo,asy_hi")?;
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in recs {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.date,
            cell(r.var_hat),
            cell(r.rt_lo),
            cell(r.rt_hi),
            cell(r.asy_lo),
            cell(r.asy_hi)
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn rolling(o: RollingOpts) -> CliResult<Output> {
    let fit_cfg = fit_config(o.fit, o.restarts);
    let defaults = RollingConfig::default();
    let input = InputSpec::resolve(o.input, o.returns.map(|r| !r).or(Some(true)), o.date_column, o.value_column)?;
    let cfg = RollingRunConfig {
        input,
        rolling: RollingConfig {
            window_n: o.window.unwrap_or(defaults.window_n),
            steps: o.steps.unwrap_or(defaults.steps),
            family: o.family.map_or(defaults.family, |f| f.0),
            alpha: o.alpha.unwrap_or(defaults.alpha),
            gamma: o.gamma.unwrap_or(defaults.gamma),
            bootstrap: BootstrapConfig {
                design: o.design.map_or(Design::Fixed, |d| d.0),
                estimator_mode: o.mode.map_or(EstimatorMode::FullQmle, |m| m.0),
                b_replicates: o.b.unwrap_or(499),
                base_seed: o.seed.unwrap_or(0),
                fit_config: fit_cfg.clone(),
            },
            include_asymptotic: o.asymptotic.unwrap_or(defaults.include_asymptotic),
            fit_config: fit_cfg,
            bandwidth: bandwidth(o.bandwidth_exponent),
        },
    };
    let data = cfg.input.load()?;
    let recs = rolling_var(&data, &cfg.rolling)?;
    if let Some(p) = &o.csv {
        write_window_csv(p, &recs)?;
    }
    let failures = recs
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| Failure { scope: "window", index: Some(r.window), reason: f.clone() }))
        .collect();
    let seed = cfg.rolling.bootstrap.base_seed;
    json(Envelope::new(cfg, recs, failures, Some(seed)))
}

// -------------------------------------------------------------------- zeta

options! {
    /// Population quantities of the asymptotic covariance.
    pub struct ZetaOpts {
        /// Innovation laws, comma-separated.
        #[arg(long, value_delimiter = ',')]
        dist: Vec<Parsed<InnovationDist>>,
        /// VaR levels, comma-separated.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Emit JSON instead of a table.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        json: bool,
    }
}

#[derive(Debug, Serialize)]
pub struct ZetaConfig {
    pub dist: Vec<InnovationDist>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ZetaRow {
    pub dist: InnovationDist,
    #[serde(flatten)]
    pub components: PopulationComponents,
}

pub fn zeta(o: ZetaOpts) -> CliResult<Output> {
    let cfg = ZetaConfig {
        dist: o.dist.map_or_else(
            || vec![InnovationDist::StandardNormal, InnovationDist::NormalizedStudentT { nu: 6 }],
            |v| v.into_iter().map(|d| d.0).collect(),
        ),
        alpha: o.alpha.unwrap_or_else(|| vec![0.01, 0.05]),
    };
    let mut rows = Vec::new();
    for &dist in &cfg.dist {
        for &alpha in &cfg.alpha {
            rows.push(ZetaRow { dist, components: population_components(dist, alpha)? });
        }
    }
    if o.json.unwrap_or(false) {
        return json(Envelope::new(cfg, rows, vec![], None));
    }
    let mut out = format!(
        "{:<8} {:>6} {:>10} {:>9} {:>9} {:>7} {:>10} {:>9}\n",
        "dist", "alpha", "xi", "f(xi)", "p", "kappa", "lambda", "zeta"
    );
    for r in &rows {
        let c = &r.components;
        out.push_str(&format!(
            "{:<8} {:>6} {:>10.6} {:>9.6} {:>9.6} {:>7.3} {:>10.6} {:>9.4}\n",
            r.dist.label(),
            c.alpha,
            c.xi,
            c.f_xi,
            c.p_alpha,
            c.kappa,
            c.lambda_alpha,
            c.zeta_alpha
        ));
    }
    if let [only] = rows.as_slice() {
        out.push_str(&format!("zeta={:.2}\n", only.components.zeta_alpha));
    }
    Ok(Output::Text(out))
}
