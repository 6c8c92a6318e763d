use approx::assert_abs_diff_eq;
use varboot::asymptotics::{asymptotic_interval, plug_in_components, sigma_alpha_matrix};
use varboot::estimation::{estimate_theta, qml_objective};
use varboot::{fit_two_step, simulate_path, FitConfig, InnovationDist, ModelFamily, ModelSpec, Preset, ReturnSeries};

const T6: InnovationDist = InnovationDist::NormalizedStudentT { nu: 6 };

#[test]
fn interior_fits_standardize_to_unit_mean_square() {
    for (seed, preset, dist) in [
        (1, Preset::GarchHigh, InnovationDist::StandardNormal),
        (2, Preset::GarchLow, T6),
        (3, Preset::TgarchHigh, T6),
        (4, Preset::TgarchLow, InnovationDist::StandardNormal),
    ] {
        let spec = preset.spec();
        let p = simulate_path(&spec, dist, 800, 300, seed).unwrap();
        let fit = fit_two_step(&p.series, spec.family(), 0.05, &FitConfig::default()).unwrap();
        assert!(fit.converged, "{preset}");
        if fit.is_interior() {
            assert!((fit.mean_sq_residual() - 1.0).abs() < 1e-3, "{preset}: {}", fit.mean_sq_residual());
        }
    }
}

#[test]
fn qmle_beats_neighbouring_parameters() {
    let spec = Preset::TgarchHigh.spec();
    let p = simulate_path(&spec, T6, 1_000, 300, 17).unwrap();
    let est = estimate_theta(&p.series, ModelFamily::Tgarch, &FitConfig::default()).unwrap();
    let best = qml_objective(&est.spec, &p.series);
    let theta = est.spec.params();
    for k in 0..theta.len() {
        for d in [-1e-3, 1e-3] {
            let mut q = theta.clone();
            q[k] = (q[k] * (1.0 + d)).max(0.0);
            let nb = ModelSpec::from_params(ModelFamily::Tgarch, &q);
            assert!(qml_objective(&nb, &p.series) <= best + 1e-12);
        }
    }
}

#[test]
fn rescaled_data_gives_rescaled_estimate() {
    let spec = Preset::GarchHigh.spec();
    let p = simulate_path(&spec, InnovationDist::StandardNormal, 1_000, 300, 23).unwrap();
    let cfg = FitConfig::default();
    let a = estimate_theta(&p.series, ModelFamily::Garch, &cfg).unwrap().spec;
    let b = estimate_theta(&p.series.scaled(3.0), ModelFamily::Garch, &cfg).unwrap().spec;
    let expect = a.rescale_for_data(3.0);
    for (x, y) in expect.params().iter().zip(b.params()) {
        assert!((x - y).abs() < 1e-3 * x.abs().max(1e-2), "{expect:?} {b:?}");
    }
}

#[test]
fn single_precision_pipeline() {
    let spec = Preset::GarchHigh.spec();
    let p = simulate_path(&spec, InnovationDist::StandardNormal, 1_000, 300, 31).unwrap();
    let s32 = ReturnSeries::new(p.series.values().iter().map(|x| *x as f32).collect()).unwrap();
    let f64fit = fit_two_step(&p.series, ModelFamily::Garch, 0.05, &FitConfig::default()).unwrap();
    let f32fit = fit_two_step(&s32, ModelFamily::Garch, 0.05, &FitConfig::default()).unwrap();
    for (a, b) in f64fit.theta_hat.params().iter().zip(f32fit.theta_hat.params()) {
        assert!((a - f64::from(b)).abs() < 0.02, "{a} {b}");
    }
    let comps = plug_in_components(&f32fit, 0.2).unwrap();
    let iv = asymptotic_interval(&f32fit, &comps, 0.1).unwrap();
    assert!(iv.lo < iv.center && iv.center < iv.hi);
}

#[test]
fn plug_in_information_identity() {
    // Under the sample-mean start the score is proportional to the gradient
    // of a scale change, which gives Omega' J^{-1} Omega = 1 at any interior
    // optimum.
    for (seed, preset) in [(5, Preset::GarchHigh), (6, Preset::TgarchLow)] {
        let spec = preset.spec();
        let p = simulate_path(&spec, T6, 2_000, 300, seed).unwrap();
        let fit = fit_two_step(&p.series, spec.family(), 0.05, &FitConfig::default()).unwrap();
        assert!(fit.is_interior());
        let comps = plug_in_components(&fit, 0.2).unwrap();
        assert_abs_diff_eq!(comps.omega_jinv_omega().unwrap(), 1.0, epsilon = 1e-6);
        let sigma = sigma_alpha_matrix(&comps).unwrap();
        assert_eq!(sigma.mat, sigma.mat.transpose());
        assert!(sigma.mat.symmetric_eigenvalues().iter().all(|e| *e > 0.0));
        let score = fit.score();
        assert!(score.iter().all(|s| s.abs() < 1e-3), "{score:?}");
    }
}

#[test]
fn asymptotic_interval_shrinks_with_sample_size() {
    let spec = Preset::GarchHigh.spec();
    let short = simulate_path(&spec, InnovationDist::StandardNormal, 1_000, 300, 41).unwrap();
    let long = simulate_path(&spec, InnovationDist::StandardNormal, 16_000, 300, 41).unwrap();
    let width = |s: &ReturnSeries<f64>| {
        let fit = fit_two_step(s, ModelFamily::Garch, 0.05, &FitConfig::default()).unwrap();
        let c = plug_in_components(&fit, 0.2).unwrap();
        let iv = asymptotic_interval(&fit, &c, 0.1).unwrap();
        iv.half_width / fit.sigma_path.next()
    };
    assert!(width(&long.series) < width(&short.series));
}
