use approx::assert_abs_diff_eq;
use varboot::{population_components, InnovationDist};

const T6: InnovationDist = InnovationDist::NormalizedStudentT { nu: 6 };

// Reference values from an independent computation with scipy.
#[test]
fn gaussian_components() {
    let c = population_components(InnovationDist::StandardNormal, 0.05).unwrap();
    assert_abs_diff_eq!(c.xi, -1.644_853_626_951_472_7, epsilon = 1e-13);
    assert_abs_diff_eq!(c.f_xi, 0.103_135_640_375_371_28, epsilon = 1e-13);
    assert_abs_diff_eq!(c.p_alpha, 0.169_643_032_139_392_3, epsilon = 1e-12);
    assert_abs_diff_eq!(c.zeta_alpha, 3.112_79, epsilon = 1e-4);
    let c = population_components(InnovationDist::StandardNormal, 0.01).unwrap();
    assert_abs_diff_eq!(c.zeta_alpha, 11.2311, epsilon = 1e-3);
}

#[test]
fn gaussian_lambda_vanishes() {
    for alpha in [0.01, 0.05, 0.10] {
        let c = population_components(InnovationDist::StandardNormal, alpha).unwrap();
        assert!(c.lambda_alpha.abs() < 1e-10, "{alpha}: {}", c.lambda_alpha);
    }
}

#[test]
fn student_components() {
    let c = population_components(T6, 0.05).unwrap();
    assert_abs_diff_eq!(c.xi, -1.586_600_1, epsilon = 1e-6);
    assert_abs_diff_eq!(c.f_xi, 0.084_901_3, epsilon = 1e-6);
    assert_abs_diff_eq!(c.kappa, 6.0, epsilon = 1e-14);
    assert_abs_diff_eq!(c.p_alpha, 0.219_477_2, epsilon = 1e-6);
    assert_abs_diff_eq!(c.lambda_alpha, -0.690_71, epsilon = 1e-4);
    assert_abs_diff_eq!(c.zeta_alpha, 5.634_82, epsilon = 1e-4);
    let c = population_components(T6, 0.01).unwrap();
    assert_abs_diff_eq!(c.zeta_alpha, 31.7295, epsilon = 1e-3);
}

#[test]
fn rejects_bad_inputs() {
    assert!(population_components(InnovationDist::StandardNormal, 0.0).is_err());
    assert!(population_components(InnovationDist::NormalizedStudentT { nu: 3 }, 0.05).is_err());
}
