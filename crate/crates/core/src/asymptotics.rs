//! Joint asymptotic covariance of `(theta_hat, xi_hat)`, its plug-in
//! estimator, and the delta-method interval for the conditional VaR.
//!
//! With `kappa = E eta^4`, `Omega = E D_t`, `J = E D_t D_t'` and
//! `p_alpha = E[eta^2 1{eta < xi}] - alpha`:
//!
//! ```text
//! lambda_alpha = xi (kappa - 1) / 4 + p_alpha / (2 f(xi))
//! zeta_alpha   = xi^2 (kappa - 1) / 4 + xi p_alpha / f(xi) + alpha (1 - alpha) / f(xi)^2
//!
//! Sigma_alpha = | (kappa-1)/4 J^{-1}       lambda_alpha J^{-1} Omega |
//!               | lambda_alpha Omega' J^{-1}         zeta_alpha      |
//! ```

use serde::{Deserialize, Serialize};

use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::estimation::{var_point_estimate, FitResult};
use crate::linalg::Matrix;
use crate::quadrature::integrate_lower_tail;
use crate::scalar::{mean, Scalar};

/// Largest condition number accepted when inverting `J`.
pub const MAX_CONDITION: f64 = 1e12;

fn lambda_formula<T: Scalar>(xi: T, kappa: T, p: T, f: T) -> T {
    xi * (kappa - T::one()) / T::lit(4.0) + p / (T::lit(2.0) * f)
}

fn zeta_formula<T: Scalar>(xi: T, kappa: T, p: T, f: T, alpha: f64) -> T {
    xi * xi * (kappa - T::one()) / T::lit(4.0) + xi * p / f + T::lit(alpha * (1.0 - alpha)) / (f * f)
}

/// Ingredients of `Sigma_alpha`. `lambda_alpha` and `zeta_alpha` are derived
/// on demand from the stored quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaAlphaComponents<T> {
    pub alpha: f64,
    pub kappa: T,
    pub omega_vec: Vec<T>,
    pub j_mat: Matrix<T>,
    pub p_alpha: T,
    pub f_xi: T,
    pub xi: T,
    /// Bandwidth used for `f_xi`, when estimated.
    pub bandwidth: Option<T>,
}

impl<T: Scalar> SigmaAlphaComponents<T> {
    pub fn lambda_alpha(&self) -> T {
        lambda_formula(self.xi, self.kappa, self.p_alpha, self.f_xi)
    }

    pub fn zeta_alpha(&self) -> T {
        zeta_formula(self.xi, self.kappa, self.p_alpha, self.f_xi, self.alpha)
    }

    /// `Omega' J^{-1} Omega`.
    pub fn omega_jinv_omega(&self) -> Result<T> {
        let jinv = checked_inverse(&self.j_mat)?;
        Ok(jinv.quadratic_form(&self.omega_vec))
    }
}

/// Rule-of-thumb bandwidth `h = constant * sd * n^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeBandwidth {
    pub constant: f64,
    pub exponent: f64,
}

impl Default for KdeBandwidth {
    fn default() -> Self {
        Self { constant: 1.06, exponent: 0.2 }
    }
}

impl KdeBandwidth {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent <= 0.5) || !(self.constant > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth exponent must lie in (0, 0.5] and constant be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn bandwidth<T: Scalar>(&self, sample: &[T]) -> T {
        let m = mean(sample);
        let n = T::count(sample.len());
        let sd = (sample.iter().map(|x| (*x - m) * (*x - m)).sum::<T>() / n).sqrt();
        T::lit(self.constant) * sd * n.powf(T::lit(-self.exponent))
    }
}

/// Uniform-kernel density estimate `(1 / (n h)) sum 1/2 1{|x - s_i| <= h}`.
pub fn uniform_kde<T: Scalar>(sample: &[T], x: T, h: T) -> T {
    let inside = sample.iter().filter(|s| ((x - **s) / h).abs() <= T::one()).count();
    T::lit(0.5) * T::count(inside) / (T::count(sample.len()) * h)
}

/// Plug-in components from a fitted model with the default bandwidth
/// constant and the given rate exponent.
pub fn plug_in_components<T: Scalar>(fit: &FitResult<T>, bandwidth_exponent: f64) -> Result<SigmaAlphaComponents<T>> {
    plug_in_components_with(fit, &KdeBandwidth { exponent: bandwidth_exponent, ..Default::default() })
}

pub fn plug_in_components_with<T: Scalar>(fit: &FitResult<T>, bw: &KdeBandwidth) -> Result<SigmaAlphaComponents<T>> {
    bw.validate()?;
    let n = fit.n();
    let nt = T::count(n);
    let r = fit.d_hats.dim();
    let mut omega_vec = vec![T::zero(); r];
    let mut j_mat = Matrix::zeros(r);
    for row in fit.d_hats.rows().take(n) {
        for i in 0..r {
            omega_vec[i] = omega_vec[i] + row[i];
            for j in 0..r {
                j_mat[(i, j)] = j_mat[(i, j)] + row[i] * row[j];
            }
        }
    }
    let omega_vec: Vec<T> = omega_vec.into_iter().map(|v| v / nt).collect();
    let j_mat = j_mat.scaled(T::one() / nt).symmetrized();

    let res = &fit.residuals;
    let kappa = res.iter().map(|e| (*e * *e) * (*e * *e)).sum::<T>() / nt;
    let p_alpha = res.iter().filter(|e| **e < fit.xi_hat).map(|e| *e * *e).sum::<T>() / nt - T::lit(fit.alpha);
    let h = bw.bandwidth(res);
    let f_xi = uniform_kde(res, fit.xi_hat, h);
    if !(f_xi > T::zero()) {
        return Err(Error::SingularDensity { bandwidth: h.as_f64() });
    }
    Ok(SigmaAlphaComponents {
        alpha: fit.alpha,
        kappa,
        omega_vec,
        j_mat,
        p_alpha,
        f_xi,
        xi: fit.xi_hat,
        bandwidth: Some(h),
    })
}

/// Closed-form population quantities for a known innovation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationComponents {
    pub alpha: f64,
    pub kappa: f64,
    pub xi: f64,
    pub f_xi: f64,
    pub p_alpha: f64,
    pub lambda_alpha: f64,
    pub zeta_alpha: f64,
}

/// `xi`, `f(xi)` and `kappa` in closed form; `p_alpha` by adaptive
/// quadrature of `x^2 f(x)` over `(-inf, xi]`.
pub fn population_components(dist: InnovationDist, alpha: f64) -> Result<PopulationComponents> {
    dist.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {alpha}")));
    }
    let xi = dist.quantile(alpha);
    let f_xi = dist.pdf(xi);
    let kappa = dist.kurtosis();
    let second = integrate_lower_tail(|x| x * x * dist.pdf(x), xi, 1e-15)?;
    let p_alpha = second - alpha;
    Ok(PopulationComponents {
        alpha,
        kappa,
        xi,
        f_xi,
        p_alpha,
        lambda_alpha: lambda_formula(xi, kappa, p_alpha, f_xi),
        zeta_alpha: zeta_formula(xi, kappa, p_alpha, f_xi, alpha),
    })
}

/// `Sigma_alpha` as an `(r+1) x (r+1)` symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaAlphaMatrix<T> {
    pub mat: Matrix<T>,
}

impl<T: Scalar> SigmaAlphaMatrix<T> {
    pub fn dim(&self) -> usize {
        self.mat.dim()
    }
}

fn checked_inverse<T: Scalar>(j: &Matrix<T>) -> Result<Matrix<T>> {
    let cond = j.condition_number();
    if !(cond.as_f64() < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition: cond.as_f64() });
    }
    j.spd_inverse()
}

/// Assembles the block matrix from its ingredients.
pub fn assemble_sigma_alpha<T: Scalar>(
    kappa: T,
    omega_vec: &[T],
    j_mat: &Matrix<T>,
    lambda: T,
    zeta: T,
) -> Result<SigmaAlphaMatrix<T>> {
    let r = j_mat.dim();
    if omega_vec.len() != r {
        return Err(Error::InvalidInput("Omega and J dimensions differ".into()));
    }
    let jinv = checked_inverse(j_mat)?;
    let jinv_omega = jinv.mul_vec(omega_vec);
    let top = (kappa - T::one()) / T::lit(4.0);
    let mut mat = Matrix::zeros(r + 1);
    for i in 0..r {
        for j in 0..r {
            mat[(i, j)] = top * jinv[(i, j)];
        }
        mat[(i, r)] = lambda * jinv_omega[i];
        mat[(r, i)] = lambda * jinv_omega[i];
    }
    mat[(r, r)] = zeta;
    Ok(SigmaAlphaMatrix { mat: mat.symmetrized() })
}

pub fn sigma_alpha_matrix<T: Scalar>(components: &SigmaAlphaComponents<T>) -> Result<SigmaAlphaMatrix<T>> {
    assemble_sigma_alpha(
        components.kappa,
        &components.omega_vec,
        &components.j_mat,
        components.lambda_alpha(),
        components.zeta_alpha(),
    )
}

/// Delta-method interval for the conditional VaR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticInterval<T> {
    pub lo: T,
    pub hi: T,
    pub center: T,
    pub half_width: T,
    /// Quadratic form under the square root, before clamping.
    pub quad_form: T,
    /// The quadratic form was negative and has been clamped to zero.
    pub clamped: bool,
}

impl<T: Scalar> AsymptoticInterval<T> {
    pub fn length(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `center -/+ z_{1-gamma/2} sqrt(v' Sigma v / n)`.
pub fn asymptotic_interval_from_parts<T: Scalar>(
    center: T,
    inner: &[T],
    sigma: &SigmaAlphaMatrix<T>,
    n: usize,
    gamma: f64,
) -> Result<AsymptoticInterval<T>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if inner.len() != sigma.dim() {
        return Err(Error::InvalidInput("inner vector does not match Sigma dimension".into()));
    }
    let quad_form = sigma.mat.quadratic_form(inner);
    let clamped = quad_form < T::zero();
    let q = if clamped { T::zero() } else { quad_form };
    let z = T::lit(InnovationDist::StandardNormal.quantile(1.0 - gamma / 2.0));
    let half_width = z * (q / T::count(n)).sqrt();
    Ok(AsymptoticInterval { lo: center - half_width, hi: center + half_width, center, half_width, quad_form, clamped })
}

/// Interval around `VaR_hat` with inner vector `(-xi_hat d sigma_{n+1}/d theta, sigma_{n+1})`.
pub fn asymptotic_interval<T: Scalar>(
    fit: &FitResult<T>,
    components: &SigmaAlphaComponents<T>,
    gamma: f64,
) -> Result<AsymptoticInterval<T>> {
    let sigma = sigma_alpha_matrix(components)?;
    let sigma_next = fit.sigma_path.next();
    let d_next = fit.d_hats.row(fit.n());
    let mut inner: Vec<T> = d_next.iter().map(|d| -fit.xi_hat * sigma_next * *d).collect();
    inner.push(sigma_next);
    asymptotic_interval_from_parts(var_point_estimate(fit).value, &inner, &sigma, fit.n(), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kde_three_points() {
        assert_abs_diff_eq!(uniform_kde(&[-1.0, 0.0, 1.0], 0.0, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(uniform_kde(&[-1.0, 0.0, 1.0], 0.0, 0.5), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_plumbing() {
        let j = Matrix::from_rows(&[vec![1.0]]);
        let s = assemble_sigma_alpha(3.0, &[1.0], &j, 0.0, 2.0).unwrap();
        assert_eq!(s.mat.to_rows(), vec![vec![0.5, 0.0], vec![0.0, 2.0]]);
        assert_eq!(s.mat, s.mat.transpose());
    }

    #[test]
    fn ill_conditioned_information_rejected() {
        let j = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]]);
        assert!(matches!(
            assemble_sigma_alpha(3.0, &[1.0, 1.0], &j, 0.0, 1.0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn bandwidth_exponent_checked() {
        assert!(KdeBandwidth { constant: 1.06, exponent: 0.6 }.validate().is_err());
        assert!(KdeBandwidth { constant: 1.06, exponent: 0.5 }.validate().is_ok());
    }

    #[test]
    fn half_width_scaling() {
        let j = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]);
        let s = assemble_sigma_alpha(4.0, &[0.7, 0.2], &j, 0.1, 3.0).unwrap();
        let v = [0.4, -0.2, 1.5];
        let a = asymptotic_interval_from_parts(1.0, &v, &s, 500, 0.05).unwrap();
        let b = asymptotic_interval_from_parts(1.0, &v, &s, 1000, 0.05).unwrap();
        assert_abs_diff_eq!(a.half_width / b.half_width, 2f64.sqrt(), epsilon = 1e-12);
        let c = asymptotic_interval_from_parts(1.0, &v, &s, 500, 0.32).unwrap();
        assert_abs_diff_eq!(c.half_width / a.half_width, 0.994_457_883_209_753 / 1.959_963_984_540_054, epsilon = 1e-9);
        assert!(!a.clamped);
    }

    #[test]
    fn negative_quadratic_form_is_clamped() {
        let s = SigmaAlphaMatrix { mat: Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]) };
        let i = asymptotic_interval_from_parts(2.0, &[1.0, 1.0], &s, 10, 0.1).unwrap();
        assert!(i.clamped);
        assert_eq!(i.half_width, 0.0);
        assert_eq!(i.lo, 2.0);
    }
}
