//! Derivative-free minimization: Nelder–Mead on an unconstrained
//! reparameterization of a box.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Closed interval `[lo, hi]`; `hi` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// Maps an unconstrained coordinate into the box: scaled logistic for a
    /// finite upper end, shifted exponential otherwise.
    pub fn to_external<T: Scalar>(&self, u: T) -> T {
        let lo = T::lit(self.lo);
        if self.hi.is_finite() {
            let width = T::lit(self.hi - self.lo);
            lo + width / (T::one() + (-u).exp())
        } else {
            lo + u.exp()
        }
    }

    pub fn to_internal<T: Scalar>(&self, x: T) -> T {
        let eps = T::lit(1e-8);
        let lo = T::lit(self.lo);
        if self.hi.is_finite() {
            let width = T::lit(self.hi - self.lo);
            let p = ((x - lo) / width).max(eps).min(T::one() - eps);
            (p / (T::one() - p)).ln()
        } else {
            (x - lo).max(eps).ln()
        }
    }

    /// True when `x` lies within `tol` of either end.
    pub fn touches<T: Scalar>(&self, x: T, tol: f64) -> bool {
        let x = x.as_f64();
        x - self.lo < tol || (self.hi.is_finite() && self.hi - x < tol)
    }

    pub fn clamp<T: Scalar>(&self, x: T) -> T {
        let x = x.max(T::lit(self.lo));
        if self.hi.is_finite() {
            x.min(T::lit(self.hi))
        } else {
            x
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex fits in a cube of this half-width.
    pub x_tol: f64,
    /// Edge length of the initial orthogonal simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iterations: 5_000, f_tol: 1e-9, x_tol: 1e-5, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0`. Non-finite values count as `+inf`.
pub fn nelder_mead<T, F>(mut f: F, x0: &[T], opts: &NelderMeadOptions) -> Minimum<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let dim = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[T]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };

    let (alpha, gamma, rho, shrink) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let step = T::lit(opts.initial_step);
    let f_tol = T::lit(opts.f_tol);
    let x_tol = T::lit(opts.x_tol);

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] = x[i] + step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut centroid = vec![T::zero(); dim];
    let mut trial = vec![T::zero(); dim];
    let mut trial2 = vec![T::zero(); dim];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let f_spread = (worst - best).abs();
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        if best.is_finite() && f_spread <= f_tol && x_spread <= x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        for c in centroid.iter_mut() {
            *c = T::zero();
        }
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c = *c + *xi;
            }
        }
        let inv = T::one() / T::count(dim);
        for c in centroid.iter_mut() {
            *c = *c * inv;
        }

        // Reflection.
        for ((t, c), w) in trial.iter_mut().zip(&centroid).zip(&simplex[dim].0) {
            *t = *c + alpha * (*c - *w);
        }
        let f_r = eval(&trial);
        if f_r < best {
            // Expansion.
            for ((t2, c), t) in trial2.iter_mut().zip(&centroid).zip(&trial) {
                *t2 = *c + gamma * (*t - *c);
            }
            let f_e = eval(&trial2);
            if f_e < f_r {
                simplex[dim] = (trial2.clone(), f_e);
            } else {
                simplex[dim] = (trial.clone(), f_r);
            }
            continue;
        }
        if f_r < simplex[dim - 1].1 {
            simplex[dim] = (trial.clone(), f_r);
            continue;
        }
        // Contraction, outside or inside.
        let outside = f_r < worst;
        for (((t2, c), t), w) in trial2.iter_mut().zip(&centroid).zip(&trial).zip(&simplex[dim].0) {
            *t2 = if outside { *c + rho * (*t - *c) } else { *c + rho * (*w - *c) };
        }
        let f_c = eval(&trial2);
        if (outside && f_c <= f_r) || (!outside && f_c < worst) {
            simplex[dim] = (trial2.clone(), f_c);
            continue;
        }
        // Shrink towards the best vertex.
        let best_x = simplex[0].0.clone();
        for (x, v) in simplex[1..].iter_mut() {
            for (xi, b) in x.iter_mut().zip(&best_x) {
                *xi = *b + shrink * (*xi - *b);
            }
            *v = eval(x);
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, iterations, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions { f_tol: 1e-14, x_tol: 1e-8, ..Default::default() };
        let m = nelder_mead(f, &[-1.2, 1.0], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn works_in_single_precision() {
        let f = |x: &[f32]| (x[0] - 0.3).powi(2) + (x[1] + 0.7).powi(2) + (x[2] - 2.0).powi(2);
        let opts = NelderMeadOptions { f_tol: 1e-10, x_tol: 1e-3, ..Default::default() };
        let m = nelder_mead(f, &[0.0f32, 0.0, 0.0], &opts);
        assert!((m.x[0] - 0.3).abs() < 1e-2 && (m.x[2] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn reports_non_convergence() {
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let opts = NelderMeadOptions { max_iterations: 3, ..Default::default() };
        let m = nelder_mead(f, &[5.0, 5.0], &opts);
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }

    #[test]
    fn bound_transforms_round_trip() {
        let b = Bound::new(0.0, 0.999);
        for x in [0.01f64, 0.5, 0.9] {
            assert!((b.to_external(b.to_internal(x)) - x).abs() < 1e-12);
        }
        let h = Bound::new(1e-10, f64::INFINITY);
        for x in [1e-3f64, 0.2, 40.0] {
            assert!((h.to_external(h.to_internal(x)) - x).abs() < 1e-9 * x.max(1.0));
        }
        assert!(b.to_external(50.0f64) <= 0.999);
        assert!(h.to_external(-800.0f64) >= 1e-10);
    }
}
