//! Small sample statistics used by the diagnostics and the test suites.

use crate::error::{Error, Result};

/// Two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    /// Asymptotic p-value with the usual small-sample correction.
    pub p_value: f64,
}

/// `sup |F_a - F_b|` over the pooled sample, with its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("NaN in KS sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d) })
}

/// Kolmogorov survival function `2 sum (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let t = ks_two_sample(&a, &a).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn disjoint_samples_have_unit_distance() {
        let t = ks_two_sample(&[1.0, 2.0, 3.0], &[10.0, 11.0]).unwrap();
        assert_eq!(t.statistic, 1.0);
    }

    #[test]
    fn ties_and_shift() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let b: Vec<f64> = (10..110).map(f64::from).collect();
        let t = ks_two_sample(&a, &b).unwrap();
        assert!((t.statistic - 0.1).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail() {
        // Q(1.36) is the classical 5% point.
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }
}
