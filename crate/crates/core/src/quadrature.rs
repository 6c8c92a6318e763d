//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut stack = vec![(a, b, tol)];
    let mut total = 0.0;
    let mut budget = 200_000usize;
    while let Some((lo, hi, t)) = stack.pop() {
        budget = budget
            .checked_sub(1)
            .ok_or_else(|| Error::Numerical("quadrature did not converge".into()))?;
        let (v, err) = kronrod(&f, lo, hi);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite integrand on [{lo}, {hi}]")));
        }
        if err <= t.max(1e-300) || (hi - lo).abs() < 1e-12 * (1.0 + lo.abs()) {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t));
            stack.push((mid, hi, 0.5 * t));
        }
    }
    Ok(total)
}

/// Integral of `f` over `(-inf, b]` via `x = b - s / (1 - s)`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, tol: f64) -> Result<f64> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - s;
            let v = f(b - s / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}
