//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// Central finite differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, point: &[f64], h: f64) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let up = f(&probe);
            probe[i] = point[i] - h;
            let down = f(&probe);
            probe[i] = point[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central differences of `sum_k ln(1 + b_k(x))` where `bets` returns every
/// `b_k`. Each term is differenced as `ln(1 + (b+ - b-) / (1 + b-))` so two
/// nearly equal sums are never subtracted.
pub fn log_sum_difference<F: Fn(&[f64]) -> Vec<f64>>(bets: F, point: &[f64], h: f64) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let up = bets(&probe);
            probe[i] = point[i] - h;
            let down = bets(&probe);
            probe[i] = point[i];
            let total: f64 = up.iter().zip(&down).map(|(bu, bd)| ((bu - bd) / (1.0 + bd)).ln_1p()).sum();
            total / (2.0 * h)
        })
        .collect()
}

/// Central differences of `0.5 (t - f(x))^2`, using
/// `E+ - E- = 0.5 (f+ - f-) (f+ + f- - 2t)`.
pub fn squared_error_difference<F: Fn(&[f64]) -> f64>(f: F, target: f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let up = f(&probe);
            probe[i] = point[i] - h;
            let down = f(&probe);
            probe[i] = point[i];
            0.5 * (up - down) * (up + down - 2.0 * target) / (2.0 * h)
        })
        .collect()
}

/// Relative error per coordinate. Coordinates where both values are below
/// `floor` in magnitude are compared relative to `floor`.
pub fn relative_errors(analytic: &[f64], numeric: &[f64], floor: f64) -> Vec<f64> {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .collect()
}

pub fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Evenly spaced grid maximizer of `f` over `[lo, hi]` with `points` points.
pub fn grid_argmax<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .map(|a| (a, f(a)))
        .fold((lo, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Direct `sum log(1 + a x)` without any library code.
pub fn log_growth(alpha: f64, xs: &[f64]) -> f64 {
    xs.iter().map(|x| (1.0 + alpha * x).ln()).sum()
}

/// Reference forward pass written from the layer equations.
pub fn reference_output(l: usize, m: usize, params: &[f64], u: &[f64]) -> f64 {
    let mut i3 = 0.0;
    for i in 0..m {
        let mut i2 = 0.0;
        for j in 0..l {
            i2 += params[i * l + j] * u[j];
        }
        i3 += params[m * l + i] * i2.tanh();
    }
    i3.tanh()
}
