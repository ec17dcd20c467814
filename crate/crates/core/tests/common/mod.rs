#![allow(dead_code)]

use tomolab::fields::smooth_cutoff;
use tomolab::{GridSpec, ScalarField};

pub fn gaussian(grid: GridSpec, center: [f64; 2], sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        (-((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (2.0 * sigma * sigma)).exp()
    })
}

/// Gaussian times the smooth cutoff, so it vanishes beyond `0.9L`.
pub fn cut_gaussian(grid: GridSpec, center: [f64; 2], sigma: f64) -> ScalarField {
    let l = grid.extent();
    ScalarField::from_fn(grid, |x| {
        (-((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (2.0 * sigma * sigma)).exp()
            * smooth_cutoff(x[0].hypot(x[1]), l)
    })
}

/// `(1 − r²/a²)⁴` inside radius `a`.
pub fn poly_bump(grid: GridSpec, center: [f64; 2], a: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let r2 = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (a * a);
        if r2 < 1.0 {
            (1.0 - r2).powi(4)
        } else {
            0.0
        }
    })
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
