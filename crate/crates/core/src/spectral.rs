//! FFT plumbing: n-D transforms, zero-padded Fourier multipliers and
//! periodic spectral derivatives.

use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField, VectorField};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Cubic (or square) complex FFT of side `n`.
#[derive(Clone)]
pub(crate) struct FftNd {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, dim, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn side(&self) -> usize {
        self.n
    }

    /// In-place transform; the inverse is normalised by `1/N`.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let total = self.len();
        assert_eq!(data.len(), total);
        let fft = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for outer in 0..total / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
        if inverse {
            let s = 1.0 / total as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Signed integer frequency of index `k`.
    pub fn signed(&self, k: usize) -> i64 {
        if k < self.n.div_ceil(2) {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Angular frequency vector of flat index `flat` for spacing `h`.
    pub fn xi(&self, flat: usize, h: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rem = flat;
        let base = 2.0 * PI / (self.n as f64 * h);
        for a in (0..self.dim).rev() {
            out[a] = base * self.signed(rem % self.n) as f64;
            rem /= self.n;
        }
        out
    }
}

/// Fractional exponent `s` of `(-Δ)^s`, valid on `(-dim/2, 4]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FracExponent {
    s: f64,
    dim: usize,
}

impl FracExponent {
    pub fn new(s: f64, dim: usize) -> Result<Self> {
        let lower = -(dim as f64) / 2.0;
        if !(s.is_finite() && s > lower && s <= 4.0) {
            return Err(Error::Domain(format!("s = {s} is outside ({lower}, 4]")));
        }
        Ok(Self { s, dim })
    }

    pub fn value(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Integer exponents give local operators.
    pub fn is_integer(&self) -> bool {
        self.s.fract() == 0.0
    }
}

/// Treatment of the `ξ = 0` mode for negative exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroModeRule {
    Zero,
    #[default]
    SubtractMean,
}

/// Zero-padded periodisation of a grid for Fourier multipliers.
#[derive(Clone, Debug)]
pub struct SpectralPlan {
    grid: GridSpec,
    pad_factor: usize,
    zero_mode_rule: ZeroModeRule,
    fft: FftNd,
}

impl SpectralPlan {
    pub fn new(grid: GridSpec, pad_factor: usize, zero_mode_rule: ZeroModeRule) -> Result<Self> {
        if pad_factor < 2 {
            return Err(Error::Config(format!("pad_factor must be at least 2, got {pad_factor}")));
        }
        let mut p = pad_factor * grid.n();
        p += p % 2;
        Ok(Self { grid, pad_factor, zero_mode_rule, fft: FftNd::new(p, grid.dim()) })
    }

    /// Pad factor 4, subtract-mean.
    pub fn default_for(grid: GridSpec) -> Self {
        Self::new(grid, 4, ZeroModeRule::SubtractMean).expect("valid defaults")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    pub fn zero_mode_rule(&self) -> ZeroModeRule {
        self.zero_mode_rule
    }

    pub fn with_zero_mode_rule(&self, rule: ZeroModeRule) -> Self {
        Self { zero_mode_rule: rule, ..self.clone() }
    }

    /// Side length of the padded torus.
    pub fn padded_size(&self) -> usize {
        self.fft.side()
    }

    /// Period of the padded torus in length units.
    pub fn period(&self) -> f64 {
        self.padded_size() as f64 * self.grid.spacing()
    }

    pub(crate) fn fft(&self) -> &FftNd {
        &self.fft
    }

    /// Embeds grid values at the corner of the padded torus.
    pub(crate) fn pad(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.grid.n();
        let p = self.padded_size();
        let mut out = vec![Complex64::default(); self.fft.len()];
        for (k, &v) in values.iter().enumerate() {
            let idx = self.grid.unravel(k);
            let flat = (0..self.grid.dim()).fold(0, |acc, a| acc * p + idx[a]);
            out[flat] = Complex64::new(v, 0.0);
        }
        debug_assert!(n <= p);
        out
    }

    pub(crate) fn crop(&self, data: &[Complex64]) -> Vec<f64> {
        let p = self.padded_size();
        (0..self.grid.len())
            .map(|k| {
                let idx = self.grid.unravel(k);
                let flat = (0..self.grid.dim()).fold(0, |acc, a| acc * p + idx[a]);
                data[flat].re
            })
            .collect()
    }

    /// Applies `m(ξ)` on the padded torus to grid values and crops back.
    pub(crate) fn apply_multiplier(&self, values: &[f64], m: impl Fn(&[f64; 3]) -> Complex64) -> Vec<f64> {
        let mut data = self.pad(values);
        self.multiply_torus(&mut data, m);
        self.crop(&data)
    }

    /// Applies `m(ξ)` to data already living on the padded torus.
    pub(crate) fn multiply_torus(&self, data: &mut [Complex64], m: impl Fn(&[f64; 3]) -> Complex64) {
        let h = self.grid.spacing();
        self.fft.process(data, false);
        for (k, v) in data.iter_mut().enumerate() {
            *v *= m(&self.fft.xi(k, h));
        }
        self.fft.process(data, true);
    }
}

/// Spectral derivative on the unpadded grid viewed as a torus of period `n·h`.
pub fn periodic_derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let grid = *f.grid();
    let fft = FftNd::new(grid.n(), grid.dim());
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut data, false);
    let h = grid.spacing();
    for (k, v) in data.iter_mut().enumerate() {
        *v *= Complex64::new(0.0, fft.xi(k, h)[axis]);
    }
    fft.process(&mut data, true);
    ScalarField::from_raw(grid, data.into_iter().map(|z| z.re).collect())
}

/// Divergence computed with periodic spectral derivatives.
pub fn spectral_divergence(h: &VectorField) -> ScalarField {
    let grid = *h.grid();
    let fft = FftNd::new(grid.n(), grid.dim());
    let sp = grid.spacing();
    let mut acc = vec![Complex64::default(); grid.len()];
    for (axis, c) in h.components().iter().enumerate() {
        let mut data: Vec<Complex64> = c.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut data, false);
        for (k, (a, v)) in acc.iter_mut().zip(data).enumerate() {
            *a += Complex64::new(0.0, fft.xi(k, sp)[axis]) * v;
        }
    }
    fft.process(&mut acc, true);
    ScalarField::from_raw(grid, acc.into_iter().map(|z| z.re).collect())
}
