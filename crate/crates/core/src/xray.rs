//! Parallel-beam X-ray transform of planar scalar fields, its adjoint, the
//! normal operator and filtered back-projection.
//!
//! A line is indexed by `(θ, s)` and traced as `s·ω + t·ω⊥` with
//! `ω = (cos θ, sin θ)`, `ω⊥ = (-sin θ, cos θ)`.
//!
//! Pairings and the back-projection use the full-circle line measure:
//! every stored line stands for both of its orientations, so the angular
//! weight per stored angle is `2π / n_angles`.

use crate::error::{Error, Result};
use crate::fields::{bilinear_stencil, l2_norm, GridSpec, RegionMask, ScalarField};
use crate::fractional::{riesz_potential, SpectralPlan};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform parallel-beam geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSet {
    angles: Vec<f64>,
    offsets: Vec<f64>,
}

impl LineSet {
    pub fn new(angles: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || offsets.len() < 2 {
            return Err(Error::Config("a line set needs angles and at least two offsets".into()));
        }
        if angles[0] < 0.0 || *angles.last().unwrap() >= PI {
            return Err(Error::Config("angles must lie in [0, π)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("angles must be strictly increasing".into()));
        }
        let m = offsets.len();
        let ds = offsets[1] - offsets[0];
        if ds <= 0.0 {
            return Err(Error::Config("offsets must be increasing".into()));
        }
        for i in 0..m {
            if (offsets[i] + offsets[m - 1 - i]).abs() > 1e-12 * ds * m as f64 {
                return Err(Error::Config("offsets must be symmetric about 0".into()));
            }
            if i > 0 && ((offsets[i] - offsets[i - 1]) - ds).abs() > 1e-9 * ds {
                return Err(Error::Config("offsets must be uniformly spaced".into()));
            }
        }
        Ok(Self { angles, offsets })
    }

    /// `n_angles` angles `kπ/n_angles` and `n_offsets` offsets across `[-L√2, L√2]`.
    pub fn uniform(n_angles: usize, n_offsets: usize, extent: f64) -> Result<Self> {
        if n_angles == 0 || n_offsets < 2 {
            return Err(Error::Config("need at least one angle and two offsets".into()));
        }
        let smax = extent * 2f64.sqrt();
        let angles = (0..n_angles).map(|k| k as f64 * PI / n_angles as f64).collect();
        let offsets = (0..n_offsets).map(|l| -smax + 2.0 * smax * l as f64 / (n_offsets - 1) as f64).collect();
        Self::new(angles, offsets)
    }

    /// Offsets spaced about `h / refine` over the grid diagonal.
    pub fn for_grid(grid: &GridSpec, n_angles: usize, refine: usize) -> Result<Self> {
        let half = (refine.max(1) as f64 * 2f64.sqrt() * (grid.n() - 1) as f64 / 2.0).ceil() as usize;
        Self::uniform(n_angles, 2 * half + 1, grid.extent())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }

    pub fn len(&self) -> usize {
        self.angles.len() * self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset_step(&self) -> f64 {
        self.offsets[1] - self.offsets[0]
    }

    /// Quadrature weight of one stored line in the full-circle measure.
    pub fn line_weight(&self) -> f64 {
        2.0 * PI / self.n_angles() as f64 * self.offset_step()
    }

    /// Linear interpolation position of offset `s`: `(index, fraction)`.
    #[inline]
    pub(crate) fn locate(&self, s: f64) -> Option<(usize, f64)> {
        let u = (s - self.offsets[0]) / self.offset_step();
        let top = (self.offsets.len() - 1) as f64;
        if !(u >= 0.0 && u <= top) {
            return None;
        }
        let l = (u.floor() as usize).min(self.offsets.len() - 2);
        Some((l, u - l as f64))
    }
}

/// Line-transform samples, one row per angle.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    lines: LineSet,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(lines: LineSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != lines.len() {
            return Err(Error::Shape(format!("sinogram expects {} values, got {}", lines.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("sinogram entries must be finite".into()));
        }
        Ok(Self { lines, values })
    }

    pub fn zeros(lines: LineSet) -> Self {
        let n = lines.len();
        Self { lines, values: vec![0.0; n] }
    }

    /// Allows NaN entries, which mark missing data.
    pub(crate) fn from_raw(lines: LineSet, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), lines.len());
        Self { lines, values }
    }

    pub fn lines(&self) -> &LineSet {
        &self.lines
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, angle: usize, offset: usize) -> f64 {
        self.values[angle * self.lines.n_offsets() + offset]
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        let m = self.lines.n_offsets();
        &self.values[angle * m..(angle + 1) * m]
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Largest magnitude over present entries.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { lines: self.lines.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn lin_comb(&self, a: f64, other: &Sinogram, b: f64) -> Result<Self> {
        if self.lines != other.lines {
            return Err(Error::Shape("sinograms use different line sets".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { lines: self.lines.clone(), values })
    }

    /// Pairing in the full-circle line measure; missing entries are skipped.
    pub fn inner(&self, other: &Sinogram) -> Result<f64> {
        if self.lines != other.lines {
            return Err(Error::Shape("sinograms use different line sets".into()));
        }
        let w = self.lines.line_weight();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| !a.is_nan() && !b.is_nan())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * w)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same line set").sqrt()
    }
}

/// Trapezoid nodes `(x, y, weight)` along the line `(θ, s)` clipped to the
/// grid square, with spacing at most `h/2`.
pub(crate) fn line_samples(grid: &GridSpec, theta: f64, s: f64) -> Vec<(f64, f64, f64)> {
    let (c, sn) = (theta.cos(), theta.sin());
    let (px, py) = (s * c, s * sn);
    let (dx, dy) = (-sn, c);
    let l = grid.extent();
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < 1e-15 {
            if p.abs() > l {
                return Vec::new();
            }
        } else {
            let a = (-l - p) / d;
            let b = (l - p) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if !(t1 > t0) {
        return Vec::new();
    }
    let step = 0.5 * grid.spacing();
    let m = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / m as f64;
    (0..=m)
        .map(|j| {
            let t = t0 + j as f64 * dt;
            let w = if j == 0 || j == m { 0.5 * dt } else { dt };
            (px + t * dx, py + t * dy, w)
        })
        .collect()
}

/// Line integral of `f` along a single line.
pub fn xray_line(f: &ScalarField, theta: f64, s: f64) -> Result<f64> {
    f.grid().require_2d("the X-ray transform is planar")?;
    Ok(line_samples(f.grid(), theta, s).iter().map(|&(x, y, w)| w * f.interp2(x, y)).sum())
}

pub fn xray_forward(f: &ScalarField, lines: &LineSet) -> Result<Sinogram> {
    let grid = f.grid();
    grid.require_2d("the X-ray transform is planar")?;
    let rows: Vec<Vec<f64>> = lines
        .angles()
        .par_iter()
        .map(|&theta| {
            lines
                .offsets()
                .iter()
                .map(|&s| line_samples(grid, theta, s).iter().map(|&(x, y, w)| w * f.interp2(x, y)).sum())
                .collect()
        })
        .collect();
    Ok(Sinogram::from_raw(lines.clone(), rows.concat()))
}

/// Sparse row of the forward operator for one line.
pub fn xray_row(grid: &GridSpec, theta: f64, s: f64) -> Vec<(usize, f64)> {
    let mut acc: Vec<(usize, f64)> = Vec::new();
    for (x, y, w) in line_samples(grid, theta, s) {
        if let Some(st) = bilinear_stencil(grid, x, y) {
            for (k, b) in st {
                if b != 0.0 {
                    acc.push((k, w * b));
                }
            }
        }
    }
    acc.sort_by_key(|&(k, _)| k);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
    for (k, v) in acc {
        match out.last_mut() {
            Some((j, u)) if *j == k => *u += v,
            _ => out.push((k, v)),
        }
    }
    out
}

/// Sums `weight · g(θ_k, x·ω_k)` with linear interpolation in offset.
fn backproject_weighted(values: &[f64], lines: &LineSet, grid: &GridSpec, weight: f64) -> ScalarField {
    let m = lines.n_offsets();
    let trig: Vec<(f64, f64)> = lines.angles().iter().map(|t| (t.cos(), t.sin())).collect();
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.point(k);
            let mut acc = 0.0;
            for (a, &(c, s)) in trig.iter().enumerate() {
                if let Some((l, frac)) = lines.locate(p[0] * c + p[1] * s) {
                    let row = &values[a * m..(a + 1) * m];
                    let (g0, g1) = (row[l], row[l + 1]);
                    let g0 = if g0.is_nan() { 0.0 } else { g0 };
                    let g1 = if g1.is_nan() { 0.0 } else { g1 };
                    acc += (1.0 - frac) * g0 + frac * g1;
                }
            }
            acc * weight
        })
        .collect();
    ScalarField::from_raw(*grid, out)
}

/// Adjoint `X₀*` on the grid `grid`, angular weight `2π/n_angles`.
pub fn backproject(g: &Sinogram, grid: &GridSpec) -> Result<ScalarField> {
    grid.require_2d("back-projection is planar")?;
    let w = 2.0 * PI / g.lines().n_angles() as f64;
    Ok(backproject_weighted(g.values(), g.lines(), grid, w))
}

/// `N₀ = X₀* X₀`.
pub fn normal_scalar(f: &ScalarField, lines: &LineSet) -> Result<ScalarField> {
    backproject(&xray_forward(f, lines)?, f.grid())
}

/// Least-squares constant `c` in `N₀f ≈ c · (f ∗ |x|⁻¹)` over `region`.
pub fn fit_normal_constant(f: &ScalarField, lines: &LineSet, region: &RegionMask, plan: &SpectralPlan) -> Result<f64> {
    let n0 = normal_scalar(f, lines)?;
    let i1 = riesz_potential(f, 1.0, plan)?;
    fit_constant(&n0, &i1, region)
}

/// `argmin_c ‖a − c·b‖` restricted to `region`.
pub fn fit_constant(a: &ScalarField, b: &ScalarField, region: &RegionMask) -> Result<f64> {
    a.grid().check_same(b.grid())?;
    let (mut ab, mut bb) = (0.0, 0.0);
    for k in region.indices() {
        ab += a.values()[k] * b.values()[k];
        bb += b.values()[k] * b.values()[k];
    }
    if bb == 0.0 {
        return Err(Error::Degenerate("reference field vanishes on the fit region".into()));
    }
    Ok(ab / bb)
}

/// Spatial Ram–Lak kernel sampled at offset step `tau`.
fn ram_lak(k: i64, tau: f64) -> f64 {
    if k == 0 {
        1.0 / (4.0 * tau * tau)
    } else if k % 2 == 0 {
        0.0
    } else {
        -1.0 / (PI * PI * (k * k) as f64 * tau * tau)
    }
}

/// Ramp-filtered sinogram `q = τ·(g ∗ h_RL)` per angle.
pub fn ramp_filter(g: &Sinogram) -> Sinogram {
    let lines = g.lines();
    let m = lines.n_offsets();
    let tau = lines.offset_step();
    let len = (2 * m - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut kernel: Vec<Complex64> = (0..len)
        .map(|i| {
            let k = if i < len / 2 { i as i64 } else { i as i64 - len as i64 };
            if k.unsigned_abs() as usize >= m {
                Complex64::default()
            } else {
                Complex64::new(ram_lak(k, tau), 0.0)
            }
        })
        .collect();
    fwd.process(&mut kernel);
    let rows: Vec<Vec<f64>> = (0..lines.n_angles())
        .into_par_iter()
        .map(|a| {
            let mut buf = vec![Complex64::default(); len];
            for (b, &v) in buf.iter_mut().zip(g.row(a)) {
                *b = Complex64::new(if v.is_nan() { 0.0 } else { v }, 0.0);
            }
            fwd.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kernel) {
                *b *= k;
            }
            inv.process(&mut buf);
            buf[..m].iter().map(|z| z.re * tau / len as f64).collect()
        })
        .collect();
    Sinogram::from_raw(lines.clone(), rows.concat())
}

/// Filtered back-projection: Ram–Lak ramp filter, then back-projection
/// with the `π/n_angles` weight.
pub fn fbp_reconstruct(g: &Sinogram, grid: &GridSpec) -> Result<ScalarField> {
    grid.require_2d("filtered back-projection is planar")?;
    if g.lines().n_angles() < 8 {
        return Err(Error::InsufficientData(format!("{} angles given, at least 8 are needed", g.lines().n_angles())));
    }
    let q = ramp_filter(g);
    Ok(backproject_weighted(q.values(), q.lines(), grid, PI / g.lines().n_angles() as f64))
}

/// Flags lines having a quadrature sample whose nearest node lies in `v`.
pub fn lines_through_region(lines: &LineSet, v: &RegionMask) -> Result<Vec<bool>> {
    let grid = v.grid();
    grid.require_2d("line flags are planar")?;
    let n = grid.n();
    let h = grid.spacing();
    let l = grid.extent();
    let flags = lines
        .angles()
        .par_iter()
        .flat_map_iter(|&theta| {
            lines.offsets().iter().map(move |&s| {
                line_samples(grid, theta, s).iter().any(|&(x, y, _)| {
                    let i = (((x + l) / h).round() as usize).min(n - 1);
                    let j = (((y + l) / h).round() as usize).min(n - 1);
                    v.contains(i * n + j)
                })
            })
        })
        .collect();
    Ok(flags)
}

/// Relative L² error `‖a − b‖ / ‖b‖` over the cells of `region`.
pub fn relative_error_on(a: &ScalarField, b: &ScalarField, region: &RegionMask) -> Result<f64> {
    let diff = a.sub(b)?.masked(region)?;
    let den = l2_norm(&b.masked(region)?);
    if den == 0.0 {
        return Err(Error::Degenerate("reference vanishes on the region".into()));
    }
    Ok(l2_norm(&diff) / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_chord_through_origin() {
        let g = GridSpec::square(128).unwrap();
        let f = ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) <= 0.5 { 1.0 } else { 0.0 });
        let v = xray_line(&f, 0.3, 0.0).unwrap();
        assert!((v - 1.0).abs() <= 2.0 * g.spacing());
    }

    #[test]
    fn gaussian_line_integral() {
        let g = GridSpec::square(128).unwrap();
        let sigma: f64 = 0.2;
        let f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma * sigma)).exp());
        for &s in &[0.0, 0.1, 0.25] {
            let exact = sigma * (2.0 * PI).sqrt() * (-s * s / (2.0 * sigma * sigma)).exp();
            let v = xray_line(&f, 1.1, s).unwrap();
            assert!((v - exact).abs() <= 1e-3 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn three_d_is_rejected() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        let lines = LineSet::uniform(8, 9, 1.0).unwrap();
        assert!(matches!(xray_forward(&ScalarField::zeros(g), &lines), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn too_few_angles_for_fbp() {
        let g = GridSpec::square(16).unwrap();
        let lines = LineSet::uniform(7, 23, 1.0).unwrap();
        assert!(matches!(fbp_reconstruct(&Sinogram::zeros(lines), &g), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn forward_row_matches_forward_projection() {
        let g = GridSpec::square(16).unwrap();
        let f = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin() * (1.0 - x[1] * x[1]));
        let (theta, s) = (0.7, 0.31);
        let direct = xray_line(&f, theta, s).unwrap();
        let row: f64 = xray_row(&g, theta, s).iter().map(|&(k, w)| w * f.values()[k]).sum();
        assert!((direct - row).abs() < 1e-12);
    }

    #[test]
    fn line_set_validation() {
        assert!(LineSet::new(vec![0.0, 0.0], vec![-1.0, 1.0]).is_err());
        assert!(LineSet::new(vec![0.0, 3.2], vec![-1.0, 1.0]).is_err());
        assert!(LineSet::new(vec![0.0], vec![-1.0, 0.5]).is_err());
        assert!(LineSet::new(vec![0.0, 1.0], vec![-1.0, 0.0, 1.0]).is_ok());
    }
}
