//! Fractional Laplacians, Riesz potentials, spectral d-plane normal
//! operators and discrete unique-continuation experiments.

use crate::error::{Error, Result};
use crate::fields::{apply_axis, poly_operator_rows, GridSpec, PolyOperator, RegionMask, ScalarField};
use crate::linalg::{fornberg_weights, rank_threshold, singular_values};
use crate::spectral::FftNd;
pub use crate::spectral::{FracExponent, SpectralPlan, ZeroModeRule};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// A fractional Laplacian result plus the zero-mode warning flag.
#[derive(Clone, Debug)]
pub struct FracOutput {
    pub field: ScalarField,
    /// Set when `s < 0`, the rule is `zero` and the input mean was not zero.
    pub zero_mode_warning: bool,
}

fn check_inputs(f: &ScalarField, s: &FracExponent, plan: &SpectralPlan) -> Result<()> {
    f.grid().check_same(plan.grid())?;
    if s.dim() != f.grid().dim() {
        return Err(Error::Shape(format!("exponent built for dimension {}, field is {}-D", s.dim(), f.grid().dim())));
    }
    Ok(())
}

#[inline]
fn multiplier(xi: &[f64; 3], s: f64) -> f64 {
    let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    if r2 == 0.0 {
        if s == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        r2.powf(s)
    }
}

fn has_nonzero_mean(values: &[f64]) -> bool {
    let sum: f64 = values.iter().sum();
    let mass: f64 = values.iter().map(|v| v.abs()).sum();
    sum.abs() > 1e-12 * mass.max(f64::MIN_POSITIVE)
}

/// `(-Δ)^s f` as the multiplier `|ξ|^{2s}` on the zero-padded torus.
pub fn fractional_laplacian_report(f: &ScalarField, s: FracExponent, plan: &SpectralPlan) -> Result<FracOutput> {
    check_inputs(f, &s, plan)?;
    let sv = s.value();
    let mut warning = false;
    let mut values = f.values().to_vec();
    if sv < 0.0 {
        match plan.zero_mode_rule() {
            ZeroModeRule::Zero => warning = has_nonzero_mean(&values),
            ZeroModeRule::SubtractMean => {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                values.iter_mut().for_each(|v| *v -= mean);
            }
        }
    }
    let out = plan.apply_multiplier(&values, |xi| Complex64::new(multiplier(xi, sv), 0.0));
    Ok(FracOutput { field: ScalarField::from_raw(*f.grid(), out), zero_mode_warning: warning })
}

pub fn fractional_laplacian(f: &ScalarField, s: FracExponent, plan: &SpectralPlan) -> Result<ScalarField> {
    fractional_laplacian_report(f, s, plan).map(|o| o.field)
}

/// `|ξ|^{2s}` applied to samples that already live on the padded torus
/// (side `plan.padded_size()`, same spacing as the plan's grid).
pub fn fractional_laplacian_torus(values: &[f64], s: FracExponent, plan: &SpectralPlan) -> Result<Vec<f64>> {
    if values.len() != plan.fft().len() {
        return Err(Error::Shape(format!("torus data needs {} samples, got {}", plan.fft().len(), values.len())));
    }
    let sv = s.value();
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.multiply_torus(&mut data, |xi| Complex64::new(multiplier(xi, sv), 0.0));
    Ok(data.into_iter().map(|z| z.re).collect())
}

/// Spectral d-plane normal operator, `(-Δ)^{-d/2} f`.
///
/// The X-ray and d-plane normal operators agree with this up to a
/// dimension-dependent constant that is measured, not fixed here.
pub fn normal_dplane(f: &ScalarField, d: usize, plan: &SpectralPlan) -> Result<ScalarField> {
    let dim = f.grid().dim();
    if d == 0 || d >= dim {
        return Err(Error::Domain(format!("plane dimension d = {d} must satisfy 0 < d < {dim}")));
    }
    fractional_laplacian(f, FracExponent::new(-(d as f64) / 2.0, dim)?, plan)
}

// ---------------------------------------------------------------------------
// Riesz potentials

type KernelKey = (usize, usize, u64, u64);

fn kernel_cache() -> &'static Mutex<HashMap<KernelKey, Arc<Vec<Complex64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<KernelKey, Arc<Vec<Complex64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Mean of `|x|^{-alpha}` over the cube `[-h/2, h/2]^dim`.
///
/// The integrand is homogeneous of degree `-alpha`, so the divergence
/// theorem reduces the cube integral to a smooth integral over one face:
/// `∫_cube |x|^{-α} = 2·dim·a/(dim-α) · ∫_face |p|^{-α} dA`, `a = h/2`.
pub fn singular_cell_average(h: f64, alpha: f64, dim: usize) -> f64 {
    let a = 0.5 * h;
    let tol = 1e-14 * a.powf(dim as f64 - 1.0 - alpha);
    let face = match dim {
        2 => adaptive_simpson(&|y| (a * a + y * y).powf(-alpha / 2.0), -a, a, tol),
        3 => adaptive_simpson(
            &|y| adaptive_simpson(&|z| (a * a + y * y + z * z).powf(-alpha / 2.0), -a, a, tol / h),
            -a,
            a,
            tol,
        ),
        _ => unreachable!("grids are 2-D or 3-D"),
    };
    let integral = 2.0 * dim as f64 * a * face / (dim as f64 - alpha);
    integral / h.powi(dim as i32)
}

/// Transformed convolution kernel on a torus of side `2n`.
fn riesz_kernel(grid: &GridSpec, alpha: f64, fft: &FftNd) -> Arc<Vec<Complex64>> {
    let key = (grid.dim(), grid.n(), grid.extent().to_bits(), alpha.to_bits());
    if let Some(k) = kernel_cache().lock().expect("cache lock").get(&key) {
        return k.clone();
    }
    let side = fft.side();
    let dim = grid.dim();
    let h = grid.spacing();
    let vol = h.powi(dim as i32);
    let center = if alpha > 0.0 {
        singular_cell_average(h, alpha, dim)
    } else if alpha == 0.0 {
        1.0
    } else {
        0.0
    };
    let mut data = vec![Complex64::default(); fft.len()];
    for (k, v) in data.iter_mut().enumerate() {
        let mut rem = k;
        let mut r2 = 0.0;
        for _ in 0..dim {
            let d = fft.signed(rem % side) as f64 * h;
            r2 += d * d;
            rem /= side;
        }
        let val = if r2 == 0.0 { center } else { r2.powf(-alpha / 2.0) };
        *v = Complex64::new(val * vol, 0.0);
    }
    fft.process(&mut data, false);
    let arc = Arc::new(data);
    kernel_cache().lock().expect("cache lock").insert(key, arc.clone());
    arc
}

/// `I_α f = f ∗ |x|^{-α}` as an exact discrete linear convolution.
///
/// The plan fixes the grid; the convolution itself pads to twice the grid
/// side so no wrap-around occurs.
pub fn riesz_potential(f: &ScalarField, alpha: f64, plan: &SpectralPlan) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_same(plan.grid())?;
    let dim = grid.dim();
    if !alpha.is_finite() || alpha >= dim as f64 {
        return Err(Error::DivergentKernel { alpha, dim });
    }
    let side = 2 * grid.n();
    let fft = FftNd::new(side, dim);
    let kernel = riesz_kernel(&grid, alpha, &fft);
    let mut data = vec![Complex64::default(); fft.len()];
    for (k, &v) in f.values().iter().enumerate() {
        let idx = grid.unravel(k);
        let flat = (0..dim).fold(0, |acc, a| acc * side + idx[a]);
        data[flat] = Complex64::new(v, 0.0);
    }
    fft.process(&mut data, false);
    for (d, k) in data.iter_mut().zip(kernel.iter()) {
        *d *= k;
    }
    fft.process(&mut data, true);
    let out = (0..grid.len())
        .map(|k| {
            let idx = grid.unravel(k);
            data[(0..dim).fold(0, |acc, a| acc * side + idx[a])].re
        })
        .collect();
    Ok(ScalarField::from_raw(grid, out))
}

// ---------------------------------------------------------------------------
// Probes

/// Largest `|∂^α f(x0)|` over `|α| = k`, for `k = 0..=k_max`.
///
/// Derivatives use central stencils of half-width `k_max` on every axis.
pub fn vanishing_order_probe(f: &ScalarField, x0: &[usize], k_max: usize) -> Result<Vec<f64>> {
    let grid = f.grid();
    if k_max > 4 {
        return Err(Error::UnsupportedOrder { order: k_max, max: 4 });
    }
    if x0.len() != grid.dim() {
        return Err(Error::Shape(format!("probe point {x0:?} in a {}-D grid", grid.dim())));
    }
    let half = k_max.max(1);
    if x0.iter().any(|&i| i < half || i + half >= grid.n()) {
        return Err(Error::Placement(format!("probe point {x0:?} is within {half} cells of the grid edge")));
    }
    let h = grid.spacing();
    let nodes: Vec<f64> = (0..=2 * half).map(|j| (j as f64 - half as f64) * h).collect();
    let w = fornberg_weights(0.0, &nodes, k_max);
    let strides = grid.strides();
    let base = grid.ravel(x0);
    let dim = grid.dim();
    let mut out = vec![0.0f64; k_max + 1];
    let mut alpha = vec![0usize; dim];
    loop {
        let order: usize = alpha.iter().sum();
        if order <= k_max {
            // tensor-product stencil
            let mut acc = 0.0;
            let mut offs = vec![0usize; dim];
            loop {
                let mut wt = 1.0;
                let mut flat = base as isize;
                for a in 0..dim {
                    wt *= w[alpha[a]][offs[a]];
                    flat += (offs[a] as isize - half as isize) * strides[a] as isize;
                }
                if wt != 0.0 {
                    acc += wt * f.values()[flat as usize];
                }
                if !advance(&mut offs, 2 * half + 1) {
                    break;
                }
            }
            out[order] = out[order].max(acc.abs());
        }
        if !advance(&mut alpha, k_max + 1) {
            break;
        }
    }
    Ok(out)
}

fn advance(counter: &mut [usize], base: usize) -> bool {
    for c in counter.iter_mut() {
        *c += 1;
        if *c < base {
            return true;
        }
        *c = 0;
    }
    false
}

/// `‖(-Δ)^{t/2} f‖ / ‖(-Δ)^{s/2} f‖`, with both norms taken on the padded
/// torus through Parseval so no nonlocal tail is cropped away.
pub fn poincare_ratio(f: &ScalarField, s: f64, t: f64, plan: &SpectralPlan) -> Result<f64> {
    f.grid().check_same(plan.grid())?;
    if !(s >= t && t >= 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("need s ≥ t ≥ 0, got s = {s}, t = {t}")));
    }
    let fft = plan.fft();
    let mut data = plan.pad(f.values());
    fft.process(&mut data, false);
    let h = f.grid().spacing();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, z) in data.iter().enumerate() {
        let e = z.norm_sqr();
        num += multiplier(&fft.xi(k, h), t) * e;
        den += multiplier(&fft.xi(k, h), s) * e;
    }
    if den <= 0.0 {
        return Err(Error::Degenerate("‖(-Δ)^{s/2} f‖ vanishes".into()));
    }
    Ok((num / den).sqrt())
}

// ---------------------------------------------------------------------------
// Unique-continuation rank experiments

/// Singular-value summary of a stacked constraint matrix.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RankReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_unknowns: usize,
    pub n_equations: usize,
    pub rank_deficiency: usize,
}

impl RankReport {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let sv = singular_values(m);
        let sigma_max = sv.first().copied().unwrap_or(0.0);
        let sigma_min = if m.nrows() < m.ncols() { 0.0 } else { *sv.last().unwrap_or(&0.0) };
        let thr = rank_threshold(sigma_max);
        let rank = sv.iter().filter(|&&v| v > thr).count();
        Self {
            sigma_min,
            sigma_max,
            n_unknowns: m.ncols(),
            n_equations: m.nrows(),
            rank_deficiency: m.ncols() - rank.min(m.ncols()),
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.sigma_max == 0.0 {
            0.0
        } else {
            self.sigma_min / self.sigma_max
        }
    }

    /// `σ_min > 1e3·ε·σ_max`.
    pub fn full_column_rank(&self) -> bool {
        self.sigma_max > 0.0 && self.sigma_min > rank_threshold(self.sigma_max)
    }
}

/// Largest grid size for dense rank assembly.
pub const DENSE_RANK_CAP: usize = 576;

/// Applies `(-Δ)^s` by the route matching `s`: iterated finite-difference
/// Laplacian for positive integers, Riesz convolution for negative `s`,
/// spectral multiplier otherwise.
pub fn ucp_operator(f: &ScalarField, s: FracExponent, plan: &SpectralPlan) -> Result<ScalarField> {
    let sv = s.value();
    let grid = *f.grid();
    if s.is_integer() && sv >= 0.0 {
        let mut cur = f.values().to_vec();
        for _ in 0..sv as usize {
            let mut next = vec![0.0; cur.len()];
            for axis in 0..grid.dim() {
                for (o, v) in next.iter_mut().zip(apply_axis(&grid, &cur, axis, 2)) {
                    *o -= v;
                }
            }
            cur = next;
        }
        Ok(ScalarField::from_raw(grid, cur))
    } else if sv < 0.0 {
        riesz_potential(f, grid.dim() as f64 + 2.0 * sv, plan)
    } else {
        fractional_laplacian(f, s, plan)
    }
}

/// Appends the real and imaginary parts of complex rows, skipping parts
/// that vanish identically.
pub(crate) fn push_complex_rows(out: &mut Vec<Vec<(usize, f64)>>, rows: Vec<Vec<(usize, Complex64)>>) {
    for row in rows {
        let re: Vec<(usize, f64)> = row.iter().filter(|(_, z)| z.re != 0.0).map(|&(j, z)| (j, z.re)).collect();
        let im: Vec<(usize, f64)> = row.iter().filter(|(_, z)| z.im != 0.0).map(|&(j, z)| (j, z.im)).collect();
        if !re.is_empty() {
            out.push(re);
        }
        if !im.is_empty() {
            out.push(im);
        }
    }
}

/// Dense matrix `f ↦ [((-Δ)^s f)|_V ; (P(D) f)|_V]` over all grid unknowns.
pub fn ucp_matrix(
    grid: &GridSpec,
    s: FracExponent,
    v: &RegionMask,
    constraint: &PolyOperator,
    plan: &SpectralPlan,
) -> Result<DMatrix<f64>> {
    grid.check_same(v.grid())?;
    grid.check_same(plan.grid())?;
    if v.is_empty() {
        return Err(Error::Domain("constraint region V is empty".into()));
    }
    let n = grid.len();
    if n > DENSE_RANK_CAP {
        return Err(Error::Size(format!("{n} unknowns exceed the dense cap {DENSE_RANK_CAP}")));
    }
    let cells = v.indices();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = ucp_operator(&ScalarField::from_raw(*grid, e), s, plan)?;
            Ok(cells.iter().map(|&c| col.values()[c]).collect())
        })
        .collect::<Result<_>>()?;
    let mut extra = Vec::new();
    push_complex_rows(&mut extra, poly_operator_rows(grid, constraint, &cells)?);
    let rows = cells.len() + extra.len();
    let mut m = DMatrix::zeros(rows, n);
    for (j, col) in columns.iter().enumerate() {
        for (i, &val) in col.iter().enumerate() {
            m[(i, j)] = val;
        }
    }
    for (i, row) in extra.iter().enumerate() {
        for &(j, val) in row {
            m[(cells.len() + i, j)] = val;
        }
    }
    Ok(m)
}

pub fn ucp_rank_experiment(
    grid: &GridSpec,
    s: FracExponent,
    v: &RegionMask,
    constraint: &PolyOperator,
    plan: &SpectralPlan,
) -> Result<RankReport> {
    Ok(RankReport::from_matrix(&ucp_matrix(grid, s, v, constraint, plan)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(g: GridSpec, sigma: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma * sigma)).exp())
    }

    #[test]
    fn out_of_range_exponent_is_rejected() {
        assert!(matches!(FracExponent::new(5.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn divergent_kernel_is_rejected() {
        let g = GridSpec::square(16).unwrap();
        let plan = SpectralPlan::default_for(g);
        let r = riesz_potential(&ScalarField::zeros(g), 2.0, &plan);
        assert!(matches!(r, Err(Error::DivergentKernel { .. })));
    }

    #[test]
    fn singular_cell_average_matches_polar_integral() {
        // disk of radius a inside the square: ∫|x|^{-1} over the disk is 2πa,
        // and the corners add ∫ over the rest, checked by brute-force midpoint sums
        let h = 1.0;
        let avg = singular_cell_average(h, 1.0, 2);
        let m = 2000;
        let mut sum = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = -0.5 + (i as f64 + 0.5) / m as f64;
                let y = -0.5 + (j as f64 + 0.5) / m as f64;
                sum += 1.0 / (x * x + y * y).sqrt();
            }
        }
        let brute = sum / (m * m) as f64;
        assert!((avg - brute).abs() / avg < 1e-3);
        // closed form: 4·ln(1+√2)·... for the unit square, ∫|x|^{-1} = 4 asinh(1)
        assert!((avg - 4.0 * 1f64.asinh()).abs() < 1e-10);
    }

    #[test]
    fn zero_rule_flags_nonzero_mean() {
        let g = GridSpec::square(16).unwrap();
        let plan = SpectralPlan::new(g, 2, ZeroModeRule::Zero).unwrap();
        let f = gaussian(g, 0.2);
        let out = fractional_laplacian_report(&f, FracExponent::new(-0.5, 2).unwrap(), &plan).unwrap();
        assert!(out.zero_mode_warning);
        let out = fractional_laplacian_report(&f, FracExponent::new(0.5, 2).unwrap(), &plan).unwrap();
        assert!(!out.zero_mode_warning);
    }

    #[test]
    fn torus_eigenfunction_is_scaled_exactly() {
        let g = GridSpec::square(16).unwrap();
        let plan = SpectralPlan::default_for(g);
        let p = plan.padded_size();
        let h = g.spacing();
        let period = plan.period();
        let (k1, k2) = (3.0, 5.0);
        let vals: Vec<f64> = (0..p * p)
            .map(|k| {
                let (i, j) = (k / p, k % p);
                (2.0 * PI * (k1 * i as f64 * h + k2 * j as f64 * h) / period).cos()
            })
            .collect();
        let s = FracExponent::new(0.35, 2).unwrap();
        let out = fractional_laplacian_torus(&vals, s, &plan).unwrap();
        let lam = ((2.0 * PI / period).powi(2) * (k1 * k1 + k2 * k2)).powf(0.35);
        for (a, b) in out.iter().zip(&vals) {
            assert!((a - lam * b).abs() < 1e-12 * lam);
        }
    }

    #[test]
    fn probe_rejects_edge_points() {
        let g = GridSpec::square(16).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(vanishing_order_probe(&f, &[2, 8], 3), Err(Error::Placement(_))));
        assert!(matches!(vanishing_order_probe(&f, &[8, 8], 5), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn probe_on_constant() {
        let g = GridSpec::square(16).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let p = vanishing_order_probe(&f, &[8, 8], 4).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14);
        assert!(p[1..].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn poincare_equal_exponents_give_one() {
        let g = GridSpec::square(32).unwrap();
        let plan = SpectralPlan::default_for(g);
        let r = poincare_ratio(&gaussian(g, 0.2), 0.8, 0.8, &plan).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        assert!(matches!(poincare_ratio(&ScalarField::zeros(g), 1.0, 0.0, &plan), Err(Error::Degenerate(_))));
    }

    #[test]
    fn empty_region_is_rejected() {
        let g = GridSpec::square(8).unwrap();
        let plan = SpectralPlan::default_for(g);
        let r = ucp_rank_experiment(
            &g,
            FracExponent::new(0.5, 2).unwrap(),
            &RegionMask::empty(g),
            &PolyOperator::identity(2),
            &plan,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
