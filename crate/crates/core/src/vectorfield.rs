//! X-ray transform of planar vector fields, its normal operator, the curl,
//! Helmholtz projection and matrix-weighted transforms.

use crate::error::{Error, Result};
use crate::fields::{curl2d_fd, GridSpec, ScalarField, VectorField};
use crate::spectral::{periodic_derivative, FftNd, SpectralPlan};
use crate::xray::{line_samples, LineSet, Sinogram};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// One value per line, `∫ h·ω⊥ dt`; same layout as [`Sinogram`].
pub type VectorSinogram = Sinogram;

pub fn xray_vector(h: &VectorField, lines: &LineSet) -> Result<VectorSinogram> {
    let grid = h.grid();
    grid.require_2d("the vector X-ray transform is planar")?;
    let (h1, h2) = (h.component(0), h.component(1));
    let rows: Vec<Vec<f64>> = lines
        .angles()
        .par_iter()
        .map(|&theta| {
            let (px, py) = (-theta.sin(), theta.cos());
            lines
                .offsets()
                .iter()
                .map(|&s| {
                    line_samples(grid, theta, s)
                        .iter()
                        .map(|&(x, y, w)| w * (px * h1.interp2(x, y) + py * h2.interp2(x, y)))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(Sinogram::from_raw(lines.clone(), rows.concat()))
}

/// Adjoint of [`xray_vector`]: each line value is spread along `ω⊥`.
pub fn backproject_vector(g: &VectorSinogram, grid: &GridSpec) -> Result<VectorField> {
    grid.require_2d("back-projection is planar")?;
    let lines = g.lines();
    let m = lines.n_offsets();
    let weight = 2.0 * PI / lines.n_angles() as f64;
    let trig: Vec<(f64, f64)> = lines.angles().iter().map(|t| (t.cos(), t.sin())).collect();
    let vals = g.values();
    let pairs: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.point(k);
            let (mut a1, mut a2) = (0.0, 0.0);
            for (a, &(c, s)) in trig.iter().enumerate() {
                if let Some((l, frac)) = lines.locate(p[0] * c + p[1] * s) {
                    let row = &vals[a * m..(a + 1) * m];
                    let v = (1.0 - frac) * row[l] + frac * row[l + 1];
                    if v.is_finite() {
                        a1 -= s * v;
                        a2 += c * v;
                    }
                }
            }
            (a1 * weight, a2 * weight)
        })
        .collect();
    let (c1, c2): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    VectorField::new(vec![ScalarField::new(*grid, c1)?, ScalarField::new(*grid, c2)?])
}

/// `N₁ = X₁* X₁`.
pub fn normal_vector(h: &VectorField, lines: &LineSet) -> Result<VectorField> {
    backproject_vector(&xray_vector(h, lines)?, h.grid())
}

/// `∂₁h₂ − ∂₂h₁`, sharing its stencils with [`crate::fields::gradient`].
pub fn curl2d(h: &VectorField) -> Result<ScalarField> {
    curl2d_fd(h)
}

/// Rotated gradient `∇⊥ψ = (-∂₂ψ, ∂₁ψ)` with finite differences.
pub fn rotated_gradient(psi: &ScalarField) -> Result<VectorField> {
    psi.grid().require_2d("rotated gradients are planar")?;
    let d1 = crate::fields::partial(psi, 0);
    let d2 = crate::fields::partial(psi, 1);
    VectorField::new(vec![d2.scaled(-1.0), d1])
}

/// Helmholtz parts on the padded torus grid.
///
/// The torus has an odd side. For odd `n` its nodes coincide with the
/// original ones; for even `n` the padded `GridSpec` sits half a cell off,
/// so compare through [`Helmholtz::crop`] rather than by coordinates.
#[derive(Clone, Debug)]
pub struct Helmholtz {
    pub solenoidal: VectorField,
    pub potential: ScalarField,
    /// `∇φ`, the spectral gradient of `potential`.
    pub gradient: VectorField,
    /// Padded input, so that `padded_input = solenoidal + gradient`.
    pub padded_input: VectorField,
    /// Index of the original node `(0, 0)` inside the padded grid.
    pub offset: usize,
    original: GridSpec,
}

impl Helmholtz {
    /// Restricts a padded-grid field back to the original nodes.
    pub fn crop(&self, f: &ScalarField) -> ScalarField {
        let n = self.original.n();
        let big = f.grid().n();
        let vals = (0..self.original.len())
            .map(|k| {
                let (i, j) = (k / n, k % n);
                f.values()[(i + self.offset) * big + j + self.offset]
            })
            .collect();
        ScalarField::from_raw(self.original, vals)
    }

    pub fn crop_vector(&self, h: &VectorField) -> VectorField {
        VectorField::new(h.components().iter().map(|c| self.crop(c)).collect())
            .expect("cropped components share a grid")
    }
}

/// Spectral Helmholtz decomposition `h = h^s + ∇φ`.
///
/// The projection runs on an odd-sized torus of about `pad_factor·n`
/// nodes, so no Nyquist mode exists and every real mode has a distinct
/// conjugate partner. Outputs live on that torus grid; the `ξ = 0` mode
/// stays in the solenoidal part.
pub fn helmholtz(h: &VectorField, plan: &SpectralPlan) -> Result<Helmholtz> {
    let grid = *h.grid();
    grid.require_2d("the Helmholtz projection is planar")?;
    grid.check_same(plan.grid())?;
    let n = grid.n();
    let big = plan.padded_size() + 1;
    let offset = (big - n) / 2;
    let hs = grid.spacing();
    let pgrid = GridSpec::new(2, big, (big - 1) as f64 * hs / 2.0)?;
    let embed = |f: &ScalarField| -> ScalarField {
        let mut v = vec![0.0; big * big];
        for (k, &x) in f.values().iter().enumerate() {
            let (i, j) = (k / n, k % n);
            v[(i + offset) * big + j + offset] = x;
        }
        ScalarField::from_raw(pgrid, v)
    };
    let padded = VectorField::new(vec![embed(h.component(0)), embed(h.component(1))])?;
    let fft = FftNd::new(big, 2);
    let mut spec: Vec<Vec<Complex64>> = padded
        .components()
        .iter()
        .map(|c| {
            let mut d: Vec<Complex64> = c.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.process(&mut d, false);
            d
        })
        .collect();
    let mut phi: Vec<Complex64> = vec![Complex64::default(); big * big];
    for (k, p) in phi.iter_mut().enumerate() {
        let xi = fft.xi(k, hs);
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        if r2 > 0.0 {
            let dot = spec[0][k] * xi[0] + spec[1][k] * xi[1];
            // iξ·φ̂ = ξ(ξ·ĥ)/|ξ|²
            *p = Complex64::new(0.0, -1.0) * dot / r2;
        }
    }
    fft.process(&mut phi, true);
    spec.clear();
    let potential = ScalarField::from_raw(pgrid, phi.into_iter().map(|z| z.re).collect());
    let gradient = VectorField::new(vec![periodic_derivative(&potential, 0), periodic_derivative(&potential, 1)])?;
    let solenoidal = padded.sub(&gradient)?;
    Ok(Helmholtz { solenoidal, potential, gradient, padded_input: padded, offset, original: grid })
}

/// Per-node invertible 2×2 matrices, stored row-major `[a11, a12, a21, a22]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixWeight {
    grid: GridSpec,
    mats: Vec<[f64; 4]>,
}

impl MatrixWeight {
    pub fn new(grid: GridSpec, mats: Vec<[f64; 4]>) -> Result<Self> {
        grid.require_2d("matrix weights are planar")?;
        if mats.len() != grid.len() {
            return Err(Error::Shape("one matrix per node is required".into()));
        }
        let min_det = mats.iter().map(|m| (m[0] * m[3] - m[1] * m[2]).abs()).fold(f64::INFINITY, f64::min);
        if !(min_det >= 1e-6) {
            return Err(Error::Weight(format!("min |det A| = {min_det:.3e} is below 1e-6")));
        }
        Ok(Self { grid, mats })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> [f64; 4]) -> Result<Self> {
        let mats = (0..grid.len()).map(|k| f(&grid.point(k)[..2])).collect();
        Self::new(grid, mats)
    }

    pub fn identity(grid: GridSpec) -> Self {
        Self::new(grid, vec![[1.0, 0.0, 0.0, 1.0]; grid.len()]).expect("identity is invertible")
    }

    /// Counter-clockwise rotation by 90°.
    pub fn rotation90(grid: GridSpec) -> Self {
        Self::new(grid, vec![[0.0, -1.0, 1.0, 0.0]; grid.len()]).expect("rotation is invertible")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, k: usize) -> [f64; 4] {
        self.mats[k]
    }

    /// Pointwise `A(x)·h(x)`.
    pub fn apply(&self, h: &VectorField) -> Result<VectorField> {
        self.grid.check_same(h.grid())?;
        let (h1, h2) = (h.component(0).values(), h.component(1).values());
        let mut a = Vec::with_capacity(h1.len());
        let mut b = Vec::with_capacity(h1.len());
        for (k, m) in self.mats.iter().enumerate() {
            a.push(m[0] * h1[k] + m[1] * h2[k]);
            b.push(m[2] * h1[k] + m[3] * h2[k]);
        }
        VectorField::new(vec![ScalarField::new(self.grid, a)?, ScalarField::new(self.grid, b)?])
    }

    /// Pointwise `A(x)⁻¹·h(x)`.
    pub fn apply_inverse(&self, h: &VectorField) -> Result<VectorField> {
        let inv: Vec<[f64; 4]> = self
            .mats
            .iter()
            .map(|m| {
                let d = m[0] * m[3] - m[1] * m[2];
                [m[3] / d, -m[1] / d, -m[2] / d, m[0] / d]
            })
            .collect();
        MatrixWeight::new(self.grid, inv)?.apply(h)
    }
}

/// `X_A h = X₁(A h)`; with `A` the 90° rotation this is the transverse
/// ray transform, whose integrand is `h·ω`.
pub fn xray_matrix_weighted(h: &VectorField, a: &MatrixWeight, lines: &LineSet) -> Result<VectorSinogram> {
    xray_vector(&a.apply(h)?, lines)
}
