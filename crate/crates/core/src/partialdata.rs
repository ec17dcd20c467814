//! Partial-data problems: sinograms restricted to lines meeting a region
//! `V`, stacked rank tests under `P(D)f|_V = 0`, and constrained
//! Tikhonov reconstructions.

use crate::error::{Error, Result};
use crate::fields::axis_stencil;
use crate::fields::{poly_operator_rows, GridSpec, PolyOperator, RegionMask, ScalarField, VectorField};
use crate::fractional::RankReport;
use crate::linalg::{conjugate_gradient, norm, CgReport, Csr};
use crate::vectorfield::rotated_gradient;
use crate::xray::{lines_through_region, xray_row, LineSet, Sinogram};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Ratio `μ/λ` between the constraint weight and the Tikhonov weight.
pub const CONSTRAINT_RATIO: f64 = 1e4;
/// Conjugate-gradient iteration cap.
pub const MAX_CG_ITERATIONS: usize = 5000;
/// Dense rank tests are limited to this many nodes per axis.
pub const DENSE_AXIS_CAP: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Scalar,
    Vector,
}

/// Lines meeting `V`, the constraint `P(D)` on `V`, and the Tikhonov weight.
#[derive(Clone, Debug)]
pub struct PartialProblem {
    grid: GridSpec,
    v: RegionMask,
    lines: LineSet,
    flags: Vec<bool>,
    constraint: PolyOperator,
    kind: ProblemKind,
    lambda: f64,
}

impl PartialProblem {
    pub fn new(
        v: RegionMask,
        lines: LineSet,
        constraint: PolyOperator,
        kind: ProblemKind,
        lambda: f64,
    ) -> Result<Self> {
        let grid = *v.grid();
        grid.require_2d("partial-data problems are planar")?;
        if v.is_empty() {
            return Err(Error::Domain("region V is empty".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("λ must be non-negative, got {lambda}")));
        }
        if constraint.dim() != 2 {
            return Err(Error::Shape("constraint must be a planar polynomial".into()));
        }
        let flags = lines_through_region(&lines, &v)?;
        if !flags.iter().any(|&f| f) {
            return Err(Error::InsufficientData("no line meets V".into()));
        }
        Ok(Self { grid, v, lines, flags, constraint, kind, lambda })
    }

    /// Same problem with every line treated as measured.
    pub fn with_all_lines(&self) -> Self {
        Self { flags: vec![true; self.flags.len()], ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn region(&self) -> &RegionMask {
        &self.v
    }

    pub fn lines(&self) -> &LineSet {
        &self.lines
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn constraint(&self) -> &PolyOperator {
        &self.constraint
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        CONSTRAINT_RATIO * self.lambda
    }

    /// Description written next to every reconstruction.
    pub fn manifest(&self) -> ProblemManifest {
        ProblemManifest {
            grid: self.grid,
            mask_digest: self.v.digest(),
            mask_cells: self.v.count(),
            angles: self.lines.angles().to_vec(),
            n_offsets: self.lines.n_offsets(),
            constraint: self.constraint.clone(),
            kind: self.kind,
            lambda: self.lambda,
            mu: self.mu(),
            flagged_lines: self.flagged_count(),
            flags: self.flags.clone(),
        }
    }

    /// Flagged line rows of the forward operator, over the problem unknowns.
    fn data_rows(&self) -> Csr {
        let n = self.grid.len();
        let m = self.lines.n_offsets();
        let d = match self.kind {
            ProblemKind::Scalar => None,
            ProblemKind::Vector => Some((fd_matrix(&self.grid, 0), fd_matrix(&self.grid, 1))),
        };
        let idx: Vec<usize> = (0..self.flags.len()).filter(|&k| self.flags[k]).collect();
        let rows: Vec<Vec<(usize, f64)>> = idx
            .par_iter()
            .map(|&k| {
                let theta = self.lines.angles()[k / m];
                let s = self.lines.offsets()[k % m];
                let row = xray_row(&self.grid, theta, s);
                match &d {
                    None => row,
                    Some((d1, d2)) => {
                        // h = (-∂₂ψ, ∂₁ψ) and h·ω⊥ = sinθ ∂₂ψ + cosθ ∂₁ψ
                        let (sn, c) = (theta.sin(), theta.cos());
                        let a = compose(&row, d2, n, sn);
                        let b = compose(&row, d1, n, c);
                        merge(a, b)
                    }
                }
            })
            .collect();
        let mut out = Csr::new(n);
        for r in rows {
            out.push_row(r);
        }
        out
    }

    /// Constraint rows on V: `P(D)f` or `P(D)(curl ∇⊥ψ)`, split into real parts.
    fn constraint_rows(&self) -> Result<Csr> {
        let n = self.grid.len();
        let cells = self.v.indices();
        let rows = poly_operator_rows(&self.grid, &self.constraint, &cells)?;
        let mut out = Csr::new(n);
        let lap = match self.kind {
            ProblemKind::Scalar => None,
            ProblemKind::Vector => {
                let d1 = fd_matrix(&self.grid, 0);
                let d2 = fd_matrix(&self.grid, 1);
                Some(csr_add(&csr_mul(&d1, &d1), &csr_mul(&d2, &d2)))
            }
        };
        for row in rows {
            for part in [0usize, 1] {
                let real: Vec<(usize, f64)> = row
                    .iter()
                    .map(|&(j, z): &(usize, Complex64)| (j, if part == 0 { z.re } else { z.im }))
                    .filter(|&(_, v)| v != 0.0)
                    .collect();
                if real.is_empty() {
                    continue;
                }
                let composed = match &lap {
                    None => real,
                    Some(l) => compose(&real, l, n, 1.0),
                };
                out.push_row(composed);
            }
        }
        Ok(out)
    }
}

/// JSON description of a partial-data problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub grid: GridSpec,
    pub mask_digest: String,
    pub mask_cells: usize,
    pub angles: Vec<f64>,
    pub n_offsets: usize,
    pub constraint: PolyOperator,
    pub kind: ProblemKind,
    pub lambda: f64,
    pub mu: f64,
    pub flagged_lines: usize,
    pub flags: Vec<bool>,
}

/// First-derivative matrix along `axis` (the stencils of [`crate::fields::partial`]).
fn fd_matrix(grid: &GridSpec, axis: usize) -> Csr {
    let n = grid.n();
    let h = grid.spacing();
    let stride = grid.strides()[axis];
    let mut m = Csr::new(grid.len());
    for k in 0..grid.len() {
        let i = (k / stride) % n;
        let base = k - i * stride;
        let st = axis_stencil(n, h, 1, i);
        m.push_row(st.taps().map(|(j, w)| (base + j * stride, w)).collect::<Vec<_>>());
    }
    m
}

/// `scale · Σ_i row_i · M_i` as a sorted sparse row.
fn compose(row: &[(usize, f64)], m: &Csr, ncols: usize, scale: f64) -> Vec<(usize, f64)> {
    let mut dense = vec![0.0; ncols];
    for &(i, w) in row {
        for (j, v) in m.row(i) {
            dense[j] += scale * w * v;
        }
    }
    dense.into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect()
}

fn merge(a: Vec<(usize, f64)>, b: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut all = a;
    all.extend(b);
    all.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(all.len());
    for (j, v) in all {
        match out.last_mut() {
            Some((k, u)) if *k == j => *u += v,
            _ => out.push((j, v)),
        }
    }
    out
}

fn csr_mul(a: &Csr, b: &Csr) -> Csr {
    let mut out = Csr::new(b.ncols());
    for i in 0..a.nrows() {
        let row: Vec<(usize, f64)> = a.row(i).collect();
        out.push_row(compose(&row, b, b.ncols(), 1.0));
    }
    out
}

fn csr_add(a: &Csr, b: &Csr) -> Csr {
    let mut out = Csr::new(a.ncols());
    for i in 0..a.nrows() {
        out.push_row(merge(a.row(i).collect(), b.row(i).collect()));
    }
    out
}

/// Forward differences divided by `h` along both axes, for the discrete H¹ norm.
fn forward_difference_rows(grid: &GridSpec) -> Csr {
    let n = grid.n();
    let h = grid.spacing();
    let mut g = Csr::new(grid.len());
    for axis in 0..2 {
        let stride = grid.strides()[axis];
        for k in 0..grid.len() {
            let i = (k / stride) % n;
            if i + 1 < n {
                g.push_row([(k, -1.0 / h), (k + stride, 1.0 / h)]);
            }
        }
    }
    g
}

/// Marks entries of lines that miss `V` as missing (NaN).
pub fn restrict_sinogram(g: &Sinogram, v: &RegionMask) -> Result<Sinogram> {
    let flags = lines_through_region(g.lines(), v)?;
    let values = g.values().iter().zip(&flags).map(|(&x, &f)| if f { x } else { f64::NAN }).collect();
    Ok(Sinogram::from_raw(g.lines().clone(), values))
}

/// Stacked matrix `[data rows ; constraint rows (; gauge row)]`.
pub fn combined_matrix(p: &PartialProblem) -> Result<nalgebra::DMatrix<f64>> {
    if p.grid.n() > DENSE_AXIS_CAP {
        return Err(Error::Size(format!("{} nodes per axis exceed the dense cap {DENSE_AXIS_CAP}", p.grid.n())));
    }
    let mut stacked = p.data_rows();
    stacked.append(&p.constraint_rows()?);
    if p.kind == ProblemKind::Vector {
        // the stream function is defined up to a constant
        let scale = (0..stacked.nrows()).map(|i| stacked.row_norm(i)).fold(0.0, f64::max);
        let n = p.grid.len();
        let w = scale / (n as f64).sqrt();
        stacked.push_row((0..n).map(|j| (j, w)));
    }
    Ok(stacked.to_dense())
}

pub fn combined_rank_test(p: &PartialProblem) -> Result<RankReport> {
    Ok(RankReport::from_matrix(&combined_matrix(p)?))
}

/// Minimiser of the constrained Tikhonov problem plus solver diagnostics.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Scalar unknown, or the stream function in the vector case.
    pub unknown: ScalarField,
    /// `∇⊥ψ` in the vector case.
    pub vector: Option<VectorField>,
    pub data_residual: f64,
    pub data_norm: f64,
    pub constraint_residual: f64,
    pub cg: CgReport,
}

/// Solves `min ‖Xf − d‖² + μ‖P(D)f‖²_V + λ‖f‖²_{H¹}` by conjugate
/// gradients on the normal equations (relative tolerance `tol`).
pub fn reconstruct_partial_tol(p: &PartialProblem, data: &Sinogram, tol: f64) -> Result<Reconstruction> {
    if data.lines() != &p.lines {
        return Err(Error::Shape("data and problem use different line sets".into()));
    }
    let mut d = Vec::with_capacity(p.flagged_count());
    for (k, (&v, &f)) in data.values().iter().zip(&p.flags).enumerate() {
        if f {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("flagged line {k} carries no datum")));
            }
            d.push(v);
        }
    }
    let a = p.data_rows();
    let c = p.constraint_rows()?;
    let g = forward_difference_rows(&p.grid);
    let (lambda, mu) = (p.lambda, p.mu());
    let apply = |x: &[f64]| -> Vec<f64> {
        let ata = a.matvec_t(&a.matvec(x));
        let ctc = c.matvec_t(&c.matvec(x));
        let gtg = g.matvec_t(&g.matvec(x));
        (0..x.len()).map(|i| ata[i] + mu * ctc[i] + lambda * (x[i] + gtg[i])).collect()
    };
    let rhs = a.matvec_t(&d);
    let (x, cg) = conjugate_gradient(apply, &rhs, tol, MAX_CG_ITERATIONS)?;
    let ax = a.matvec(&x);
    let data_residual = norm(&ax.iter().zip(&d).map(|(u, v)| u - v).collect::<Vec<_>>());
    let constraint_residual = norm(&c.matvec(&x));
    let unknown = ScalarField::new(p.grid, x)?;
    let vector = match p.kind {
        ProblemKind::Scalar => None,
        ProblemKind::Vector => Some(rotated_gradient(&unknown)?),
    };
    Ok(Reconstruction { unknown, vector, data_residual, data_norm: norm(&d), constraint_residual, cg })
}

pub fn reconstruct_partial(p: &PartialProblem, data: &Sinogram) -> Result<Reconstruction> {
    reconstruct_partial_tol(p, data, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(kind: ProblemKind) -> PartialProblem {
        let g = GridSpec::square(10).unwrap();
        let v = RegionMask::block(g, &[4, 4], 2).unwrap();
        let lines = LineSet::for_grid(&g, 20, 2).unwrap();
        PartialProblem::new(v, lines, PolyOperator::identity(2), kind, 1e-6).unwrap()
    }

    #[test]
    fn full_region_masks_nothing() {
        // offsets within ±L, so every line meets the grid square
        let g = GridSpec::square(12).unwrap();
        let lines = LineSet::uniform(12, 15, 1.0 / 2f64.sqrt()).unwrap();
        let s = Sinogram::zeros(lines);
        let r = restrict_sinogram(&s, &RegionMask::full(g)).unwrap();
        assert_eq!(r.missing_count(), 0);
    }

    #[test]
    fn oversized_dense_assembly_is_refused() {
        let g = GridSpec::square(25).unwrap();
        let v = RegionMask::block(g, &[10, 10], 3).unwrap();
        let lines = LineSet::for_grid(&g, 10, 1).unwrap();
        let p = PartialProblem::new(v, lines, PolyOperator::identity(2), ProblemKind::Scalar, 0.0).unwrap();
        assert!(matches!(combined_rank_test(&p), Err(Error::Size(_))));
    }

    #[test]
    fn vector_data_rows_match_forward_transform() {
        let p = problem(ProblemKind::Vector);
        let psi = ScalarField::from_fn(*p.grid(), |x| (x[0] * 2.0).sin() * (1.0 - x[1] * x[1]));
        let h = rotated_gradient(&psi).unwrap();
        let direct = crate::vectorfield::xray_vector(&h, p.lines()).unwrap();
        let rows = p.data_rows().matvec(psi.values());
        let flagged: Vec<f64> = direct.values().iter().zip(p.flags()).filter(|(_, &f)| f).map(|(&v, _)| v).collect();
        for (a, b) in rows.iter().zip(&flagged) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_data_gives_zero_reconstruction() {
        let p = problem(ProblemKind::Scalar);
        let data = restrict_sinogram(&Sinogram::zeros(p.lines().clone()), p.region()).unwrap();
        let r = reconstruct_partial(&p, &data).unwrap();
        assert!(r.unknown.max_abs() <= 1e-6);
    }
}
