//! Dense fractional Schrödinger sandbox: exterior-value problems,
//! Dirichlet-to-Neumann maps on exterior patches, the Alessandrini
//! identity, Runge approximation and linearised potential recovery.

use crate::error::{Error, Result};
use crate::fields::{axis_stencil, GridSpec, RegionMask, ScalarField};
use crate::fractional::{fractional_laplacian, FracExponent, SpectralPlan};
use crate::linalg::{conjugate_gradient, CgReport};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Largest number of unknowns for dense assembly.
pub const DENSE_CAP: usize = 1024;

/// Dense symmetric matrix of `(-Δ)^s` on a planar grid.
#[derive(Clone, Debug)]
pub struct FracOperatorMatrix {
    grid: GridSpec,
    s: FracExponent,
    matrix: DMatrix<f64>,
    symmetry_defect: f64,
}

impl FracOperatorMatrix {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn exponent(&self) -> FracExponent {
        self.s
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `‖M − Mᵀ‖_F / ‖M‖_F` before symmetrisation.
    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(f.grid())?;
        let v = &self.matrix * DVector::from_column_slice(f.values());
        ScalarField::new(self.grid, v.as_slice().to_vec())
    }

    /// Smallest and largest eigenvalues.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.matrix.clone()).eigenvalues;
        (eig.min(), eig.max())
    }
}

/// Column `j` is `(-Δ)^s e_j`; the result is averaged with its transpose.
pub fn assemble_fractional_matrix(grid: &GridSpec, s: FracExponent, plan: &SpectralPlan) -> Result<FracOperatorMatrix> {
    grid.require_2d("the Calderón sandbox is planar")?;
    let n = grid.len();
    if n > DENSE_CAP {
        return Err(Error::Size(format!("{n} unknowns exceed the dense cap {DENSE_CAP}")));
    }
    if !(s.value() > 0.0 && s.value() <= 2.0) {
        return Err(Error::Domain(format!("s = {} must lie in (0, 2]", s.value())));
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            fractional_laplacian(&ScalarField::new(*grid, e)?, s, plan).map(|c| c.into_values())
        })
        .collect::<Result<_>>()?;
    let raw = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let defect = (&raw - raw.transpose()).norm() / raw.norm();
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(FracOperatorMatrix { grid: *grid, s, matrix, symmetry_defect: defect })
}

/// Ω, its exterior Ω_e, and the exterior patches W₁ (inputs), W₂ (outputs).
#[derive(Clone, Debug)]
pub struct DomainSplit {
    omega: RegionMask,
    exterior: RegionMask,
    w1: RegionMask,
    w2: RegionMask,
}

impl DomainSplit {
    pub fn new(omega: RegionMask, w1: RegionMask, w2: RegionMask) -> Result<Self> {
        omega.grid().check_same(w1.grid())?;
        omega.grid().check_same(w2.grid())?;
        if omega.is_empty() {
            return Err(Error::Placement("Ω is empty".into()));
        }
        if omega.touches_boundary() {
            return Err(Error::Placement("Ω must lie strictly inside the grid".into()));
        }
        if w1.is_empty() || w2.is_empty() {
            return Err(Error::Placement("W₁ and W₂ must be nonempty".into()));
        }
        if !w1.is_disjoint_from(&omega) || !w2.is_disjoint_from(&omega) {
            return Err(Error::Placement("W₁ and W₂ must lie in the exterior of Ω".into()));
        }
        let exterior = omega.complement();
        Ok(Self { omega, exterior, w1, w2 })
    }

    /// Ω = disk of radius `0.5L`, W₁ = first three rows of nodes along
    /// axis 0, W₂ = last three.
    pub fn standard(grid: GridSpec) -> Result<Self> {
        let n = grid.n();
        let omega = RegionMask::disk(grid, &[0.0, 0.0], 0.5 * grid.extent());
        let inside1: Vec<bool> = (0..grid.len()).map(|k| grid.unravel(k)[0] < 3).collect();
        let inside2: Vec<bool> = (0..grid.len()).map(|k| grid.unravel(k)[0] + 3 >= n).collect();
        Self::new(omega, RegionMask::new(grid, inside1)?, RegionMask::new(grid, inside2)?)
    }

    pub fn omega(&self) -> &RegionMask {
        &self.omega
    }

    pub fn exterior(&self) -> &RegionMask {
        &self.exterior
    }

    pub fn w1(&self) -> &RegionMask {
        &self.w1
    }

    pub fn w2(&self) -> &RegionMask {
        &self.w2
    }

    pub fn grid(&self) -> &GridSpec {
        self.omega.grid()
    }
}

/// Lower-order perturbation supported in Ω: a potential `q` (order 0) or
/// a real drift `b₁∂₁ + b₂∂₂` (order 1).
#[derive(Clone, Debug, PartialEq)]
pub enum Perturbation {
    Potential(ScalarField),
    Drift(ScalarField, ScalarField),
}

impl Perturbation {
    pub fn zero(grid: GridSpec) -> Self {
        Perturbation::Potential(ScalarField::zeros(grid))
    }

    /// Potential clipped to Ω.
    pub fn potential(q: &ScalarField, split: &DomainSplit) -> Result<Self> {
        Ok(Perturbation::Potential(q.masked(split.omega())?))
    }

    /// Drift clipped to Ω; requires `2s > 1`.
    pub fn drift(b1: &ScalarField, b2: &ScalarField, split: &DomainSplit, s: FracExponent) -> Result<Self> {
        if 2.0 * s.value() <= 1.0 {
            return Err(Error::Domain(format!("first-order perturbations need 2s > 1, got s = {}", s.value())));
        }
        Ok(Perturbation::Drift(b1.masked(split.omega())?, b2.masked(split.omega())?))
    }

    pub fn order(&self) -> usize {
        match self {
            Perturbation::Potential(_) => 0,
            Perturbation::Drift(..) => 1,
        }
    }

    /// `(A + P)` as a dense matrix.
    fn full_operator(&self, a: &FracOperatorMatrix) -> Result<DMatrix<f64>> {
        let grid = a.grid;
        let mut m = a.matrix.clone();
        match self {
            Perturbation::Potential(q) => {
                grid.check_same(q.grid())?;
                for (k, &v) in q.values().iter().enumerate() {
                    m[(k, k)] += v;
                }
            }
            Perturbation::Drift(b1, b2) => {
                grid.check_same(b1.grid())?;
                let n = grid.n();
                let h = grid.spacing();
                let strides = grid.strides();
                for (axis, b) in [b1, b2].into_iter().enumerate() {
                    for (k, &coef) in b.values().iter().enumerate() {
                        if coef == 0.0 {
                            continue;
                        }
                        let i = grid.unravel(k)[axis];
                        let base = k - i * strides[axis];
                        for (j, w) in axis_stencil(n, h, 1, i).taps() {
                            m[(k, base + j * strides[axis])] += coef * w;
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}

/// How interior systems are solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolveMethod {
    /// LU with a relative pivot check.
    Direct,
    /// Conjugate gradients to the given relative residual; the interior
    /// block must be symmetric positive definite.
    ConjugateGradient { tol: f64 },
}

/// Factorised exterior-value problem for one operator and perturbation.
pub struct ExteriorSolver {
    grid: GridSpec,
    op: DMatrix<f64>,
    interior: Vec<usize>,
    exterior: Vec<usize>,
    block: DMatrix<f64>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    method: SolveMethod,
}

/// Relative pivot size below which the interior block counts as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

impl ExteriorSolver {
    pub fn new(a: &FracOperatorMatrix, split: &DomainSplit, pert: &Perturbation) -> Result<Self> {
        Self::with_method(a, split, pert, SolveMethod::Direct)
    }

    pub fn with_method(
        a: &FracOperatorMatrix,
        split: &DomainSplit,
        pert: &Perturbation,
        method: SolveMethod,
    ) -> Result<Self> {
        a.grid.check_same(split.grid())?;
        let op = pert.full_operator(a)?;
        let interior = split.omega().indices();
        let exterior = split.exterior().indices();
        let block = op.select_rows(&interior).select_columns(&interior);
        let lu = match method {
            SolveMethod::Direct => {
                let lu = block.clone().lu();
                let u = lu.u();
                let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
                let big = diag.iter().copied().fold(0.0, f64::max);
                let small = diag.iter().copied().fold(f64::INFINITY, f64::min);
                if !(small > PIVOT_TOLERANCE * big) {
                    return Err(Error::DirichletEigenvalue(format!(
                        "smallest LU pivot {small:.3e} vs largest {big:.3e}"
                    )));
                }
                Some(lu)
            }
            SolveMethod::ConjugateGradient { .. } => None,
        };
        Ok(Self { grid: a.grid, op, interior, exterior, block, lu, method })
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.op
    }

    /// `u` with `u = f` on Ω_e and `(A+P)u = 0` on Ω.
    pub fn solve(&self, f: &ScalarField) -> Result<ScalarField> {
        self.solve_report(f).map(|(u, _)| u)
    }

    pub fn solve_report(&self, f: &ScalarField) -> Result<(ScalarField, Option<CgReport>)> {
        self.grid.check_same(f.grid())?;
        let fv = f.values();
        let mut rhs = DVector::zeros(self.interior.len());
        for (r, &i) in self.interior.iter().enumerate() {
            let mut acc = 0.0;
            for &j in &self.exterior {
                let fj = fv[j];
                if fj != 0.0 {
                    acc += self.op[(i, j)] * fj;
                }
            }
            rhs[r] = -acc;
        }
        let (sol, report) = match (&self.lu, self.method) {
            (Some(lu), _) => {
                (lu.solve(&rhs).ok_or_else(|| Error::DirichletEigenvalue("LU solve failed".into()))?, None)
            }
            (None, SolveMethod::ConjugateGradient { tol }) => {
                let block = &self.block;
                let (x, rep) = conjugate_gradient(
                    |v| (block * DVector::from_column_slice(v)).as_slice().to_vec(),
                    rhs.as_slice(),
                    tol,
                    10 * self.interior.len().max(100),
                )?;
                (DVector::from_vec(x), Some(rep))
            }
            (None, SolveMethod::Direct) => unreachable!("direct solvers always factorise"),
        };
        let mut u = fv.to_vec();
        for &i in &self.interior {
            u[i] = 0.0;
        }
        for (r, &i) in self.interior.iter().enumerate() {
            u[i] = sol[r];
        }
        Ok((ScalarField::new(self.grid, u)?, report))
    }

    /// `max_{Ω} |(A+P)u| / ‖(A+P)_{Ω,Ω_e} f‖_∞`.
    pub fn interior_residual(&self, u: &ScalarField) -> f64 {
        let v = &self.op * DVector::from_column_slice(u.values());
        let scale = self
            .interior
            .iter()
            .map(|&i| self.exterior.iter().map(|&j| (self.op[(i, j)] * u.values()[j]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let res = self.interior.iter().map(|&i| v[i].abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            res
        } else {
            res / scale
        }
    }

    /// `(A+P)u` on the cells of `mask`.
    pub fn current_on(&self, u: &ScalarField, mask: &RegionMask) -> Vec<f64> {
        let cells = mask.indices();
        cells.iter().map(|&i| (0..self.op.ncols()).map(|j| self.op[(i, j)] * u.values()[j]).sum()).collect()
    }
}

pub fn solve_exterior_problem(
    a: &FracOperatorMatrix,
    split: &DomainSplit,
    pert: &Perturbation,
    f: &ScalarField,
) -> Result<ScalarField> {
    ExteriorSolver::new(a, split, pert)?.solve(f)
}

/// Unit exterior value at one cell.
fn basis(grid: GridSpec, cell: usize) -> ScalarField {
    let mut v = vec![0.0; grid.len()];
    v[cell] = 1.0;
    ScalarField::new(grid, v).expect("finite")
}

/// `Λ` with rows indexed by W₂ cells and columns by W₁ cells.
pub fn dn_map_with(solver: &ExteriorSolver, split: &DomainSplit) -> Result<DMatrix<f64>> {
    let grid = *split.grid();
    let inputs = split.w1().indices();
    let outputs = split.w2().indices();
    let cols: Vec<Vec<f64>> = inputs
        .par_iter()
        .map(|&c| {
            let u = solver.solve(&basis(grid, c))?;
            let au = &solver.op * DVector::from_column_slice(u.values());
            Ok(outputs.iter().map(|&o| au[o]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(outputs.len(), inputs.len(), |i, j| cols[j][i]))
}

pub fn dn_map(a: &FracOperatorMatrix, split: &DomainSplit, pert: &Perturbation) -> Result<DMatrix<f64>> {
    dn_map_with(&ExteriorSolver::new(a, split, pert)?, split)
}

/// Both sides of the Alessandrini identity for one pair of exterior values.
#[derive(Clone, Copy, Debug)]
pub struct AlessandriniPair {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_residual: f64,
}

/// `n` seeded random pairs `(f₁, f₂)` with `f₁` on W₁ and `f₂` on W₂.
pub fn random_trial_pairs(split: &DomainSplit, n: usize, seed: u64) -> Vec<(ScalarField, ScalarField)> {
    let grid = *split.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_on = |mask: &RegionMask| -> ScalarField {
        let v = (0..grid.len()).map(|k| if mask.contains(k) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
        ScalarField::new(grid, v).expect("finite")
    };
    (0..n).map(|_| (random_on(split.w1()), random_on(split.w2()))).collect()
}

/// Checks `⟨(Λ₁ − Λ₂)f₁, f₂⟩ = Σ_Ω (q₁ − q₂) u₁ u₂` for each pair. The
/// residual is scaled by `Σ_Ω |q₁ − q₂||u₁||u₂|`, and left absolute when
/// that vanishes.
pub fn alessandrini_check(
    a: &FracOperatorMatrix,
    split: &DomainSplit,
    p1: &Perturbation,
    p2: &Perturbation,
    pairs: &[(ScalarField, ScalarField)],
    method: SolveMethod,
) -> Result<Vec<AlessandriniPair>> {
    let (Perturbation::Potential(q1), Perturbation::Potential(q2)) = (p1, p2) else {
        return Err(Error::Domain("the Alessandrini identity is checked for potentials only".into()));
    };
    let s1 = ExteriorSolver::with_method(a, split, p1, method)?;
    let s2 = ExteriorSolver::with_method(a, split, p2, method)?;
    let w2 = split.w2().indices();
    let omega = split.omega().indices();
    pairs
        .iter()
        .map(|(f1, f2)| {
            // left side: exterior currents of both problems, paired with f₂
            let u1 = s1.solve(f1)?;
            let j1 = s1.current_on(&u1, split.w2());
            let j2 = s2.current_on(&s2.solve(f1)?, split.w2());
            let lhs: f64 = w2.iter().zip(j1.iter().zip(&j2)).map(|(&c, (a, b))| (a - b) * f2.values()[c]).sum();
            // right side: interior pairing of u₁ (q₁, f₁) and u₂ (q₂, f₂)
            let u2 = s2.solve(f2)?;
            let (mut rhs, mut scale) = (0.0, 0.0);
            for &k in &omega {
                let t = (q1.values()[k] - q2.values()[k]) * u1.values()[k] * u2.values()[k];
                rhs += t;
                scale += t.abs();
            }
            let diff = (lhs - rhs).abs();
            let rel = if scale > 0.0 { diff / scale } else { diff };
            Ok(AlessandriniPair { lhs, rhs, relative_residual: rel })
        })
        .collect()
}

/// Largest relative residual of [`alessandrini_check`] with direct solves.
pub fn alessandrini_residual(
    a: &FracOperatorMatrix,
    split: &DomainSplit,
    p1: &Perturbation,
    p2: &Perturbation,
    pairs: &[(ScalarField, ScalarField)],
) -> Result<f64> {
    let checks = alessandrini_check(a, split, p1, p2, pairs, SolveMethod::Direct)?;
    Ok(checks.iter().map(|p| p.relative_residual).fold(0.0, f64::max))
}

/// Relative least-squares error of fitting `target|_Ω` by the first
/// `k = 1..=n_basis` solutions `u_{e_j}|_Ω`, `e_j` running over W₁.
pub fn runge_demo(
    a: &FracOperatorMatrix,
    split: &DomainSplit,
    target: &ScalarField,
    n_basis: usize,
) -> Result<Vec<f64>> {
    let grid = *split.grid();
    let solver = ExteriorSolver::new(a, split, &Perturbation::zero(grid))?;
    let omega = split.omega().indices();
    let t: DVector<f64> = DVector::from_iterator(omega.len(), omega.iter().map(|&k| target.values()[k]));
    let tnorm = t.norm();
    if tnorm == 0.0 {
        return Err(Error::Degenerate("target vanishes on Ω".into()));
    }
    let inputs = split.w1().indices();
    let n_basis = n_basis.min(inputs.len());
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut residual = t.clone();
    let mut errors = Vec::with_capacity(n_basis);
    for &c in inputs.iter().take(n_basis) {
        let u = solver.solve(&basis(grid, c))?;
        let mut v = DVector::from_iterator(omega.len(), omega.iter().map(|&k| u.values()[k]));
        let orig = v.norm();
        // modified Gram–Schmidt, applied twice
        for _ in 0..2 {
            for b in &q {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let vn = v.norm();
        if vn > 1e-12 * orig {
            v /= vn;
            let proj = v.dot(&residual);
            residual.axpy(-proj, &v, 1.0);
            q.push(v);
        }
        errors.push(residual.norm() / tnorm);
    }
    Ok(errors)
}

/// Linearised potential estimate and its data residual.
#[derive(Clone, Debug)]
pub struct LinearizedRecovery {
    pub q: ScalarField,
    pub residual: f64,
}

/// Solves `M q ≈ vec(Λ − Λ₀)` with `M[(j,i), x] = u⁰_i(x) u⁰_j(x)` over Ω and
/// Tikhonov weight `λ_reg·‖M‖₂²`.
pub fn recover_potential_linearized(
    a: &FracOperatorMatrix,
    split: &DomainSplit,
    lambda_measured: &DMatrix<f64>,
    lambda_reg: f64,
) -> Result<LinearizedRecovery> {
    let grid = *split.grid();
    let solver = ExteriorSolver::new(a, split, &Perturbation::zero(grid))?;
    let lambda0 = dn_map_with(&solver, split)?;
    if lambda_measured.shape() != lambda0.shape() {
        return Err(Error::Shape(format!(
            "measured DN map is {:?}, expected {:?}",
            lambda_measured.shape(),
            lambda0.shape()
        )));
    }
    if !(lambda_reg >= 0.0) {
        return Err(Error::Config("λ_reg must be non-negative".into()));
    }
    let omega = split.omega().indices();
    let solutions = |mask: &RegionMask| -> Result<Vec<Vec<f64>>> {
        mask.indices()
            .par_iter()
            .map(|&c| solver.solve(&basis(grid, c)).map(|u| omega.iter().map(|&k| u.values()[k]).collect()))
            .collect()
    };
    let u_in = solutions(split.w1())?;
    let u_out = solutions(split.w2())?;
    let (n2, n1) = lambda0.shape();
    let m = DMatrix::from_fn(n2 * n1, omega.len(), |r, x| {
        let (j, i) = (r / n1, r % n1);
        u_in[i][x] * u_out[j][x]
    });
    let d = DVector::from_fn(n2 * n1, |r, _| {
        let (j, i) = (r / n1, r % n1);
        lambda_measured[(j, i)] - lambda0[(j, i)]
    });
    let mt = m.transpose();
    let sigma_max = m.clone().singular_values().max();
    let mut normal = &mt * &m;
    let tau = lambda_reg * sigma_max * sigma_max;
    for k in 0..normal.nrows() {
        normal[(k, k)] += tau;
    }
    let rhs = &mt * &d;
    let sol = normal
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| normal.lu().solve(&rhs))
        .ok_or_else(|| Error::Degenerate("linearised system is singular".into()))?;
    let residual = (&m * &sol - &d).norm();
    let mut q = vec![0.0; grid.len()];
    for (x, &k) in omega.iter().enumerate() {
        q[k] = sol[x];
    }
    Ok(LinearizedRecovery { q: ScalarField::new(grid, q)?, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, s: f64) -> (FracOperatorMatrix, DomainSplit) {
        let g = GridSpec::square(n).unwrap();
        let plan = SpectralPlan::default_for(g);
        let a = assemble_fractional_matrix(&g, FracExponent::new(s, 2).unwrap(), &plan).unwrap();
        (a, DomainSplit::standard(g).unwrap())
    }

    #[test]
    fn size_cap_enforced() {
        let g = GridSpec::square(33).unwrap();
        let plan = SpectralPlan::default_for(g);
        let r = assemble_fractional_matrix(&g, FracExponent::new(0.5, 2).unwrap(), &plan);
        assert!(matches!(r, Err(Error::Size(_))));
    }

    #[test]
    fn zero_exterior_value_gives_zero_solution() {
        let (a, split) = setup(12, 0.7);
        let q = ScalarField::constant(*a.grid(), 0.3);
        let p = Perturbation::potential(&q, &split).unwrap();
        let u = solve_exterior_problem(&a, &split, &p, &ScalarField::zeros(*a.grid())).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn drift_needs_two_s_above_one() {
        let (a, split) = setup(12, 0.7);
        let z = ScalarField::zeros(*a.grid());
        let r = Perturbation::drift(&z, &z, &split, FracExponent::new(0.4, 2).unwrap());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn split_validation() {
        let g = GridSpec::square(12).unwrap();
        let omega = RegionMask::disk(g, &[0.0, 0.0], 0.5);
        let edge = RegionMask::block(g, &[0, 0], 2).unwrap();
        assert!(DomainSplit::new(omega.clone(), omega.clone(), edge.clone()).is_err());
        assert!(DomainSplit::new(edge.clone(), omega.clone(), omega).is_err());
    }

    #[test]
    fn runge_errors_do_not_increase() {
        let (a, split) = setup(12, 0.7);
        let target = ScalarField::from_fn(*a.grid(), |x| (-(x[0] * x[0] + x[1] * x[1]) * 8.0).exp());
        let errs = runge_demo(&a, &split, &target, 36).unwrap();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
