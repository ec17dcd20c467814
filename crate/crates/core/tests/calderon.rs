mod common;

use common::{gaussian, poly_bump};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use tomolab::calderon::*;
use tomolab::fields::second_partial;
use tomolab::fractional::{FracExponent, SpectralPlan};
use tomolab::xray::relative_error_on;
use tomolab::{Error, GridSpec, RegionMask, ScalarField};

fn setup(n: usize, s: f64) -> (FracOperatorMatrix, DomainSplit) {
    let g = GridSpec::square(n).unwrap();
    let a = assemble_fractional_matrix(&g, FracExponent::new(s, 2).unwrap(), &SpectralPlan::default_for(g)).unwrap();
    (a, DomainSplit::standard(g).unwrap())
}

fn bump(g: GridSpec) -> ScalarField {
    let b = gaussian(g, [0.05, -0.05], 0.12);
    b.scaled(1.0 / b.max_abs())
}

fn exterior_values(split: &DomainSplit, seed: u64) -> ScalarField {
    random_trial_pairs(split, 1, seed).remove(0).0
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn integer_power_matrix_matches_five_point_stencil() {
    let (a, _) = setup(32, 1.0);
    let g = *a.grid();
    let f = poly_bump(g, [0.0, 0.0], 0.95);
    let af = a.apply(&f).unwrap();
    let fd = second_partial(&f, 0).lin_comb(-1.0, &second_partial(&f, 1), -1.0).unwrap();
    let err = relative_error_on(&af, &fd, &RegionMask::disk(g, &[0.0, 0.0], 0.8)).unwrap();
    assert!(err <= 1e-2, "{err}");
}

#[test]
fn matrix_is_symmetric_and_semidefinite() {
    let (a, _) = setup(16, 0.7);
    assert!(a.symmetry_defect() <= 1e-9);
    let m = a.matrix();
    assert_eq!(m, &m.transpose());
    let (lo, hi) = a.eigenvalue_range();
    assert!(lo >= -1e-8 * hi, "{lo} {hi}");
}

#[test]
fn assembly_size_is_capped() {
    let g = GridSpec::square(33).unwrap();
    let r = assemble_fractional_matrix(&g, FracExponent::new(0.5, 2).unwrap(), &SpectralPlan::default_for(g));
    assert!(matches!(r, Err(Error::Size(_))));
    let g = GridSpec::square(8).unwrap();
    assert!(assemble_fractional_matrix(&g, FracExponent::new(-0.5, 2).unwrap(), &SpectralPlan::default_for(g)).is_err());
}

#[test]
fn split_is_validated() {
    let g = GridSpec::square(12).unwrap();
    let omega = RegionMask::disk(g, &[0.0, 0.0], 0.5);
    let edge = RegionMask::block(g, &[0, 0], 2).unwrap();
    assert!(DomainSplit::new(RegionMask::full(g), edge.clone(), edge.clone()).is_err());
    assert!(DomainSplit::new(omega.clone(), omega.clone(), edge.clone()).is_err());
    assert!(DomainSplit::new(omega.clone(), RegionMask::empty(g), edge.clone()).is_err());
    assert!(DomainSplit::new(omega, edge.clone(), edge).is_ok());
}

#[test]
fn exterior_problem_basics() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let q = Perturbation::potential(&bump(g), &split).unwrap();
    let solver = ExteriorSolver::new(&a, &split, &q).unwrap();
    assert_eq!(solver.solve(&ScalarField::zeros(g)).unwrap().max_abs(), 0.0);

    let f = exterior_values(&split, 3);
    let u = solver.solve(&f).unwrap();
    for k in split.exterior().indices() {
        assert_eq!(u.values()[k].to_bits(), f.values()[k].to_bits());
    }
    let u2 = solver.solve(&f.scaled(2.0)).unwrap();
    assert!(u2.sub(&u.scaled(2.0)).unwrap().max_abs() <= 1e-12 * u.max_abs());

    let free = ExteriorSolver::new(&a, &split, &Perturbation::zero(g)).unwrap();
    let u0 = free.solve(&f).unwrap();
    assert!(free.interior_residual(&u0) <= 1e-10);
    assert_eq!(solve_exterior_problem(&a, &split, &Perturbation::zero(g), &f).unwrap(), u0);
}

#[test]
fn dn_map_symmetry_and_zero_difference() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let zero = Perturbation::zero(g);
    assert_eq!(dn_map(&a, &split, &zero).unwrap() - dn_map(&a, &split, &zero).unwrap(), DMatrix::zeros(48, 48));
    let same = DomainSplit::new(split.omega().clone(), split.w1().clone(), split.w1().clone()).unwrap();
    let q = Perturbation::potential(&bump(g), &same).unwrap();
    let lam = dn_map(&a, &same, &q).unwrap();
    assert!(rel(&lam, &lam.transpose()) <= 1e-8);
}

#[test]
fn dn_maps_distinguish_potentials_and_drifts() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let l0 = dn_map(&a, &split, &Perturbation::zero(g)).unwrap();
    let lq = dn_map(&a, &split, &Perturbation::potential(&bump(g), &split).unwrap()).unwrap();
    assert!((&lq - &l0).norm() >= 1e-8 * l0.norm());

    let (a, split) = setup(16, 0.75);
    let s = a.exponent();
    let b = bump(g);
    let drift = Perturbation::drift(&b, &b.scaled(-0.5), &split, s).unwrap();
    let l0 = dn_map(&a, &split, &Perturbation::zero(g)).unwrap();
    let lb = dn_map(&a, &split, &drift).unwrap();
    assert!((&lb - &l0).norm() >= 1e-8 * l0.norm());
    assert!(Perturbation::drift(&b, &b, &split, FracExponent::new(0.5, 2).unwrap()).is_err());
}

#[test]
fn coefficients_outside_omega_are_ignored() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let q = bump(g);
    let noisy = q.add(&ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) > 0.6 { 5.0 } else { 0.0 })).unwrap();
    let l1 = dn_map(&a, &split, &Perturbation::potential(&q, &split).unwrap()).unwrap();
    let l2 = dn_map(&a, &split, &Perturbation::potential(&noisy, &split).unwrap()).unwrap();
    assert_eq!(l1, l2);
}

#[test]
fn alessandrini_identity() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let q1 = Perturbation::potential(&bump(g), &split).unwrap();
    let q2 =
        Perturbation::potential(&bump(g).scaled(0.3).add(&gaussian(g, [-0.15, 0.1], 0.1).scaled(0.5)).unwrap(), &split)
            .unwrap();
    let pairs = random_trial_pairs(&split, 20, 9);
    assert!(alessandrini_residual(&a, &split, &q1, &q2, &pairs).unwrap() <= 1e-8);

    let same = alessandrini_check(&a, &split, &q1, &q1, &pairs, SolveMethod::Direct).unwrap();
    assert!(same.iter().all(|p| p.lhs.abs() <= 1e-10 && p.rhs == 0.0));

    // swapping the potentials negates the left side
    let fwd = alessandrini_check(&a, &split, &q1, &q2, &pairs, SolveMethod::Direct).unwrap();
    let back = alessandrini_check(&a, &split, &q2, &q1, &pairs, SolveMethod::Direct).unwrap();
    for (x, y) in fwd.iter().zip(&back) {
        assert!((x.lhs + y.lhs).abs() <= 1e-8 * x.lhs.abs().max(1e-300));
    }

    let b = bump(g);
    let drift = Perturbation::drift(&b, &b, &split, FracExponent::new(0.75, 2).unwrap()).unwrap();
    assert!(alessandrini_residual(&a, &split, &q1, &drift, &pairs).is_err());
}

#[test]
fn alessandrini_residual_tracks_solver_tolerance() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let q1 = Perturbation::potential(&bump(g), &split).unwrap();
    let q2 = Perturbation::potential(&bump(g).scaled(0.4), &split).unwrap();
    let pairs = random_trial_pairs(&split, 20, 2);
    let tols: Vec<f64> = (0..10).map(|k| 1e-4 * 0.5f64.powi(k)).collect();
    let mean_gap: Vec<f64> = tols
        .iter()
        .map(|&tol| {
            let c = alessandrini_check(&a, &split, &q1, &q2, &pairs, SolveMethod::ConjugateGradient { tol }).unwrap();
            c.iter().map(|p| (p.lhs - p.rhs).abs()).sum::<f64>() / c.len() as f64
        })
        .collect();
    let slope = (mean_gap[0] / mean_gap[9]).ln() / (tols[0] / tols[9]).ln();
    assert!((0.5..=2.0).contains(&slope), "{slope} {mean_gap:?}");
    // single halvings follow once CG is past its first few iterations
    for w in mean_gap[3..].windows(2) {
        assert!((0.5..=8.0).contains(&(w[0] / w[1])), "{mean_gap:?}");
    }
}

#[test]
fn dirichlet_eigenvalue_is_detected() {
    let (a, split) = setup(12, 0.7);
    let g = *a.grid();
    let omega = split.omega().indices();
    let block = a.matrix().select_rows(&omega).select_columns(&omega);
    let lam_min = SymmetricEigen::new(block).eigenvalues.min();
    let q = ScalarField::constant(g, -lam_min);
    let pert = Perturbation::potential(&q, &split).unwrap();
    assert!(matches!(ExteriorSolver::new(&a, &split, &pert), Err(Error::DirichletEigenvalue(_))));
    // the solution blows up as c approaches the eigenvalue
    let f = exterior_values(&split, 4);
    let size = |c: f64| {
        let p = Perturbation::potential(&ScalarField::constant(g, c), &split).unwrap();
        ExteriorSolver::new(&a, &split, &p).unwrap().solve(&f).unwrap().max_abs()
    };
    let (far, near) = (size(-0.5 * lam_min), size(-(1.0 - 1e-6) * lam_min));
    assert!(near > 1e3 * far, "{far} {near}");
}

#[test]
fn runge_approximation() {
    let (a, split) = setup(16, 0.7);
    let g = *a.grid();
    let zero = ExteriorSolver::new(&a, &split, &Perturbation::zero(g)).unwrap();
    let cells = split.w1().indices();
    let mut f = vec![0.0; g.len()];
    f[cells[2]] = 1.0;
    f[cells[4]] = -0.5;
    let member = zero.solve(&ScalarField::new(g, f).unwrap()).unwrap();
    let errs = runge_demo(&a, &split, &member, 8).unwrap();
    assert!(errs[4] <= 1e-10, "{errs:?}");

    let target = bump(g).masked(split.omega()).unwrap();
    let errs = runge_demo(&a, &split, &target, cells.len()).unwrap();
    assert!(errs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(*errs.last().unwrap() <= 0.1, "{}", errs.last().unwrap());
    assert!(matches!(runge_demo(&a, &split, &ScalarField::zeros(g), 4), Err(Error::Degenerate(_))));
}

#[test]
fn linearized_recovery() {
    let (a, split) = setup(12, 0.7);
    let g = *a.grid();
    let l0 = dn_map(&a, &split, &Perturbation::zero(g)).unwrap();
    assert!(recover_potential_linearized(&a, &split, &l0, 1e-6).unwrap().q.max_abs() <= 1e-8);

    let truth = bump(g).scaled(0.05).masked(split.omega()).unwrap();
    let measured = dn_map(&a, &split, &Perturbation::potential(&truth, &split).unwrap()).unwrap();
    let est = recover_potential_linearized(&a, &split, &measured, 1e-6).unwrap();
    let omega = split.omega().indices();
    let (mut num, mut den) = (0.0, 0.0);
    for &k in &omega {
        num += (est.q.values()[k] - truth.values()[k]).powi(2);
        den += truth.values()[k].powi(2);
    }
    assert!((num / den).sqrt() <= 0.3, "{}", (num / den).sqrt());

    let doubled = &l0 + (&measured - &l0) * 2.0;
    let est2 = recover_potential_linearized(&a, &split, &doubled, 1e-6).unwrap();
    assert!(est2.q.sub(&est.q.scaled(2.0)).unwrap().max_abs() <= 1e-8 * est.q.max_abs());
    assert!(matches!(recover_potential_linearized(&a, &split, &DMatrix::zeros(3, 3), 1e-6), Err(Error::Shape(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dn_map_is_linear_in_exterior_values(seed in 0u64..1000, alpha in -3.0f64..3.0) {
        let (a, split) = setup(10, 0.6);
        let g = *a.grid();
        let solver = ExteriorSolver::new(&a, &split, &Perturbation::potential(&bump(g), &split).unwrap()).unwrap();
        let f1 = exterior_values(&split, seed);
        let f2 = exterior_values(&split, seed + 1);
        let u = solver.solve(&f1.lin_comb(alpha, &f2, 1.0).unwrap()).unwrap();
        let v = solver.solve(&f1).unwrap().lin_comb(alpha, &solver.solve(&f2).unwrap(), 1.0).unwrap();
        prop_assert!(u.sub(&v).unwrap().max_abs() <= 1e-10 * (1.0 + v.max_abs()));
    }
}
