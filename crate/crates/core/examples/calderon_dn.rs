//! Nonlocal Calderón sandbox: assemble (-Δ)^s on a small grid, solve the
//! exterior problem, and compare Dirichlet-to-Neumann maps for different
//! potentials.

use tomolab::calderon::{
    alessandrini_residual, assemble_fractional_matrix, dn_map, random_trial_pairs, recover_potential_linearized,
    runge_demo, DomainSplit, Perturbation,
};
use tomolab::spectral::{FracExponent, SpectralPlan};
use tomolab::{GridSpec, ScalarField};

fn gaussian(grid: GridSpec, c: [f64; 2], sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * sigma * sigma)).exp())
}

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(16)?;
    let s = FracExponent::new(0.7, 2)?;
    let a = assemble_fractional_matrix(&grid, s, &SpectralPlan::default_for(grid))?;
    let split = DomainSplit::standard(grid)?;
    println!(
        "Ω has {} cells, W1 {} and W2 {}; operator eigenvalues in {:?}",
        split.omega().count(),
        split.w1().count(),
        split.w2().count(),
        a.eigenvalue_range()
    );

    let bump = gaussian(grid, [0.05, -0.05], 0.12);
    let q1 = Perturbation::potential(&bump, &split)?;
    let q2 = Perturbation::potential(&bump.scaled(0.3).add(&gaussian(grid, [-0.15, 0.1], 0.1).scaled(0.5))?, &split)?;
    let lam0 = dn_map(&a, &split, &Perturbation::zero(grid))?;
    let lam1 = dn_map(&a, &split, &q1)?;
    println!("‖Λ_q - Λ_0‖ / ‖Λ_0‖ = {:.3e}", (&lam1 - &lam0).norm() / lam0.norm());

    let pairs = random_trial_pairs(&split, 10, 5);
    println!("Alessandrini identity residual: {:.2e}", alessandrini_residual(&a, &split, &q1, &q2, &pairs)?);

    let target = gaussian(grid, [0.1, 0.05], 0.15);
    let curve = runge_demo(&a, &split, &target, split.w1().count())?;
    println!("Runge approximation error with 1, 4, 16, all W1 cells:");
    for k in [1, 4, 16, curve.len()] {
        println!("  {k:>3}: {:.3e}", curve[k.min(curve.len()) - 1]);
    }

    // small potentials are recovered from the linearised DN map
    let g = GridSpec::square(12)?;
    let a12 = assemble_fractional_matrix(&g, s, &SpectralPlan::default_for(g))?;
    let split12 = DomainSplit::standard(g)?;
    let qstar = gaussian(g, [0.05, -0.05], 0.12).scaled(0.05).masked(split12.omega())?;
    let measured = dn_map(&a12, &split12, &Perturbation::potential(&qstar, &split12)?)?;
    let rec = recover_potential_linearized(&a12, &split12, &measured, 1e-6)?;
    println!(
        "linearised recovery: max error {:.2e} vs max q {:.2e}",
        rec.q.sub(&qstar)?.masked(split12.omega())?.max_abs(),
        qstar.max_abs()
    );
    Ok(())
}
