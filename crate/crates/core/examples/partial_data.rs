//! Partial data: only lines through a small window V are measured, and the
//! unknown is known to vanish on V. Check the rank of the stacked system
//! and reconstruct by constrained Tikhonov + CG.

use tomolab::fields::{l2_norm, PolyOperator};
use tomolab::partialdata::{combined_rank_test, reconstruct_partial, restrict_sinogram, PartialProblem, ProblemKind};
use tomolab::xray::{xray_forward, LineSet};
use tomolab::{GridSpec, RegionMask, ScalarField};

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(16)?;
    let n = grid.n();
    let v = RegionMask::block(grid, &[n / 2 - 2, n / 2 - 2], 3)?;
    let lines = LineSet::for_grid(&grid, 60, 2)?;
    let problem = PartialProblem::new(v.clone(), lines.clone(), PolyOperator::identity(2), ProblemKind::Scalar, 1e-8)?;
    println!("{} of {} lines meet V", problem.flagged_count(), lines.len());

    let rank = combined_rank_test(&problem)?;
    println!("σmin/σmax = {:.3e}, rank deficiency {}", rank.ratio(), rank.rank_deficiency);

    let truth = ScalarField::from_fn(grid, |x| (-((x[0] - 0.45).powi(2) + (x[1] + 0.3).powi(2)) / 0.045).exp())
        .masked(&v.complement())?;
    let data = restrict_sinogram(&xray_forward(&truth, &lines)?, &v)?;
    let sol = reconstruct_partial(&problem, &data)?;
    println!(
        "reconstruction error {:.3}, data residual {:.2e}, CG iterations {}",
        l2_norm(&sol.unknown.sub(&truth)?) / l2_norm(&truth),
        sol.data_residual / sol.data_norm,
        sol.cg.iterations
    );

    for lambda in [1e-8, 1e-6, 1e-4] {
        let r = reconstruct_partial(&problem.with_lambda(lambda), &data)?;
        println!("  lambda {lambda:e}: error {:.3}", l2_norm(&r.unknown.sub(&truth)?) / l2_norm(&truth));
    }
    Ok(())
}
