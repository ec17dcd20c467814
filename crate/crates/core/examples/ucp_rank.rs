//! Discrete unique continuation: stack "f = 0 on V" and "P(D)(-Δ)^s f = 0
//! on V" and look at the smallest singular value. Nonlocal powers keep full
//! column rank, the local s = 1 case does not.

use tomolab::fields::PolyOperator;
use tomolab::fractional::ucp_rank_experiment;
use tomolab::spectral::{FracExponent, SpectralPlan};
use tomolab::{GridSpec, RegionMask};

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(12)?;
    let plan = SpectralPlan::default_for(grid);
    // f is unknown only on a 3x3 corner block
    let v = RegionMask::block(grid, &[0, 0], 3)?.complement();
    let ops = [
        ("identity", PolyOperator::identity(2)),
        ("d/dx", PolyOperator::derivative(2, 0)),
        ("laplacian", PolyOperator::laplacian(2)),
    ];
    println!("{:>5} {:>10} {:>12} {:>10}", "s", "P(D)", "σmin/σmax", "deficiency");
    for s in [-0.5, 0.5, 1.0, 1.5] {
        for (name, op) in &ops {
            let r = ucp_rank_experiment(&grid, FracExponent::new(s, 2)?, &v, op, &plan)?;
            println!("{s:>5} {name:>10} {:>12.3e} {:>10}", r.ratio(), r.rank_deficiency);
        }
    }
    Ok(())
}
