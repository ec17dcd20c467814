//! Fractional Laplacians on the zero-padded torus, Riesz potentials and the
//! fractional Poincaré ratio.

use std::f64::consts::PI;
use tomolab::fractional::{fractional_laplacian, poincare_ratio, riesz_potential};
use tomolab::spectral::{FracExponent, SpectralPlan};
use tomolab::xray::relative_error_on;
use tomolab::{GridSpec, RegionMask, ScalarField};

fn gaussian(grid: GridSpec, c: [f64; 2], sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * sigma * sigma)).exp())
}

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(96)?;
    let plan = SpectralPlan::default_for(grid);
    let f = gaussian(grid, [0.0, 0.0], 0.15);

    println!("(-Δ)^s of a Gaussian, value at the centre:");
    let centre = [grid.n() / 2, grid.n() / 2];
    for s in [-0.5, 0.25, 0.5, 1.0, 1.5] {
        let out = fractional_laplacian(&f, FracExponent::new(s, 2)?, &plan)?;
        println!("  s = {s:>5}: {:+.5e}", out.at(&centre));
    }

    // I₁ = 2π (-Δ)^{-1/2} in the plane; compare on mean-zero data
    let dipole = gaussian(grid, [0.2, 0.0], 0.1).sub(&gaussian(grid, [-0.2, 0.0], 0.1))?;
    let i1 = riesz_potential(&dipole, 1.0, &plan)?;
    let inv = fractional_laplacian(&dipole, FracExponent::new(-0.5, 2)?, &plan)?.scaled(2.0 * PI);
    let disk = RegionMask::disk(grid, &[0.0, 0.0], 0.7);
    println!("I1 vs 2π(-Δ)^(-1/2) on a dipole: relative gap {:.2e}", relative_error_on(&i1, &inv, &disk)?);

    println!("Poincaré ratio ‖(-Δ)^(t/2) f‖ / ‖(-Δ)^(s/2) f‖ as the bump widens:");
    for sigma in [0.05, 0.1, 0.2] {
        let g = gaussian(grid, [0.0, 0.0], sigma);
        println!("  sigma {sigma}: (s, t) = (1, 0) -> {:.4}", poincare_ratio(&g, 1.0, 0.0, &plan)?);
    }
    Ok(())
}
