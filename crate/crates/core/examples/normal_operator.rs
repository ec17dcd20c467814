//! The normal operator X*X of the X-ray transform against the Riesz
//! potential I₁ (convolution with 1/|x|): one constant links them.

use tomolab::fields::inner;
use tomolab::fractional::riesz_potential;
use tomolab::spectral::SpectralPlan;
use tomolab::xray::{backproject, fit_constant, normal_scalar, relative_error_on, xray_forward, LineSet, Sinogram};
use tomolab::{GridSpec, RegionMask, ScalarField};

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(128)?;
    let lines = LineSet::for_grid(&grid, 180, 1)?;
    let plan = SpectralPlan::default_for(grid);
    let f = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * 0.15f64.powi(2))).exp());

    let n0 = normal_scalar(&f, &lines)?;
    let i1 = riesz_potential(&f, 1.0, &plan)?;
    let region = RegionMask::disk(grid, &[0.0, 0.0], 0.7);
    let c = fit_constant(&n0, &i1, &region)?;
    println!("N0 f = c * I1 f with c = {c:.5} (continuum value 2)");
    println!("fit residual on r < 0.7: {:.2e}", relative_error_on(&n0, &i1.scaled(c), &region)?);

    // back-projection is the adjoint of the forward map
    let g = Sinogram::new(lines.clone(), (0..lines.len()).map(|k| ((k * 7919) % 1000) as f64 / 500.0 - 1.0).collect())?;
    let xf = xray_forward(&f, &lines)?;
    let gap = (xf.inner(&g)? - inner(&f, &backproject(&g, &grid)?)?).abs() / (xf.norm() * g.norm());
    println!("relative adjointness gap: {gap:.2e}");
    Ok(())
}
