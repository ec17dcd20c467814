//! Vector tomography: gradients are invisible to the longitudinal
//! transform, the Helmholtz split isolates what the data can see, and the
//! 90° rotated (transverse) transform sees gradients instead.

use tomolab::fields::{gradient, make_phantom, smooth_cutoff, PhantomKind};
use tomolab::spectral::{spectral_divergence, SpectralPlan};
use tomolab::vectorfield::{helmholtz, xray_matrix_weighted, xray_vector, MatrixWeight};
use tomolab::xray::LineSet;
use tomolab::{GridSpec, ScalarField};

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(128)?;
    let lines = LineSet::for_grid(&grid, 180, 1)?;
    let phi = ScalarField::from_fn(grid, |x| {
        (-((x[0] - 0.1).powi(2) + (x[1] + 0.2).powi(2)) / 0.08).exp() * smooth_cutoff(x[0].hypot(x[1]), 1.0)
    });
    let dphi = gradient(&phi);
    let swirl = make_phantom(grid, PhantomKind::DivergenceFreeSwirl, 3)?.into_vector()?;

    println!("max |X1 ∇φ| / max|φ|    = {:.2e}", xray_vector(&dphi, &lines)?.max_abs() / phi.max_abs());
    println!("max |X1 swirl|          = {:.3}", xray_vector(&swirl, &lines)?.max_abs());
    let rot = MatrixWeight::rotation90(grid);
    println!("max |X_rot ∇φ| / max|φ| = {:.3}", xray_matrix_weighted(&dphi, &rot, &lines)?.max_abs() / phi.max_abs());

    let h = swirl.lin_comb(1.0, &dphi, 0.5)?;
    let plan = SpectralPlan::default_for(grid);
    let parts = helmholtz(&h, &plan)?;
    let rebuilt = parts.solenoidal.lin_comb(1.0, &parts.gradient, 1.0)?;
    println!(
        "Helmholtz: reassembly defect {:.2e}, div of solenoidal part {:.2e}",
        parts.padded_input.sub(&rebuilt)?.max_abs() / h.max_abs(),
        spectral_divergence(&parts.solenoidal).max_abs() / h.max_abs()
    );
    Ok(())
}
