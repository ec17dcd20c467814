//! Geodesic ray transforms of tensor fields and their mixings I_A = I ∘ A.
//! The remainder h - σ̂_A h is invisible, and a 90° rotation on 1-forms
//! reproduces the Euclidean transverse transform.

use tomolab::fields::gradient;
use tomolab::geodesic::{
    geodesic_fan, geodesic_ray_transform, mixing_ray_transform, symmetrize_a, Mixing2, RadialProfile, TensorField,
};
use tomolab::vectorfield::MatrixWeight;
use tomolab::{GridSpec, ScalarField};

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn main() -> tomolab::Result<()> {
    let c = RadialProfile::new(vec![2.0, 0.0, -1.0], 1.0)?;
    let grid = GridSpec::square(64)?;
    let fan = geodesic_fan(&c, 16, 16, 0.01)?;
    println!("{} geodesics in the fan", fan.len());

    let comps: Vec<ScalarField> = (0..4)
        .map(|k| {
            ScalarField::from_fn(grid, move |x| {
                ((k + 1) as f64 * x[0] - x[1]).sin() * (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0)
            })
        })
        .collect();
    let h = TensorField::from_components(2, comps)?;
    let a1 = MatrixWeight::from_fn(grid, |x| [2.0 + 0.3 * x[0], 0.4, -0.2 * x[1], 1.5])?;
    let a2 = MatrixWeight::from_fn(grid, |x| [1.0, -0.3 * x[0], 0.5, 1.2 + 0.2 * x[1]])?;
    let mix = Mixing2::new(a1, a2)?;
    let sym = symmetrize_a(&h, &mix)?;
    let rem = mixing_ray_transform(&h.sub(&sym)?, &mix, &fan)?;
    println!(
        "max |I_A(h - σ̂_A h)| = {:.2e}, max |I_A h| = {:.3}",
        max_abs(&rem),
        max_abs(&mixing_ray_transform(&h, &mix, &fan)?)
    );

    // potential 1-forms lie in the kernel of I_1 but not of the transverse transform
    let phi = ScalarField::from_fn(grid, |x| (1.0 - (x[0] * x[0] + x[1] * x[1]) / 0.49).max(0.0).powi(4));
    let dphi = TensorField::Vector(gradient(&phi));
    let rot = Mixing2::uniform(MatrixWeight::rotation90(grid));
    println!("max |I_1 dφ|     = {:.2e}", max_abs(&geodesic_ray_transform(&dphi, &fan)?));
    println!("max |I_rot dφ|   = {:.3}", max_abs(&mixing_ray_transform(&dphi, &rot, &fan)?));
    Ok(())
}
