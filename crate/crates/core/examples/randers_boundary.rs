//! Randers metrics F = F_g + β with closed β: the boundary distance map
//! shifts by potential differences, and boundary-vanishing gauges leave it
//! untouched. First-order Zermelo flows give such a β when irrotational.

use tomolab::fields::gradient;
use tomolab::geodesic::{boundary_distance_map, randers_from_riemannian, zermelo_first_order, OneForm, RadialProfile};
use tomolab::{GridSpec, ScalarField, VectorField};

fn main() -> tomolab::Result<()> {
    let c = RadialProfile::new(vec![2.0, 0.0, -1.0], 1.0)?;
    let grid = GridSpec::square(48)?;
    let map = boundary_distance_map(&c, 12, 0.01)?;

    let tilt = OneForm::exact(&ScalarField::from_fn(grid, |x| 0.1 * x[0] + 0.05 * x[1]))?;
    println!("dual norm of β: {:.3}", tilt.dual_norm(&c));
    let randers = randers_from_riemannian(&map, &c, &tilt)?;
    println!(
        "d_F(0 -> 6) = {:.6}, d_F(6 -> 0) = {:.6}, Riemannian {:.6}",
        randers.at(0, 6),
        randers.at(6, 0),
        map.at(0, 6)
    );
    println!("antisymmetric part (0, 6): {:+.6}", randers.antisymmetric_part()[(0, 6)]);

    let inside = ScalarField::from_fn(grid, |x| {
        let r2 = (x[0] * x[0] + x[1] * x[1]) / 0.36;
        if r2 < 1.0 {
            0.1 * (1.0 - r2).powi(4)
        } else {
            0.0
        }
    });
    let gauged = randers_from_riemannian(&map, &c, &OneForm::exact(&inside)?)?;
    println!(
        "gauge with φ = 0 on the boundary changes the map by {:.1e}",
        (gauged.distances() - map.distances()).amax()
    );

    // W = c² ∇ψ is irrotational after scaling; a rigid swirl is not
    let psi = ScalarField::from_fn(grid, |x| 0.01 * (x[0] - 0.5 * x[1]));
    let c2 = ScalarField::from_fn(grid, |x| c.speed_at([x[0], x[1]]).powi(2));
    let g = gradient(&psi);
    let w = VectorField::new(vec![g.component(0).mul(&c2)?, g.component(1).mul(&c2)?])?;
    println!("Zermelo β of c²∇ψ closed: {}", zermelo_first_order(&c, &w)?.is_closed());
    let swirl = VectorField::from_fn(grid, |x| [-0.05 * x[1], 0.05 * x[0], 0.0]);
    let beta = zermelo_first_order(&c, &swirl)?;
    println!("Zermelo β of a swirl closed: {} (curl {:.3e})", beta.is_closed(), beta.curl());
    Ok(())
}
