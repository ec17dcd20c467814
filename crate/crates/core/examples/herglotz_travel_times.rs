//! Radial sound speed c(r) = 2 - r² on the unit disk: trace rays, compute
//! boundary travel times, and recover c from them by Herglotz–Wiechert.

use std::f64::consts::PI;
use tomolab::geodesic::{
    boundary_distance_map, boundary_point, herglotz_check, herglotz_invert, trace_geodesic, travel_time, RadialProfile,
    TravelTimeCurve,
};

fn main() -> tomolab::Result<()> {
    let c = RadialProfile::new(vec![2.0, 0.0, -1.0], 1.0)?;
    let check = herglotz_check(&c);
    println!("Herglotz condition holds: {} (margin {:.3})", check.holds, check.margin);

    let x0 = boundary_point(0.0, 1.0);
    let path = trace_geodesic(&c, x0, [-0.8, 0.6], 0.01)?;
    println!(
        "ray from (1, 0): {} samples, exits at ({:.4}, {:.4}), length {:.5}, H drift {:.1e}",
        path.samples().len(),
        path.end()[0],
        path.end()[1],
        path.length(),
        path.hamiltonian_drift(&c)
    );

    for delta in [0.5, 1.5, PI] {
        let t = travel_time(&c, 0.0, delta, 0.01)?;
        println!("T(Δ = {delta:.3}) = {:.6} (launch angle {:+.4})", t.time, t.launch_angle);
    }

    let map = boundary_distance_map(&c, 32, 0.01)?;
    println!("32-point boundary map: symmetry defect {:.1e}", map.symmetry_defect());
    let profile = herglotz_invert(&TravelTimeCurve::from_map(&map)?, 12)?;
    println!("{:>8} {:>10} {:>10}", "r", "recovered", "true");
    for (r, v) in profile.radii.iter().zip(&profile.speeds) {
        println!("{r:>8.4} {v:>10.6} {:>10.6}", c.speed(*r));
    }
    Ok(())
}
