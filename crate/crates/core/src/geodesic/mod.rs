//! Radial sound speeds `c(r)` on a disk and the conformal metric `g = c⁻² e`:
//! ray tracing, boundary distances, Herglotz–Wiechert inversion, geodesic
//! and mixing ray transforms, and Randers boundary distances.

mod distance;
mod herglotz;
mod profile;
mod randers;
mod trace;
mod transform;

pub use distance::{
    boundary_distance_map, boundary_point, travel_time, uniform_boundary_angles, BoundaryDistanceMap, TravelTime,
    MAX_BOUNDARY_POINTS, SHOOTING_TOLERANCE,
};
pub use herglotz::{herglotz_invert, ProfileSamples, TravelTimeCurve};
pub use profile::{herglotz_check, HerglotzCheck, RadialProfile, PROFILE_SAMPLES};
pub use randers::{randers_boundary_map, randers_from_riemannian, zermelo_first_order, OneForm};
pub use trace::{hamiltonian, trace_geodesic, GeodesicPath, PathSample, EXIT_TOLERANCE, HAMILTONIAN_TOLERANCE};
pub use transform::{geodesic_fan, geodesic_ray_transform, mixing_ray_transform, symmetrize_a, Mixing2, TensorField};
