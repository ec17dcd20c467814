use super::profile::RadialProfile;
use super::trace::{trace, GeodesicPath};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Boundary-angle tolerance of the shooting solve.
pub const SHOOTING_TOLERANCE: f64 = 1e-8;
/// Largest number of boundary points in a distance map.
pub const MAX_BOUNDARY_POINTS: usize = 64;
const BRACKET_MARGIN: f64 = 1e-7;

pub fn boundary_point(angle: f64, radius: f64) -> [f64; 2] {
    [radius * angle.cos(), radius * angle.sin()]
}

/// Inward normal at boundary angle `phi` rotated counter-clockwise by `alpha`.
fn launch_direction(phi: f64, alpha: f64) -> [f64; 2] {
    let theta = phi + PI + alpha;
    [theta.cos(), theta.sin()]
}

/// Counter-clockwise angular separation in `[0, 2π)`.
fn separation(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(TAU)
}

#[derive(Clone, Debug)]
pub struct TravelTime {
    pub time: f64,
    /// Launch angle relative to the inward normal.
    pub launch_angle: f64,
    /// Remaining boundary-angle mismatch.
    pub mismatch: f64,
    pub path: GeodesicPath,
}

fn exit_separation(c: &RadialProfile, phi: f64, alpha: f64, step: f64) -> Result<(f64, GeodesicPath)> {
    let path = trace(c, boundary_point(phi, c.radius()), launch_direction(phi, alpha), step, false)?;
    let e = path.end();
    Ok((separation(phi, e[1].atan2(e[0])), path))
}

/// Travel time between the boundary points at angles `phi1`, `phi2` by
/// bisection on the launch angle.
pub fn travel_time(c: &RadialProfile, phi1: f64, phi2: f64, step: f64) -> Result<TravelTime> {
    let target = separation(phi1, phi2);
    if target < 1e-12 || TAU - target < 1e-12 {
        return Err(Error::Domain("travel times need two distinct boundary points".into()));
    }
    let mut lo = -FRAC_PI_2 + BRACKET_MARGIN;
    let mut hi = FRAC_PI_2 - BRACKET_MARGIN;
    let (d_lo, _) = exit_separation(c, phi1, lo, step)?;
    let (d_hi, _) = exit_separation(c, phi1, hi, step)?;
    if !(d_lo < target && target < d_hi) {
        return Err(Error::Nonconvergence(format!(
            "target separation {target:.6} outside the shooting bracket [{d_lo:.6}, {d_hi:.6}]"
        )));
    }
    let mut best: Option<(f64, f64, GeodesicPath)> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (d, path) = exit_separation(c, phi1, mid, step)?;
        let mismatch = (d - target).abs();
        if best.as_ref().is_none_or(|b| mismatch < b.1) {
            best = Some((mid, mismatch, path));
        }
        if mismatch <= 1e-2 * SHOOTING_TOLERANCE || hi - lo < 1e-15 {
            break;
        }
        if d < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (alpha, mismatch, _) = best.expect("at least one bisection step");
    if mismatch > SHOOTING_TOLERANCE {
        return Err(Error::Nonconvergence(format!(
            "boundary-angle mismatch {mismatch:.3e} after bisection (launch angle {alpha:.12})"
        )));
    }
    let path = trace(c, boundary_point(phi1, c.radius()), launch_direction(phi1, alpha), step, true)?;
    Ok(TravelTime { time: path.length(), launch_angle: alpha, mismatch, path })
}

/// Oriented distances between `m` uniform boundary points.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDistanceMap {
    angles: Vec<f64>,
    radius: f64,
    distances: DMatrix<f64>,
}

impl BoundaryDistanceMap {
    pub fn new(angles: Vec<f64>, radius: f64, distances: DMatrix<f64>) -> Result<Self> {
        let m = angles.len();
        if distances.shape() != (m, m) {
            return Err(Error::Shape(format!("distance matrix {:?} for {m} points", distances.shape())));
        }
        Ok(Self { angles, radius, distances })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.distances[(i, j)]
    }

    pub fn symmetric_part(&self) -> DMatrix<f64> {
        (&self.distances + self.distances.transpose()) * 0.5
    }

    pub fn antisymmetric_part(&self) -> DMatrix<f64> {
        (&self.distances - self.distances.transpose()) * 0.5
    }

    /// `max |d(i,j) − d(j,i)|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.antisymmetric_part().amax() * 2.0
    }

    /// Largest violation of `d(i,k) ≤ d(i,j) + d(j,k)` over all triples.
    pub fn triangle_violation(&self) -> f64 {
        let m = self.len();
        let d = &self.distances;
        (0..m)
            .into_par_iter()
            .map(|i| {
                let mut worst: f64 = 0.0;
                for j in 0..m {
                    for k in 0..m {
                        worst = worst.max(d[(i, k)] - d[(i, j)] - d[(j, k)]);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Angles `2πi/m`.
pub fn uniform_boundary_angles(m: usize) -> Vec<f64> {
    (0..m).map(|i| TAU * i as f64 / m as f64).collect()
}

/// All ordered pairs through [`travel_time`].
pub fn boundary_distance_map(c: &RadialProfile, m: usize, step: f64) -> Result<BoundaryDistanceMap> {
    if !(2..=MAX_BOUNDARY_POINTS).contains(&m) {
        return Err(Error::Size(format!("{m} boundary points (allowed 2..={MAX_BOUNDARY_POINTS})")));
    }
    let angles = uniform_boundary_angles(m);
    let entries: Vec<f64> = (0..m * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            if i == j {
                Ok(0.0)
            } else {
                travel_time(c, angles[i], angles[j], step).map(|t| t.time)
            }
        })
        .collect::<Result<_>>()?;
    let d = DMatrix::from_fn(m, m, |i, j| entries[i * m + j]);
    BoundaryDistanceMap::new(angles, c.radius(), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antipodal_unit_speed() {
        let c = RadialProfile::constant(1.0, 1.0).unwrap();
        let t = travel_time(&c, 0.3, 0.3 + PI, 0.01).unwrap();
        assert!((t.time - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_speed_scales_chord() {
        let c = RadialProfile::constant(2.5, 1.0).unwrap();
        let t = travel_time(&c, 0.0, 1.0, 0.01).unwrap();
        assert!((t.time - 2.0 * (0.5f64).sin() / 2.5).abs() < 1e-6);
    }

    #[test]
    fn same_point_rejected() {
        let c = RadialProfile::constant(1.0, 1.0).unwrap();
        assert!(travel_time(&c, 0.5, 0.5, 0.01).is_err());
    }
}
