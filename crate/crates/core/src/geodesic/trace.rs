use super::profile::RadialProfile;
use crate::error::{Error, Result};

/// Allowed relative drift of `H = c²|p|²/2` along a path.
pub const HAMILTONIAN_TOLERANCE: f64 = 1e-8;
/// Parameter tolerance of the exit bisection.
pub const EXIT_TOLERANCE: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    pub x: [f64; 2],
    pub p: [f64; 2],
    /// Velocity `ẋ = c² p`.
    pub v: [f64; 2],
    pub t: f64,
}

/// Unit-speed geodesic of `g = c⁻² e`, normalised to `H = 1/2`.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    samples: Vec<PathSample>,
    exited: bool,
    step: f64,
}

impl GeodesicPath {
    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn exited(&self) -> bool {
        self.exited
    }

    /// Step that met the Hamiltonian tolerance.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start(&self) -> [f64; 2] {
        self.samples[0].x
    }

    pub fn end(&self) -> [f64; 2] {
        self.samples.last().expect("paths are nonempty").x
    }

    /// Exit parameter, which is the `g`-length of the path.
    pub fn length(&self) -> f64 {
        self.samples.last().expect("paths are nonempty").t
    }

    /// `max |H − H₀| / H₀` over the samples.
    pub fn hamiltonian_drift(&self, c: &RadialProfile) -> f64 {
        let h0 = hamiltonian(c, &self.samples[0]);
        self.samples.iter().map(|s| (hamiltonian(c, s) - h0).abs() / h0).fold(0.0, f64::max)
    }
}

pub fn hamiltonian(c: &RadialProfile, s: &PathSample) -> f64 {
    let cv = c.speed(s.x[0].hypot(s.x[1]));
    0.5 * cv * cv * (s.p[0] * s.p[0] + s.p[1] * s.p[1])
}

type State = [f64; 4];

fn rhs(c: &RadialProfile, y: &State) -> State {
    let r = y[0].hypot(y[1]);
    let cv = c.speed(r);
    let c2 = cv * cv;
    let p2 = y[2] * y[2] + y[3] * y[3];
    // ∇c² = 2 c c′ x / r
    let g = if r > 0.0 { 2.0 * cv * c.speed_derivative(r) / r } else { 0.0 };
    [c2 * y[2], c2 * y[3], -0.5 * g * y[0] * p2, -0.5 * g * y[1] * p2]
}

fn rk4(c: &RadialProfile, y: &State, dt: f64) -> State {
    let add = |a: &State, k: &State, s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]];
    let k1 = rhs(c, y);
    let k2 = rhs(c, &add(y, &k1, 0.5 * dt));
    let k3 = rhs(c, &add(y, &k2, 0.5 * dt));
    let k4 = rhs(c, &add(y, &k3, dt));
    let mut out = *y;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn sample(c: &RadialProfile, y: &State, t: f64) -> PathSample {
    let c2 = c.speed(y[0].hypot(y[1])).powi(2);
    PathSample { x: [y[0], y[1]], p: [y[2], y[3]], v: [c2 * y[2], c2 * y[3]], t }
}

/// Outcome of one fixed-step integration attempt.
enum Attempt {
    /// Samples and the largest relative Hamiltonian drift seen.
    Done(Vec<PathSample>, f64),
    /// The first step already left the disk: the chord is shorter than the step.
    TooCoarse,
}

fn integrate(c: &RadialProfile, y0: State, dt: f64, max_t: f64, keep: bool) -> Result<Attempt> {
    let r_max = c.radius();
    let h0 = hamiltonian(c, &sample(c, &y0, 0.0));
    let drift = |y: &State| (hamiltonian(c, &sample(c, y, 0.0)) - h0).abs() / h0;
    let mut y = y0;
    let mut t = 0.0;
    let mut worst: f64 = 0.0;
    let mut out = vec![sample(c, &y, 0.0)];
    loop {
        let next = rk4(c, &y, dt);
        if next[0].hypot(next[1]) >= r_max {
            if t == 0.0 {
                return Ok(Attempt::TooCoarse);
            }
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > EXIT_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                let z = rk4(c, &y, mid);
                if z[0].hypot(z[1]) < r_max {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let z = rk4(c, &y, hi);
            worst = worst.max(drift(&z));
            out.push(sample(c, &z, t + hi));
            return Ok(Attempt::Done(out, worst));
        }
        y = next;
        t += dt;
        worst = worst.max(drift(&y));
        if keep {
            out.push(sample(c, &y, t));
        }
        if t > max_t {
            return Err(Error::Trapping { max_parameter: max_t });
        }
    }
}

/// Traces from the boundary point `x0` along the inward direction `xi`,
/// halving `step` until the Hamiltonian drift is at most 1e−8.
pub fn trace_geodesic(c: &RadialProfile, x0: [f64; 2], xi: [f64; 2], step: f64) -> Result<GeodesicPath> {
    trace(c, x0, xi, step, true)
}

/// With `keep == false` only the start and exit samples are returned.
pub(crate) fn trace(c: &RadialProfile, x0: [f64; 2], xi: [f64; 2], step: f64, keep: bool) -> Result<GeodesicPath> {
    let r_max = c.radius();
    let r0 = x0[0].hypot(x0[1]);
    if (r0 - r_max).abs() > 1e-9 * r_max {
        return Err(Error::Domain(format!("start point at radius {r0} is not on the boundary circle {r_max}")));
    }
    let norm = xi[0].hypot(xi[1]);
    if !(norm > 0.0) || !(step > 0.0) {
        return Err(Error::Domain("direction must be nonzero and step positive".into()));
    }
    let dir = [xi[0] / norm, xi[1] / norm];
    if dir[0] * x0[0] + dir[1] * x0[1] >= 0.0 {
        return Err(Error::Domain("initial direction must point into the disk".into()));
    }
    let cv = c.speed(r_max);
    let y0 = [x0[0], x0[1], dir[0] / cv, dir[1] / cv];
    let max_t = 100.0 * 2.0 * r_max / c.min_speed();
    let mut dt = step;
    for _ in 0..MAX_HALVINGS {
        if let Attempt::Done(samples, drift) = integrate(c, y0, dt, max_t, keep)? {
            if drift <= HAMILTONIAN_TOLERANCE {
                return Ok(GeodesicPath { samples, exited: true, step: dt });
            }
        }
        dt *= 0.5;
    }
    Err(Error::Nonconvergence(format!(
        "Hamiltonian drift stayed above {HAMILTONIAN_TOLERANCE:e} down to step {dt:.3e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_chord_for_unit_speed() {
        let c = RadialProfile::constant(1.0, 1.0).unwrap();
        let a: f64 = 0.4;
        let path = trace_geodesic(&c, [1.0, 0.0], [-a.cos(), a.sin()], 0.01).unwrap();
        // chord from (1,0) at angle a off the inward normal ends at angle π − 2a
        let phi = std::f64::consts::PI - 2.0 * a;
        let end = path.end();
        assert!((end[0] - phi.cos()).abs() < 1e-8 && (end[1] - phi.sin()).abs() < 1e-8);
        assert!((path.length() - 2.0 * a.cos()).abs() < 1e-8);
    }

    #[test]
    fn outward_direction_rejected() {
        let c = RadialProfile::constant(1.0, 1.0).unwrap();
        assert!(trace_geodesic(&c, [1.0, 0.0], [1.0, 0.0], 0.01).is_err());
        assert!(trace_geodesic(&c, [0.5, 0.0], [-1.0, 0.0], 0.01).is_err());
    }
}
