use super::{GridSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::spectral::periodic_derivative;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    GaussianBumps,
    EllipseSum,
    DivergenceFreeSwirl,
}

impl PhantomKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhantomKind::GaussianBumps => "gaussian-bumps",
            PhantomKind::EllipseSum => "ellipse-sum",
            PhantomKind::DivergenceFreeSwirl => "divergence-free-swirl",
        }
    }
}

impl FromStr for PhantomKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-bumps" => Ok(Self::GaussianBumps),
            "ellipse-sum" => Ok(Self::EllipseSum),
            "divergence-free-swirl" => Ok(Self::DivergenceFreeSwirl),
            other => Err(Error::Config(format!("unknown phantom kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Phantom {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Phantom {
    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Phantom::Scalar(f) => Ok(f),
            Phantom::Vector(_) => Err(Error::Config("phantom is vector-valued".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            Phantom::Vector(h) => Ok(h),
            Phantom::Scalar(_) => Err(Error::Config("phantom is scalar-valued".into())),
        }
    }
}

/// Smooth radial cutoff: 1 for `r ≤ 0.7L`, 0 for `r ≥ 0.9L`, C^∞ between.
pub fn smooth_cutoff(r: f64, extent: f64) -> f64 {
    let t = (r - 0.7 * extent) / (0.2 * extent);
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - t)).exp();
        let b = (-1.0 / t).exp();
        a / (a + b)
    }
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Seeded sum of Gaussian bumps centred inside `0.5L`.
fn gaussian_bumps(grid: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    let l = grid.extent();
    let dim = grid.dim();
    let count = rng.gen_range(3..=5);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let center: Vec<f64> = loop {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5) * l).collect();
                if radius(&c) <= 0.5 * l {
                    break c;
                }
            };
            let sigma = rng.gen_range(0.08..0.2) * l;
            let amp = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.25) { -1.0 } else { 1.0 };
            (center, sigma, amp)
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        let chi = smooth_cutoff(radius(x), l);
        if chi == 0.0 {
            return 0.0;
        }
        let v: f64 = bumps
            .iter()
            .map(|(c, s, a)| {
                let d2: f64 = x.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum();
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum();
        chi * v
    })
}

// (amplitude, semi-axis a, semi-axis b, x0, y0, rotation in degrees), unit-disk units.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Head-like ellipse sum scaled into `0.7L`, edges smoothed over `0.01L`,
/// amplitudes and centres jittered by the seed.
fn ellipse_sum(grid: GridSpec, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    grid.require_2d("ellipse-sum phantoms are planar")?;
    let l = grid.extent();
    let scale = 0.7 * l;
    let width = 0.01 * l;
    let shapes: Vec<[f64; 7]> = ELLIPSES
        .iter()
        .map(|&(amp, a, b, x0, y0, deg)| {
            let amp = amp * rng.gen_range(0.9..1.1);
            let x0 = x0 * scale + rng.gen_range(-0.01..0.01) * l;
            let y0 = y0 * scale + rng.gen_range(-0.01..0.01) * l;
            let phi = deg.to_radians();
            [amp, a * scale, b * scale, x0, y0, phi.cos(), phi.sin()]
        })
        .collect();
    Ok(ScalarField::from_fn(grid, |x| {
        let chi = smooth_cutoff(radius(x), l);
        if chi == 0.0 {
            return 0.0;
        }
        let v: f64 = shapes
            .iter()
            .map(|&[amp, a, b, x0, y0, c, s]| {
                let dx = x[0] - x0;
                let dy = x[1] - y0;
                let u = c * dx + s * dy;
                let w = -s * dx + c * dy;
                let rho = ((u / a).powi(2) + (w / b).powi(2)).sqrt();
                // signed distance estimate to the ellipse edge
                let dist = (1.0 - rho) * a.min(b);
                amp * 0.5 * (1.0 + (dist / width).tanh())
            })
            .sum();
        chi * v
    }))
}

/// Rotated gradient `∇⊥ψ = (-∂₂ψ, ∂₁ψ)` of a seeded bump stream function,
/// differentiated spectrally so its spectral divergence vanishes.
fn swirl(grid: GridSpec, rng: &mut ChaCha8Rng) -> Result<VectorField> {
    grid.require_2d("swirl phantoms are planar")?;
    let l = grid.extent();
    let count = rng.gen_range(2..=3);
    let vortices: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|k| {
            let ang = 2.0 * PI * (k as f64 + rng.gen_range(0.0..0.5)) / count as f64;
            let rad = rng.gen_range(0.15..0.35) * l;
            let sigma = rng.gen_range(0.12..0.2) * l;
            let amp = rng.gen_range(0.05..0.15) * if k % 2 == 0 { 1.0 } else { -1.0 };
            (rad * ang.cos(), rad * ang.sin(), sigma, amp)
        })
        .collect();
    let psi = ScalarField::from_fn(grid, |x| {
        let chi = smooth_cutoff(radius(x), 0.95 * l);
        vortices
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum::<f64>()
            * chi
    });
    let d1 = periodic_derivative(&psi, 0);
    let d2 = periodic_derivative(&psi, 1);
    VectorField::new(vec![d2.scaled(-1.0), d1])
}

/// Deterministic synthetic field for `(kind, seed)`, supported in `|x| < 0.9L`.
pub fn make_phantom(grid: GridSpec, kind: PhantomKind, seed: u64) -> Result<Phantom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        PhantomKind::GaussianBumps => Ok(Phantom::Scalar(gaussian_bumps(grid, &mut rng))),
        PhantomKind::EllipseSum => Ok(Phantom::Scalar(ellipse_sum(grid, &mut rng)?)),
        PhantomKind::DivergenceFreeSwirl => Ok(Phantom::Vector(swirl(grid, &mut rng)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_enforced() {
        let g = GridSpec::square(32).unwrap();
        let f = make_phantom(g, PhantomKind::GaussianBumps, 0).unwrap().into_scalar().unwrap();
        for k in 0..g.len() {
            let p = g.point(k);
            if (p[0] * p[0] + p[1] * p[1]).sqrt() >= 0.9 {
                assert_eq!(f.values()[k], 0.0);
            }
        }
    }

    #[test]
    fn ellipse_sum_is_deterministic() {
        let g = GridSpec::square(32).unwrap();
        let a = make_phantom(g, PhantomKind::EllipseSum, 1).unwrap();
        let b = make_phantom(g, PhantomKind::EllipseSum, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_kind_is_a_config_error() {
        assert!(matches!("spiral".parse::<PhantomKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn cutoff_is_monotone() {
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = smooth_cutoff(k as f64 / 100.0, 1.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }
}
