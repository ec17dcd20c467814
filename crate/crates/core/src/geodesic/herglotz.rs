use super::distance::BoundaryDistanceMap;
use crate::error::{Error, Result};
use crate::linalg::{fornberg_weights, gauss_legendre};
use serde::Serialize;
use std::f64::consts::PI;

/// Half-width of the differentiation stencil for `p = dT/dΔ`.
const STENCIL_HALF_WIDTH: usize = 3;
const QUADRATURE_NODES: usize = 64;

/// Travel time `T` against boundary separation `Δ_k = kπ/K`, `k = 0..=K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TravelTimeCurve {
    radius: f64,
    times: Vec<f64>,
}

impl TravelTimeCurve {
    pub fn new(radius: f64, times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 * STENCIL_HALF_WIDTH + 2 {
            return Err(Error::InsufficientData(format!("{} travel times are too few", times.len())));
        }
        if times[0] != 0.0 || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidData("travel times must be finite with T(0) = 0".into()));
        }
        Ok(Self { radius, times })
    }

    /// Separations `2πk/m` for `k ≤ m/2`, each time averaged over every
    /// starting point of the map.
    pub fn from_map(map: &BoundaryDistanceMap) -> Result<Self> {
        let m = map.len();
        if !m.is_multiple_of(2) {
            return Err(Error::InvalidData("an even number of boundary points is needed".into()));
        }
        let times = (0..=m / 2).map(|k| (0..m).map(|i| map.at(i, (i + k) % m)).sum::<f64>() / m as f64).collect();
        Self::new(map.radius(), times)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn k_max(&self) -> usize {
        self.times.len() - 1
    }

    fn spacing(&self) -> f64 {
        PI / self.k_max() as f64
    }

    /// `T` at integer index `j`, extended oddly about 0 and evenly about π.
    fn extended(&self, j: isize) -> f64 {
        let k = self.k_max() as isize;
        let period = 2 * k;
        let j = (j + period).rem_euclid(2 * period) - period;
        // the extension has period 4K; fold into [0, K]
        let (sign, idx) = if j < 0 { (-1.0, -j) } else { (1.0, j) };
        let idx = if idx > k { 2 * k - idx } else { idx };
        sign * self.times[idx as usize]
    }

    /// `p(Δ) = dT/dΔ` from the interpolant through the nearest nodes.
    fn ray_parameter(&self, delta: f64) -> f64 {
        let h = self.spacing();
        let w = STENCIL_HALF_WIDTH as isize;
        let centre = (delta / h).round() as isize;
        let idx: Vec<isize> = (centre - w..=centre + w).collect();
        let nodes: Vec<f64> = idx.iter().map(|&j| j as f64 * h).collect();
        let weights = fornberg_weights(delta, &nodes, 1);
        idx.iter().zip(&weights[1]).map(|(&j, w)| w * self.extended(j)).sum()
    }
}

/// Recovered `(r, c(r))` pairs sorted by radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileSamples {
    pub radii: Vec<f64>,
    pub speeds: Vec<f64>,
}

/// Herglotz–Wiechert: `r(p₁) = R·exp(−(1/π)∫₀^{Δ₁} arccosh(p(Δ)/p₁) dΔ)` and
/// `c(r(p₁)) = r(p₁)/p₁`, evaluated at `n_out` separations `Δ₁ = πj/(n_out+1)`.
pub fn herglotz_invert(curve: &TravelTimeCurve, n_out: usize) -> Result<ProfileSamples> {
    let k_max = curve.k_max();
    let h = curve.spacing();
    let p_nodes: Vec<f64> = (0..=k_max).map(|k| curve.ray_parameter(k as f64 * h)).collect();
    if let Some(k) = p_nodes[..k_max].windows(2).position(|w| w[1] >= w[0]) {
        return Err(Error::InvalidData(format!(
            "ray parameter not decreasing at separation {:.4} (Herglotz condition violated)",
            (k + 1) as f64 * h
        )));
    }
    if !(p_nodes[0] > 0.0) {
        return Err(Error::InvalidData("travel times must increase with separation".into()));
    }
    let (gx, gw) = gauss_legendre(QUADRATURE_NODES);
    let mut pairs: Vec<(f64, f64)> = (1..=n_out)
        .map(|j| {
            let d1 = PI * j as f64 / (n_out + 1) as f64;
            let p1 = curve.ray_parameter(d1);
            // Δ = Δ₁(1 − v²) removes the square-root endpoint behaviour
            let integral: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(&x, &w)| {
                    let v = 0.5 * (x + 1.0);
                    let ratio = (curve.ray_parameter(d1 * (1.0 - v * v)) / p1).max(1.0);
                    0.5 * w * ratio.acosh() * 2.0 * d1 * v
                })
                .sum();
            let r = curve.radius * (-integral / PI).exp();
            (r, r / p1)
        })
        .collect();
    if pairs.iter().any(|(r, c)| !(r.is_finite() && c.is_finite() && *c > 0.0)) {
        return Err(Error::InvalidData("inversion produced non-finite speeds".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ProfileSamples { radii: pairs.iter().map(|p| p.0).collect(), speeds: pairs.iter().map(|p| p.1).collect() })
}
