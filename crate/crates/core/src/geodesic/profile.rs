use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of radii used by every sampled check on `[0, R]`.
pub const PROFILE_SAMPLES: usize = 1024;

/// Radial sound speed `c(r) = Σ a_k r^k` on the disk of radius `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct RadialProfile {
    coefficients: Vec<f64>,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRepr {
    coefficients: Vec<f64>,
    radius: f64,
}

impl TryFrom<ProfileRepr> for RadialProfile {
    type Error = Error;
    fn try_from(r: ProfileRepr) -> Result<Self> {
        RadialProfile::new(r.coefficients, r.radius)
    }
}

impl From<RadialProfile> for ProfileRepr {
    fn from(p: RadialProfile) -> Self {
        ProfileRepr { coefficients: p.coefficients, radius: p.radius }
    }
}

impl RadialProfile {
    /// Degree at most 6 and `c > 0` on `[0, R]`.
    pub fn new(coefficients: Vec<f64>, radius: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() > 7 {
            return Err(Error::Domain(format!("profiles need 1 to 7 coefficients, got {}", coefficients.len())));
        }
        if !(radius > 0.0 && radius.is_finite()) || coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("profile radius and coefficients must be finite, R > 0".into()));
        }
        let p = Self { coefficients, radius };
        let min = p.min_speed();
        if !(min > 0.0) {
            return Err(Error::Domain(format!("c must stay positive on [0, R]; minimum {min:.3e}")));
        }
        Ok(p)
    }

    pub fn constant(c: f64, radius: f64) -> Result<Self> {
        Self::new(vec![c], radius)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn speed(&self, r: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &a| acc * r + a)
    }

    pub fn speed_derivative(&self, r: f64) -> f64 {
        self.coefficients.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * r + k as f64 * a)
    }

    /// `c(min(|x|, R))`: the profile extended as a constant outside the disk.
    pub fn speed_at(&self, x: [f64; 2]) -> f64 {
        self.speed(x[0].hypot(x[1]).min(self.radius))
    }

    pub fn min_speed(&self) -> f64 {
        sample_radii(self.radius).map(|r| self.speed(r)).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise multiple `κ·c`.
    pub fn scaled(&self, kappa: f64) -> Result<Self> {
        Self::new(self.coefficients.iter().map(|a| kappa * a).collect(), self.radius)
    }
}

fn sample_radii(radius: f64) -> impl Iterator<Item = f64> {
    (0..PROFILE_SAMPLES).map(move |i| radius * i as f64 / (PROFILE_SAMPLES - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HerglotzCheck {
    pub holds: bool,
    /// Minimum of `d/dr (r / c(r))` over the sample radii.
    pub margin: f64,
}

/// Samples `d/dr (r/c) = (c − r c′)/c²` on 1024 radii of `[0, R]`.
pub fn herglotz_check(c: &RadialProfile) -> HerglotzCheck {
    let margin = sample_radii(c.radius)
        .map(|r| {
            let s = c.speed(r);
            (s - r * c.speed_derivative(r)) / (s * s)
        })
        .fold(f64::INFINITY, f64::min);
    HerglotzCheck { holds: margin > 0.0, margin }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_difference_quotient() {
        let c = RadialProfile::new(vec![2.0, 0.3, -1.0, 0.2], 1.0).unwrap();
        let h = 1e-6;
        for r in [0.1, 0.5, 0.9] {
            let fd = (c.speed(r + h) - c.speed(r - h)) / (2.0 * h);
            assert!((fd - c.speed_derivative(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_nonpositive_and_high_degree() {
        assert!(RadialProfile::new(vec![1.0, -2.0], 1.0).is_err());
        assert!(RadialProfile::new(vec![1.0; 8], 1.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let c = RadialProfile::new(vec![2.0, 0.0, -1.0], 1.0).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RadialProfile>(&s).unwrap(), c);
        assert!(serde_json::from_str::<RadialProfile>(r#"{"coefficients":[1.0],"radius":1.0,"x":1}"#).is_err());
    }
}
