use super::distance::{boundary_distance_map, boundary_point, BoundaryDistanceMap};
use super::profile::RadialProfile;
use crate::error::{Error, Result};
use crate::fields::{axis_stencil, curl2d_fd, gradient, GridSpec, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, fornberg_weights, Csr};

/// Relative discrete curl below which a one-form counts as closed.
pub const CLOSED_TOLERANCE: f64 = 1e-8;
/// Largest `|W|/c` accepted by the first-order Zermelo model.
pub const ZERMELO_RATIO: f64 = 0.1;

/// Planar one-form `β = β₁dx¹ + β₂dx²` on grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    beta: VectorField,
    closed: bool,
    curl: f64,
}

impl OneForm {
    /// Sets the closed flag from the finite-difference curl.
    pub fn new(b1: ScalarField, b2: ScalarField) -> Result<Self> {
        let beta = VectorField::new(vec![b1, b2])?;
        beta.grid().require_2d("one-forms are planar")?;
        let curl = curl2d_fd(&beta)?.max_abs();
        let scale = beta.max_abs();
        let closed = curl <= CLOSED_TOLERANCE * scale;
        Ok(Self { beta, closed, curl })
    }

    pub fn zero(grid: GridSpec) -> Result<Self> {
        Self::new(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    /// `dφ` with finite-difference derivatives.
    pub fn exact(phi: &ScalarField) -> Result<Self> {
        let g = gradient(phi);
        Self::new(g.component(0).clone(), g.component(1).clone())
    }

    pub fn components(&self) -> &VectorField {
        &self.beta
    }

    pub fn grid(&self) -> &GridSpec {
        self.beta.grid()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Largest absolute discrete curl.
    pub fn curl(&self) -> f64 {
        self.curl
    }

    pub fn add(&self, other: &OneForm) -> Result<Self> {
        let s = self.beta.lin_comb(1.0, &other.beta, 1.0)?;
        Self::new(s.component(0).clone(), s.component(1).clone())
    }

    /// `max c(|x|)·|β(x)|` over nodes in the closed disk of radius `R`.
    pub fn dual_norm(&self, c: &RadialProfile) -> f64 {
        let grid = self.grid();
        let (b1, b2) = (self.beta.component(0).values(), self.beta.component(1).values());
        (0..grid.len())
            .filter_map(|k| {
                let p = grid.point(k);
                let r = p[0].hypot(p[1]);
                (r <= c.radius()).then(|| c.speed(r) * b1[k].hypot(b2[k]))
            })
            .fold(0.0, f64::max)
    }

    /// Least-squares potential `φ` with `Dφ = β` and zero mean; errors with
    /// [`Error::NotClosed`] when the residual exceeds the closed tolerance.
    pub fn potential(&self) -> Result<ScalarField> {
        let grid = *self.grid();
        let n = grid.n();
        let h = grid.spacing();
        let strides = grid.strides();
        let mut d = Csr::new(grid.len());
        for axis in 0..2 {
            for k in 0..grid.len() {
                let i = grid.unravel(k)[axis];
                let base = k - i * strides[axis];
                d.push_row(
                    axis_stencil(n, h, 1, i).taps().map(|(j, w)| (base + j * strides[axis], w)).collect::<Vec<_>>(),
                );
            }
        }
        let rhs_vals: Vec<f64> =
            self.beta.component(0).values().iter().chain(self.beta.component(1).values()).copied().collect();
        let b = d.matvec_t(&rhs_vals);
        let len = grid.len() as f64;
        let apply = |x: &[f64]| {
            let mut y = d.matvec_t(&d.matvec(x));
            let mean = x.iter().sum::<f64>() / len;
            y.iter_mut().for_each(|v| *v += mean);
            y
        };
        let (phi, _) = conjugate_gradient(apply, &b, 1e-12, 50 * grid.len())?;
        let resid: f64 = d.matvec(&phi).iter().zip(&rhs_vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if resid > CLOSED_TOLERANCE * self.beta.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotClosed { curl: resid });
        }
        ScalarField::new(grid, phi)
    }
}

/// Tensor-product cubic Lagrange interpolation at `(x, y)`.
fn cubic_interp(f: &ScalarField, x: f64, y: f64) -> f64 {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.spacing();
    let l = grid.extent();
    let stencil = |u: f64| -> (usize, Vec<f64>) {
        let s = (u / h).floor() as isize - 1;
        let s = s.clamp(0, n as isize - 4) as usize;
        let nodes: Vec<f64> = (s..s + 4).map(|i| i as f64 * h).collect();
        (s, fornberg_weights(u, &nodes, 0).swap_remove(0))
    };
    let (i0, wx) = stencil(x + l);
    let (j0, wy) = stencil(y + l);
    let mut acc = 0.0;
    for (a, wa) in wx.iter().enumerate() {
        for (b, wb) in wy.iter().enumerate() {
            acc += wa * wb * f.values()[(i0 + a) * n + j0 + b];
        }
    }
    acc
}

/// `d_F(x_i, x_j) = d_g(x_i, x_j) + φ(x_j) − φ(x_i)` for closed `β = dφ`.
pub fn randers_from_riemannian(
    map: &BoundaryDistanceMap,
    c: &RadialProfile,
    beta: &OneForm,
) -> Result<BoundaryDistanceMap> {
    if !beta.is_closed() {
        return Err(Error::NotClosed { curl: beta.curl() });
    }
    if beta.grid().extent() < c.radius() {
        return Err(Error::Domain("the one-form grid must cover the disk".into()));
    }
    if (map.radius() - c.radius()).abs() > 1e-12 * c.radius() {
        return Err(Error::Domain("distance map and profile radii differ".into()));
    }
    let dual = beta.dual_norm(c);
    if !(dual < 1.0) {
        return Err(Error::NotFinsler { dual_norm: dual });
    }
    let phi = beta.potential()?;
    let at: Vec<f64> = map
        .angles()
        .iter()
        .map(|&a| {
            let p = boundary_point(a, c.radius());
            cubic_interp(&phi, p[0], p[1])
        })
        .collect();
    let m = map.len();
    let d = nalgebra::DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { map.at(i, j) + at[j] - at[i] });
    BoundaryDistanceMap::new(map.angles().to_vec(), map.radius(), d)
}

pub fn randers_boundary_map(c: &RadialProfile, beta: &OneForm, m: usize, step: f64) -> Result<BoundaryDistanceMap> {
    if !beta.is_closed() {
        return Err(Error::NotClosed { curl: beta.curl() });
    }
    let dual = beta.dual_norm(c);
    if !(dual < 1.0) {
        return Err(Error::NotFinsler { dual_norm: dual });
    }
    randers_from_riemannian(&boundary_distance_map(c, m, step)?, c, beta)
}

/// First-order Zermelo one-form `β = −W/c²`, with `c` extended as a
/// constant outside the disk.
pub fn zermelo_first_order(c: &RadialProfile, w: &VectorField) -> Result<OneForm> {
    let grid = *w.grid();
    grid.require_2d("flows are planar")?;
    let (w1, w2) = (w.component(0).values(), w.component(1).values());
    let mut ratio: f64 = 0.0;
    let mut b1 = Vec::with_capacity(grid.len());
    let mut b2 = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let p = grid.point(k);
        let cv = c.speed_at([p[0], p[1]]);
        if p[0].hypot(p[1]) <= c.radius() {
            ratio = ratio.max(w1[k].hypot(w2[k]) / cv);
        }
        b1.push(-w1[k] / (cv * cv));
        b2.push(-w2[k] / (cv * cv));
    }
    if ratio > ZERMELO_RATIO {
        return Err(Error::PerturbationRegime { ratio });
    }
    OneForm::new(ScalarField::new(grid, b1)?, ScalarField::new(grid, b2)?)
}
