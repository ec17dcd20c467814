//! Grid geometry, field containers, region masks and discrete L² pairings.
//!
//! Every field lives on a uniform node grid covering `[-L, L]^dim` with
//! `n_per_axis` nodes per axis, so the spacing is `h = 2L / (n - 1)`.
//! Values are stored row-major with axis 0 varying slowest.

mod fd;
mod phantom;
mod poly;

pub(crate) use fd::{apply_axis, axis_stencil};
pub use fd::{curl2d_fd, gradient, partial, second_partial};
pub use phantom::{make_phantom, smooth_cutoff, Phantom, PhantomKind};
pub use poly::{apply_poly_operator, poly_operator_rows, PolyOperator};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;

/// Uniform node grid on `[-L, L]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n_per_axis: usize,
    extent: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n_per_axis: usize, extent: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::UnsupportedDimension { dim, context: "grids are 2-D or 3-D" });
        }
        if n_per_axis < 8 {
            return Err(Error::Config(format!("n_per_axis must be at least 8, got {n_per_axis}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Config(format!("extent must be positive, got {extent}")));
        }
        Ok(Self { dim, n_per_axis, extent })
    }

    /// 2-D grid on `[-1, 1]²`.
    pub fn square(n_per_axis: usize) -> Result<Self> {
        Self::new(2, n_per_axis, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n_per_axis
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.n_per_axis - 1) as f64
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    /// Row-major strides, axis 0 slowest.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.n_per_axis;
        (0..self.dim).map(|a| n.pow((self.dim - 1 - a) as u32)).collect()
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n_per_axis + i)
    }

    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n_per_axis;
            flat /= self.n_per_axis;
        }
        out
    }

    /// Physical coordinates of node `flat` (unused trailing entries are 0).
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.coord(idx[a]);
        }
        p
    }

    /// Trapezoidal quadrature weight: `h^dim`, halved once per boundary layer.
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        let mut w = self.spacing().powi(self.dim as i32);
        for &i in idx.iter().take(self.dim) {
            if i == 0 || i + 1 == self.n_per_axis {
                w *= 0.5;
            }
        }
        w
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("grid mismatch: {self:?} vs {other:?}")));
        }
        Ok(())
    }

    pub(crate) fn require_2d(&self, context: &'static str) -> Result<()> {
        if self.dim != 2 {
            return Err(Error::UnsupportedDimension { dim: self.dim, context });
        }
        Ok(())
    }
}

/// Real scalar samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("expected {} values for {:?}, got {}", grid.len(), grid, values.len())));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite value at index {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Samples `f` at every node; the closure receives the first `dim`
    /// coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                f(&p[..grid.dim()])
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.ravel(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Zeroes every node outside `mask`.
    pub fn masked(&self, mask: &RegionMask) -> Result<Self> {
        self.grid.check_same(mask.grid())?;
        let values = self.values.iter().zip(mask.inside()).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Bilinear interpolation at a physical 2-D point; zero outside the grid.
    pub fn interp2(&self, x: f64, y: f64) -> f64 {
        match bilinear_stencil(&self.grid, x, y) {
            Some(st) => st.iter().map(|&(k, w)| w * self.values[k]).sum(),
            None => 0.0,
        }
    }
}

/// Bilinear interpolation weights at `(x, y)`; `None` outside the grid square.
#[inline]
pub(crate) fn bilinear_stencil(grid: &GridSpec, x: f64, y: f64) -> Option<[(usize, f64); 4]> {
    let n = grid.n();
    let h = grid.spacing();
    let l = grid.extent();
    let u = (x + l) / h;
    let v = (y + l) / h;
    let top = (n - 1) as f64;
    if !(u >= 0.0 && v >= 0.0 && u <= top && v <= top) {
        return None;
    }
    let i = (u.floor() as usize).min(n - 2);
    let j = (v.floor() as usize).min(n - 2);
    let a = u - i as f64;
    let b = v - j as f64;
    let k = i * n + j;
    Some([(k, (1.0 - a) * (1.0 - b)), (k + 1, (1.0 - a) * b), (k + n, a * (1.0 - b)), (k + n + 1, a * b)])
}

/// Componentwise vector field; all components share one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid =
            *components.first().ok_or_else(|| Error::Shape("vector field needs at least one component".into()))?.grid();
        if components.len() != grid.dim() {
            return Err(Error::Shape(format!("{} components for a {}-D grid", components.len(), grid.dim())));
        }
        for c in &components {
            grid.check_same(c.grid())?;
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect() }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> [f64; 3]) -> Self {
        let mut comps: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); grid.dim()];
        for k in 0..grid.len() {
            let p = grid.point(k);
            let v = f(&p[..grid.dim()]);
            for (a, c) in comps.iter_mut().enumerate() {
                c.push(v[a]);
            }
        }
        Self { grid, components: comps.into_iter().map(|c| ScalarField::from_raw(grid, c)).collect() }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Largest pointwise Euclidean length.
    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| self.components.iter().map(|c| c.values()[k].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn lin_comb(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.lin_comb(a, y, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: self.grid, components })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, components: self.components.iter().map(|c| c.scaled(a)).collect() }
    }
}

/// Complex samples; produced where `D = -i∂` forces an imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<Complex64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|z| z.im).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Boolean subset of grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    grid: GridSpec,
    inside: Vec<bool>,
}

impl RegionMask {
    pub fn new(grid: GridSpec, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::Shape(format!("mask has {} cells, grid has {}", inside.len(), grid.len())));
        }
        Ok(Self { grid, inside })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> bool) -> Self {
        let inside = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                f(&p[..grid.dim()])
            })
            .collect();
        Self { grid, inside }
    }

    pub fn full(grid: GridSpec) -> Self {
        Self { grid, inside: vec![true; grid.len()] }
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, inside: vec![false; grid.len()] }
    }

    /// Closed Euclidean ball.
    pub fn disk(grid: GridSpec, center: &[f64], radius: f64) -> Self {
        Self::from_fn(grid, |x| x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= radius * radius)
    }

    /// Axis-aligned block of `size` nodes per axis starting at index `start`.
    pub fn block(grid: GridSpec, start: &[usize], size: usize) -> Result<Self> {
        if start.len() != grid.dim() || start.iter().any(|&s| s + size > grid.n()) || size == 0 {
            return Err(Error::Placement(format!("block of size {size} at {start:?} does not fit the grid")));
        }
        let inside = (0..grid.len())
            .map(|k| {
                let idx = grid.unravel(k);
                (0..grid.dim()).all(|a| idx[a] >= start[a] && idx[a] < start[a] + size)
            })
            .collect();
        Ok(Self { grid, inside })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.inside[flat]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Flat indices of the true cells, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.inside.iter().enumerate().filter_map(|(k, &b)| b.then_some(k)).collect()
    }

    pub fn complement(&self) -> Self {
        Self { grid: self.grid, inside: self.inside.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &RegionMask) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let inside = self.inside.iter().zip(&other.inside).map(|(a, b)| *a || *b).collect();
        Ok(Self { grid: self.grid, inside })
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let inside = self.inside.iter().zip(&other.inside).map(|(a, b)| *a && *b).collect();
        Ok(Self { grid: self.grid, inside })
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.grid == other.grid && self.inside.iter().zip(&other.inside).all(|(a, b)| !a || *b)
    }

    pub fn is_disjoint_from(&self, other: &RegionMask) -> bool {
        self.inside.iter().zip(&other.inside).all(|(a, b)| !(a & b))
    }

    /// True when the mask touches the outermost layer of grid nodes.
    pub fn touches_boundary(&self) -> bool {
        let n = self.grid.n();
        self.indices().into_iter().any(|k| {
            let idx = self.grid.unravel(k);
            (0..self.grid.dim()).any(|a| idx[a] == 0 || idx[a] + 1 == n)
        })
    }

    /// Face-neighbour connectivity of the true cells.
    pub fn is_connected(&self) -> bool {
        let cells = self.indices();
        let Some(&first) = cells.first() else {
            return false;
        };
        let n = self.grid.n();
        let strides = self.grid.strides();
        let mut seen = vec![false; self.grid.len()];
        let mut queue = VecDeque::from([first]);
        seen[first] = true;
        let mut reached = 1usize;
        while let Some(k) = queue.pop_front() {
            let idx = self.grid.unravel(k);
            for a in 0..self.grid.dim() {
                let mut nbrs = Vec::with_capacity(2);
                if idx[a] > 0 {
                    nbrs.push(k - strides[a]);
                }
                if idx[a] + 1 < n {
                    nbrs.push(k + strides[a]);
                }
                for m in nbrs {
                    if self.inside[m] && !seen[m] {
                        seen[m] = true;
                        reached += 1;
                        queue.push_back(m);
                    }
                }
            }
        }
        reached == cells.len()
    }

    /// SHA-256 over the grid description and the cell bits.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("{}:{}:{}", self.grid.dim(), self.grid.n(), self.grid.extent()));
        hasher.update(self.inside.iter().map(|&b| b as u8).collect::<Vec<u8>>());
        hex::encode(hasher.finalize())
    }
}

/// Discrete L² norm with trapezoidal weights.
pub fn l2_norm(f: &ScalarField) -> f64 {
    let g = f.grid();
    f.values().iter().enumerate().map(|(k, v)| g.trapezoid_weight(k) * v * v).sum::<f64>().sqrt()
}

/// Discrete L² pairing with trapezoidal weights.
pub fn inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let grid = f.grid();
    Ok(f.values().iter().zip(g.values()).enumerate().map(|(k, (a, b))| grid.trapezoid_weight(k) * a * b).sum())
}

/// Sum of componentwise pairings.
pub fn inner_vector(f: &VectorField, g: &VectorField) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    f.components().iter().zip(g.components()).map(|(a, b)| inner(a, b)).sum()
}

pub fn l2_norm_vector(f: &VectorField) -> f64 {
    f.components().iter().map(|c| l2_norm(c).powi(2)).sum::<f64>().sqrt()
}
