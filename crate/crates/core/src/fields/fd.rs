//! Second-order finite differences along grid axes.
//!
//! Interior nodes use central stencils; the two edge nodes on each axis use
//! one-sided second-order stencils. Every operator is a tensor product of
//! the 1-D stencils below, so mixed derivatives commute exactly.

use super::{GridSpec, ScalarField, VectorField};
use crate::error::Result;

/// At most four taps of a 1-D stencil.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl Stencil {
    fn from_slice(taps: &[(usize, f64)]) -> Self {
        let mut s = Stencil { idx: [0; 4], w: [0.0; 4], len: taps.len() };
        for (k, &(i, w)) in taps.iter().enumerate() {
            s.idx[k] = i;
            s.w[k] = w;
        }
        s
    }

    pub fn taps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.idx[k], self.w[k]))
    }
}

/// Derivative of order 0, 1 or 2 at node `i` of an axis with `n` nodes.
pub(crate) fn axis_stencil(n: usize, h: f64, order: usize, i: usize) -> Stencil {
    match order {
        0 => Stencil::from_slice(&[(i, 1.0)]),
        1 => {
            let c = 1.0 / (2.0 * h);
            if i == 0 {
                Stencil::from_slice(&[(0, -3.0 * c), (1, 4.0 * c), (2, -c)])
            } else if i + 1 == n {
                Stencil::from_slice(&[(n - 1, 3.0 * c), (n - 2, -4.0 * c), (n - 3, c)])
            } else {
                Stencil::from_slice(&[(i - 1, -c), (i + 1, c)])
            }
        }
        2 => {
            let c = 1.0 / (h * h);
            if i == 0 {
                Stencil::from_slice(&[(0, 2.0 * c), (1, -5.0 * c), (2, 4.0 * c), (3, -c)])
            } else if i + 1 == n {
                Stencil::from_slice(&[(n - 1, 2.0 * c), (n - 2, -5.0 * c), (n - 3, 4.0 * c), (n - 4, -c)])
            } else {
                Stencil::from_slice(&[(i - 1, c), (i, -2.0 * c), (i + 1, c)])
            }
        }
        _ => unreachable!("stencil order is capped at 2"),
    }
}

/// Applies the 1-D operator of the given order along `axis`.
pub(crate) fn apply_axis(grid: &GridSpec, values: &[f64], axis: usize, order: usize) -> Vec<f64> {
    if order == 0 {
        return values.to_vec();
    }
    let n = grid.n();
    let h = grid.spacing();
    let stride = grid.strides()[axis];
    let stencils: Vec<Stencil> = (0..n).map(|i| axis_stencil(n, h, order, i)).collect();
    let mut out = vec![0.0; values.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let i = (k / stride) % n;
        let base = k - i * stride;
        *o = stencils[i].taps().map(|(j, w)| w * values[base + j * stride]).sum();
    }
    out
}

/// Applies `∂^alpha` (per-axis orders ≤ 2) as a product of 1-D operators.
pub(crate) fn apply_multi(grid: &GridSpec, values: &[f64], alpha: &[usize]) -> Vec<f64> {
    let mut cur = values.to_vec();
    for (axis, &o) in alpha.iter().enumerate() {
        if o > 0 {
            cur = apply_axis(grid, &cur, axis, o);
        }
    }
    cur
}

/// First partial derivative `∂_axis f`.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField::from_raw(*f.grid(), apply_axis(f.grid(), f.values(), axis, 1))
}

/// Second partial derivative `∂²_axis f`.
pub fn second_partial(f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField::from_raw(*f.grid(), apply_axis(f.grid(), f.values(), axis, 2))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dim()).map(|a| partial(f, a)).collect();
    VectorField::new(comps).expect("components share the grid")
}

/// `∂₁h₂ − ∂₂h₁` with the same stencils as [`gradient`].
pub fn curl2d_fd(h: &VectorField) -> Result<ScalarField> {
    h.grid().require_2d("curl is implemented for planar fields")?;
    partial(h.component(1), 0).sub(&partial(h.component(0), 1))
}
