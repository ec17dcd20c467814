use super::distance::boundary_point;
use super::profile::RadialProfile;
use super::trace::{trace_geodesic, GeodesicPath};
use crate::error::{Error, Result};
use crate::fields::{bilinear_stencil, GridSpec, ScalarField, VectorField};
use crate::vectorfield::MatrixWeight;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

/// Tensor fields of order 0, 1 or 2 on a planar grid. Order-2 fields keep
/// all four components `[h11, h12, h21, h22]`.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorField {
    Scalar(ScalarField),
    Vector(VectorField),
    Matrix(Box<[ScalarField; 4]>),
}

impl TensorField {
    /// `m` and its `2^m` components in row-major index order.
    pub fn from_components(order: usize, mut comps: Vec<ScalarField>) -> Result<Self> {
        if order > 2 {
            return Err(Error::UnsupportedOrder { order, max: 2 });
        }
        if comps.len() != 1 << order {
            return Err(Error::Shape(format!("order {order} needs {} components", 1 << order)));
        }
        let grid = *comps[0].grid();
        grid.require_2d("ray transforms are planar")?;
        for c in &comps {
            grid.check_same(c.grid())?;
        }
        Ok(match order {
            0 => TensorField::Scalar(comps.pop().expect("one component")),
            1 => TensorField::Vector(VectorField::new(comps)?),
            _ => {
                let arr: [ScalarField; 4] = comps.try_into().expect("four components");
                TensorField::Matrix(Box::new(arr))
            }
        })
    }

    pub fn symmetric(h11: ScalarField, h12: ScalarField, h22: ScalarField) -> Result<Self> {
        Self::from_components(2, vec![h11, h12.clone(), h12, h22])
    }

    pub fn order(&self) -> usize {
        match self {
            TensorField::Scalar(_) => 0,
            TensorField::Vector(_) => 1,
            TensorField::Matrix(_) => 2,
        }
    }

    pub fn components(&self) -> Vec<&ScalarField> {
        match self {
            TensorField::Scalar(f) => vec![f],
            TensorField::Vector(h) => h.components().iter().collect(),
            TensorField::Matrix(m) => m.iter().collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.components()[0].grid()
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.components().iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        if self.order() != other.order() {
            return Err(Error::Shape("tensor orders differ".into()));
        }
        let comps =
            self.components().iter().zip(other.components()).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
        Self::from_components(self.order(), comps)
    }

    /// `h_{i…}(x) v^i…` with bilinear interpolation of the components.
    fn contract(&self, x: [f64; 2], v: [f64; 2]) -> f64 {
        let Some(st) = bilinear_stencil(self.grid(), x[0], x[1]) else {
            return 0.0;
        };
        let at = |f: &ScalarField| st.iter().map(|&(k, w)| w * f.values()[k]).sum::<f64>();
        match self {
            TensorField::Scalar(f) => at(f),
            TensorField::Vector(h) => at(h.component(0)) * v[0] + at(h.component(1)) * v[1],
            TensorField::Matrix(m) => {
                at(&m[0]) * v[0] * v[0] + (at(&m[1]) + at(&m[2])) * v[0] * v[1] + at(&m[3]) * v[1] * v[1]
            }
        }
    }
}

/// Trapezoid rule in the path parameter of `h(γ)(γ̇, …, γ̇)` along each path.
pub fn geodesic_ray_transform(field: &TensorField, paths: &[GeodesicPath]) -> Result<Vec<f64>> {
    field.grid().require_2d("ray transforms are planar")?;
    Ok(paths
        .par_iter()
        .map(|path| {
            let s = path.samples();
            s.windows(2)
                .map(|w| 0.5 * (w[1].t - w[0].t) * (field.contract(w[0].x, w[0].v) + field.contract(w[1].x, w[1].v)))
                .sum()
        })
        .collect())
}

/// Paths from `n_sources` uniform boundary points, each launched in
/// `n_directions` directions spread across the inward half-plane.
pub fn geodesic_fan(c: &RadialProfile, n_sources: usize, n_directions: usize, step: f64) -> Result<Vec<GeodesicPath>> {
    (0..n_sources * n_directions)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n_directions, k % n_directions);
            let phi = TAU * i as f64 / n_sources as f64;
            let alpha = -0.5 * PI + PI * (j as f64 + 0.5) / n_directions as f64;
            let theta = phi + PI + alpha;
            trace_geodesic(c, boundary_point(phi, c.radius()), [theta.cos(), theta.sin()], step)
        })
        .collect()
}

/// A mixing of degree at most 2: one invertible matrix field per tensor slot.
/// It acts on the tensor indices, `(A h)_i = A₁_ij h_j` and
/// `(A h)_ij = A₁_ik A₂_jl h_kl`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixing2 {
    a1: MatrixWeight,
    a2: MatrixWeight,
}

impl Mixing2 {
    pub fn new(a1: MatrixWeight, a2: MatrixWeight) -> Result<Self> {
        a1.grid().check_same(a2.grid())?;
        Ok(Self { a1, a2 })
    }

    /// The same matrix in every slot.
    pub fn uniform(a: MatrixWeight) -> Self {
        Self { a1: a.clone(), a2: a }
    }

    pub fn first(&self) -> &MatrixWeight {
        &self.a1
    }

    pub fn second(&self) -> &MatrixWeight {
        &self.a2
    }

    pub fn apply(&self, h: &TensorField) -> Result<TensorField> {
        self.act(h, false)
    }

    pub fn apply_inverse(&self, h: &TensorField) -> Result<TensorField> {
        self.act(h, true)
    }

    fn act(&self, h: &TensorField, inverse: bool) -> Result<TensorField> {
        self.a1.grid().check_same(h.grid())?;
        match h {
            TensorField::Scalar(_) => Err(Error::Domain("mixings act on tensors of order 1 or 2".into())),
            TensorField::Vector(v) => {
                Ok(TensorField::Vector(if inverse { self.a1.apply_inverse(v)? } else { self.a1.apply(v)? }))
            }
            TensorField::Matrix(m) => {
                let grid = *h.grid();
                let mut out = vec![vec![0.0; grid.len()]; 4];
                for k in 0..grid.len() {
                    let (a, b) = (self.a1.at(k), self.a2.at(k));
                    let (a, b) = if inverse { (inv2(a), inv2(b)) } else { (a, b) };
                    let hk = [m[0].values()[k], m[1].values()[k], m[2].values()[k], m[3].values()[k]];
                    // A₁ H A₂ᵀ
                    let r = mul2(mul2(a, hk), [b[0], b[2], b[1], b[3]]);
                    for c in 0..4 {
                        out[c][k] = r[c];
                    }
                }
                let comps = out.into_iter().map(|v| ScalarField::new(grid, v)).collect::<Result<Vec<_>>>()?;
                TensorField::from_components(2, comps)
            }
        }
    }
}

fn mul2(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

fn inv2(m: [f64; 4]) -> [f64; 4] {
    let d = m[0] * m[3] - m[1] * m[2];
    [m[3] / d, -m[1] / d, -m[2] / d, m[0] / d]
}

/// `I_A h = I_m(A h)`.
pub fn mixing_ray_transform(field: &TensorField, a: &Mixing2, paths: &[GeodesicPath]) -> Result<Vec<f64>> {
    geodesic_ray_transform(&a.apply(field)?, paths)
}

/// `σ̂_A h = A⁻¹ σ (A h)` with `σ` the index symmetrisation.
pub fn symmetrize_a(field: &TensorField, a: &Mixing2) -> Result<TensorField> {
    match field {
        TensorField::Scalar(_) => Err(Error::Domain("mixings act on tensors of order 1 or 2".into())),
        TensorField::Vector(_) => Ok(field.clone()),
        TensorField::Matrix(_) => {
            let TensorField::Matrix(m) = a.apply(field)? else { unreachable!("order is preserved") };
            let off = m[1].lin_comb(0.5, &m[2], 0.5)?;
            let sym = TensorField::from_components(2, vec![m[0].clone(), off.clone(), off, m[3].clone()])?;
            a.apply_inverse(&sym)
        }
    }
}
