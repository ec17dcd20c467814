use super::fd::{apply_multi, axis_stencil};
use super::{ComplexField, GridSpec, ScalarField};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Constant-coefficient polynomial `P(ξ) = Σ a_α ξ^α`, read as the operator
/// `P(D)` with `D_j = -i∂_j`. Total order is capped at 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct PolyOperator {
    dim: usize,
    terms: BTreeMap<Vec<usize>, Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PolyTerm {
    alpha: Vec<usize>,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyRepr {
    dim: usize,
    terms: Vec<PolyTerm>,
}

impl TryFrom<PolyRepr> for PolyOperator {
    type Error = Error;
    fn try_from(r: PolyRepr) -> Result<Self> {
        PolyOperator::new(r.dim, r.terms.into_iter().map(|t| (t.alpha, Complex64::new(t.re, t.im))).collect())
    }
}

impl From<PolyOperator> for PolyRepr {
    fn from(p: PolyOperator) -> Self {
        PolyRepr {
            dim: p.dim,
            terms: p.terms.into_iter().map(|(alpha, a)| PolyTerm { alpha, re: a.re, im: a.im }).collect(),
        }
    }
}

impl PolyOperator {
    /// Builds `P` from `(α, a_α)` pairs; repeated multi-indices are summed.
    pub fn new(dim: usize, terms: Vec<(Vec<usize>, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
        for (alpha, a) in terms {
            if alpha.len() != dim {
                return Err(Error::Shape(format!(
                    "multi-index {alpha:?} has length {} in dimension {dim}",
                    alpha.len()
                )));
            }
            let order: usize = alpha.iter().sum();
            if order > 2 {
                return Err(Error::UnsupportedOrder { order, max: 2 });
            }
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidData("non-finite polynomial coefficient".into()));
            }
            *map.entry(alpha).or_default() += a;
        }
        map.retain(|_, a| a.norm() > 0.0);
        if map.is_empty() {
            return Err(Error::Domain("the zero polynomial is not an admissible constraint".into()));
        }
        Ok(Self { dim, terms: map })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, vec![(vec![0; dim], Complex64::new(1.0, 0.0))]).expect("nonzero")
    }

    /// `|ξ|²`, i.e. `P(D) = -Δ`.
    pub fn laplacian(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|a| {
                let mut alpha = vec![0; dim];
                alpha[a] = 2;
                (alpha, Complex64::new(1.0, 0.0))
            })
            .collect();
        Self::new(dim, terms).expect("nonzero")
    }

    /// `ξ_axis`, i.e. `P(D) = D_axis`.
    pub fn derivative(dim: usize, axis: usize) -> Self {
        let mut alpha = vec![0; dim];
        alpha[axis] = 1;
        Self::new(dim, vec![(alpha, Complex64::new(1.0, 0.0))]).expect("nonzero")
    }

    /// Named operators used by experiment configs.
    pub fn named(dim: usize, name: &str) -> Result<Self> {
        match name {
            "identity" | "1" => Ok(Self::identity(dim)),
            "laplacian" => Ok(Self::laplacian(dim)),
            "first-order" => Ok(Self::derivative(dim, 0)),
            other => Err(Error::Config(format!("unknown constraint operator '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.terms.keys().map(|a| a.iter().sum::<usize>()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], Complex64)> {
        self.terms.iter().map(|(a, &c)| (a.as_slice(), c))
    }

    pub fn is_identity(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&vec![0; self.dim]) == Some(&Complex64::new(1.0, 0.0))
    }
}

/// `(-i)^k`.
fn minus_i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `P(D)f` by finite differences.
pub fn apply_poly_operator(f: &ScalarField, p: &PolyOperator) -> Result<ComplexField> {
    let grid = *f.grid();
    if p.dim() != grid.dim() {
        return Err(Error::Shape(format!("{}-D operator applied to a {}-D field", p.dim(), grid.dim())));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (alpha, a) in p.terms() {
        let k: usize = alpha.iter().sum();
        let c = a * minus_i_pow(k);
        let d = apply_multi(&grid, f.values(), alpha);
        for (o, v) in out.iter_mut().zip(d) {
            *o += c * v;
        }
    }
    Ok(ComplexField::from_raw(grid, out))
}

/// Sparse rows of `P(D)` at the given flat cells, columns sorted ascending.
pub fn poly_operator_rows(grid: &GridSpec, p: &PolyOperator, cells: &[usize]) -> Result<Vec<Vec<(usize, Complex64)>>> {
    if p.dim() != grid.dim() {
        return Err(Error::Shape("operator and grid dimensions differ".into()));
    }
    let n = grid.n();
    let h = grid.spacing();
    let strides = grid.strides();
    let rows = cells
        .iter()
        .map(|&cell| {
            let idx = grid.unravel(cell);
            let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
            for (alpha, a) in p.terms() {
                let k: usize = alpha.iter().sum();
                // tensor product of per-axis stencils
                let mut partial: Vec<(usize, f64)> = vec![(0, 1.0)];
                for axis in 0..grid.dim() {
                    let st = axis_stencil(n, h, alpha[axis], idx[axis]);
                    let mut next = Vec::with_capacity(partial.len() * st.len);
                    for &(off, w) in &partial {
                        for (j, sw) in st.taps() {
                            next.push((off + j * strides[axis], w * sw));
                        }
                    }
                    partial = next;
                }
                let c = a * minus_i_pow(k);
                for (col, w) in partial {
                    *acc.entry(col).or_default() += c * w;
                }
            }
            acc.into_iter().filter(|(_, v)| v.norm() > 0.0).collect()
        })
        .collect();
    Ok(rows)
}
