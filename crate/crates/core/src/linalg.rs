//! Small linear-algebra helpers: CSR rows, conjugate gradients, singular
//! value extremes and finite-difference weights.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Compressed sparse rows with real entries.
#[derive(Clone, Debug, Default)]
pub struct Csr {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, indptr: vec![0], indices: Vec::new(), data: Vec::new() }
    }

    pub fn push_row(&mut self, row: impl IntoIterator<Item = (usize, f64)>) {
        for (j, v) in row {
            debug_assert!(j < self.ncols);
            if v != 0.0 {
                self.indices.push(j);
                self.data.push(v);
            }
        }
        self.indptr.push(self.indices.len());
    }

    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scale_row(&mut self, i: usize, a: f64) {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.data[r].iter_mut().for_each(|v| *v *= a);
    }

    pub fn append(&mut self, other: &Csr) {
        assert_eq!(self.ncols, other.ncols);
        for i in 0..other.nrows() {
            self.push_row(other.row(i));
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows()).into_par_iter().map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// Stops when `‖b − Ax‖ ≤ tol·‖b‖`; fails after `max_iter` iterations.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Convergence { iterations: it, residual: rr.sqrt() / bnorm });
        }
        let a = rr / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            return Ok((x, CgReport { iterations: it, relative_residual: rr_new.sqrt() / bnorm }));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::Convergence { iterations: max_iter, residual: rr.sqrt() / bnorm })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Singular values in descending order; rows < cols pads with zeros.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.resize(m.ncols().max(sv.len()), 0.0);
    sv
}

/// Numerical rank threshold used by every rank statement.
pub fn rank_threshold(sigma_max: f64) -> f64 {
    1e3 * f64::EPSILON * sigma_max
}

/// Fornberg weights for derivatives `0..=max_order` at `x0` from `nodes`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let m = max_order;
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    // transpose to [order][node]
    (0..=m).map(|k| (0..n).map(|i| c[i][k]).collect()).collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[2][0] - 1.0).abs() < 1e-14);
        assert!((w[2][1] + 2.0).abs() < 1e-14);
        assert!((w[1][2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = [[4.0, 1.0], [1.0, 3.0]];
        let (x, _) = conjugate_gradient(
            |v| vec![a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]],
            &[1.0, 2.0],
            1e-12,
            10,
        )
        .unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12 && (x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn csr_transpose_is_adjoint() {
        let mut m = Csr::new(3);
        m.push_row([(0, 1.0), (2, -2.0)]);
        m.push_row([(1, 3.0)]);
        let x = [1.0, 2.0, 3.0];
        let y = [0.5, -1.0];
        assert!((dot(&m.matvec(&x), &y) - dot(&x, &m.matvec_t(&y))).abs() < 1e-14);
    }
}
