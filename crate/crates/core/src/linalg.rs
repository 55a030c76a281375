//! Thin helpers over `faer` for the dense complex matrices used throughout.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(dim: usize) -> CMat {
    Mat::zeros(dim, dim)
}

pub fn identity(dim: usize) -> CMat {
    Mat::identity(dim, dim)
}

pub fn diagonal(entries: &[f64]) -> CMat {
    let mut m = zeros(entries.len());
    for (k, &e) in entries.iter().enumerate() {
        m[(k, k)] = c(e);
    }
    m
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn scaled(a: &CMat, s: Complex64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `acc += s * a`
pub fn axpy(acc: &mut CMat, s: Complex64, a: &CMat) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc[(i, j)] += s * a[(i, j)];
        }
    }
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows().min(a.ncols())).map(|k| a[(k, k)]).sum()
}

/// Frobenius inner product `Tr(a† b)`.
pub fn frobenius_inner(a: &CMat, b: &CMat) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    frobenius_inner(a, a).re.sqrt()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn hermiticity_deviation(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows() - 1) {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: &CMat) -> Result<Eigen> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigendecomposition)?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Eigen {
        values,
        vectors: evd.U().to_owned(),
    })
}

/// Eigendecomposition of a real symmetric matrix, ascending eigenvalues.
pub fn eigh_real(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigendecomposition)?;
    Ok((
        evd.S().column_vector().iter().copied().collect(),
        evd.U().to_owned(),
    ))
}

pub fn mat_vec(a: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == Complex64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (o, &x) in out.iter_mut().zip(col.iter()) {
            *o += x * vj;
        }
    }
    out
}

/// `a† v`
pub fn adjoint_mat_vec(a: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    (0..a.ncols())
        .map(|j| a.col(j).iter().zip(v).map(|(x, y)| x.conj() * y).sum())
        .collect()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
