//! Dense complex matrices and their JSON file format.
//!
//! On disk a matrix is `{"dim": n, "entries": [[re, im], …]}` with the `n²`
//! entries in row-major order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        check_square(m)?;
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::Format(format!(
                        "entry ({i}, {j}) is not finite: {z}"
                    )));
                }
                entries.push([z.re, z.im]);
            }
        }
        Ok(MatrixFile { dim: n, entries })
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.dim == 0 {
            return Err(Error::Format("matrix dimension must be positive".into()));
        }
        let expected = self.dim.checked_mul(self.dim).ok_or_else(|| {
            Error::Format(format!("matrix dimension {} is too large", self.dim))
        })?;
        if self.entries.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} entries for dim {}, found {}",
                self.dim,
                self.entries.len()
            )));
        }
        if let Some(k) = self
            .entries
            .iter()
            .position(|e| !e[0].is_finite() || !e[1].is_finite())
        {
            return Err(Error::Format(format!("entry {k} is not finite")));
        }
        let n = self.dim;
        Ok(Matrix::from_fn(n, n, |i, j| {
            let [re, im] = self.entries[i * n + j];
            Complex64::new(re, im)
        }))
    }
}

/// Decodes a matrix from its JSON text.
pub fn matrix_from_json(text: &str) -> Result<Matrix> {
    let file: MatrixFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("matrix JSON: {e}")))?;
    file.to_matrix()
}

pub fn matrix_to_json(m: &Matrix) -> Result<String> {
    let file = MatrixFile::from_matrix(m)?;
    serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    matrix_from_json(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn check_square(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension("matrix is empty".into()));
    }
    Ok(())
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("matrix has non-finite entries".into()))
    }
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

pub fn from_real(rows: &[&[f64]]) -> Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Matrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j], 0.0))
}

pub fn diag(values: &[Complex64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(values))
}

pub fn diag_real(values: &[f64]) -> Matrix {
    let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    diag(&v)
}

pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    a * b - b * a
}

/// `M^0, M^1, …, M^max_power`.
pub fn powers(m: &Matrix, max_power: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(max_power + 1);
    out.push(identity(m.nrows()));
    for p in 1..=max_power {
        let next = &out[p - 1] * m;
        out.push(next);
    }
    out
}

pub fn trace(m: &Matrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse together with the condition number; fails when the condition
/// number exceeds `max_condition`.
pub fn inverse(m: &Matrix, max_condition: f64) -> Result<(Matrix, f64)> {
    check_square(m)?;
    let condition = condition_number(m);
    if !(condition <= max_condition) {
        return Err(Error::Singular { condition });
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { condition })?;
    Ok((inv, condition))
}

pub fn is_upper_triangular(m: &Matrix) -> bool {
    (0..m.nrows()).all(|i| (0..i.min(m.ncols())).all(|j| m[(i, j)] == Complex64::new(0.0, 0.0)))
}

pub fn is_lower_triangular(m: &Matrix) -> bool {
    is_upper_triangular(&m.transpose())
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
