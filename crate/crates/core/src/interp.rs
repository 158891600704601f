//! Lagrange–Sylvester (Hermite) interpolation on tensor grids of nodes.

use num_complex::Complex64;

use crate::error::{fmt_complex, Error, Result};
use crate::matrix::{self, Matrix};
use crate::scalarfield::{axis_entries, DerivativeGrid, MultiPoly};

/// Nodes closer than this are rejected by [`hermite_basis`].
pub const MIN_NODE_SEPARATION: f64 = 1e-12;

/// Dual basis of the confluent point functionals `p ↦ p^(j)(λ_m)`.
#[derive(Clone, Debug)]
pub struct HermiteBasis {
    nodes: Vec<(Complex64, usize)>,
    /// Column `n` holds the monomial coefficients of the `n`-th basis
    /// polynomial, `n` enumerating `(m, j)` node by node.
    coeffs: Matrix,
    condition: f64,
}

impl HermiteBasis {
    pub fn nodes(&self) -> &[(Complex64, usize)] {
        &self.nodes
    }

    /// Number of basis polynomials, `Σ_m r_m`.
    pub fn size(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Condition number of the confluent Vandermonde matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Monomial coefficients of `P_{mj}`, lowest degree first.
    pub fn polynomial(&self, m: usize, j: usize) -> Vec<Complex64> {
        let n = self.index(m, j).expect("basis index out of range");
        self.coeffs.column(n).iter().copied().collect()
    }

    fn index(&self, m: usize, j: usize) -> Option<usize> {
        if m >= self.nodes.len() || j >= self.nodes[m].1 {
            return None;
        }
        Some(self.nodes[..m].iter().map(|(_, r)| r).sum::<usize>() + j)
    }

    pub(crate) fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }
}

/// `d^j/dx^j x^p` at `x`.
fn monomial_derivative(p: usize, j: usize, x: Complex64) -> Complex64 {
    if j > p {
        return Complex64::new(0.0, 0.0);
    }
    let falling: f64 = ((p - j + 1)..=p).map(|t| t as f64).product();
    x.powu((p - j) as u32) * falling
}

/// Evaluates the polynomial with coefficients `coeffs` (lowest first) and
/// its `j`-th derivative at `x`.
pub fn poly_derivative_at(coeffs: &[Complex64], j: usize, x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(p, c)| c * monomial_derivative(p, j, x))
        .sum()
}

/// Confluent Vandermonde matrix: row `(m, j)`, column `p`, entry
/// `d^j/dx^j x^p` at `λ_m`.
fn confluent_vandermonde(nodes: &[(Complex64, usize)]) -> Matrix {
    let rows: Vec<(Complex64, usize)> = nodes
        .iter()
        .flat_map(|&(z, r)| (0..r).map(move |j| (z, j)))
        .collect();
    let n = rows.len();
    Matrix::from_fn(n, n, |row, p| monomial_derivative(p, rows[row].1, rows[row].0))
}

/// Hermite basis for `nodes = [(λ_m, r_m)]` by inverting the confluent
/// Vandermonde system.
pub fn hermite_basis(nodes: &[(Complex64, usize)]) -> Result<HermiteBasis> {
    if let Some(&(z, _)) = nodes.iter().find(|(z, r)| *r == 0 || !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "node {} needs a positive multiplicity and a finite value",
            fmt_complex(z)
        )));
    }
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if (a.0 - b.0).norm() < MIN_NODE_SEPARATION {
                return Err(Error::NodesTooClose {
                    a: fmt_complex(a.0),
                    b: fmt_complex(b.0),
                    tol: MIN_NODE_SEPARATION,
                });
            }
        }
    }
    let v = confluent_vandermonde(nodes);
    let n = v.nrows();
    if n == 0 {
        return Ok(HermiteBasis {
            nodes: Vec::new(),
            coeffs: Matrix::zeros(0, 0),
            condition: 1.0,
        });
    }
    let condition = matrix::condition_number(&v);
    if condition > 1e14 {
        log::warn!("confluent Vandermonde system is ill-conditioned (κ = {condition:e})");
    }
    let coeffs = v
        .clone()
        .lu()
        .solve(&Matrix::identity(n, n))
        .ok_or(Error::Singular { condition })?;
    Ok(HermiteBasis {
        nodes: nodes.to_vec(),
        coeffs,
        condition,
    })
}

/// Interpolating polynomial `Σ grid(m, j)·Π_l P_{l m_l j_l}(x_l)`.
///
/// The grid may carry more derivative orders than a basis needs; a basis
/// entry with no grid value is an error listing every missing entry.
pub fn interpolate(grid: &DerivativeGrid, bases: &[HermiteBasis]) -> Result<MultiPoly> {
    let k = bases.len();
    if grid.nodes().len() != k {
        return Err(Error::Dimension(format!(
            "grid has {} slots, {k} bases given",
            grid.nodes().len()
        )));
    }
    // per slot: basis position → grid axis position
    let mut maps: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut missing = Vec::new();
    for (l, basis) in bases.iter().enumerate() {
        let grid_nodes = &grid.nodes()[l];
        let grid_axis = axis_entries(grid_nodes);
        let mut map = Vec::with_capacity(basis.size());
        for (m, &(z, r)) in basis.nodes().iter().enumerate() {
            let gm = grid_nodes
                .iter()
                .position(|(g, _)| (g - z).norm() < MIN_NODE_SEPARATION);
            for j in 0..r {
                let found = gm.and_then(|gm| grid_axis.iter().position(|&e| e == (gm, j)));
                match found {
                    Some(p) => map.push(p),
                    None => missing.push(format!("slot {} node {} (m={m}) order {j}", l + 1, fmt_complex(z))),
                }
            }
        }
        maps.push(map);
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing.join("; ")));
    }

    // gather the needed sub-grid, then transform one mode at a time
    let shape: Vec<usize> = bases.iter().map(|b| b.size()).collect();
    let total: usize = shape.iter().product();
    let gshape = grid.shape();
    let mut data = Vec::with_capacity(total);
    let mut pos = vec![0usize; k];
    for _ in 0..total {
        let mut flat = 0;
        for l in 0..k {
            flat = flat * gshape[l] + maps[l][pos[l]];
        }
        data.push(grid.values()[flat]);
        increment(&mut pos, &shape);
    }
    for (l, basis) in bases.iter().enumerate() {
        data = mode_product(&data, &shape, l, basis.coeffs());
    }

    let mut terms = Vec::new();
    let mut pos = vec![0usize; k];
    for &c in &data {
        if c != Complex64::new(0.0, 0.0) {
            terms.push((pos.iter().map(|&p| p as u32).collect(), c));
        }
        increment(&mut pos, &shape);
    }
    MultiPoly::from_terms(k, terms)
}

/// Odometer increment, last index fastest.
pub(crate) fn increment(pos: &mut [usize], shape: &[usize]) {
    for l in (0..pos.len()).rev() {
        pos[l] += 1;
        if pos[l] < shape[l] {
            return;
        }
        pos[l] = 0;
    }
}

/// `out[…, p, …] = Σ_n a[p, n] · data[…, n, …]` along axis `axis`.
fn mode_product(data: &[Complex64], shape: &[usize], axis: usize, a: &Matrix) -> Vec<Complex64> {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for o in 0..outer {
        for p in 0..n {
            for q in 0..n {
                let w = a[(p, q)];
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = (o * n + q) * inner;
                let dst = (o * n + p) * inner;
                for i in 0..inner {
                    out[dst + i] += w * data[src + i];
                }
            }
        }
    }
    out
}

/// Condition number of the linear map from restricted-degree coefficients to
/// grid values (the Kronecker product of the slot Vandermonde matrices).
pub fn grid_map_condition(bases: &[HermiteBasis]) -> f64 {
    bases.iter().map(|b| b.condition()).product()
}
