//! `f⊗(M1, …, Mk)` by Lagrange–Sylvester interpolation, with the
//! diagonalizable decomposition and the Jordan closed form as independent
//! evaluation paths.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::interp::{self, hermite_basis};
use crate::matrix::{self, Matrix};
use crate::scalarfield::{derivative_for, derivative_grid_at, MultiPoly, ScalarField};
use crate::spectral::{self, Eigenbasis, SpectralData};
use crate::tensor::{poly_tensor_eval, OperatorTensor};

/// Tolerances of the spectral analysis behind every evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Eigenvalues closer than `cluster_rel·‖M‖_HS` are one eigenvalue.
    pub cluster_rel: f64,
    /// Relative threshold for numerical rank.
    pub rank_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cluster_rel: 1e-8,
            rank_tol: spectral::DEFAULT_RANK_TOL,
        }
    }
}

impl Tolerances {
    pub fn analyze(&self, m: &Matrix) -> Result<SpectralData> {
        let eigs = spectral::eigen_cluster(m, self.cluster_rel * matrix::hs_norm(m))?;
        spectral::minimal_multiplicities(m, &eigs, self.rank_tol)
    }
}

fn check_inputs(f: &ScalarField, mats: &[Matrix]) -> Result<()> {
    if f.arity() != mats.len() {
        return Err(Error::Dimension(format!(
            "field of arity {} applied to {} matrices",
            f.arity(),
            mats.len()
        )));
    }
    for (l, m) in mats.iter().enumerate() {
        matrix::check_square(m)
            .and_then(|_| matrix::check_finite(m))
            .map_err(|e| e.in_slot(l + 1))?;
    }
    Ok(())
}

/// Spectral data of each slot, analysing repeated matrices once.
pub fn slot_spectra(mats: &[Matrix], tol: &Tolerances) -> Result<Vec<SpectralData>> {
    let mut out: Vec<SpectralData> = Vec::with_capacity(mats.len());
    for (l, m) in mats.iter().enumerate() {
        if let Some(prev) = mats[..l].iter().position(|p| p == m) {
            out.push(out[prev].clone());
        } else {
            out.push(tol.analyze(m).map_err(|e| e.in_slot(l + 1))?);
        }
    }
    Ok(out)
}

/// The interpolating polynomial `P` with `P⊗(mats) = f⊗(mats)`.
pub fn interpolant(f: &ScalarField, mats: &[Matrix], tol: &Tolerances) -> Result<MultiPoly> {
    check_inputs(f, mats)?;
    let spectra = slot_spectra(mats, tol)?;
    let nodes: Vec<_> = spectra.iter().map(|s| s.nodes()).collect();
    interpolant_at(f, &nodes)
}

/// Interpolant of `f` on explicit `(node, multiplicity)` lists.
pub fn interpolant_at(f: &ScalarField, nodes: &[Vec<(Complex64, usize)>]) -> Result<MultiPoly> {
    let grid = derivative_grid_at(f, nodes)?;
    let bases = nodes
        .iter()
        .enumerate()
        .map(|(l, n)| hermite_basis(n).map_err(|e| e.in_slot(l + 1)))
        .collect::<Result<Vec<_>>>()?;
    interp::interpolate(&grid, &bases)
}

/// `f⊗(M1, …, Mk)`.
pub fn f_otimes(f: &ScalarField, mats: &[Matrix], tol: &Tolerances) -> Result<OperatorTensor> {
    let p = interpolant(f, mats, tol)?;
    poly_tensor_eval(&p, mats)
}

/// `f⊗(M1, …, Mk)` interpolating on the given nodes instead of the computed
/// spectra. The nodes must cover each spectrum with at least the minimal
/// multiplicities.
pub fn f_otimes_with_nodes(
    f: &ScalarField,
    mats: &[Matrix],
    nodes: &[Vec<(Complex64, usize)>],
) -> Result<OperatorTensor> {
    check_inputs(f, mats)?;
    let p = interpolant_at(f, nodes)?;
    poly_tensor_eval(&p, mats)
}

/// Eigenbases of every slot; defective slots give
/// [`Error::NotDiagonalizable`].
pub fn eigenbases(mats: &[Matrix], tol: &Tolerances) -> Result<Vec<Eigenbasis>> {
    let spectra = slot_spectra(mats, tol)?;
    mats.iter()
        .zip(&spectra)
        .enumerate()
        .map(|(l, (m, s))| Eigenbasis::new(m, s).map_err(|e| e.in_slot(l + 1)))
        .collect()
}

/// `Σ f(λ_{1c1}, …, λ_{kck}) · P_{1c1} ⊗ … ⊗ P_{kck}` over all tuples of
/// eigenbasis columns, with `P` the rank-one spectral projectors.
pub fn f_otimes_diagonalizable(
    f: &ScalarField,
    mats: &[Matrix],
    bases: &[Eigenbasis],
) -> Result<OperatorTensor> {
    check_inputs(f, mats)?;
    if bases.len() != mats.len() {
        return Err(Error::Dimension(format!(
            "{} eigenbases for {} matrices",
            bases.len(),
            mats.len()
        )));
    }
    for (l, (m, b)) in mats.iter().zip(bases).enumerate() {
        if b.vectors.nrows() != m.nrows() || b.values.len() != m.nrows() {
            return Err(Error::NotDiagonalizable(format!(
                "slot {}: eigenbasis has {} vectors for dimension {}",
                l + 1,
                b.values.len(),
                m.nrows()
            )));
        }
    }
    let projectors: Vec<Vec<OperatorTensor>> = bases
        .iter()
        .map(|b| {
            (0..b.values.len())
                .map(|c| OperatorTensor::kron(&[b.projector(c)]))
                .collect()
        })
        .collect();
    let slot_dims: Vec<usize> = mats.iter().map(|m| m.nrows()).collect();
    let shape = slot_dims.clone();
    let total: usize = shape.iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); slot_dims.iter().map(|d| d * d).product()];
    let mut pos = vec![0usize; shape.len()];
    let mut point = vec![Complex64::new(0.0, 0.0); shape.len()];
    for _ in 0..total {
        for l in 0..shape.len() {
            point[l] = bases[l].values[pos[l]];
        }
        let value = f.expr().eval(&point).map_err(|source| Error::Grid {
            tuple: point.clone(),
            source,
        })?;
        if value != Complex64::new(0.0, 0.0) {
            let mut term = vec![value];
            for l in 0..shape.len() {
                let p = projectors[l][pos[l]].data();
                let mut next = Vec::with_capacity(term.len() * p.len());
                for &a in &term {
                    for &b in p {
                        next.push(a * b);
                    }
                }
                term = next;
            }
            for (o, t) in out.iter_mut().zip(term) {
                *o += t;
            }
        }
        interp::increment(&mut pos, &shape);
    }
    OperatorTensor::new(slot_dims, out)
}

/// A matrix in Jordan form together with its declared block structure.
#[derive(Clone, Debug, PartialEq)]
pub struct JordanMatrix {
    /// `(eigenvalue, block size)` in diagonal order.
    pub blocks: Vec<(Complex64, usize)>,
}

impl JordanMatrix {
    pub fn new(blocks: Vec<(Complex64, usize)>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(|b| b.1 == 0) {
            return Err(Error::JordanStructure("blocks must be non-empty".into()));
        }
        Ok(JordanMatrix { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        let mut start = 0;
        for &(lambda, size) in &self.blocks {
            for i in 0..size {
                m[(start + i, start + i)] = lambda;
                if i + 1 < size {
                    m[(start + i, start + i + 1)] = Complex64::new(1.0, 0.0);
                }
            }
            start += size;
        }
        m
    }

    /// `(block, offset in block)` of every row.
    fn positions(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, &(_, size))| (0..size).map(move |a| (b, a)))
            .collect()
    }
}

/// `f⊗` of exact Jordan matrices from the closed form: the coefficient at
/// `((i1, j1), …)` is `Π_l 1/(a_{j_l} − a_{i_l})! · ∂^{…} f(λ_{blocks})` when
/// `i_l` and `j_l` lie in the same block with offset `a_{i_l} ≤ a_{j_l}`, and
/// zero otherwise.
pub fn jordan_closed_form(
    f: &ScalarField,
    mats: &[Matrix],
    jordan: &[JordanMatrix],
) -> Result<OperatorTensor> {
    check_inputs(f, mats)?;
    if jordan.len() != mats.len() {
        return Err(Error::Dimension(format!(
            "{} Jordan structures for {} matrices",
            jordan.len(),
            mats.len()
        )));
    }
    for (l, (m, j)) in mats.iter().zip(jordan).enumerate() {
        if m.nrows() != j.dim() || *m != j.to_matrix() {
            return Err(Error::JordanStructure(format!(
                "slot {}: matrix is not the Jordan matrix of blocks {:?}",
                l + 1,
                j.blocks
            )));
        }
    }
    let k = mats.len();
    let positions: Vec<Vec<(usize, usize)>> = jordan.iter().map(|j| j.positions()).collect();
    let slot_dims: Vec<usize> = mats.iter().map(|m| m.nrows()).collect();
    let shape: Vec<usize> = slot_dims.iter().flat_map(|&d| [d, d]).collect();
    let total: usize = shape.iter().product();
    let mut cache: HashMap<Vec<usize>, _> = HashMap::new();
    cache.insert(vec![0; k], f.expr().clone());
    let mut values: HashMap<(Vec<usize>, Vec<usize>), Complex64> = HashMap::new();
    let mut data = Vec::with_capacity(total);
    let mut digits = vec![0usize; 2 * k];
    let mut factorial = vec![1.0f64];
    'entries: for _ in 0..total {
        let mut orders = vec![0usize; k];
        let mut blocks = vec![0usize; k];
        for l in 0..k {
            let (bi, ai) = positions[l][digits[2 * l]];
            let (bj, aj) = positions[l][digits[2 * l + 1]];
            if bi != bj || ai > aj {
                data.push(Complex64::new(0.0, 0.0));
                interp::increment(&mut digits, &shape);
                continue 'entries;
            }
            orders[l] = aj - ai;
            blocks[l] = bi;
        }
        let key = (orders.clone(), blocks.clone());
        let v = match values.get(&key) {
            Some(v) => *v,
            None => {
                let point: Vec<Complex64> =
                    (0..k).map(|l| jordan[l].blocks[blocks[l]].0).collect();
                let d = derivative_for(&mut cache, &orders);
                let raw = d.eval(&point).map_err(|source| Error::Grid {
                    tuple: point.clone(),
                    source,
                })?;
                let mut scale = 1.0;
                for &o in &orders {
                    while factorial.len() <= o {
                        let n = factorial.len();
                        factorial.push(factorial[n - 1] * n as f64);
                    }
                    scale *= factorial[o];
                }
                let v = raw / scale;
                values.insert(key, v);
                v
            }
        };
        data.push(v);
        interp::increment(&mut digits, &shape);
    }
    OperatorTensor::new(slot_dims, data)
}

/// Chains adjacent contractions, `T^{i}_{i1}^{i1}_{i2}…^{i_{k−1}}_{j}`,
/// left to right, producing one matrix.
pub fn chain_contract(t: &OperatorTensor) -> Result<Matrix> {
    let dims = t.slot_dims();
    if dims.is_empty() {
        return Err(Error::Dimension("cannot chain-contract a tensor without slots".into()));
    }
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::Dimension(format!(
            "chain contraction needs equal slot dimensions, got {dims:?}"
        )));
    }
    let mut cur = t.clone();
    while cur.num_slots() > 1 {
        cur = cur.contract_pair(1, 0)?;
    }
    Ok(cur.as_matrix())
}
