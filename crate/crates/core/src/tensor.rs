//! Operator tensors in `⊗_l (E_l ⊗ E_l*)` and their index algebra.
//!
//! Coefficients are stored in the order `(i1, j1, …, ik, jk)`, last index
//! fastest, so the flat array of `A ⊗ B` is the outer product of the
//! row-major entries of `A` and `B`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};
use crate::scalarfield::MultiPoly;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTensor {
    slot_dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl OperatorTensor {
    pub fn new(slot_dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if slot_dims.contains(&0) {
            return Err(Error::Dimension("slot dimensions must be positive".into()));
        }
        let len = slot_dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d)?.checked_mul(d))
            .ok_or_else(|| Error::Dimension("tensor is too large".into()))?;
        if data.len() != len {
            return Err(Error::Dimension(format!(
                "{} coefficients for slot dims {:?} (expected {len})",
                data.len(),
                slot_dims
            )));
        }
        Ok(OperatorTensor { slot_dims, data })
    }

    pub fn zeros(slot_dims: Vec<usize>) -> Self {
        let len = slot_dims.iter().map(|d| d * d).product();
        OperatorTensor {
            slot_dims,
            data: vec![ZERO; len],
        }
    }

    /// `I ⊗ … ⊗ I`.
    pub fn identity(slot_dims: Vec<usize>) -> Self {
        let mats: Vec<Matrix> = slot_dims.iter().map(|&d| matrix::identity(d)).collect();
        OperatorTensor::kron(&mats)
    }

    /// `M1 ⊗ … ⊗ Mk`.
    pub fn kron(mats: &[Matrix]) -> Self {
        let slot_dims: Vec<usize> = mats.iter().map(|m| m.nrows()).collect();
        let mut data = vec![Complex64::new(1.0, 0.0)];
        for m in mats {
            data = outer(&data, &row_major(m));
        }
        OperatorTensor { slot_dims, data }
    }

    pub fn slot_dims(&self) -> &[usize] {
        &self.slot_dims
    }

    pub fn num_slots(&self) -> usize {
        self.slot_dims.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Dimension of `E_1 ⊗ … ⊗ E_k`.
    pub fn space_dim(&self) -> usize {
        self.slot_dims.iter().product()
    }

    /// Coefficient at `[(i1, j1), …, (ik, jk)]` (0-based).
    pub fn get(&self, index: &[(usize, usize)]) -> Complex64 {
        self.data[self.flat(index)]
    }

    fn flat(&self, index: &[(usize, usize)]) -> usize {
        assert_eq!(index.len(), self.slot_dims.len(), "one index pair per slot");
        index
            .iter()
            .zip(&self.slot_dims)
            .fold(0, |acc, (&(i, j), &d)| {
                assert!(i < d && j < d, "index out of range");
                (acc * d + i) * d + j
            })
    }

    /// Matrix view: row `(i1, …, ik)`, column `(j1, …, jk)`.
    pub fn as_matrix(&self) -> Matrix {
        let n = self.space_dim();
        let mut out = Matrix::zeros(n, n);
        for (flat, &v) in self.data.iter().enumerate() {
            let (r, c) = self.row_col(flat);
            out[(r, c)] = v;
        }
        out
    }

    fn row_col(&self, mut flat: usize) -> (usize, usize) {
        let (mut r, mut c, mut stride) = (0, 0, 1);
        for &d in self.slot_dims.iter().rev() {
            let j = flat % d;
            flat /= d;
            let i = flat % d;
            flat /= d;
            r += i * stride;
            c += j * stride;
            stride *= d;
        }
        (r, c)
    }

    /// Inverse of [`as_matrix`](Self::as_matrix).
    pub fn from_matrix(m: &Matrix, slot_dims: Vec<usize>) -> Result<Self> {
        let mut t = OperatorTensor::new(slot_dims.clone(), vec![ZERO; slot_dims.iter().map(|d| d * d).product()])?;
        let n = t.space_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for slot dims {slot_dims:?}",
                m.nrows(),
                m.ncols()
            )));
        }
        for flat in 0..t.data.len() {
            let (r, c) = t.row_col(flat);
            t.data[flat] = m[(r, c)];
        }
        Ok(t)
    }

    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &OperatorTensor) -> f64 {
        assert_eq!(self.slot_dims, other.slot_dims, "slot dims differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖self − other‖_HS`.
    pub fn distance(&self, other: &OperatorTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    fn check_same_shape(&self, other: &OperatorTensor) -> Result<()> {
        if self.slot_dims != other.slot_dims {
            return Err(Error::Dimension(format!(
                "slot dims {:?} and {:?} differ",
                self.slot_dims, other.slot_dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &OperatorTensor) -> Result<OperatorTensor> {
        self.check_same_shape(other)?;
        Ok(OperatorTensor {
            slot_dims: self.slot_dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: Complex64) -> OperatorTensor {
        OperatorTensor {
            slot_dims: self.slot_dims.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.slot_dims.len() {
            return Err(Error::InvalidArgument(format!(
                "slot {} out of range for a tensor with {} slots",
                slot + 1,
                self.slot_dims.len()
            )));
        }
        Ok(())
    }

    /// Strides of the up and down index of each slot.
    fn strides(&self) -> Vec<(usize, usize)> {
        let k = self.slot_dims.len();
        let mut out = vec![(0, 0); k];
        let mut s = 1;
        for l in (0..k).rev() {
            let d = self.slot_dims[l];
            out[l] = (s * d, s);
            s *= d * d;
        }
        out
    }

    /// Swaps the up and down index of `slot`.
    pub fn transpose_slot(&self, slot: usize) -> Result<OperatorTensor> {
        self.check_slot(slot)?;
        let (su, sd) = self.strides()[slot];
        let d = self.slot_dims[slot];
        let mut data = self.data.clone();
        for (flat, v) in self.data.iter().enumerate() {
            let i = (flat / su) % d;
            let j = (flat / sd) % d;
            let target = flat - i * su - j * sd + j * su + i * sd;
            data[target] = *v;
        }
        Ok(OperatorTensor {
            slot_dims: self.slot_dims.clone(),
            data,
        })
    }

    /// Iterates every index of a tensor with `dims`, calling `f(flat, digits)`
    /// where `digits` is `(i1, j1, …, ik, jk)`.
    fn for_each_index(dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
        let shape: Vec<usize> = dims.iter().flat_map(|&d| [d, d]).collect();
        let total: usize = shape.iter().product();
        let mut digits = vec![0usize; shape.len()];
        for flat in 0..total {
            f(flat, &digits);
            crate::interp::increment(&mut digits, &shape);
        }
    }

    /// Sums the up index of `up_slot` against the down index of `down_slot`.
    /// The surviving pair (up index of `down_slot`, down index of `up_slot`)
    /// becomes one slot at position `min(up_slot, down_slot)`. With equal
    /// slots this is [`trace_slot`](Self::trace_slot).
    pub fn contract_pair(&self, up_slot: usize, down_slot: usize) -> Result<OperatorTensor> {
        self.check_slot(up_slot)?;
        self.check_slot(down_slot)?;
        if up_slot == down_slot {
            return self.trace_slot(up_slot);
        }
        let (p, q) = (up_slot, down_slot);
        let d = self.slot_dims[p];
        if self.slot_dims[q] != d {
            return Err(Error::Dimension(format!(
                "slots {} and {} have dimensions {} and {}",
                p + 1,
                q + 1,
                d,
                self.slot_dims[q]
            )));
        }
        let (keep, drop) = (p.min(q), p.max(q));
        let mut out_dims = self.slot_dims.clone();
        out_dims.remove(drop);
        let strides = self.strides();
        let mut out = OperatorTensor::zeros(out_dims.clone());
        Self::for_each_index(&out_dims, |flat, digits| {
            // digits of the survivor slot: (up = i_q, down = j_p)
            let (i_q, j_p) = (digits[2 * keep], digits[2 * keep + 1]);
            let mut base = 0;
            for l in 0..self.slot_dims.len() {
                if l == p || l == q {
                    continue;
                }
                let ol = if l > drop { l - 1 } else { l };
                base += digits[2 * ol] * strides[l].0 + digits[2 * ol + 1] * strides[l].1;
            }
            base += i_q * strides[q].0 + j_p * strides[p].1;
            let mut acc = ZERO;
            for a in 0..d {
                acc += self.data[base + a * strides[p].0 + a * strides[q].1];
            }
            out.data[flat] = acc;
        });
        Ok(out)
    }

    /// Sums `i_p = j_p`, removing slot `p`.
    pub fn trace_slot(&self, slot: usize) -> Result<OperatorTensor> {
        self.check_slot(slot)?;
        let d = self.slot_dims[slot];
        let mut out_dims = self.slot_dims.clone();
        out_dims.remove(slot);
        let strides = self.strides();
        let mut out = OperatorTensor::zeros(out_dims.clone());
        Self::for_each_index(&out_dims, |flat, digits| {
            let mut base = 0;
            for l in 0..self.slot_dims.len() {
                if l == slot {
                    continue;
                }
                let ol = if l > slot { l - 1 } else { l };
                base += digits[2 * ol] * strides[l].0 + digits[2 * ol + 1] * strides[l].1;
            }
            let mut acc = ZERO;
            for a in 0..d {
                acc += self.data[base + a * (strides[slot].0 + strides[slot].1)];
            }
            out.data[flat] = acc;
        });
        Ok(out)
    }

    /// Merges slots `p` and `p + 1` through `h`:
    /// `out[…, (a, e), …] = Σ_{b,c} T[…, (a, b)_p, (c, e)_{p+1}, …]·h[b, c]`.
    pub fn contract_through(&self, slot: usize, h: &Matrix) -> Result<OperatorTensor> {
        self.check_slot(slot)?;
        self.check_slot(slot + 1)?;
        let (dp, dq) = (self.slot_dims[slot], self.slot_dims[slot + 1]);
        if h.nrows() != dp || h.ncols() != dq || dp != dq {
            return Err(Error::Dimension(format!(
                "cannot contract slots of dimensions {dp} and {dq} through a {}x{} matrix",
                h.nrows(),
                h.ncols()
            )));
        }
        let d = dp;
        let mut out_dims = self.slot_dims.clone();
        out_dims.remove(slot + 1);
        let strides = self.strides();
        let mut out = OperatorTensor::zeros(out_dims.clone());
        Self::for_each_index(&out_dims, |flat, digits| {
            let mut base = 0;
            for l in 0..self.slot_dims.len() {
                if l == slot || l == slot + 1 {
                    continue;
                }
                let ol = if l > slot + 1 { l - 1 } else { l };
                base += digits[2 * ol] * strides[l].0 + digits[2 * ol + 1] * strides[l].1;
            }
            let (a, e) = (digits[2 * slot], digits[2 * slot + 1]);
            base += a * strides[slot].0 + e * strides[slot + 1].1;
            let mut acc = ZERO;
            for b in 0..d {
                for c in 0..d {
                    let w = h[(b, c)];
                    if w != ZERO {
                        acc += w * self.data[base + b * strides[slot].1 + c * strides[slot + 1].0];
                    }
                }
            }
            out.data[flat] = acc;
        });
        Ok(out)
    }

    /// Contracts every down index with the matching vector; the result is
    /// indexed by `(i1, …, ik)`, row-major.
    pub fn apply_vectors(&self, vectors: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
        if vectors.len() != self.slot_dims.len()
            || vectors.iter().zip(&self.slot_dims).any(|(v, &d)| v.len() != d)
        {
            return Err(Error::Dimension(format!(
                "vectors of lengths {:?} for slot dims {:?}",
                vectors.iter().map(|v| v.len()).collect::<Vec<_>>(),
                self.slot_dims
            )));
        }
        let mut u = vec![Complex64::new(1.0, 0.0)];
        for v in vectors {
            u = outer(&u, v);
        }
        let n = self.space_dim();
        let mut out = vec![ZERO; n];
        for (flat, &t) in self.data.iter().enumerate() {
            let (r, c) = self.row_col(flat);
            out[r] += t * u[c];
        }
        Ok(out)
    }

    /// Applies `left` to the up index and `right` to the down index of
    /// `slot`: the slot matrix `X` becomes `left·X·right`.
    pub fn map_slot(&self, slot: usize, left: &Matrix, right: &Matrix) -> Result<OperatorTensor> {
        self.check_slot(slot)?;
        let d = self.slot_dims[slot];
        if left.shape() != (d, d) || right.shape() != (d, d) {
            return Err(Error::Dimension(format!("slot {} needs {d}x{d} matrices", slot + 1)));
        }
        let (su, sd) = self.strides()[slot];
        let mut out = vec![ZERO; self.data.len()];
        for (flat, &v) in self.data.iter().enumerate() {
            if v == ZERO {
                continue;
            }
            let i = (flat / su) % d;
            let j = (flat / sd) % d;
            let base = flat - i * su - j * sd;
            for a in 0..d {
                let la = left[(a, i)];
                if la == ZERO {
                    continue;
                }
                for b in 0..d {
                    out[base + a * su + b * sd] += la * v * right[(j, b)];
                }
            }
        }
        Ok(OperatorTensor {
            slot_dims: self.slot_dims.clone(),
            data: out,
        })
    }

    /// Applies `A_l ⊗ A_l^{-T}` to every slot, i.e. each slot matrix `X`
    /// becomes `A_l X A_l⁻¹`. Returns the tensor and the product of the
    /// condition numbers.
    pub fn conjugate_slots(&self, a: &[Matrix]) -> Result<(OperatorTensor, f64)> {
        if a.len() != self.slot_dims.len() {
            return Err(Error::Dimension(format!(
                "{} conjugating matrices for {} slots",
                a.len(),
                self.slot_dims.len()
            )));
        }
        let mut t = self.clone();
        let mut kappa = 1.0;
        for (l, al) in a.iter().enumerate() {
            let (inv, cond) = matrix::inverse(al, 1e12).map_err(|e| e.in_slot(l + 1))?;
            kappa *= cond;
            t = t.map_slot(l, al, &inv)?;
        }
        Ok((t, kappa))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TensorFile {
            slot_dims: self.slot_dims.clone(),
            entries: self.data.iter().map(|z| [z.re, z.im]).collect(),
        };
        if file.entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Format("tensor has non-finite entries".into()));
        }
        serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub slot_dims: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
}

/// Decodes a tensor from `{"slot_dims": […], "entries": [[re, im], …]}`.
pub fn tensor_from_json(text: &str) -> Result<OperatorTensor> {
    let file: TensorFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("tensor JSON: {e}")))?;
    if file.entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Format("tensor has non-finite entries".into()));
    }
    let data = file.entries.iter().map(|e| Complex64::new(e[0], e[1])).collect();
    OperatorTensor::new(file.slot_dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<OperatorTensor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    tensor_from_json(&text)
}

fn row_major(m: &Matrix) -> Vec<Complex64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn outer(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// `Σ_α c_α M1^{α1} ⊗ … ⊗ Mk^{αk}`, with the powers of each matrix computed
/// once.
pub fn poly_tensor_eval(p: &MultiPoly, mats: &[Matrix]) -> Result<OperatorTensor> {
    if p.arity() != mats.len() {
        return Err(Error::Dimension(format!(
            "polynomial of arity {} applied to {} matrices",
            p.arity(),
            mats.len()
        )));
    }
    for (l, m) in mats.iter().enumerate() {
        matrix::check_square(m).map_err(|e| e.in_slot(l + 1))?;
    }
    let powers: Vec<Vec<Vec<Complex64>>> = mats
        .iter()
        .enumerate()
        .map(|(l, m)| {
            matrix::powers(m, p.degree_in(l) as usize)
                .iter()
                .map(row_major)
                .collect()
        })
        .collect();
    let slot_dims: Vec<usize> = mats.iter().map(|m| m.nrows()).collect();
    let mut out = OperatorTensor::zeros(slot_dims);
    for (alpha, c) in p.terms() {
        let mut term = vec![c];
        for (l, &a) in alpha.iter().enumerate() {
            term = outer(&term, &powers[l][a as usize]);
        }
        for (o, t) in out.data.iter_mut().zip(term) {
            *o += t;
        }
    }
    Ok(out)
}
