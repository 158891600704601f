//! Antisymmetrizer, sums over distinct eigenvalue tuples, restriction to the
//! exterior power and the determinant from power traces.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::funcalc::{f_otimes, Tolerances};
use crate::matrix::{self, Matrix};
use crate::scalarfield::ScalarField;
use crate::tensor::OperatorTensor;

/// All permutations of `0..k` with their signatures, in lexicographic order.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        out.push((perm.clone(), signature(&perm)));
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).expect("pivot has a successor");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
    out
}

fn signature(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|t| t as f64).product()
}

/// `Π^∧_k` on `(C^d)^{⊗k}`: the coefficient at `((a1, b1), …, (ak, bk))` is
/// `(1/k!) Σ_σ ε(σ) Π_l δ(a_l, b_{σ(l)})`. Zero when `k > d`.
pub fn antisym_projector(d: usize, k: usize) -> OperatorTensor {
    if k > d {
        log::warn!("antisymmetrizer with k = {k} > d = {d} is zero");
    }
    if k > d {
        return OperatorTensor::zeros(vec![d; k]);
    }
    let weight = 1.0 / factorial(k);
    let perms = permutations(k);
    let mut data = vec![Complex64::new(0.0, 0.0); (d * d).pow(k as u32)];
    let pair_stride = |l: usize| (d * d).pow((k - 1 - l) as u32);
    for up in distinct_tuples(d, k) {
        for (sigma, sign) in &perms {
            // b_{σ(l)} = a_l
            let mut down = vec![0usize; k];
            for l in 0..k {
                down[sigma[l]] = up[l];
            }
            let flat: usize = (0..k).map(|l| (up[l] * d + down[l]) * pair_stride(l)).sum();
            data[flat] += Complex64::new(sign * weight, 0.0);
        }
    }
    OperatorTensor::new(vec![d; k], data).expect("data matches the slot dimensions")
}

/// Tuples in `0..d` of length `k` with pairwise distinct entries, in
/// lexicographic order.
fn distinct_tuples(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in 0..d {
            if !cur.contains(&a) {
                cur.push(a);
                rec(d, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(d, k, &mut cur, &mut out);
    out
}

/// Increasing index tuples of length `k` in `0..d`, lexicographic.
pub fn increasing_tuples(d: usize, k: usize) -> Vec<Vec<usize>> {
    distinct_tuples(d, k)
        .into_iter()
        .filter(|t| t.windows(2).all(|w| w[0] < w[1]))
        .collect()
}

fn check_arity(f: &ScalarField, k: usize) -> Result<()> {
    if f.arity() != k {
        return Err(Error::Dimension(format!(
            "field of arity {} used with k = {k}",
            f.arity()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    Ok(())
}

/// `Σ f(λ_{n1}, …, λ_{nk})` over pairwise distinct eigenvalue indices
/// (counting algebraic multiplicity), computed as `k!·Tr(f⊗(M, …, M)·Π^∧_k)`.
pub fn distinct_tuple_sum(f: &ScalarField, m: &Matrix, k: usize, tol: &Tolerances) -> Result<Complex64> {
    check_arity(f, k)?;
    matrix::check_square(m)?;
    let t = f_otimes(f, &vec![m.clone(); k], tol)?.as_matrix();
    let pi = antisym_projector(m.nrows(), k).as_matrix();
    Ok(matrix::trace(&(t * pi)) * factorial(k))
}

/// Orthonormal basis of the antisymmetric subspace: column `c` is
/// `e_{n1} ∧ … ∧ e_{nk}` normalised, with `(n1 < … < nk)` the `c`-th
/// increasing tuple.
pub fn wedge_basis(d: usize, k: usize) -> Matrix {
    let tuples = increasing_tuples(d, k);
    let perms = permutations(k);
    let rows = d.pow(k as u32);
    let norm = 1.0 / factorial(k).sqrt();
    let mut w = Matrix::zeros(rows, tuples.len());
    for (c, tuple) in tuples.iter().enumerate() {
        for (sigma, sign) in &perms {
            let row = sigma.iter().fold(0, |acc, &s| acc * d + tuple[s]);
            w[(row, c)] = Complex64::new(sign * norm, 0.0);
        }
    }
    w
}

/// Matrix of `Π^∧ f⊗(M, …, M) Π^∧` on the antisymmetric subspace in the
/// basis of [`wedge_basis`].
pub fn wedge_restrict(f: &ScalarField, m: &Matrix, k: usize, tol: &Tolerances) -> Result<Matrix> {
    check_arity(f, k)?;
    matrix::check_square(m)?;
    let t = f_otimes(f, &vec![m.clone(); k], tol)?.as_matrix();
    let w = wedge_basis(m.nrows(), k);
    Ok(w.adjoint() * t * w)
}

/// Integer partitions of `n`, as multiplicity vectors `a` with
/// `Σ j·a_j = n` (`a[j - 1]` is the multiplicity of part `j`).
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, max_part: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(a.clone());
            return;
        }
        for part in (1..=max_part.min(left)).rev() {
            a[part - 1] += 1;
            rec(left - part, part, a, out);
            a[part - 1] -= 1;
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut vec![0; n], &mut out);
    out
}

/// `det M = Σ_{Σ j a_j = d} (−1)^{d − Σ a_j} / Π (j^{a_j} a_j!) · Π Tr(M^j)^{a_j}`.
pub fn det_from_traces(m: &Matrix) -> Result<Complex64> {
    matrix::check_square(m)?;
    let d = m.nrows();
    let traces: Vec<Complex64> = matrix::powers(m, d).iter().map(matrix::trace).collect();
    let mut det = Complex64::new(0.0, 0.0);
    for a in partitions(d) {
        let parts: usize = a.iter().sum();
        let sign = if (d - parts) % 2 == 0 { 1.0 } else { -1.0 };
        let mut denom = 1.0;
        let mut prod = Complex64::new(1.0, 0.0);
        for (idx, &aj) in a.iter().enumerate() {
            let j = idx + 1;
            denom *= (j as f64).powi(aj as i32) * factorial(aj);
            prod *= traces[j].powu(aj as u32);
        }
        det += prod * (sign / denom);
    }
    Ok(det)
}
