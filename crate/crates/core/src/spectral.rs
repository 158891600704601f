//! Eigenvalues, algebraic multiplicities and minimal-polynomial
//! multiplicities of a square matrix.

use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, Vector};

/// Relative rank threshold used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Default clustering tolerance for `m`: `1e-8·‖m‖_HS`.
pub fn default_cluster_tol(m: &Matrix) -> f64 {
    1e-8 * matrix::hs_norm(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vec<Complex64>,
    pub alg_mult: Vec<usize>,
    /// Empty until [`minimal_multiplicities`] has run.
    pub min_mult: Vec<usize>,
    pub cluster_tol: f64,
}

impl SpectralData {
    /// Interpolation nodes `(λ_m, r_m)`. Before the minimal multiplicities
    /// are known the algebraic ones are used, which over-provisions the
    /// interpolation but never under-provisions it.
    pub fn nodes(&self) -> Vec<(Complex64, usize)> {
        let mult = if self.min_mult.len() == self.eigenvalues.len() {
            &self.min_mult
        } else {
            &self.alg_mult
        };
        self.eigenvalues.iter().copied().zip(mult.iter().copied()).collect()
    }

    pub fn dim(&self) -> usize {
        self.alg_mult.iter().sum()
    }

    /// Whether every eigenvalue has `r = 1`.
    pub fn is_diagonalizable(&self) -> bool {
        self.min_mult.len() == self.eigenvalues.len() && self.min_mult.iter().all(|&r| r == 1)
    }

    /// Whether every eigenvalue is simple.
    pub fn is_simple(&self) -> bool {
        self.alg_mult.iter().all(|&s| s == 1)
    }

    /// Eigenvalues repeated by algebraic multiplicity.
    pub fn eigenvalues_with_multiplicity(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .zip(&self.alg_mult)
            .flat_map(|(&l, &s)| std::iter::repeat_n(l, s))
            .collect()
    }
}

/// Full spectral data of `m` with the default tolerances.
pub fn analyze(m: &Matrix) -> Result<SpectralData> {
    let eigs = eigen_cluster(m, default_cluster_tol(m))?;
    minimal_multiplicities(m, &eigs, DEFAULT_RANK_TOL)
}

/// Raw eigenvalues with multiplicity, unordered. Triangular matrices are read
/// off the diagonal exactly.
pub fn raw_eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    matrix::check_square(m)?;
    matrix::check_finite(m)?;
    if matrix::is_upper_triangular(m) || matrix::is_lower_triangular(m) {
        return Ok(m.diagonal().iter().copied().collect());
    }
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or_else(|| {
        Error::EigenConvergence(format!("{n}x{n} matrix with ‖M‖_HS = {:e}", matrix::hs_norm(m)))
    })?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Clusters the eigenvalues of `m`: eigenvalues within `tol` of each other
/// (transitively) are replaced by their mean, and clustering repeats until
/// all representatives are more than `tol` apart.
pub fn eigen_cluster(m: &Matrix, tol: f64) -> Result<SpectralData> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("cluster tolerance {tol} must be >= 0")));
    }
    let raw = raw_eigenvalues(m)?;
    let mut groups: Vec<(Complex64, usize)> = raw.iter().map(|&z| (z, 1)).collect();
    loop {
        let merged = merge_weighted(&groups, tol);
        if merged.len() == groups.len() {
            break;
        }
        groups = merged;
    }
    sort_spectrum(&mut groups, tol);
    Ok(SpectralData {
        eigenvalues: groups.iter().map(|g| g.0).collect(),
        alg_mult: groups.iter().map(|g| g.1).collect(),
        min_mult: Vec::new(),
        cluster_tol: tol,
    })
}

/// Single-linkage merge of weighted points into weighted centroids.
fn merge_weighted(points: &[(Complex64, usize)], tol: f64) -> Vec<(Complex64, usize)> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i].0 - points[j].0).norm() <= tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut out: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        let (z, w) = points[i];
        match out.iter_mut().find(|e| e.0 == r) {
            Some(e) => {
                e.1 += z * w as f64;
                e.2 += w;
            }
            None => out.push((r, z * w as f64, w)),
        }
    }
    out.into_iter().map(|(_, s, w)| (s / w as f64, w)).collect()
}

/// Lexicographic order by (real, imaginary) part, with real parts closer
/// than the band width treated as equal so that rounding noise in the real
/// part cannot flip the order of a conjugate pair.
fn sort_spectrum(groups: &mut [(Complex64, usize)], tol: f64) {
    let scale = groups.iter().map(|g| g.0.norm()).fold(1.0, f64::max);
    let band = tol.max(64.0 * f64::EPSILON * scale);
    groups.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    let mut keys = vec![0.0; groups.len()];
    let mut start = 0;
    for i in 0..groups.len() {
        if i > 0 && groups[i].0.re - groups[i - 1].0.re > band {
            start = i;
        }
        keys[i] = groups[start].0.re;
    }
    let mut keyed: Vec<(f64, (Complex64, usize))> = keys.into_iter().zip(groups.iter().copied()).collect();
    keyed.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => a.1 .0.im.total_cmp(&b.1 .0.im),
        o => o,
    });
    for (slot, (_, g)) in groups.iter_mut().zip(keyed) {
        *slot = g;
    }
}

/// Numerical rank with the threshold
/// `max(rank_tol·σ_max, floor)`; also reports whether some singular value
/// lies within a factor of 10 of the threshold.
fn numerical_rank(a: &Matrix, rank_tol: f64, floor: f64) -> (usize, bool) {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let threshold = (rank_tol * smax).max(floor);
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    let ambiguous = threshold > 0.0
        && sv
            .iter()
            .any(|&s| s > threshold / 10.0 && s < threshold * 10.0 && s != smax);
    (rank, ambiguous)
}

/// Fills `min_mult`: `r_m` is the smallest `j ≥ 1` at which the rank of
/// `(M − λ_m I)^j` stops decreasing (or reaches `dim − s_m`), capped at `s_m`.
/// Near-threshold singular values are reported through `log::warn`.
pub fn minimal_multiplicities(
    m: &Matrix,
    eigs: &SpectralData,
    rank_tol: f64,
) -> Result<SpectralData> {
    matrix::check_square(m)?;
    if eigs.dim() != m.nrows() {
        return Err(Error::Dimension(format!(
            "spectral data covers dimension {}, matrix is {}x{}",
            eigs.dim(),
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let norm_m = matrix::spectral_norm(m);
    let mut min_mult = Vec::with_capacity(eigs.eigenvalues.len());
    for (&lambda, &s) in eigs.eigenvalues.iter().zip(&eigs.alg_mult) {
        if s == 1 {
            min_mult.push(1);
            continue;
        }
        let shifted = m - Matrix::identity(n, n) * lambda;
        let norm_n = matrix::spectral_norm(&shifted);
        let target = n - s;
        let mut power = shifted.clone();
        let floor = |j: usize| {
            (1e3 * f64::EPSILON * j as f64 * norm_m.max(f64::MIN_POSITIVE) + eigs.cluster_tol)
                * norm_n.powi(j as i32 - 1)
        };
        let (mut rank, mut ambiguous) = numerical_rank(&power, rank_tol, floor(1));
        let mut r = s;
        for j in 1..=s {
            if rank <= target {
                r = j;
                break;
            }
            let next = &power * &shifted;
            let (next_rank, amb) = numerical_rank(&next, rank_tol, floor(j + 1));
            ambiguous |= amb;
            if next_rank == rank {
                r = j;
                if rank != target {
                    log::warn!(
                        "rank of (M - λI)^j stabilised at {rank} for λ = {lambda}, expected {target}"
                    );
                }
                break;
            }
            power = next;
            rank = next_rank;
        }
        if ambiguous {
            log::warn!(
                "numerical rank near threshold while computing the minimal multiplicity of λ = {lambda}"
            );
        }
        min_mult.push(r.clamp(1, s));
    }
    Ok(SpectralData {
        min_mult,
        ..eigs.clone()
    })
}

/// Unit eigenvectors per eigenvalue, one per dimension of the numerical
/// kernel of `M − λ_m I` (at most `s_m`). Each vector's largest component is
/// made real and positive.
pub fn eigenvectors(m: &Matrix, eigs: &SpectralData) -> Result<Vec<(usize, Vector)>> {
    matrix::check_square(m)?;
    let n = m.nrows();
    let norm_m = matrix::spectral_norm(m);
    let mut out = Vec::new();
    for (idx, (&lambda, &s)) in eigs.eigenvalues.iter().zip(&eigs.alg_mult).enumerate() {
        let shifted = m - Matrix::identity(n, n) * lambda;
        let svd = shifted.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V^H");
        let sv = &svd.singular_values;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let threshold = (DEFAULT_RANK_TOL * smax)
            .max(1e3 * f64::EPSILON * norm_m)
            .max(eigs.cluster_tol);
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
        for &i in order.iter().take(s) {
            if sv[i] > threshold {
                break;
            }
            let mut v: Vector = v_t.row(i).adjoint();
            normalize_phase(&mut v);
            out.push((idx, v));
        }
    }
    Ok(out)
}

fn normalize_phase(v: &mut Vector) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    let big = v.iter().copied().fold(Complex64::new(0.0, 0.0), |acc, z| {
        if z.norm() > acc.norm() * (1.0 + 1e-12) {
            z
        } else {
            acc
        }
    });
    let phase = big.conj() / big.norm();
    *v *= phase / norm;
}

/// A full eigenbasis: `m = V·diag(values)·V⁻¹`.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    pub values: Vec<Complex64>,
    pub vectors: Matrix,
    pub inverse: Matrix,
    pub condition: f64,
}

impl Eigenbasis {
    /// Eigenbasis from the kernel vectors of each eigenvalue cluster; fails
    /// for defective matrices.
    pub fn new(m: &Matrix, eigs: &SpectralData) -> Result<Self> {
        let n = m.nrows();
        let pairs = eigenvectors(m, eigs)?;
        if pairs.len() < n {
            return Err(Error::NotDiagonalizable(format!(
                "found {} independent eigenvectors for dimension {n}",
                pairs.len()
            )));
        }
        let values: Vec<Complex64> = pairs.iter().map(|(i, _)| eigs.eigenvalues[*i]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| pairs[c].1[r]);
        let (inverse, condition) = matrix::inverse(&vectors, 1e12)
            .map_err(|_| Error::NotDiagonalizable("eigenvector matrix is singular".into()))?;
        Ok(Eigenbasis {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    /// Unitary eigenbasis of a Hermitian matrix.
    pub fn hermitian(m: &Matrix) -> Result<Self> {
        matrix::check_square(m)?;
        let asym = matrix::max_abs_diff(m, &m.adjoint());
        if asym > 1e-12 * matrix::max_abs(m).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (max |M - M^H| = {asym:e})"
            )));
        }
        let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let values = eig.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let vectors = eig.eigenvectors;
        let inverse = vectors.adjoint();
        Ok(Eigenbasis {
            values,
            vectors,
            inverse,
            condition: 1.0,
        })
    }

    /// Rank-one projector `v_c w_c^T` for column `c`.
    pub fn projector(&self, c: usize) -> Matrix {
        self.vectors.column(c) * self.inverse.row(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{diag_real, from_real};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn cluster_examples() {
        let s = eigen_cluster(&Matrix::identity(2, 2), 1e-8).unwrap();
        assert_eq!(s.eigenvalues, vec![c(1.0)]);
        assert_eq!(s.alg_mult, vec![2]);

        let s = eigen_cluster(&diag_real(&[2.0, 1.0]), 1e-8).unwrap();
        assert_eq!(s.eigenvalues, vec![c(1.0), c(2.0)]);
        assert_eq!(s.alg_mult, vec![1, 1]);
    }

    #[test]
    fn companion_matrix_of_double_root() {
        // (x-1)^2 (x-3) = x^3 - 5x^2 + 7x - 3
        let m = from_real(&[&[0.0, 0.0, 3.0], &[1.0, 0.0, -7.0], &[0.0, 1.0, 5.0]]);
        let s = eigen_cluster(&m, 1e-6).unwrap();
        assert_eq!(s.alg_mult, vec![2, 1]);
        assert!((s.eigenvalues[0] - c(1.0)).norm() < 1e-6);
        assert!((s.eigenvalues[1] - c(3.0)).norm() < 1e-10);
        let s = minimal_multiplicities(&m, &s, 1e-6).unwrap();
        assert_eq!(s.min_mult, vec![2, 1]);
    }

    #[test]
    fn minimal_multiplicity_examples() {
        let j = from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(analyze(&j).unwrap().min_mult, vec![2]);
        assert_eq!(analyze(&diag_real(&[5.0, 5.0])).unwrap().min_mult, vec![1]);
        let b = from_real(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let s = analyze(&b).unwrap();
        assert_eq!((s.eigenvalues.clone(), s.alg_mult.clone(), s.min_mult), (vec![c(1.0)], vec![3], vec![2]));
    }

    #[test]
    fn minimal_multiplicity_of_conjugated_jordan_matrix() {
        // A J A^-1 with J = J_{2,2} ⊕ [5]; numerical Schur splits the double
        // eigenvalue by about sqrt(eps), so cluster at 1e-6.
        let j = from_real(&[&[2.0, 1.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]);
        let a = from_real(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0]]);
        let (ai, _) = matrix::inverse(&a, 1e8).unwrap();
        let m = &a * &j * &ai;
        let s = eigen_cluster(&m, 1e-6).unwrap();
        let s = minimal_multiplicities(&m, &s, 1e-8).unwrap();
        assert_eq!(s.alg_mult, vec![2, 1]);
        assert_eq!(s.min_mult, vec![2, 1]);
    }

    #[test]
    fn kernel_of_minimal_power_annihilates_generalized_eigenspace() {
        let m = from_real(&[
            &[3.0, 1.0, 0.0, 0.0],
            &[0.0, 3.0, 1.0, 0.0],
            &[0.0, 0.0, 3.0, 0.0],
            &[0.0, 0.0, 0.0, -1.0],
        ]);
        let s = analyze(&m).unwrap();
        for ((&lambda, &r), &sm) in s.eigenvalues.iter().zip(&s.min_mult).zip(&s.alg_mult) {
            let shifted = &m - Matrix::identity(4, 4) * lambda;
            let big = matrix::powers(&shifted, 4).pop().unwrap();
            let svd = big.svd(false, true);
            let v_t = svd.v_t.unwrap();
            let nr = matrix::powers(&shifted, r).pop().unwrap();
            let mut count = 0;
            for (i, &sv) in svd.singular_values.iter().enumerate() {
                if sv < 1e-8 {
                    count += 1;
                    let v: Vector = v_t.row(i).adjoint();
                    assert!((&nr * v).norm() <= 1e-8 * matrix::spectral_norm(&m).powi(r as i32));
                }
            }
            assert_eq!(count, sm);
        }
    }

    #[test]
    fn eigenvector_examples() {
        let v = eigenvectors(&diag_real(&[2.0, 3.0]), &analyze(&diag_real(&[2.0, 3.0])).unwrap())
            .unwrap();
        assert_eq!(v.len(), 2);
        assert!((v[0].1[0] - c(1.0)).norm() < 1e-14);
        assert!((v[1].1[1] - c(1.0)).norm() < 1e-14);

        let j = from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let v = eigenvectors(&j, &analyze(&j).unwrap()).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].1[0] - c(1.0)).norm() < 1e-12);

        let x = from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let s = analyze(&x).unwrap();
        assert!((s.eigenvalues[0] + c(1.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(1.0)).norm() < 1e-14);
        let v = eigenvectors(&x, &s).unwrap();
        let r = 0.5f64.sqrt();
        assert!((v[0].1[0].norm() - r).abs() < 1e-12);
        assert!((v[0].1[0] + v[0].1[1]).norm() < 1e-12);
        assert!((v[1].1[0] - v[1].1[1]).norm() < 1e-12);
        assert!((v[1].1[0] - c(r)).norm() < 1e-12);
    }

    #[test]
    fn eigenbasis_rejects_defective() {
        let j = from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            Eigenbasis::new(&j, &analyze(&j).unwrap()),
            Err(Error::NotDiagonalizable(_))
        ));
    }

    #[test]
    fn permutation_conjugation_leaves_spectrum_unchanged() {
        let m = from_real(&[&[1.0, 2.0, 0.0], &[-2.0, 1.0, 0.5], &[0.0, 0.3, 4.0]]);
        let p = from_real(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let mp = &p * &m * p.transpose();
        let a = analyze(&m).unwrap();
        let b = analyze(&mp).unwrap();
        assert_eq!(a.alg_mult, b.alg_mult);
        assert_eq!(a.min_mult, b.min_mult);
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn multiplicities_sum_to_dimension() {
        let m = from_real(&[&[2.0, 1.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 2.0]]);
        let s = analyze(&m).unwrap();
        assert_eq!(s.dim(), 3);
        assert!(s.min_mult.iter().zip(&s.alg_mult).all(|(r, s)| r <= s));
        assert_eq!(s.min_mult, vec![2]);
    }
}
