//! Seeded random instances for tests and the verification suites.

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::funcalc::JordanMatrix;
use crate::matrix::{self, Matrix};
use crate::scalarfield::{MultiPoly, ScalarField};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of trial `trial` of the stream `stream` derived from a base seed.
pub fn trial_seed(base: u64, stream: &str, trial: usize) -> u64 {
    // FNV-1a over the stream name, mixed with the base seed and trial index
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut x = h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (trial as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 31;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 29)
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Real matrix with entries uniform in `[-1, 1]`.
pub fn real_matrix(rng: &mut SampleRng, d: usize) -> Matrix {
    Matrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0)))
}

/// Complex matrix with real and imaginary parts uniform in `[-1, 1]`.
pub fn complex_matrix(rng: &mut SampleRng, d: usize) -> Matrix {
    Matrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Real symmetric matrix with entries uniform in `[-1, 1]`.
pub fn real_symmetric(rng: &mut SampleRng, d: usize) -> Matrix {
    let a = real_matrix(rng, d);
    (&a + a.transpose()) * c(0.5)
}

/// `d` distinct real eigenvalues in `[-1.5, 1.5]`, pairwise at least `gap`
/// apart.
pub fn separated_values(rng: &mut SampleRng, d: usize, gap: f64) -> Vec<Complex64> {
    let mut out: Vec<f64> = Vec::with_capacity(d);
    while out.len() < d {
        let x: f64 = rng.random_range(-1.5..1.5);
        if out.iter().all(|y| (x - y).abs() >= gap) {
            out.push(x);
        }
    }
    out.into_iter().map(c).collect()
}

/// `V·diag(values)·V⁻¹` with `V = I + 0.3·R` and simple real spectrum.
/// Returns the matrix and its eigenvalues.
pub fn diagonalizable(rng: &mut SampleRng, d: usize) -> (Matrix, Vec<Complex64>) {
    let values = separated_values(rng, d, 0.3);
    loop {
        let v = matrix::identity(d) + real_matrix(rng, d) * c(0.3);
        if let Ok((vi, cond)) = matrix::inverse(&v, 1e3) {
            if cond < 20.0 {
                return (&v * matrix::diag(&values) * vi, values);
            }
        }
    }
}

/// Block list `(λ, size)` of a Jordan matrix.
pub type JordanBlocks = Vec<(Complex64, usize)>;

/// Random Jordan structure of total dimension `d` with blocks of size at
/// most `max_block`. Eigenvalues come from a coarse dyadic grid so that
/// distinct blocks sometimes share an eigenvalue.
pub fn jordan_blocks(rng: &mut SampleRng, d: usize, max_block: usize) -> JordanBlocks {
    let palette = [-1.0, -0.5, 0.5, 1.0, 1.5];
    let mut blocks = Vec::new();
    let mut left = d;
    while left > 0 {
        let size = rng.random_range(1..=max_block.min(left));
        let lambda = *palette.choose(rng).expect("palette is non-empty");
        blocks.push((c(lambda), size));
        left -= size;
    }
    blocks
}

/// Dense matrix of a Jordan structure.
pub fn jordan_matrix(blocks: &[(Complex64, usize)]) -> Matrix {
    JordanMatrix {
        blocks: blocks.to_vec(),
    }
    .to_matrix()
}

/// `U·J·U⁻¹` with `U` unit upper triangular with entries in `{-1, 0, 1}`.
/// The product stays upper triangular and is computed exactly, so the
/// eigenvalues and Jordan structure are those of `blocks`.
pub fn defective(rng: &mut SampleRng, blocks: &[(Complex64, usize)]) -> Matrix {
    let j = jordan_matrix(blocks);
    let d = j.nrows();
    let u = Matrix::from_fn(d, d, |r, col| {
        if r == col {
            c(1.0)
        } else if r < col {
            c(rng.random_range(-1i32..=1) as f64)
        } else {
            c(0.0)
        }
    });
    let (ui, _) = matrix::inverse(&u, 1e12).expect("unit triangular matrices are invertible");
    // U⁻¹ of an integer unit triangular matrix is integral; round away the
    // LU roundoff so the product is exact.
    let ui = ui.map(|z| Complex64::new(z.re.round(), z.im.round()));
    &u * j * ui
}

/// Random polynomial with `terms` monomials of degree at most `max_deg` in
/// each variable and coefficients uniform in `[-1, 1]`.
pub fn polynomial(rng: &mut SampleRng, arity: usize, max_deg: u32, terms: usize) -> MultiPoly {
    let mut p = MultiPoly::zero(arity);
    for _ in 0..terms {
        let alpha: Vec<u32> = (0..arity).map(|_| rng.random_range(0..=max_deg)).collect();
        let mono = MultiPoly::from_terms(arity, [(alpha, c(rng.random_range(-1.0..1.0)))])
            .expect("exponent vector has the right arity");
        p = p.add(&mono);
    }
    p
}

/// Entire (everywhere evaluable) fields of the given arity used as a test
/// corpus.
pub fn entire_fields(arity: usize) -> Vec<ScalarField> {
    let vars: Vec<String> = (1..=arity).map(|l| format!("x{l}")).collect();
    let sum = vars.join("+");
    let prod = vars.join("*");
    let mut texts = vec![
        sum.clone(),
        prod.clone(),
        format!("exp({sum})"),
        format!("({sum})^2"),
        format!("exp(0.5*{})*({prod}) + 2", vars[0]),
    ];
    if arity >= 2 {
        texts.push(format!("exp({})*{} - {}^3", vars[0], vars[1], vars[arity - 1]));
    }
    texts
        .iter()
        .map(|t| ScalarField::parse_with_arity(t, arity).expect("corpus fields parse"))
        .collect()
}

pub fn choose_field(rng: &mut SampleRng, arity: usize) -> ScalarField {
    entire_fields(arity)
        .choose(rng)
        .expect("corpus is non-empty")
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral;

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(trial_seed(42, "product", 3), trial_seed(42, "product", 3));
        assert_ne!(trial_seed(42, "product", 3), trial_seed(42, "product", 4));
        assert_ne!(trial_seed(42, "product", 3), trial_seed(42, "compose", 3));
        let a = real_matrix(&mut rng(1), 3);
        let b = real_matrix(&mut rng(1), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn defective_keeps_jordan_structure() {
        let mut r = rng(9);
        for _ in 0..20 {
            let blocks = jordan_blocks(&mut r, 4, 3);
            let m = defective(&mut r, &blocks);
            assert!(matrix::is_upper_triangular(&m));
            let s = spectral::analyze(&m).unwrap();
            for (lambda, r_min) in s.nodes() {
                let want = blocks
                    .iter()
                    .filter(|b| b.0 == lambda)
                    .map(|b| b.1)
                    .max()
                    .unwrap();
                assert_eq!(r_min, want, "{blocks:?}");
            }
        }
    }

    #[test]
    fn diagonalizable_has_requested_spectrum() {
        let mut r = rng(2);
        let (m, values) = diagonalizable(&mut r, 3);
        let s = spectral::analyze(&m).unwrap();
        assert!(s.is_diagonalizable() && s.is_simple());
        for v in values {
            assert!(s.eigenvalues.iter().any(|e| (e - v).norm() < 1e-10));
        }
    }

    #[test]
    fn corpus_parses_for_every_arity() {
        for k in 1..=4 {
            for f in entire_fields(k) {
                assert_eq!(f.arity(), k);
            }
        }
    }
}
