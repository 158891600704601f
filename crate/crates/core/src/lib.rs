//! Functions of several variables applied to tuples of square matrices.
//!
//! For a scalar function `f` of `k` complex variables and square matrices
//! `M1, …, Mk`, the crate builds the operator tensor `f⊗(M1, …, Mk)`, an
//! element of `⊗ (E_l ⊗ E_l*)`, by Lagrange–Sylvester (Hermite) interpolation
//! over the spectra of the matrices. Around that construction it provides the
//! index algebra of such tensors (contractions, slot transposition,
//! conjugation), product and composition identities, Fréchet and higher
//! derivatives through divided differences, eigenvalue/eigenprojector
//! perturbation series, and exterior-power projections.
//!
//! Index convention used everywhere: a tensor with `k` slots stores its
//! coefficients in the order `(i1, j1, …, ik, jk)`, up index before down
//! index, last index fastest. Its matrix view has row `(i1, …, ik)` and column
//! `(j1, …, jk)`, so `(x1 + x2)⊗(A, B)` is the Kronecker sum `A⊗I + I⊗B`.

pub mod algebraic_ops;
pub mod antisym;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod funcalc;
pub mod interp;
pub mod matrix;
pub mod sample;
pub mod scalarfield;
pub mod spectral;
pub mod tensor;
pub mod verify;

pub use error::{Error, EvalError, Result};
pub use matrix::Matrix;
pub use num_complex::Complex64;
pub use scalarfield::{MultiPoly, ScalarField};
pub use spectral::SpectralData;
pub use tensor::OperatorTensor;

/// Absolute distance below which two numerical points are treated as one
/// node of a divided difference.
pub const CONFLUENCE_TOL: f64 = 1e-10;
