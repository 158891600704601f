use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A scalar field could not be evaluated at a point.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("cannot evaluate `{node}` at {}: {reason}", fmt_point(.point))]
pub struct EvalError {
    pub node: String,
    pub point: Vec<Complex64>,
    pub reason: String,
}

pub(crate) fn fmt_point(point: &[Complex64]) -> String {
    let parts: Vec<String> = point.iter().map(|z| fmt_complex(*z)).collect();
    format!("({})", parts.join(", "))
}

pub(crate) fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("f is not evaluable on the spectral grid at eigenvalue tuple {}: {source}", fmt_point(.tuple))]
    Grid {
        tuple: Vec<Complex64>,
        #[source]
        source: EvalError,
    },

    #[error("eigenvalue iteration did not converge for {0}")]
    EigenConvergence(String),

    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix is not diagonalizable ({0}); use the interpolation path `f_otimes` instead")]
    NotDiagonalizable(String),

    #[error("matrix is singular or too ill-conditioned (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("interpolation nodes {a} and {b} are closer than {tol:e}; cluster them first")]
    NodesTooClose { a: String, b: String, tol: f64 },

    #[error("derivative grid is incomplete; missing entries: {0}")]
    IncompleteGrid(String),

    #[error("declared Jordan structure does not match the matrix: {0}")]
    JordanStructure(String),

    #[error("matrices do not commute (commutator norm {norm:e}, tolerance {tol:e})")]
    NonCommuting { norm: f64, tol: f64 },

    #[error("spectrum is not simple: {0}")]
    NonSimpleSpectrum(String),
}

impl Error {
    pub(crate) fn in_slot(self, slot: usize) -> Error {
        Error::Slot {
            slot,
            source: Box::new(self),
        }
    }

    /// Whether the failure comes from user input (syntax, files, shapes) rather
    /// than from the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Format(_)
            | Error::Io { .. }
            | Error::Dimension(_)
            | Error::InvalidArgument(_)
            | Error::JordanStructure(_) => true,
            Error::Slot { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
