use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use super::expr::{Expr, Node};
use crate::error::{Error, Result};

/// Polynomial in `arity` complex variables stored as a map from exponent
/// tuples to nonzero coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    arity: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl MultiPoly {
    pub fn zero(arity: usize) -> Self {
        MultiPoly {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, c: Complex64) -> Self {
        let mut p = MultiPoly::zero(arity);
        p.add_term(vec![0; arity], c);
        p
    }

    /// The coordinate function `x_{index+1}`.
    pub fn var(arity: usize, index: usize) -> Self {
        assert!(index < arity, "variable index out of range");
        let mut alpha = vec![0; arity];
        alpha[index] = 1;
        let mut p = MultiPoly::zero(arity);
        p.add_term(alpha, Complex64::new(1.0, 0.0));
        p
    }

    pub fn from_terms(
        arity: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, Complex64)>,
    ) -> Result<Self> {
        let mut p = MultiPoly::zero(arity);
        for (alpha, c) in terms {
            if alpha.len() != arity {
                return Err(Error::Dimension(format!(
                    "exponent tuple of length {} for arity {arity}",
                    alpha.len()
                )));
            }
            p.add_term(alpha, c);
        }
        Ok(p)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], Complex64)> {
        self.terms.iter().map(|(a, c)| (a.as_slice(), *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, alpha: &[u32]) -> Complex64 {
        self.terms
            .get(alpha)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn add_term(&mut self, alpha: Vec<u32>, c: Complex64) {
        debug_assert_eq!(alpha.len(), self.arity);
        let zero = Complex64::new(0.0, 0.0);
        match self.terms.entry(alpha) {
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if *slot.get() == zero {
                    slot.remove();
                }
            }
            Entry::Vacant(slot) => {
                if c != zero {
                    slot.insert(c);
                }
            }
        }
    }

    /// Degree in variable `index`.
    pub fn degree_in(&self, index: usize) -> u32 {
        self.terms.keys().map(|a| a[index]).max().unwrap_or(0)
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> MultiPoly {
        let mut out = MultiPoly::zero(self.arity);
        for (a, c) in &self.terms {
            out.add_term(a.clone(), c * s);
        }
        out
    }

    pub fn sub(&self, other: &MultiPoly) -> MultiPoly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        let mut out = MultiPoly::zero(self.arity);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let alpha = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(alpha, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> MultiPoly {
        let mut out = MultiPoly::constant(self.arity, Complex64::new(1.0, 0.0));
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.arity, "point has wrong arity");
        self.terms
            .iter()
            .map(|(alpha, c)| {
                alpha
                    .iter()
                    .zip(point)
                    .fold(*c, |acc, (&e, &x)| acc * x.powu(e))
            })
            .sum()
    }

    pub fn partial(&self, index: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(self.arity);
        for (alpha, c) in &self.terms {
            let e = alpha[index];
            if e == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta[index] -= 1;
            out.add_term(beta, c * e as f64);
        }
        out
    }

    /// Embeds a polynomial in one variable as variable `index` of `arity`.
    pub fn univariate(arity: usize, index: usize, coeffs: &[Complex64]) -> MultiPoly {
        let mut out = MultiPoly::zero(arity);
        for (p, c) in coeffs.iter().enumerate() {
            if *c != Complex64::new(0.0, 0.0) {
                let mut alpha = vec![0; arity];
                alpha[index] = p as u32;
                out.add_term(alpha, *c);
            }
        }
        out
    }

    /// Expression tree of the polynomial; monomials are emitted in
    /// descending exponent order so `x1 + x2` prints as written.
    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        for (alpha, c) in self.terms.iter().rev() {
            let mut mono: Option<Expr> = None;
            for (i, &e) in alpha.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let f = Expr::powi(Expr::var(i), e as i32);
                mono = Some(match mono {
                    None => f,
                    Some(m) => Expr::mul(m, f),
                });
            }
            let term = match mono {
                None => Expr::constant(*c),
                Some(m) => Expr::mul(Expr::constant(*c), m),
            };
            acc = Some(match acc {
                None => term,
                Some(a) => Expr::add(a, term),
            });
        }
        acc.unwrap_or_else(Expr::zero)
    }

    /// Converts an expression tree built from constants, variables, `+ − ×`,
    /// nonnegative integer powers and division by constants. Returns `None`
    /// for anything else.
    pub fn from_expr(expr: &Expr, arity: usize) -> Option<MultiPoly> {
        match expr.node() {
            Node::Const(z) => Some(MultiPoly::constant(arity, *z)),
            Node::Var(v) if *v < arity => Some(MultiPoly::var(arity, *v)),
            Node::Var(_) => None,
            Node::Add(a, b) => Some(Self::from_expr(a, arity)?.add(&Self::from_expr(b, arity)?)),
            Node::Sub(a, b) => Some(Self::from_expr(a, arity)?.sub(&Self::from_expr(b, arity)?)),
            Node::Mul(a, b) => Some(Self::from_expr(a, arity)?.mul(&Self::from_expr(b, arity)?)),
            Node::Neg(a) => Some(Self::from_expr(a, arity)?.scale(Complex64::new(-1.0, 0.0))),
            Node::Powi(a, n) if *n >= 0 => Some(Self::from_expr(a, arity)?.pow(*n as u32)),
            Node::Div(a, b) => {
                let d = b.as_const()?;
                if d == Complex64::new(0.0, 0.0) {
                    return None;
                }
                Some(Self::from_expr(a, arity)?.scale(d.inv()))
            }
            _ => None,
        }
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}
