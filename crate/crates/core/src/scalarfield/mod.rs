//! Scalar fields of `k` complex variables with exact symbolic derivatives.
//!
//! Variables are 0-based in the API (`Expr::var(0)` is `x1` in text).

mod divided;
mod expr;
mod parse;
mod poly;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

pub use divided::{cluster_nodes, confluent_divided_difference};
pub use expr::{DividedDifference, Expr, Node, SpectralIndicator};
pub(crate) use expr::fresh_bound;
pub use parse::parse_expr;
pub use poly::MultiPoly;

use crate::error::{Error, EvalError, Result};
use crate::spectral::SpectralData;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    arity: usize,
    expr: Expr,
}

impl ScalarField {
    /// Wraps `expr` as a field of `arity` variables; every free variable of
    /// `expr` must be below `arity`.
    pub fn new(expr: Expr, arity: usize) -> Result<Self> {
        if let Some(v) = expr.max_free_var() {
            if v >= arity {
                return Err(Error::InvalidArgument(format!(
                    "expression uses x{} but the field has arity {arity}",
                    v + 1
                )));
            }
        }
        Ok(ScalarField { arity, expr })
    }

    /// Parses field text; the arity is the highest variable referenced (at
    /// least 1).
    pub fn parse(text: &str) -> Result<Self> {
        let expr = parse_expr(text)?;
        let arity = expr.max_free_var().map_or(1, |v| v + 1);
        Ok(ScalarField { arity, expr })
    }

    pub fn parse_with_arity(text: &str, arity: usize) -> Result<Self> {
        ScalarField::new(parse_expr(text)?, arity)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Same expression declared over more (or fewer, if unused) variables.
    pub fn with_arity(&self, arity: usize) -> Result<Self> {
        ScalarField::new(self.expr.clone(), arity)
    }

    pub fn eval(&self, point: &[Complex64]) -> Result<Complex64> {
        if point.len() != self.arity {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, field has arity {}",
                point.len(),
                self.arity
            )));
        }
        Ok(self.expr.eval(point)?)
    }

    /// `∂f/∂x_{l+1}`.
    pub fn partial(&self, l: usize) -> ScalarField {
        assert!(l < self.arity, "variable index {l} out of range");
        ScalarField {
            arity: self.arity,
            expr: self.expr.partial(l),
        }
    }

    /// `∂^orders[0]_1 … ∂^orders[k-1]_k f`.
    pub fn mixed_partial(&self, orders: &[usize]) -> ScalarField {
        assert_eq!(orders.len(), self.arity, "one order per variable");
        let mut expr = self.expr.clone();
        for (l, &n) in orders.iter().enumerate() {
            for _ in 0..n {
                expr = expr.partial(l);
            }
        }
        ScalarField {
            arity: self.arity,
            expr,
        }
    }

    pub fn from_poly(p: &MultiPoly) -> ScalarField {
        ScalarField {
            arity: p.arity(),
            expr: p.to_expr(),
        }
    }

    /// The polynomial this field represents, or `None` if the tree has
    /// transcendental or non-polynomial nodes.
    pub fn to_poly(&self) -> Option<MultiPoly> {
        MultiPoly::from_expr(&self.expr, self.arity)
    }

    /// Field of `arity` variables obtained by replacing each `x_{v+1}` with
    /// `map(v)`.
    pub fn substitute(&self, arity: usize, map: &dyn Fn(usize) -> Expr) -> Result<ScalarField> {
        ScalarField::new(self.expr.substitute(&|v| Some(map(v))), arity)
    }

    /// `self` with its variables shifted up by `offset` inside a field of
    /// `arity` variables.
    pub fn shifted(&self, offset: usize, arity: usize) -> Result<ScalarField> {
        self.substitute(arity, &|v| Expr::var(v + offset))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.same_arity(other)?;
        Ok(ScalarField {
            arity: self.arity,
            expr: Expr::mul(self.expr.clone(), other.expr.clone()),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.same_arity(other)?;
        Ok(ScalarField {
            arity: self.arity,
            expr: Expr::add(self.expr.clone(), other.expr.clone()),
        })
    }

    fn same_arity(&self, other: &ScalarField) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::Dimension(format!(
                "fields have arities {} and {}",
                self.arity, other.arity
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

impl FromStr for ScalarField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScalarField::parse(s)
    }
}

/// Mixed partials of a field at every tuple of interpolation nodes.
///
/// Slot `l` has nodes `(λ_lm, r_lm)`; its grid axis enumerates the pairs
/// `(m, j)` with `j < r_lm` node by node, so axis length is `Σ_m r_lm`. The
/// value at `((m_1, j_1), …, (m_k, j_k))` is `∂_1^{j_1}…∂_k^{j_k} f(λ_1m_1, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeGrid {
    nodes: Vec<Vec<(Complex64, usize)>>,
    shape: Vec<usize>,
    values: Vec<Complex64>,
}

impl DerivativeGrid {
    /// Assembles a grid from row-major values; fails if the count does not
    /// match the node structure.
    pub fn from_values(
        nodes: Vec<Vec<(Complex64, usize)>>,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let shape: Vec<usize> = nodes
            .iter()
            .map(|slot| slot.iter().map(|(_, r)| r).sum())
            .collect();
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::IncompleteGrid(format!(
                "{} values for a grid of {len} entries",
                values.len()
            )));
        }
        Ok(DerivativeGrid {
            nodes,
            shape,
            values,
        })
    }

    pub fn nodes(&self) -> &[Vec<(Complex64, usize)>] {
        &self.nodes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `((m_1, j_1), …, (m_k, j_k))`.
    pub fn get(&self, entry: &[(usize, usize)]) -> Option<Complex64> {
        if entry.len() != self.nodes.len() {
            return None;
        }
        let mut flat = 0;
        for (l, &(m, j)) in entry.iter().enumerate() {
            let slot = &self.nodes[l];
            if m >= slot.len() || j >= slot[m].1 {
                return None;
            }
            let offset: usize = slot[..m].iter().map(|(_, r)| r).sum();
            flat = flat * self.shape[l] + offset + j;
        }
        Some(self.values[flat])
    }
}

/// Axis position → `(node index, derivative order)` for one slot.
pub(crate) fn axis_entries(slot: &[(Complex64, usize)]) -> Vec<(usize, usize)> {
    slot.iter()
        .enumerate()
        .flat_map(|(m, &(_, r))| (0..r).map(move |j| (m, j)))
        .collect()
}

/// Derivative grid of `f` over the spectra of its slots (`(λ, r)` nodes from
/// [`SpectralData::nodes`]).
pub fn derivative_grid(f: &ScalarField, spectra: &[SpectralData]) -> Result<DerivativeGrid> {
    let nodes: Vec<_> = spectra.iter().map(|s| s.nodes()).collect();
    derivative_grid_at(f, &nodes)
}

/// Derivative grid of `f` over explicit nodes.
pub fn derivative_grid_at(
    f: &ScalarField,
    nodes: &[Vec<(Complex64, usize)>],
) -> Result<DerivativeGrid> {
    let k = f.arity();
    if nodes.len() != k {
        return Err(Error::Dimension(format!(
            "{} node lists for a field of arity {k}",
            nodes.len()
        )));
    }
    let axes: Vec<Vec<(usize, usize)>> = nodes.iter().map(|s| axis_entries(s)).collect();
    let mut derivs: HashMap<Vec<usize>, Expr> = HashMap::new();
    derivs.insert(vec![0; k], f.expr().clone());
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut values = Vec::with_capacity(total);
    let mut pos = vec![0usize; k];
    let mut point = vec![Complex64::new(0.0, 0.0); k];
    let mut orders = vec![0usize; k];
    for _ in 0..total {
        for l in 0..k {
            let (m, j) = axes[l][pos[l]];
            point[l] = nodes[l][m].0;
            orders[l] = j;
        }
        let d = derivative_for(&mut derivs, &orders);
        let v = d.eval(&point).map_err(|source: EvalError| Error::Grid {
            tuple: point.clone(),
            source,
        })?;
        values.push(v);
        for l in (0..k).rev() {
            pos[l] += 1;
            if pos[l] < axes[l].len() {
                break;
            }
            pos[l] = 0;
        }
    }
    DerivativeGrid::from_values(nodes.to_vec(), values)
}

/// Memoised `∂^orders f`, built from the nearest cached lower order.
pub(crate) fn derivative_for(cache: &mut HashMap<Vec<usize>, Expr>, orders: &[usize]) -> Expr {
    if let Some(e) = cache.get(orders) {
        return e.clone();
    }
    let l = orders
        .iter()
        .rposition(|&o| o > 0)
        .expect("zero order is always cached");
    let mut parent = orders.to_vec();
    parent[l] -= 1;
    let e = derivative_for(cache, &parent).partial(l);
    cache.insert(orders.to_vec(), e.clone());
    e
}
