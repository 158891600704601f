//! Products, compositions and contractions of `f⊗` tensors, each exposed as
//! the constructive operation plus a residual check of the identity it
//! satisfies.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::funcalc::{f_otimes, f_otimes_with_nodes, slot_spectra, Tolerances};
use crate::interp;
use crate::matrix::{self, Matrix};
use crate::scalarfield::{Expr, ScalarField};
use crate::spectral::SpectralData;
use crate::tensor::OperatorTensor;

/// Residuals of the product identity `f1⊗·f2⊗ = (f1·f2)⊗`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductCheck {
    /// `‖M̄1·M̄2 − (f1 f2)⊗‖_HS`.
    pub residual: f64,
    /// `‖M̄1·M̄2‖_HS`.
    pub lhs_norm: f64,
    /// `‖[M̄1, M̄2]‖_HS`.
    pub commutator: f64,
}

pub fn product_identity_check(
    f1: &ScalarField,
    f2: &ScalarField,
    mats: &[Matrix],
    tol: &Tolerances,
) -> Result<ProductCheck> {
    let a = f_otimes(f1, mats, tol)?.as_matrix();
    let b = f_otimes(f2, mats, tol)?.as_matrix();
    let g = f_otimes(&f1.mul(f2)?, mats, tol)?.as_matrix();
    let lhs = &a * &b;
    Ok(ProductCheck {
        residual: matrix::hs_norm(&(&lhs - g)),
        lhs_norm: matrix::hs_norm(&lhs),
        commutator: matrix::hs_norm(&(&lhs - &b * &a)),
    })
}

/// Values of `f` over the eigenvalue tuples of its slots, with bounds on
/// their multiplicity as roots of the minimal polynomial of `f⊗`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedSpectrum {
    pub values: Vec<Complex64>,
    /// `r̄_p = max 1 + Σ_l (r_{l m_l} − 1)` over the tuples giving `μ_p`.
    pub bounds: Vec<usize>,
}

impl DerivedSpectrum {
    pub fn nodes(&self) -> Vec<(Complex64, usize)> {
        self.values.iter().copied().zip(self.bounds.iter().copied()).collect()
    }
}

/// Enumerates `f(λ_{1m1}, …, λ_{kmk})`, merging values closer than
/// `1e-8·max(1, max |value|)` in order of first appearance.
pub fn derived_spectrum(f: &ScalarField, spectra: &[SpectralData]) -> Result<DerivedSpectrum> {
    if f.arity() != spectra.len() {
        return Err(Error::Dimension(format!(
            "field of arity {} with {} spectra",
            f.arity(),
            spectra.len()
        )));
    }
    let nodes: Vec<Vec<(Complex64, usize)>> = spectra.iter().map(|s| s.nodes()).collect();
    let shape: Vec<usize> = nodes.iter().map(|n| n.len()).collect();
    let total: usize = shape.iter().product();
    let mut raw: Vec<(Complex64, usize)> = Vec::with_capacity(total);
    let mut pos = vec![0usize; shape.len()];
    let mut point = vec![Complex64::new(0.0, 0.0); shape.len()];
    for _ in 0..total {
        let mut bound = 1;
        for l in 0..shape.len() {
            let (z, r) = nodes[l][pos[l]];
            point[l] = z;
            bound += r - 1;
        }
        let v = f.expr().eval(&point).map_err(|source| Error::Grid {
            tuple: point.clone(),
            source,
        })?;
        raw.push((v, bound));
        interp::increment(&mut pos, &shape);
    }
    let scale = raw.iter().map(|(v, _)| v.norm()).fold(1.0, f64::max);
    let tol = 1e-8 * scale;
    let mut out = DerivedSpectrum {
        values: Vec::new(),
        bounds: Vec::new(),
    };
    for (v, b) in raw {
        match out.values.iter().position(|u| (u - v).norm() <= tol) {
            Some(p) => out.bounds[p] = out.bounds[p].max(b),
            None => {
                out.values.push(v);
                out.bounds.push(b);
            }
        }
    }
    Ok(out)
}

/// Checks `g⊗(M̄1, …, M̄r) = h⊗(M11, …, M_{r k_r})` with `M̄q = f_q⊗(M_q·)`
/// and `h = g∘(f1, …, fr)`. The left side interpolates `g` on the derived
/// spectra. Returns the HS norm of the difference of the matrix views.
pub fn compose_identity_check(
    g: &ScalarField,
    fields: &[ScalarField],
    groups: &[Vec<Matrix>],
    tol: &Tolerances,
) -> Result<f64> {
    if g.arity() != fields.len() || fields.len() != groups.len() {
        return Err(Error::Dimension(format!(
            "outer field of arity {} with {} inner fields and {} matrix groups",
            g.arity(),
            fields.len(),
            groups.len()
        )));
    }
    let mut bars = Vec::with_capacity(fields.len());
    let mut nodes = Vec::with_capacity(fields.len());
    for (f, mats) in fields.iter().zip(groups) {
        bars.push(f_otimes(f, mats, tol)?.as_matrix());
        let spectra = slot_spectra(mats, tol)?;
        nodes.push(derived_spectrum(f, &spectra)?.nodes());
    }
    let lhs = f_otimes_with_nodes(g, &bars, &nodes)?.as_matrix();

    let total: usize = fields.iter().map(|f| f.arity()).sum();
    let mut inner = Vec::with_capacity(fields.len());
    let mut offset = 0;
    for f in fields {
        inner.push(f.shifted(offset, total)?.expr().clone());
        offset += f.arity();
    }
    let h = g.substitute(total, &|v| inner[v].clone())?;
    let flat: Vec<Matrix> = groups.iter().flatten().cloned().collect();
    let rhs = f_otimes(&h, &flat, tol)?.as_matrix();
    Ok(matrix::hs_norm(&(lhs - rhs)))
}

/// A contraction of `f⊗` together with the reduced field whose tensor it
/// should equal.
#[derive(Clone, Debug)]
pub struct ContractionCheck {
    pub tensor: OperatorTensor,
    pub field: ScalarField,
    /// `‖tensor − field⊗(remaining matrices)‖_HS`.
    pub residual: f64,
    /// For equal slots, `‖C(p, q) − C(q, p)‖_HS` between the two index
    /// orders; zero for the trace theorem.
    pub order_residual: f64,
}

/// Traces slot `p` of `f⊗` and compares with `g⊗` of the other matrices,
/// `g = Σ_m s_m f(…, λ_m, …)` over the spectrum of `M_p`.
pub fn contract_trace_theorem(
    f: &ScalarField,
    mats: &[Matrix],
    p: usize,
    tol: &Tolerances,
) -> Result<ContractionCheck> {
    check_slot(p, mats.len())?;
    let tensor = f_otimes(f, mats, tol)?.trace_slot(p)?;
    let spectrum = tol.analyze(&mats[p]).map_err(|e| e.in_slot(p + 1))?;
    let k = f.arity();
    let mut acc = Expr::zero();
    for (&lambda, &s) in spectrum.eigenvalues.iter().zip(&spectrum.alg_mult) {
        let term = f.expr().substitute(&|v| {
            Some(if v == p {
                Expr::constant(lambda)
            } else if v > p {
                Expr::var(v - 1)
            } else {
                Expr::var(v)
            })
        });
        acc = Expr::add(acc, Expr::mul(Expr::real(s as f64), term));
    }
    let field = ScalarField::new(acc, k - 1)?;
    let rest: Vec<Matrix> = mats
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != p)
        .map(|(_, m)| m.clone())
        .collect();
    let reduced = f_otimes(&field, &rest, tol)?;
    Ok(ContractionCheck {
        residual: tensor.distance(&reduced)?,
        tensor,
        field,
        order_residual: 0.0,
    })
}

/// Contracts the up index of slot `p` with the down index of slot `q`
/// (`M_p = M_q`) and compares with `g⊗`, `g` being `f` with the two
/// variables identified at position `min(p, q)`. Also compares the two
/// contraction orders.
pub fn contract_equal_slots_theorem(
    f: &ScalarField,
    mats: &[Matrix],
    p: usize,
    q: usize,
    tol: &Tolerances,
) -> Result<ContractionCheck> {
    check_slot(p, mats.len())?;
    check_slot(q, mats.len())?;
    if p == q {
        return Err(Error::InvalidArgument("contraction needs two distinct slots".into()));
    }
    if mats[p] != mats[q] {
        return Err(Error::InvalidArgument(format!(
            "slots {} and {} carry different matrices",
            p + 1,
            q + 1
        )));
    }
    let full = f_otimes(f, mats, tol)?;
    let tensor = full.contract_pair(p, q)?;
    let other = full.contract_pair(q, p)?;
    let (keep, drop) = (p.min(q), p.max(q));
    let expr = f.expr().substitute(&|v| {
        Some(if v == drop {
            Expr::var(keep)
        } else if v > drop {
            Expr::var(v - 1)
        } else {
            Expr::var(v)
        })
    });
    let field = ScalarField::new(expr, f.arity() - 1)?;
    let mut rest = mats.to_vec();
    rest.remove(drop);
    let reduced = f_otimes(&field, &rest, tol)?;
    Ok(ContractionCheck {
        residual: tensor.distance(&reduced)?,
        order_residual: tensor.distance(&other)?,
        tensor,
        field,
    })
}

/// For commuting `M_p`, `M_q`, the HS distance between the contractions of
/// `f⊗` in the two index orders.
pub fn commuting_swap_check(
    f: &ScalarField,
    mats: &[Matrix],
    p: usize,
    q: usize,
    tol: &Tolerances,
) -> Result<f64> {
    check_slot(p, mats.len())?;
    check_slot(q, mats.len())?;
    if p == q {
        return Err(Error::InvalidArgument("contraction needs two distinct slots".into()));
    }
    if mats[p].shape() != mats[q].shape() {
        return Err(Error::Dimension(format!(
            "slots {} and {} have different dimensions",
            p + 1,
            q + 1
        )));
    }
    let norm = matrix::hs_norm(&matrix::commutator(&mats[p], &mats[q]));
    let limit = 1e-10 * (matrix::hs_norm(&mats[p]) * matrix::hs_norm(&mats[q])).max(1.0);
    if norm > limit {
        return Err(Error::NonCommuting { norm, tol: limit });
    }
    let full = f_otimes(f, mats, tol)?;
    full.contract_pair(q, p)?.distance(&full.contract_pair(p, q)?)
}

fn check_slot(p: usize, k: usize) -> Result<()> {
    if p >= k {
        return Err(Error::InvalidArgument(format!(
            "slot {} out of range for {k} matrices",
            p + 1
        )));
    }
    Ok(())
}
