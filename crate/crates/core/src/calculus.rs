//! Derivatives of `f⊗` and of `z ↦ f(M + zH)` through divided differences,
//! and the eigenvalue / eigenprojector perturbation series.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::funcalc::{f_otimes, slot_spectra, Tolerances};
use crate::interp;
use crate::matrix::{self, Matrix};
use crate::scalarfield::{cluster_nodes, confluent_divided_difference, fresh_bound, Expr, ScalarField};
use crate::spectral::Eigenbasis;
use crate::tensor::OperatorTensor;
use crate::CONFLUENCE_TOL;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|t| t as f64).product()
}

fn require_univariate(f: &ScalarField) -> Result<()> {
    if f.arity() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a function of one variable, got arity {}",
            f.arity()
        )));
    }
    Ok(())
}

/// `f[x₀, …, xₙ]` with nodes closer than the confluence tolerance merged.
pub fn divided_difference(f: &ScalarField, nodes: &[Complex64]) -> Result<Complex64> {
    require_univariate(f)?;
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("divided difference needs at least one node".into()));
    }
    let groups = cluster_nodes(nodes, CONFLUENCE_TOL);
    let mut derivs = vec![f.expr().clone()];
    confluent_divided_difference(&groups, |z, m| {
        while derivs.len() <= m {
            let next = derivs.last().unwrap().partial(0);
            derivs.push(next);
        }
        Ok::<_, Error>(derivs[m].eval(&[z])? / factorial(m))
    })
}

/// `f` with variable `var` moved to a fresh bound id, the form a divided
/// difference body takes.
fn bind(f: &ScalarField, var: usize, shift_from: usize, shift: usize) -> (Expr, usize) {
    let t = fresh_bound();
    let body = f.expr().substitute(&|v| {
        Some(if v == var {
            Expr::var(t)
        } else if v >= shift_from {
            Expr::var(v + shift)
        } else {
            Expr::var(v)
        })
    });
    (body, t)
}

/// `g(x₁, …, x_p, y, …, x_k) = (f(…, y, …) − f(…, x_p, …)) / (y − x_p)`,
/// equal to `∂_p f` when `y = x_p`, with `y` inserted after `x_p`
/// (0-based `p`).
pub fn first_difference_field(f: &ScalarField, p: usize) -> Result<ScalarField> {
    let k = f.arity();
    if p >= k {
        return Err(Error::InvalidArgument(format!(
            "slot {} out of range for a field of arity {k}",
            p + 1
        )));
    }
    let (body, t) = bind(f, p, p + 1, 1);
    let expr = Expr::divided_difference(body, t, vec![Expr::var(p), Expr::var(p + 1)]);
    ScalarField::new(expr, k + 1)
}

/// Directional derivative of `f⊗` in slot `p` along `h`.
pub fn frechet_derivative(
    f: &ScalarField,
    mats: &[Matrix],
    p: usize,
    h: &Matrix,
    tol: &Tolerances,
) -> Result<OperatorTensor> {
    let g = first_difference_field(f, p)?;
    if mats.len() != f.arity() {
        return Err(Error::Dimension(format!(
            "field of arity {} applied to {} matrices",
            f.arity(),
            mats.len()
        )));
    }
    if h.shape() != mats[p].shape() {
        return Err(Error::Dimension(format!(
            "direction is {}x{}, slot {} is {}x{}",
            h.nrows(),
            h.ncols(),
            p + 1,
            mats[p].nrows(),
            mats[p].ncols()
        )));
    }
    let mut doubled = mats.to_vec();
    doubled.insert(p + 1, mats[p].clone());
    f_otimes(&g, &doubled, tol)?.contract_through(p, h)
}

/// `(x₀, …, xₙ) ↦ f[x₀, …, xₙ]` as a field of arity `n + 1`.
pub fn multivariate_divided_difference_field(f: &ScalarField, n: usize) -> Result<ScalarField> {
    require_univariate(f)?;
    let (body, t) = bind(f, 0, usize::MAX, 0);
    let nodes = (0..=n).map(Expr::var).collect();
    ScalarField::new(Expr::divided_difference(body, t, nodes), n + 1)
}

/// Slot tensor of `f` applied to `count` copies of `a`, reusing one
/// spectral analysis.
fn repeated(f: &ScalarField, a: &Matrix, count: usize, tol: &Tolerances) -> Result<OperatorTensor> {
    let mats = vec![a.clone(); count];
    f_otimes(f, &mats, tol)
}

fn contract_chain(mut t: OperatorTensor, h: &Matrix) -> Result<OperatorTensor> {
    while t.num_slots() > 1 {
        t = t.contract_through(0, h)?;
    }
    Ok(t)
}

fn check_curve(f: &ScalarField, m: &Matrix, h: &Matrix) -> Result<()> {
    require_univariate(f)?;
    matrix::check_square(m)?;
    if h.shape() != m.shape() {
        return Err(Error::Dimension(format!(
            "direction is {}x{}, matrix is {}x{}",
            h.nrows(),
            h.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `dⁿ/dzⁿ f(M + zH)`.
pub fn nth_derivative_curve(
    f: &ScalarField,
    m: &Matrix,
    h: &Matrix,
    n: usize,
    z: Complex64,
    tol: &Tolerances,
) -> Result<Matrix> {
    check_curve(f, m, h)?;
    let a = m + h * z;
    if n == 0 {
        return Ok(f_otimes(f, &[a], tol)?.as_matrix());
    }
    let fn_field = multivariate_divided_difference_field(f, n)?;
    let t = contract_chain(repeated(&fn_field, &a, n + 1, tol)?, h)?;
    Ok(t.as_matrix() * Complex64::new(factorial(n), 0.0))
}

/// `h_{n,n}(x₁, …, xₙ) = f[xₙ, x₁, …, xₙ]`.
pub fn trace_reduced_field(f: &ScalarField, n: usize) -> Result<ScalarField> {
    require_univariate(f)?;
    if n == 0 {
        return Err(Error::InvalidArgument("order must be positive".into()));
    }
    let (body, t) = bind(f, 0, usize::MAX, 0);
    let mut nodes = vec![Expr::var(n - 1)];
    nodes.extend((0..n).map(Expr::var));
    ScalarField::new(Expr::divided_difference(body, t, nodes), n)
}

/// `dⁿ/dzⁿ Tr f(M + zH)` through the `n`-slot tensor of `h_{n,n}`:
/// `n!·Tr(X·H)` with `X` the chain contraction of `h_{n,n}⊗` through `H`.
pub fn trace_derivative(
    f: &ScalarField,
    m: &Matrix,
    h: &Matrix,
    n: usize,
    z: Complex64,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_curve(f, m, h)?;
    let a = m + h * z;
    if n == 0 {
        return Ok(matrix::trace(&f_otimes(f, &[a], tol)?.as_matrix()));
    }
    let hnn = trace_reduced_field(f, n)?;
    let x = contract_chain(repeated(&hnn, &a, n, tol)?, h)?.as_matrix();
    Ok(matrix::trace(&(x * h)) * factorial(n))
}

/// `|f′[x₁, …, xₙ] − Σ_k h_{n,k}(x)|` where `h_{n,k}` is `h_{n,n}` with its
/// arguments rotated, `h_{n,k}(x) = h_{n,n}(x_{k+1}, …, xₙ, x₁, …, x_k)`.
pub fn cyclic_identity_residual(f: &ScalarField, n: usize, point: &[Complex64]) -> Result<f64> {
    if point.len() != n {
        return Err(Error::Dimension(format!("{} coordinates for order {n}", point.len())));
    }
    let hnn = trace_reduced_field(f, n)?;
    let df = ScalarField::new(f.expr().partial(0), 1)?;
    let lhs = multivariate_divided_difference_field(&df, n - 1)?.eval(point)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for k in 1..=n {
        let rotated: Vec<Complex64> = (0..n).map(|i| point[(i + k) % n]).collect();
        rhs += hnn.eval(&rotated)?;
    }
    Ok((lhs - rhs).norm())
}

/// `u⁽λ⁾ₙ` as a field of arity `n + 1`.
pub fn u_function(lambda: Complex64, n: usize) -> ScalarField {
    let expr = Expr::spectral_indicator(lambda, (0..=n).map(Expr::var).collect());
    ScalarField::new(expr, n + 1).expect("arguments are the first n + 1 variables")
}

/// Eigenvalues and rank-one spectral projectors of a matrix with simple
/// spectrum whose gaps exceed ten cluster tolerances.
pub struct SimpleSpectrum {
    pub values: Vec<Complex64>,
    pub projectors: Vec<Matrix>,
}

pub fn simple_spectrum(a: &Matrix, tol: &Tolerances) -> Result<SimpleSpectrum> {
    let spectra = slot_spectra(std::slice::from_ref(a), tol)?;
    let s = &spectra[0];
    if !s.is_simple() {
        return Err(Error::NonSimpleSpectrum(format!(
            "algebraic multiplicities {:?}",
            s.alg_mult
        )));
    }
    let gap_min = 10.0 * s.cluster_tol;
    for i in 0..s.eigenvalues.len() {
        for j in (i + 1)..s.eigenvalues.len() {
            let gap = (s.eigenvalues[i] - s.eigenvalues[j]).norm();
            if gap <= gap_min {
                return Err(Error::NonSimpleSpectrum(format!(
                    "eigenvalues {} and {} are only {gap:e} apart",
                    s.eigenvalues[i], s.eigenvalues[j]
                )));
            }
        }
    }
    let basis = Eigenbasis::new(a, s)?;
    let projectors = (0..basis.values.len()).map(|c| basis.projector(c)).collect();
    Ok(SimpleSpectrum {
        values: basis.values,
        projectors,
    })
}

/// `Σ_{k₀…k_m} u(λ_{k₀}, …, λ_{k_m})·P_{k₀} H P_{k₁} … H P_{k_m}`.
fn projector_series(s: &SimpleSpectrum, u: &ScalarField, h: &Matrix, m: usize) -> Result<Matrix> {
    let d = s.values.len();
    let shape = vec![d; m + 1];
    let total = d.pow(m as u32 + 1);
    let hp: Vec<Matrix> = s.projectors.iter().map(|p| h * p).collect();
    let mut out = Matrix::zeros(d, d);
    let mut pos = vec![0usize; m + 1];
    let mut point = vec![Complex64::new(0.0, 0.0); m + 1];
    for _ in 0..total {
        for (i, &k) in pos.iter().enumerate() {
            point[i] = s.values[k];
        }
        let w = u.eval(&point)?;
        if w != Complex64::new(0.0, 0.0) {
            let mut prod = s.projectors[pos[0]].clone();
            for &k in &pos[1..] {
                prod = prod * &hp[k];
            }
            out += prod * w;
        }
        interp::increment(&mut pos, &shape);
    }
    Ok(out)
}

fn eigen_index(s: &SimpleSpectrum, k: usize) -> Result<Complex64> {
    s.values.get(k).copied().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "eigenvalue index {} out of range for {} eigenvalues",
            k + 1,
            s.values.len()
        ))
    })
}

/// `dⁿ/dtⁿ P(λ_k(t))` at `t = z` for `M(t) = M + tH`, with `k` indexing
/// the sorted eigenvalues of `M + zH`.
pub fn projector_derivative(
    m: &Matrix,
    h: &Matrix,
    k: usize,
    n: usize,
    z: Complex64,
    tol: &Tolerances,
) -> Result<Matrix> {
    check_direction(m, h)?;
    let s = simple_spectrum(&(m + h * z), tol)?;
    let lambda = eigen_index(&s, k)?;
    let series = projector_series(&s, &u_function(lambda, n), h, n)?;
    Ok(series * Complex64::new(factorial(n), 0.0))
}

/// `dⁿ/dtⁿ λ_k(t)` at `t = z`.
pub fn eigenvalue_derivative(
    m: &Matrix,
    h: &Matrix,
    k: usize,
    n: usize,
    z: Complex64,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_direction(m, h)?;
    let s = simple_spectrum(&(m + h * z), tol)?;
    let lambda = eigen_index(&s, k)?;
    if n == 0 {
        return Ok(lambda);
    }
    let series = projector_series(&s, &u_function(lambda, n - 1), h, n - 1)?;
    Ok(matrix::trace(&(series * h)) * factorial(n - 1))
}

fn check_direction(m: &Matrix, h: &Matrix) -> Result<()> {
    matrix::check_square(m)?;
    if h.shape() != m.shape() {
        return Err(Error::Dimension(format!(
            "direction is {}x{}, matrix is {}x{}",
            h.nrows(),
            h.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{diag_real, from_real, identity, max_abs_diff};
    use crate::sample;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn field(s: &str, k: usize) -> ScalarField {
        ScalarField::parse_with_arity(s, k).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn rel(a: &Matrix, b: &Matrix) -> f64 {
        matrix::hs_norm(&(a - b)) / matrix::hs_norm(b).max(1e-300)
    }

    #[test]
    fn divided_difference_examples() {
        let sq = field("x1^2", 1);
        assert!((divided_difference(&sq, &[c(1.0), c(3.0)]).unwrap() - c(4.0)).norm() < 1e-14);
        let p = field("x1^4", 1);
        let nodes = [c(0.3), c(-1.2), c(2.0), c(0.7), c(1.1)];
        assert!((divided_difference(&p, &nodes).unwrap() - c(1.0)).norm() < 1e-12);
        let e = field("exp(x1)", 1);
        assert!((divided_difference(&e, &[c(0.0), c(0.0)]).unwrap() - c(1.0)).norm() < 1e-15);
        let third = divided_difference(&e, &[c(0.5); 4]).unwrap();
        assert!((third - c(0.5f64.exp() / 6.0)).norm() < 1e-14);
    }

    #[test]
    fn first_difference_examples() {
        let g = first_difference_field(&field("x1^2", 1), 0).unwrap();
        for (x, y) in [(1.0, 2.0), (0.5, 0.5), (-1.0, 3.0)] {
            assert!((g.eval(&[c(x), c(y)]).unwrap() - c(x + y)).norm() < 1e-13);
        }
        let g = first_difference_field(&field("x1*x2", 2), 0).unwrap();
        assert_eq!(g.arity(), 3);
        for (x, y, z) in [(1.0, 2.0, 5.0), (0.5, 0.5, -2.0)] {
            assert!((g.eval(&[c(x), c(y), c(z)]).unwrap() - c(z)).norm() < 1e-13);
        }
        let g = first_difference_field(&field("exp(x1)", 1), 0).unwrap();
        assert!((g.eval(&[c(0.3), c(0.3)]).unwrap() - c(0.3f64.exp())).norm() < 1e-15);
    }

    #[test]
    fn frechet_examples() {
        let m = from_real(&[&[1.0, 2.0], &[0.5, -1.0]]);
        let h = from_real(&[&[0.0, 1.0], &[3.0, 2.0]]);
        let d = frechet_derivative(&field("x1^2", 1), &[m.clone()], 0, &h, &tol()).unwrap();
        assert!(max_abs_diff(&d.as_matrix(), &(&m * &h + &h * &m)) < 1e-12);
        let d = frechet_derivative(&field("x1", 1), &[m.clone()], 0, &h, &tol()).unwrap();
        assert!(max_abs_diff(&d.as_matrix(), &h) < 1e-12);
        let d = frechet_derivative(&field("exp(x1)", 1), &[Matrix::zeros(2, 2)], 0, &h, &tol()).unwrap();
        assert!(max_abs_diff(&d.as_matrix(), &h) < 1e-14);
    }

    fn central_difference(f: &ScalarField, mats: &[Matrix], p: usize, h: &Matrix, step: f64) -> OperatorTensor {
        let mut plus = mats.to_vec();
        plus[p] = &mats[p] + h * c(step);
        let mut minus = mats.to_vec();
        minus[p] = &mats[p] - h * c(step);
        let a = f_otimes(f, &plus, &tol()).unwrap();
        let b = f_otimes(f, &minus, &tol()).unwrap();
        a.add(&b.scale(c(-1.0))).unwrap().scale(c(0.5 / step))
    }

    #[test]
    fn frechet_matches_finite_differences() {
        let mut r = sample::rng(21);
        let fields = [field("x1^2", 1), field("exp(x1)", 1), field("x1*x2", 2), field("exp(x1+x2)", 2)];
        for f in &fields {
            for _ in 0..3 {
                let mats: Vec<Matrix> = (0..f.arity()).map(|l| sample::real_matrix(&mut r, 2 + l)).collect();
                let p = f.arity() - 1;
                let h = sample::real_matrix(&mut r, mats[p].nrows());
                let d = frechet_derivative(f, &mats, p, &h, &tol()).unwrap();
                let fd = central_difference(f, &mats, p, &h, 1e-5);
                let err = d.distance(&fd).unwrap() / d.hs_norm();
                assert!(err <= 1e-6, "{f}: {err}");
            }
        }
    }

    #[test]
    fn frechet_is_linear_in_direction() {
        let mut r = sample::rng(22);
        let f = field("exp(x1)*x2", 2);
        let mats = [sample::real_matrix(&mut r, 3), sample::real_matrix(&mut r, 2)];
        let h1 = sample::real_matrix(&mut r, 3);
        let h2 = sample::real_matrix(&mut r, 3);
        let d1 = frechet_derivative(&f, &mats, 0, &h1, &tol()).unwrap();
        let d2 = frechet_derivative(&f, &mats, 0, &h2, &tol()).unwrap();
        let sum = frechet_derivative(&f, &mats, 0, &(&h1 + &h2 * c(2.0)), &tol()).unwrap();
        let want = d1.add(&d2.scale(c(2.0))).unwrap();
        assert!(sum.distance(&want).unwrap() <= 1e-12 * want.hs_norm());
    }

    #[test]
    fn curve_examples() {
        let m = from_real(&[&[1.0, 2.0], &[0.5, -1.0]]);
        let h = from_real(&[&[0.0, 1.0], &[3.0, 2.0]]);
        let e = field("exp(x1)", 1);
        let d0 = nth_derivative_curve(&e, &m, &h, 0, c(0.3), &tol()).unwrap();
        let direct = f_otimes(&e, &[&m + &h * c(0.3)], &tol()).unwrap().as_matrix();
        assert!(max_abs_diff(&d0, &direct) < 1e-14);

        for n in 1..=3 {
            let d = nth_derivative_curve(&e, &m, &identity(2), n, c(0.2), &tol()).unwrap();
            assert!(rel(&d, &direct_exp(&m, 0.2)) < 1e-8, "n = {n}");
        }

        let cube = field("x1^3", 1);
        let d = nth_derivative_curve(&cube, &m, &h, 2, c(0.0), &tol()).unwrap();
        let want = (&m * &h * &h + &h * &m * &h + &h * &h * &m) * c(2.0);
        assert!(max_abs_diff(&d, &want) < 1e-11);
    }

    fn direct_exp(m: &Matrix, z: f64) -> Matrix {
        f_otimes(&field("exp(x1)", 1), &[m + identity(m.nrows()) * c(z)], &tol())
            .unwrap()
            .as_matrix()
    }

    /// Richardson-extrapolated central differences of order `n` for
    /// `z ↦ f(M + zH)`, evaluated through the interpolation path only.
    fn richardson(f: &ScalarField, m: &Matrix, h: &Matrix, n: usize) -> Matrix {
        let value = |z: f64| f_otimes(f, &[m + h * c(z)], &tol()).unwrap().as_matrix();
        let stencil = |step: f64| -> Matrix {
            // central n-th difference with binomial weights
            let mut acc = Matrix::zeros(m.nrows(), m.ncols());
            for i in 0..=n {
                let w = binom(n, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
                let z = (n as f64 / 2.0 - i as f64) * step;
                acc += value(z) * c(w);
            }
            acc / c(step.powi(n as i32))
        };
        let step = 0.02;
        let a = stencil(step);
        let b = stencil(step / 2.0);
        (b * c(4.0) - a) / c(3.0)
    }

    fn binom(n: usize, k: usize) -> f64 {
        factorial(n) / (factorial(k) * factorial(n - k))
    }

    #[test]
    fn curve_matches_richardson() {
        let mut r = sample::rng(23);
        let e = field("exp(x1)", 1);
        for n in 1..=3 {
            let m = sample::real_matrix(&mut r, 3);
            let h = sample::real_matrix(&mut r, 3);
            let d = nth_derivative_curve(&e, &m, &h, n, c(0.0), &tol()).unwrap();
            let fd = richardson(&e, &m, &h, n);
            assert!(rel(&fd, &d) <= 1e-4, "n = {n}: {}", rel(&fd, &d));
        }
    }

    #[test]
    fn trace_derivative_examples() {
        let m = from_real(&[&[1.0, 2.0], &[0.5, -1.0]]);
        let h = from_real(&[&[0.0, 1.0], &[3.0, 2.0]]);
        let got = trace_derivative(&field("x1^2", 1), &m, &h, 1, c(0.0), &tol()).unwrap();
        assert!((got - matrix::trace(&(&m * &h)) * 2.0).norm() < 1e-12);

        let d = diag_real(&[0.2, -0.4]);
        let got = trace_derivative(&field("exp(x1)", 1), &d, &h, 1, c(0.0), &tol()).unwrap();
        let want = 0.2f64.exp() * 0.0 + (-0.4f64).exp() * 2.0;
        assert!((got - c(want)).norm() < 1e-13);
    }

    #[test]
    fn trace_derivative_matches_trace_of_curve() {
        let mut r = sample::rng(24);
        let e = field("exp(x1)*x1", 1);
        for n in 1..=3 {
            let m = sample::real_matrix(&mut r, 3);
            let h = sample::real_matrix(&mut r, 3);
            let t = trace_derivative(&e, &m, &h, n, c(0.1), &tol()).unwrap();
            let full = matrix::trace(&nth_derivative_curve(&e, &m, &h, n, c(0.1), &tol()).unwrap());
            assert!((t - full).norm() <= 1e-8 * full.norm().max(1.0), "n = {n}: {t} vs {full}");
        }
    }

    #[test]
    fn cyclic_identity() {
        let mut r = sample::rng(25);
        let e = field("exp(x1)", 1);
        for _ in 0..10 {
            let point = sample::separated_values(&mut r, 3, 0.05);
            assert!(cyclic_identity_residual(&e, 3, &point).unwrap() <= 1e-8);
        }
        let conf = [c(0.4), c(0.4), c(-0.3)];
        assert!(cyclic_identity_residual(&e, 3, &conf).unwrap() <= 1e-8);
    }

    #[test]
    fn u_examples() {
        let lambda = c(1.5);
        let u0 = u_function(lambda, 0);
        assert_eq!(u0.eval(&[lambda]).unwrap(), c(1.0));
        assert_eq!(u0.eval(&[c(0.2)]).unwrap(), c(0.0));
        let u1 = u_function(lambda, 1);
        let z = c(-0.5);
        assert!((u1.eval(&[lambda, z]).unwrap() - (lambda - z).inv()).norm() < 1e-15);
        assert_eq!(u1.eval(&[lambda, lambda]).unwrap(), c(0.0));
        assert_eq!(u1.eval(&[z, c(0.7)]).unwrap(), c(0.0));
        // m = 2 of 3: derivative of 1/(λ - z) form
        let u2 = u_function(lambda, 2);
        let got = u2.eval(&[lambda, lambda, z]).unwrap();
        assert!((got + (lambda - z).powi(-2)).norm() < 1e-14);
        assert!(u1.eval(&[lambda + c(1e-9), z]).is_err());
    }

    proptest! {
        #[test]
        fn u_is_symmetric(a in -2.0f64..2.0, b in -2.0f64..2.0, pick in 0usize..3) {
            let lambda = c(0.5);
            let mut args = vec![c(a), c(b), lambda];
            args.rotate_left(pick);
            prop_assume!((a - 0.5).abs() > 1e-3 && (b - 0.5).abs() > 1e-3);
            let u = u_function(lambda, 2);
            let base = u.eval(&args).unwrap();
            let mut swapped = args.clone();
            swapped.swap(0, 2);
            let other = u.eval(&swapped).unwrap();
            prop_assert!((base - other).norm() <= 1e-12 * base.norm().max(1.0));
        }

        #[test]
        fn divided_differences_are_symmetric(x in proptest::collection::vec(-2.0f64..2.0, 4), perm in 0usize..24) {
            let e = field("exp(x1)*x1", 1);
            let nodes: Vec<Complex64> = x.iter().map(|&v| c(v)).collect();
            let mut shuffled = nodes.clone();
            let mut code = perm;
            for i in (1..4).rev() {
                shuffled.swap(i, code % (i + 1));
                code /= i + 1;
            }
            for i in 0..4 {
                for j in (i + 1)..4 {
                    prop_assume!((x[i] - x[j]).abs() > 0.05);
                }
            }
            let a = divided_difference(&e, &nodes).unwrap();
            let b = divided_difference(&e, &shuffled).unwrap();
            prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0));
        }

        #[test]
        fn confluent_limit_is_continuous(x in -2.0f64..2.0) {
            let e = field("exp(x1)", 1);
            let g = first_difference_field(&e, 0).unwrap();
            let conf = g.eval(&[c(x), c(x)]).unwrap();
            let near = g.eval(&[c(x), c(x + 1e-7)]).unwrap();
            prop_assert!((conf - near).norm() <= 1e-6 * conf.norm());
        }
    }

    #[test]
    fn mdd_field_examples() {
        let g = multivariate_divided_difference_field(&field("x1^2", 1), 1).unwrap();
        assert!((g.eval(&[c(0.3), c(1.2)]).unwrap() - c(1.5)).norm() < 1e-14);
        let e = multivariate_divided_difference_field(&field("exp(x1)", 1), 1).unwrap();
        let d0 = e.partial(0);
        let e2 = multivariate_divided_difference_field(&field("exp(x1)", 1), 2).unwrap();
        let (x0, x1) = (c(0.3), c(-0.4));
        let want = e2.eval(&[x0, x0, x1]).unwrap();
        assert!((d0.eval(&[x0, x1]).unwrap() - want).norm() < 1e-13);
        let step = 1e-6;
        let fd = (e.eval(&[x0 + c(step), x1]).unwrap() - e.eval(&[x0 - c(step), x1]).unwrap()) / (2.0 * step);
        assert!((fd - want).norm() < 1e-8);
    }

    #[test]
    fn eigen_perturbation_examples() {
        let m = diag_real(&[1.0, 2.0]);
        let h = from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let d = eigenvalue_derivative(&m, &h, 0, 1, c(0.0), &tol()).unwrap();
        assert!(d.norm() < 1e-14);

        let p1 = diag_real(&[1.0, 0.0]);
        let p2 = diag_real(&[0.0, 1.0]);
        let want = (&p1 * &h * &p2 + &p2 * &h * &p1) * c(-1.0);
        let got = projector_derivative(&m, &h, 0, 1, c(0.0), &tol()).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-14);

        let step = 1e-5;
        let plus = projector_derivative(&m, &h, 0, 0, c(step), &tol()).unwrap();
        let minus = projector_derivative(&m, &h, 0, 0, c(-step), &tol()).unwrap();
        let fd = (plus - minus) / c(2.0 * step);
        assert!(max_abs_diff(&fd, &got) < 1e-4);

        let p = projector_derivative(&m, &h, 1, 0, c(0.3), &tol()).unwrap();
        assert!(max_abs_diff(&(&p * &p), &p) < 1e-12);
        assert!((matrix::trace(&p) - c(1.0)).norm() < 1e-12);

        assert!(matches!(
            eigenvalue_derivative(&identity(2), &h, 0, 1, c(0.0), &tol()),
            Err(Error::NonSimpleSpectrum(_))
        ));
    }

    #[test]
    fn projector_derivative_matches_tensor_path() {
        let mut r = sample::rng(26);
        let (m, _) = sample::diagonalizable(&mut r, 3);
        let h = sample::real_matrix(&mut r, 3);
        for n in 1..=2 {
            let s = simple_spectrum(&m, &tol()).unwrap();
            let u = u_function(s.values[1], n);
            let t = contract_chain(repeated(&u, &m, n + 1, &tol()).unwrap(), &h).unwrap();
            let via_tensor = t.as_matrix() * c(factorial(n));
            let direct = projector_derivative(&m, &h, 1, n, c(0.0), &tol()).unwrap();
            assert!(rel(&direct, &via_tensor) < 1e-8, "n = {n}");
        }
    }

    #[test]
    fn eigenvalue_derivatives_sum_to_trace() {
        let mut r = sample::rng(27);
        for _ in 0..5 {
            let (m, _) = sample::diagonalizable(&mut r, 3);
            let h = sample::real_matrix(&mut r, 3);
            let total: Complex64 = (0..3)
                .map(|k| eigenvalue_derivative(&m, &h, k, 1, c(0.0), &tol()).unwrap())
                .sum();
            assert!((total - matrix::trace(&h)).norm() <= 1e-10);
            for k in 0..3 {
                let step = 1e-5;
                let plus = eigenvalue_derivative(&m, &h, k, 0, c(step), &tol()).unwrap();
                let minus = eigenvalue_derivative(&m, &h, k, 0, c(-step), &tol()).unwrap();
                let fd = (plus - minus) / (2.0 * step);
                let d = eigenvalue_derivative(&m, &h, k, 1, c(0.0), &tol()).unwrap();
                assert!((fd - d).norm() <= 1e-4, "{fd} vs {d}");
            }
        }
    }
}
