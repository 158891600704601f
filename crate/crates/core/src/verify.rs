//! Randomised oracle suites run by `multifunc verify`.
//!
//! Every trial draws its inputs from a generator seeded by
//! [`sample::trial_seed`], so a failing instance is reproduced from the base
//! seed, the suite name and the trial index alone.

use std::fmt::{self, Write as _};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::algebraic_ops::{
    commuting_swap_check, compose_identity_check, contract_equal_slots_theorem, contract_trace_theorem,
    derived_spectrum, product_identity_check,
};
use crate::antisym::{det_from_traces, distinct_tuple_sum};
use crate::calculus::{
    cyclic_identity_residual, eigenvalue_derivative, frechet_derivative, nth_derivative_curve, projector_derivative,
};
use crate::error::{Error, Result};
use crate::funcalc::{
    chain_contract, eigenbases, f_otimes, f_otimes_diagonalizable, jordan_closed_form, slot_spectra, JordanMatrix,
    Tolerances,
};
use crate::matrix::{self, Matrix};
use crate::sample::{self, SampleRng};
use crate::scalarfield::{MultiPoly, ScalarField};
use crate::spectral::Eigenbasis;
use crate::tensor::{poly_tensor_eval, OperatorTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Product,
    Compose,
    Contr,
    Diff,
    Lipschitz,
    Antisym,
    Zero,
    Paths,
}

/// Names accepted by `--suite`.
pub const SUITE_NAMES: [&str; 9] = [
    "all", "product", "compose", "contr", "diff", "lipschitz", "antisym", "zero", "paths",
];

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Product,
        Suite::Compose,
        Suite::Contr,
        Suite::Diff,
        Suite::Lipschitz,
        Suite::Antisym,
        Suite::Zero,
        Suite::Paths,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Product => "product",
            Suite::Compose => "compose",
            Suite::Contr => "contr",
            Suite::Diff => "diff",
            Suite::Lipschitz => "lipschitz",
            Suite::Antisym => "antisym",
            Suite::Zero => "zero",
            Suite::Paths => "paths",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Product => 20,
            Suite::Compose => 10,
            Suite::Contr => 10,
            Suite::Diff => 12,
            Suite::Lipschitz => 20,
            Suite::Antisym => 16,
            Suite::Zero => 20,
            Suite::Paths => 30,
        }
    }

    /// `"all"` or a single suite name.
    pub fn parse_selection(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .map(|s| vec![s])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{name}`")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One measured quantity of a trial and the bound it must respect.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: &'static str, value: f64, tol: f64) -> Check {
        Check { name, value, tol }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    /// Text description of the sampled inputs.
    pub inputs: Vec<String>,
    pub result: std::result::Result<Vec<Check>, String>,
}

impl TrialOutcome {
    pub fn passed(&self) -> bool {
        matches!(&self.result, Ok(checks) if checks.iter().all(Check::passed))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: Vec<TrialOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(TrialOutcome::passed)
    }

    /// Largest value of every check name with its bound, in order of first
    /// appearance.
    pub fn maxima(&self) -> Vec<(&'static str, f64, f64)> {
        let mut out: Vec<(&'static str, f64, f64)> = Vec::new();
        for check in self.trials.iter().filter_map(|t| t.result.as_ref().ok()).flatten() {
            match out.iter_mut().find(|e| e.0 == check.name) {
                Some(e) => {
                    if !(check.value <= e.1) {
                        e.1 = check.value;
                    }
                }
                None => out.push((check.name, check.value, check.tol)),
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[{}] {} trials", self.suite, self.trials.len());
        for (name, max, tol) in self.maxima() {
            let flag = if max <= tol { "ok" } else { "FAIL" };
            let _ = writeln!(s, "  {name:<26} max {max:.3e}  tol {tol:.0e}  {flag}");
        }
        for t in self.trials.iter().filter(|t| !t.passed()) {
            let _ = writeln!(s, "  failing trial {} (seed {:#018x})", t.index, t.seed);
            match &t.result {
                Ok(checks) => {
                    for c in checks.iter().filter(|c| !c.passed()) {
                        let _ = writeln!(s, "    {} = {:.3e} > {:.0e}", c.name, c.value, c.tol);
                    }
                }
                Err(e) => {
                    let _ = writeln!(s, "    error: {e}");
                }
            }
            for line in &t.inputs {
                let _ = writeln!(s, "    {line}");
            }
        }
        let _ = writeln!(s, "[{}] {}", self.suite, if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Runs `trials` trials of a suite (its default count when `None`).
/// Trials run in parallel; the report lists them by index.
pub fn run_suite(suite: Suite, base_seed: u64, trials: Option<usize>, tol: &Tolerances) -> SuiteReport {
    let n = trials.unwrap_or(suite.default_trials());
    let trials = (0..n)
        .into_par_iter()
        .map(|index| {
            let seed = sample::trial_seed(base_seed, suite.name(), index);
            let mut ctx = Trial {
                rng: sample::rng(seed),
                index,
                inputs: Vec::new(),
                tol: *tol,
            };
            let result = ctx.run(suite).map_err(|e| e.to_string());
            TrialOutcome {
                index,
                seed,
                inputs: ctx.inputs,
                result,
            }
        })
        .collect();
    SuiteReport { suite, trials }
}

struct Trial {
    rng: SampleRng,
    index: usize,
    inputs: Vec<String>,
    tol: Tolerances,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn field(text: &str, arity: usize) -> ScalarField {
    ScalarField::parse_with_arity(text, arity).expect("built-in field parses")
}

/// `‖a − b‖_HS / max(1, ‖b‖_HS)`.
fn rel_hs(a: &Matrix, b: &Matrix) -> f64 {
    matrix::hs_norm(&(a - b)) / matrix::hs_norm(b).max(1.0)
}

fn rel_tensor(a: &OperatorTensor, b: &OperatorTensor) -> Result<f64> {
    Ok(a.distance(b)? / b.hs_norm().max(1.0))
}

impl Trial {
    fn run(&mut self, suite: Suite) -> Result<Vec<Check>> {
        match suite {
            Suite::Product => self.product(),
            Suite::Compose => self.compose(),
            Suite::Contr => self.contr(),
            Suite::Diff => self.diff(),
            Suite::Lipschitz => self.lipschitz(),
            Suite::Antisym => self.antisym(),
            Suite::Zero => self.zero(),
            Suite::Paths => self.paths(),
        }
    }

    fn range(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    fn note_field(&mut self, name: &str, f: &ScalarField) {
        self.inputs.push(format!("{name} = {f}"));
    }

    fn note_matrix(&mut self, name: &str, m: &Matrix) {
        let text = matrix::matrix_to_json(m).unwrap_or_else(|e| format!("<{e}>"));
        self.inputs.push(format!("{name} = {text}"));
    }

    fn note_matrices(&mut self, prefix: &str, mats: &[Matrix]) {
        for (l, m) in mats.iter().enumerate() {
            self.note_matrix(&format!("{prefix}{}", l + 1), m);
        }
    }

    fn real_matrices(&mut self, k: usize, max_dim: usize) -> Vec<Matrix> {
        (0..k)
            .map(|_| {
                let d = self.range(1, max_dim);
                sample::real_matrix(&mut self.rng, d)
            })
            .collect()
    }

    fn product(&mut self) -> Result<Vec<Check>> {
        let k = self.range(1, 3);
        let mats = self.real_matrices(k, 3);
        let f1 = sample::choose_field(&mut self.rng, k);
        let f2 = sample::choose_field(&mut self.rng, k);
        self.note_field("f1", &f1);
        self.note_field("f2", &f2);
        self.note_matrices("M", &mats);
        let r = product_identity_check(&f1, &f2, &mats, &self.tol)?;
        Ok(vec![
            Check::new("product (rel)", r.residual / r.lhs_norm.max(1.0), 1e-8),
            Check::new("commutator", r.commutator, 1e-8),
        ])
    }

    fn compose(&mut self) -> Result<Vec<Check>> {
        let inner1 = ["x1", "x1^2", "exp(x1)", "x1^2 - x1 + 1"];
        let inner2 = ["x1+x2", "x1*x2", "exp(x1)*x2", "x1 - 2*x2"];
        let r = self.range(1, 2);
        let defective = self.index % 3 == 0;
        let g = sample::choose_field(&mut self.rng, r);
        self.note_field("g", &g);
        let mut fields = Vec::new();
        let mut groups = Vec::new();
        for q in 0..r {
            let k = self.range(1, 2);
            let pool: &[&str] = if k == 1 { &inner1 } else { &inner2 };
            let f = field(pool[self.range(0, pool.len() - 1)], k);
            // distinct derived eigenvalues closer than this make the
            // confluent Vandermonde solve on the left side ill-conditioned
            let mut mats = self.compose_group(k, defective);
            for _ in 0..20 {
                if derived_gap(&f, &mats, &self.tol)? >= 1e-3 {
                    break;
                }
                mats = self.compose_group(k, defective);
            }
            self.note_field(&format!("f{}", q + 1), &f);
            self.note_matrices(&format!("M{}_", q + 1), &mats);
            fields.push(f);
            groups.push(mats);
        }
        let res = compose_identity_check(&g, &fields, &groups, &self.tol)?;
        Ok(vec![Check::new("compose", res, 1e-7)])
    }

    fn compose_group(&mut self, k: usize, defective: bool) -> Vec<Matrix> {
        (0..k)
            .map(|_| {
                let d = self.range(2, 3);
                if defective {
                    let blocks = sample::jordan_blocks(&mut self.rng, d, 2);
                    sample::defective(&mut self.rng, &blocks)
                } else {
                    sample::real_matrix(&mut self.rng, d) * c(0.6)
                }
            })
            .collect()
    }

    fn contr(&mut self) -> Result<Vec<Check>> {
        let mut checks = Vec::new();

        // trace of one slot
        let k = self.range(1, 3);
        let mats = self.real_matrices(k, 3);
        let p = self.range(0, k - 1);
        let f = sample::choose_field(&mut self.rng, k);
        self.note_field("trace: f", &f);
        self.note_matrices("trace: M", &mats);
        self.inputs.push(format!("trace: slot {}", p + 1));
        let r = contract_trace_theorem(&f, &mats, p, &self.tol)?;
        checks.push(Check::new("trace slot (rel)", r.residual / r.tensor.hs_norm().max(1.0), 1e-8));

        // equal slots, defective on even trials
        let k = self.range(2, 3);
        let p = self.range(0, k - 1);
        let q = (p + self.range(1, k - 1)) % k;
        let d = self.range(2, 3);
        let shared = if self.index % 2 == 0 {
            let blocks = sample::jordan_blocks(&mut self.rng, d, 3);
            sample::defective(&mut self.rng, &blocks)
        } else {
            sample::real_matrix(&mut self.rng, d)
        };
        let mut mats = self.real_matrices(k, 2);
        mats[p] = shared.clone();
        mats[q] = shared;
        let f = sample::choose_field(&mut self.rng, k);
        self.note_field("equal: f", &f);
        self.note_matrices("equal: M", &mats);
        self.inputs.push(format!("equal: slots {} {}", p + 1, q + 1));
        let r = contract_equal_slots_theorem(&f, &mats, p, q, &self.tol)?;
        let scale = r.tensor.hs_norm().max(1.0);
        checks.push(Check::new("equal slots (rel)", r.residual / scale, 1e-8));
        checks.push(Check::new("equal slots order (rel)", r.order_residual / scale, 1e-8));

        // commuting pair: M and a polynomial in M
        let d = self.range(2, 3);
        let m = sample::real_matrix(&mut self.rng, d);
        let (a0, a1, a2) = (
            self.rng.random_range(-1.0..1.0),
            self.rng.random_range(-1.0..1.0),
            self.rng.random_range(-1.0..1.0),
        );
        let pm = matrix::identity(d) * c(a0) + &m * c(a1) + &m * &m * c(a2);
        let f = sample::choose_field(&mut self.rng, 2);
        self.note_field("swap: f", &f);
        self.note_matrices("swap: M", &[m.clone(), pm.clone()]);
        let r = commuting_swap_check(&f, &[m, pm], 0, 1, &self.tol)?;
        checks.push(Check::new("commuting swap", r, 1e-8));

        // chain contraction solves a Sylvester equation
        let d = self.range(2, 4);
        let a = matrix::identity(d) * c(2.0) + sample::real_matrix(&mut self.rng, d) * c(0.3);
        let b = matrix::identity(d) + sample::real_matrix(&mut self.rng, d) * c(0.3);
        self.note_matrices("sylvester: ", &[a.clone(), b.clone()]);
        let t = f_otimes(&field("1/(x1+x2)", 2), &[a.clone(), b.clone()], &self.tol)?;
        let x = chain_contract(&t)?;
        let res = matrix::hs_norm(&(&a * &x + &x * &b - matrix::identity(d)));
        checks.push(Check::new("sylvester", res, 1e-8));
        Ok(checks)
    }

    fn diff(&mut self) -> Result<Vec<Check>> {
        let mut checks = Vec::new();

        // Fréchet derivative against central differences
        let fields = ["x1^2", "exp(x1)", "x1*x2", "exp(x1+x2)", "exp(x1)*x2"];
        let text = fields[self.index % fields.len()];
        let f = field(text, if text.contains("x2") { 2 } else { 1 });
        let mats: Vec<Matrix> = (0..f.arity())
            .map(|_| {
                let d = self.range(2, 3);
                sample::real_matrix(&mut self.rng, d)
            })
            .collect();
        let p = self.range(0, f.arity() - 1);
        let h = sample::real_matrix(&mut self.rng, mats[p].nrows());
        self.note_field("frechet: f", &f);
        self.note_matrices("frechet: M", &mats);
        self.note_matrix("frechet: H", &h);
        let d = frechet_derivative(&f, &mats, p, &h, &self.tol)?;
        let step = 1e-5;
        let mut plus = mats.clone();
        plus[p] = &mats[p] + &h * c(step);
        let mut minus = mats.clone();
        minus[p] = &mats[p] - &h * c(step);
        let fd = f_otimes(&f, &plus, &self.tol)?
            .add(&f_otimes(&f, &minus, &self.tol)?.scale(c(-1.0)))?
            .scale(c(0.5 / step));
        checks.push(Check::new("frechet vs fd (rel)", d.distance(&fd)? / d.hs_norm().max(1e-300), 1e-6));

        // curve derivatives against Richardson extrapolation
        let n = 1 + self.index % 3;
        let curve_fields = ["exp(x1)", "exp(x1)*x1", "x1^4 - x1"];
        let g = field(curve_fields[self.index % curve_fields.len()], 1);
        let m = sample::real_matrix(&mut self.rng, 3);
        let h = sample::real_matrix(&mut self.rng, 3);
        self.note_field("curve: f", &g);
        self.note_matrix("curve: M", &m);
        self.note_matrix("curve: H", &h);
        self.inputs.push(format!("curve: order {n}"));
        let d = nth_derivative_curve(&g, &m, &h, n, c(0.0), &self.tol)?;
        let fd = richardson(&g, &m, &h, n, &self.tol)?;
        checks.push(Check::new("curve vs richardson (rel)", rel_hs(&fd, &d), 1e-4));

        // H = I: the n-th derivative of f(M + zI) is f⁽ⁿ⁾(M + zI)
        let z = self.rng.random_range(-0.5..0.5);
        let d = nth_derivative_curve(&g, &m, &matrix::identity(3), n, c(z), &self.tol)?;
        let mut dg = g.clone();
        for _ in 0..n {
            dg = dg.partial(0);
        }
        let want = f_otimes(&dg, &[&m + matrix::identity(3) * c(z)], &self.tol)?.as_matrix();
        checks.push(Check::new("commuting direction (rel)", rel_hs(&d, &want), 1e-8));

        // cyclic identity of the trace-reduced field
        let point = sample::separated_values(&mut self.rng, 3, 0.05);
        self.inputs.push(format!("cyclic: point {point:?}"));
        checks.push(Check::new("cyclic identity", cyclic_identity_residual(&g, 3, &point)?, 1e-8));

        // eigenvalue and eigenprojector derivatives
        let (m, _) = sample::diagonalizable(&mut self.rng, 3);
        let h = sample::real_matrix(&mut self.rng, 3);
        self.note_matrix("eigen: M", &m);
        self.note_matrix("eigen: H", &h);
        let mut total = c(0.0);
        let mut lambda_err: f64 = 0.0;
        let mut proj_err: f64 = 0.0;
        for k in 0..3 {
            let dl = eigenvalue_derivative(&m, &h, k, 1, c(0.0), &self.tol)?;
            total += dl;
            let lp = eigenvalue_derivative(&m, &h, k, 0, c(step), &self.tol)?;
            let lm = eigenvalue_derivative(&m, &h, k, 0, c(-step), &self.tol)?;
            lambda_err = lambda_err.max(((lp - lm) / (2.0 * step) - dl).norm());
            let dp = projector_derivative(&m, &h, k, 1, c(0.0), &self.tol)?;
            let pp = projector_derivative(&m, &h, k, 0, c(step), &self.tol)?;
            let pm = projector_derivative(&m, &h, k, 0, c(-step), &self.tol)?;
            proj_err = proj_err.max(matrix::max_abs_diff(&((pp - pm) / c(2.0 * step)), &dp));
        }
        checks.push(Check::new("eigenvalue vs fd", lambda_err, 1e-4));
        checks.push(Check::new("projector vs fd", proj_err, 1e-4));
        checks.push(Check::new("sum of eigenvalue rates", (total - matrix::trace(&h)).norm(), 1e-10));
        Ok(checks)
    }

    fn lipschitz(&mut self) -> Result<Vec<Check>> {
        let m1 = sample::real_symmetric(&mut self.rng, 4);
        let m2 = sample::real_symmetric(&mut self.rng, 4);
        let cut: f64 = self.rng.random_range(-0.5..0.5);
        self.note_matrices("M", &[m1.clone(), m2.clone()]);
        self.inputs.push(format!("min cut {cut}"));
        let b1 = Eigenbasis::hermitian(&m1)?;
        let b2 = Eigenbasis::hermitian(&m2)?;
        let dist = matrix::hs_norm(&(&m1 - &m2));
        let mut checks = Vec::new();
        for (name, text) in [("|x| excess", "abs(x1)".to_string()), ("min(x, c) excess", format!("min(x1, {cut})"))] {
            let f = field(&text, 1);
            let f1 = f_otimes_diagonalizable(&f, std::slice::from_ref(&m1), std::slice::from_ref(&b1))?.as_matrix();
            let f2 = f_otimes_diagonalizable(&f, std::slice::from_ref(&m2), std::slice::from_ref(&b2))?.as_matrix();
            checks.push(Check::new(name, matrix::hs_norm(&(f1 - f2)) - dist, 1e-8));
        }
        Ok(checks)
    }

    fn antisym(&mut self) -> Result<Vec<Check>> {
        let d = 1 + self.index % 4;
        let k = self.range(1, d);
        // eigenvalues with algebraic multiplicity are known from the sampler
        let (m, values) = if self.index % 2 == 0 {
            let blocks = sample::jordan_blocks(&mut self.rng, d, 2);
            let values = blocks.iter().flat_map(|&(l, s)| std::iter::repeat_n(l, s)).collect::<Vec<_>>();
            (sample::defective(&mut self.rng, &blocks), values)
        } else {
            sample::diagonalizable(&mut self.rng, d)
        };
        let f = sample::choose_field(&mut self.rng, k);
        self.note_field("f", &f);
        self.note_matrix("M", &m);
        let got = distinct_tuple_sum(&f, &m, k, &self.tol)?;
        let mut want = c(0.0);
        for_each_injective(d, k, &mut |tuple| -> Result<()> {
            let point: Vec<Complex64> = tuple.iter().map(|&i| values[i]).collect();
            want += f.eval(&point)?;
            Ok(())
        })?;
        let sum_err = (got - want).norm() / want.norm().max(1.0);

        let dm = self.range(1, 4);
        let a = sample::complex_matrix(&mut self.rng, dm);
        self.note_matrix("det: A", &a);
        let lu = a.clone().lu().determinant();
        let det_err = (det_from_traces(&a)? - lu).norm() / lu.norm();
        Ok(vec![
            Check::new("distinct tuple sum (rel)", sum_err, 1e-8),
            Check::new("det from traces (rel)", det_err, 1e-8),
        ])
    }

    fn zero(&mut self) -> Result<Vec<Check>> {
        let k = 2;
        let l = self.range(0, k - 1);
        let mut mats = self.real_matrices(k, 3);
        let blocks = sample::jordan_blocks(&mut self.rng, 3, 3);
        mats[l] = sample::defective(&mut self.rng, &blocks);
        let s = self.tol.analyze(&mats[l])?;
        let mut minpoly = MultiPoly::constant(k, c(1.0));
        for (z, r) in s.nodes() {
            let lin = MultiPoly::var(k, l).sub(&MultiPoly::constant(k, z));
            minpoly = minpoly.mul(&lin.pow(r as u32));
        }
        let q = sample::polynomial(&mut self.rng, k, 2, 3);
        let p = minpoly.mul(&q);
        self.inputs.push(format!("P = {p}"));
        self.note_matrices("M", &mats);
        let t = poly_tensor_eval(&p, &mats)?;
        let coeffs: f64 = p.terms().map(|(_, z)| z.norm()).sum();
        let scale = mats
            .iter()
            .enumerate()
            .map(|(i, m)| (matrix::hs_norm(m) + 1.0).powi(p.degree_in(i) as i32))
            .product::<f64>()
            * coeffs;
        Ok(vec![Check::new("annihilation (scaled)", t.hs_norm() / scale.max(1.0), 1e-8)])
    }

    fn paths(&mut self) -> Result<Vec<Check>> {
        let k = self.range(1, 2);
        let f = match self.index % 3 {
            0 => ScalarField::from_poly(&sample::polynomial(&mut self.rng, k, 3, 4)),
            1 => field("exp(x1)", k),
            _ => {
                let sum = (1..=k).map(|l| format!("x{l}")).collect::<Vec<_>>().join("+");
                field(&format!("exp({sum})"), k)
            }
        };
        self.note_field("f", &f);

        let mats: Vec<Matrix> = (0..k)
            .map(|_| {
                let d = self.range(1, 3);
                sample::diagonalizable(&mut self.rng, d).0
            })
            .collect();
        self.note_matrices("diag: M", &mats);
        let lhs = f_otimes(&f, &mats, &self.tol)?;
        let rhs = f_otimes_diagonalizable(&f, &mats, &eigenbases(&mats, &self.tol)?)?;
        let diag_err = rel_tensor(&lhs, &rhs)?;

        let jordan: Vec<JordanMatrix> = (0..k)
            .map(|_| {
                let d = self.range(1, 4);
                JordanMatrix::new(sample::jordan_blocks(&mut self.rng, d, 3))
            })
            .collect::<Result<_>>()?;
        for (l, j) in jordan.iter().enumerate() {
            self.inputs.push(format!("jordan: J{} blocks {:?}", l + 1, j.blocks));
        }
        let mats: Vec<Matrix> = jordan.iter().map(JordanMatrix::to_matrix).collect();
        let lhs = f_otimes(&f, &mats, &self.tol)?;
        let rhs = jordan_closed_form(&f, &mats, &jordan)?;
        let jordan_err = lhs.max_abs_diff(&rhs) / matrix::max_abs(&rhs.as_matrix()).max(f64::MIN_POSITIVE);
        Ok(vec![
            Check::new("diagonalizable path (rel)", diag_err, 1e-8),
            Check::new("jordan closed form (rel)", jordan_err, 1e-8),
        ])
    }
}

/// Smallest distance between two distinct values of the derived spectrum.
fn derived_gap(f: &ScalarField, mats: &[Matrix], tol: &Tolerances) -> Result<f64> {
    let d = derived_spectrum(f, &slot_spectra(mats, tol)?)?;
    let mut gap = f64::INFINITY;
    for (i, a) in d.values.iter().enumerate() {
        for b in &d.values[i + 1..] {
            gap = gap.min((a - b).norm());
        }
    }
    Ok(gap)
}

/// Calls `visit` on every injective map `0..k → 0..d`.
fn for_each_injective(d: usize, k: usize, visit: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(d: usize, k: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if cur.len() == k {
            return visit(cur);
        }
        for a in 0..d {
            if !cur.contains(&a) {
                cur.push(a);
                rec(d, k, cur, visit)?;
                cur.pop();
            }
        }
        Ok(())
    }
    rec(d, k, &mut Vec::with_capacity(k), visit)
}

/// Richardson-extrapolated central `n`-th difference of `z ↦ f(M + zH)` at
/// zero.
fn richardson(f: &ScalarField, m: &Matrix, h: &Matrix, n: usize, tol: &Tolerances) -> Result<Matrix> {
    let binom = |n: usize, i: usize| -> f64 { (1..=i).map(|j| (n + 1 - j) as f64 / j as f64).product() };
    let stencil = |step: f64| -> Result<Matrix> {
        let mut acc = Matrix::zeros(m.nrows(), m.ncols());
        for i in 0..=n {
            let w = binom(n, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
            let z = (n as f64 / 2.0 - i as f64) * step;
            acc += f_otimes(f, &[m + h * c(z)], tol)?.as_matrix() * c(w);
        }
        Ok(acc / c(step.powi(n as i32)))
    };
    let step = 0.02;
    let a = stencil(step)?;
    let b = stencil(step / 2.0)?;
    Ok((b * c(4.0) - a) / c(3.0))
}
