//! Acceptance gate: one pass/fail line per criterion, non-zero exit if any
//! criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use multifunc::algebraic_ops::{
    commuting_swap_check, compose_identity_check, contract_equal_slots_theorem, contract_trace_theorem,
    derived_spectrum, product_identity_check,
};
use multifunc::antisym::{det_from_traces, distinct_tuple_sum};
use multifunc::calculus::{
    cyclic_identity_residual, eigenvalue_derivative, frechet_derivative, nth_derivative_curve, projector_derivative,
};
use multifunc::funcalc::{
    chain_contract, eigenbases, f_otimes, f_otimes_diagonalizable, jordan_closed_form, slot_spectra, JordanMatrix,
    Tolerances,
};
use multifunc::matrix::{self, identity, Matrix};
use multifunc::sample::{self, SampleRng};
use multifunc::spectral::Eigenbasis;
use multifunc::tensor::poly_tensor_eval;
use multifunc::{Complex64, MultiPoly, OperatorTensor, ScalarField};
use rand::Rng;

/// A measured quantity and its bound.
struct Measure {
    what: &'static str,
    value: f64,
    tol: f64,
}

impl Measure {
    fn ok(&self) -> bool {
        self.value <= self.tol
    }
}

/// Running maximum of one quantity.
struct Worst(Measure);

impl Worst {
    fn new(what: &'static str, tol: f64) -> Worst {
        Worst(Measure {
            what,
            value: f64::NEG_INFINITY,
            tol,
        })
    }

    fn see(&mut self, v: f64) {
        if !(v <= self.0.value) {
            self.0.value = v;
        }
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn field(s: &str, k: usize) -> ScalarField {
    ScalarField::parse_with_arity(s, k).unwrap()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn range(rng: &mut SampleRng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

fn sum_field(k: usize) -> ScalarField {
    let sum = (1..=k).map(|l| format!("x{l}")).collect::<Vec<_>>().join("+");
    field(&format!("exp({sum})"), k)
}

/// Entrywise-max relative distance `max|a − b| / max|b|`.
fn rel_entry(a: &OperatorTensor, b: &OperatorTensor) -> f64 {
    a.max_abs_diff(b) / matrix::max_abs(&b.as_matrix())
}

fn rel_hs(a: &Matrix, b: &Matrix) -> f64 {
    matrix::hs_norm(&(a - b)) / matrix::hs_norm(b)
}

fn c01_jordan() -> Vec<Measure> {
    let mut rng = sample::rng(101);
    let mut w = Worst::new("max rel entry error", 1e-8);
    for t in 0..30 {
        let k = range(&mut rng, 1, 2);
        let f = match t % 3 {
            0 => ScalarField::from_poly(&sample::polynomial(&mut rng, k, 3, 4)),
            1 => field("exp(x1)", k),
            _ => sum_field(k),
        };
        let jordan: Vec<JordanMatrix> = (0..k)
            .map(|_| {
                let d = range(&mut rng, 1, 4);
                JordanMatrix::new(sample::jordan_blocks(&mut rng, d, 3)).unwrap()
            })
            .collect();
        let mats: Vec<Matrix> = jordan.iter().map(JordanMatrix::to_matrix).collect();
        let lhs = f_otimes(&f, &mats, &tol()).unwrap();
        let rhs = jordan_closed_form(&f, &mats, &jordan).unwrap();
        w.see(rel_entry(&lhs, &rhs));
    }
    vec![w.0]
}

fn c02_diagonalizable() -> Vec<Measure> {
    let mut rng = sample::rng(102);
    let mut w = Worst::new("max rel entry error", 1e-8);
    for t in 0..30 {
        let k = range(&mut rng, 1, 2);
        let f = match t % 3 {
            0 => ScalarField::from_poly(&sample::polynomial(&mut rng, k, 3, 4)),
            1 => sample::choose_field(&mut rng, k),
            _ => sum_field(k),
        };
        let mats: Vec<Matrix> = (0..k)
            .map(|_| {
                let d = range(&mut rng, 1, 4);
                sample::diagonalizable(&mut rng, d).0
            })
            .collect();
        let lhs = f_otimes(&f, &mats, &tol()).unwrap();
        let rhs = f_otimes_diagonalizable(&f, &mats, &eigenbases(&mats, &tol()).unwrap()).unwrap();
        w.see(rel_entry(&lhs, &rhs));
    }
    vec![w.0]
}

fn c03_annihilation() -> Vec<Measure> {
    let mut rng = sample::rng(103);
    let mut w = Worst::new("max ‖P⊗‖/scale", 1e-8);
    for _ in 0..20 {
        let k = range(&mut rng, 1, 3);
        let l = range(&mut rng, 0, k - 1);
        let mut mats: Vec<Matrix> = (0..k)
            .map(|_| {
                let d = range(&mut rng, 1, 3);
                sample::real_matrix(&mut rng, d)
            })
            .collect();
        let blocks = sample::jordan_blocks(&mut rng, 3, 3);
        mats[l] = sample::defective(&mut rng, &blocks);
        // minimal polynomial of slot l from its known Jordan structure
        let mut minpoly = MultiPoly::constant(k, c(1.0));
        let mut seen: Vec<(Complex64, usize)> = Vec::new();
        for &(z, s) in &blocks {
            match seen.iter_mut().find(|e| e.0 == z) {
                Some(e) => e.1 = e.1.max(s),
                None => seen.push((z, s)),
            }
        }
        for (z, s) in seen {
            let lin = MultiPoly::var(k, l).sub(&MultiPoly::constant(k, z));
            minpoly = minpoly.mul(&lin.pow(s as u32));
        }
        let p = minpoly.mul(&sample::polynomial(&mut rng, k, 2, 3));
        let t = poly_tensor_eval(&p, &mats).unwrap();
        let scale = p.terms().map(|(_, z)| z.norm()).sum::<f64>()
            * mats
                .iter()
                .enumerate()
                .map(|(i, m)| (matrix::hs_norm(m) + 1.0).powi(p.degree_in(i) as i32))
                .product::<f64>();
        w.see(t.hs_norm() / scale);
    }
    vec![w.0]
}

fn c04_product() -> Vec<Measure> {
    let mut rng = sample::rng(104);
    let mut res = Worst::new("max residual/‖lhs‖", 1e-8);
    let mut com = Worst::new("max ‖[M̄1, M̄2]‖", 1e-8);
    for k in 1..=3 {
        let fields = sample::entire_fields(k);
        for f1 in &fields {
            for f2 in &fields {
                let mats: Vec<Matrix> = (0..k)
                    .map(|_| {
                        let d = range(&mut rng, 1, 3);
                        sample::real_matrix(&mut rng, d)
                    })
                    .collect();
                let r = product_identity_check(f1, f2, &mats, &tol()).unwrap();
                res.see(r.residual / r.lhs_norm);
                com.see(r.commutator);
            }
        }
    }
    vec![res.0, com.0]
}

fn min_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            gap = gap.min((a - b).norm());
        }
    }
    gap
}

fn c05_compose() -> Vec<Measure> {
    let mut rng = sample::rng(105);
    let mut w = Worst::new("max residual", 1e-7);
    let mut defective_seen = 0;
    let inner = ["x1+x2", "x1*x2", "exp(x1)*x2", "x1^2", "exp(x1)"];
    let mut t = 0;
    while t < 10 {
        let defective = t == 0;
        let r = range(&mut rng, 1, 2);
        let g = sample::choose_field(&mut rng, r);
        let mut fields = Vec::new();
        let mut groups = Vec::new();
        let mut gap = f64::INFINITY;
        for _ in 0..r {
            let text = inner[range(&mut rng, 0, inner.len() - 1)];
            let k = if text.contains("x2") { 2 } else { 1 };
            let f = field(text, k);
            let mats: Vec<Matrix> = (0..k)
                .map(|_| {
                    let d = range(&mut rng, 2, 3);
                    if defective {
                        let blocks = sample::jordan_blocks(&mut rng, d, 2);
                        sample::defective(&mut rng, &blocks)
                    } else {
                        sample::real_matrix(&mut rng, d) * c(0.6)
                    }
                })
                .collect();
            let d = derived_spectrum(&f, &slot_spectra(&mats, &tol()).unwrap()).unwrap();
            gap = gap.min(min_gap(&d.values));
            fields.push(f);
            groups.push(mats);
        }
        // instances with nearly coincident derived eigenvalues are redrawn
        if gap < 1e-3 {
            continue;
        }
        if defective {
            defective_seen += 1;
        }
        w.see(compose_identity_check(&g, &fields, &groups, &tol()).unwrap());
        t += 1;
    }
    assert_eq!(defective_seen, 1);
    vec![w.0]
}

fn c06_contraction() -> Vec<Measure> {
    let mut rng = sample::rng(106);
    let mut tr = Worst::new("trace-slot residual/‖C‖", 1e-8);
    let mut eq = Worst::new("equal-slot residual/‖C‖", 1e-8);
    let mut sw = Worst::new("commuting swap residual", 1e-8);
    for t in 0..10 {
        let k = range(&mut rng, 1, 3);
        let mats: Vec<Matrix> = (0..k)
            .map(|_| {
                let d = range(&mut rng, 1, 3);
                sample::real_matrix(&mut rng, d)
            })
            .collect();
        let f = sample::choose_field(&mut rng, k);
        let p = range(&mut rng, 0, k - 1);
        let r = contract_trace_theorem(&f, &mats, p, &tol()).unwrap();
        tr.see(r.residual / r.tensor.hs_norm().max(1.0));

        let k = range(&mut rng, 2, 3);
        let p = range(&mut rng, 0, k - 1);
        let q = (p + range(&mut rng, 1, k - 1)) % k;
        let shared = if t < 5 {
            let blocks = sample::jordan_blocks(&mut rng, 3, 3);
            sample::defective(&mut rng, &blocks)
        } else {
            sample::real_matrix(&mut rng, 3)
        };
        let mut mats: Vec<Matrix> = (0..k).map(|_| sample::real_matrix(&mut rng, 2)).collect();
        mats[p] = shared.clone();
        mats[q] = shared;
        let f = sample::choose_field(&mut rng, k);
        let r = contract_equal_slots_theorem(&f, &mats, p, q, &tol()).unwrap();
        let scale = r.tensor.hs_norm().max(1.0);
        eq.see(r.residual / scale);
        eq.see(r.order_residual / scale);

        let (m, other) = if t % 2 == 0 {
            let m = sample::real_matrix(&mut rng, 3);
            let p = &m * &m * c(0.5) - &m * c(0.3) + identity(3);
            (m, p)
        } else {
            // simultaneously diagonalized pair
            let v = identity(3) + sample::real_matrix(&mut rng, 3) * c(0.3);
            let (vi, _) = matrix::inverse(&v, 1e6).unwrap();
            let a = sample::separated_values(&mut rng, 3, 0.3);
            let b = sample::separated_values(&mut rng, 3, 0.3);
            (&v * matrix::diag(&a) * &vi, &v * matrix::diag(&b) * &vi)
        };
        let f = sample::choose_field(&mut rng, 2);
        sw.see(commuting_swap_check(&f, &[m, other], 0, 1, &tol()).unwrap());
    }
    vec![tr.0, eq.0, sw.0]
}

/// Richardson-extrapolated central `n`-th difference of `z ↦ f(M + zH)`.
fn richardson(f: &ScalarField, m: &Matrix, h: &Matrix, n: usize) -> Matrix {
    let binom = |n: usize, i: usize| -> f64 { (1..=i).map(|j| (n + 1 - j) as f64 / j as f64).product() };
    let stencil = |step: f64| -> Matrix {
        let mut acc = Matrix::zeros(m.nrows(), m.ncols());
        for i in 0..=n {
            let w = binom(n, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
            let z = (n as f64 / 2.0 - i as f64) * step;
            acc += f_otimes(f, &[m + h * c(z)], &tol()).unwrap().as_matrix() * c(w);
        }
        acc / c(step.powi(n as i32))
    };
    let a = stencil(0.02);
    let b = stencil(0.01);
    (b * c(4.0) - a) / c(3.0)
}

fn c07_derivatives() -> Vec<Measure> {
    let mut rng = sample::rng(107);
    let mut fr = Worst::new("Fréchet vs central difference (rel)", 1e-6);
    let mut cu = Worst::new("curve vs Richardson (rel)", 1e-4);
    let mut co = Worst::new("H = I closed form (rel)", 1e-8);
    let step = 1e-5;
    for text in ["x1^2", "exp(x1)", "x1*x2", "exp(x1+x2)", "exp(x1)*x2 - x2^3"] {
        let k = if text.contains("x2") { 2 } else { 1 };
        let f = field(text, k);
        for _ in 0..3 {
            let mats: Vec<Matrix> = (0..k)
                .map(|_| {
                    let d = range(&mut rng, 2, 3);
                    sample::real_matrix(&mut rng, d)
                })
                .collect();
            let p = range(&mut rng, 0, k - 1);
            let h = sample::real_matrix(&mut rng, mats[p].nrows());
            let d = frechet_derivative(&f, &mats, p, &h, &tol()).unwrap();
            let mut plus = mats.clone();
            plus[p] = &mats[p] + &h * c(step);
            let mut minus = mats.clone();
            minus[p] = &mats[p] - &h * c(step);
            let fd = f_otimes(&f, &plus, &tol())
                .unwrap()
                .add(&f_otimes(&f, &minus, &tol()).unwrap().scale(c(-1.0)))
                .unwrap()
                .scale(c(0.5 / step));
            fr.see(d.distance(&fd).unwrap() / d.hs_norm());
        }
    }
    for text in ["exp(x1)", "exp(x1)*x1", "x1^4 - x1"] {
        let f = field(text, 1);
        for n in 1..=3 {
            let m = sample::real_matrix(&mut rng, 3);
            let h = sample::real_matrix(&mut rng, 3);
            let d = nth_derivative_curve(&f, &m, &h, n, c(0.0), &tol()).unwrap();
            cu.see(rel_hs(&richardson(&f, &m, &h, n), &d));

            let z = 0.25;
            let d = nth_derivative_curve(&f, &m, &identity(3), n, c(z), &tol()).unwrap();
            let mut df = f.clone();
            for _ in 0..n {
                df = df.partial(0);
            }
            let want = f_otimes(&df, &[&m + identity(3) * c(z)], &tol()).unwrap().as_matrix();
            co.see(rel_hs(&d, &want));
        }
    }
    vec![fr.0, cu.0, co.0]
}

fn c08_cyclic() -> Vec<Measure> {
    let mut rng = sample::rng(108);
    let mut w = Worst::new("max cyclic residual (n = 3)", 1e-8);
    for text in ["exp(x1)", "exp(x1)*x1", "x1^5 - 2*x1^2", "exp(0.5*x1)*x1^2"] {
        let f = field(text, 1);
        for _ in 0..5 {
            let point = sample::separated_values(&mut rng, 3, 0.05);
            w.see(cyclic_identity_residual(&f, 3, &point).unwrap());
        }
        let confluent = [c(0.4), c(0.4), c(-0.3)];
        w.see(cyclic_identity_residual(&f, 3, &confluent).unwrap());
    }
    vec![w.0]
}

fn c09_eigen() -> Vec<Measure> {
    let mut rng = sample::rng(109);
    let mut lam = Worst::new("eigenvalue derivative vs fd", 1e-4);
    let mut proj = Worst::new("projector derivative vs fd", 1e-4);
    let mut sum = Worst::new("|Σ λ′ − Tr H|", 1e-10);
    let step = 1e-5;
    for _ in 0..10 {
        let (m, _) = sample::diagonalizable(&mut rng, 3);
        let h = sample::real_matrix(&mut rng, 3);
        let mut total = c(0.0);
        for k in 0..3 {
            let d = eigenvalue_derivative(&m, &h, k, 1, c(0.0), &tol()).unwrap();
            total += d;
            let fd = (eigenvalue_derivative(&m, &h, k, 0, c(step), &tol()).unwrap()
                - eigenvalue_derivative(&m, &h, k, 0, c(-step), &tol()).unwrap())
                / (2.0 * step);
            lam.see((fd - d).norm());
            let d = projector_derivative(&m, &h, k, 1, c(0.0), &tol()).unwrap();
            let fd = (projector_derivative(&m, &h, k, 0, c(step), &tol()).unwrap()
                - projector_derivative(&m, &h, k, 0, c(-step), &tol()).unwrap())
                / c(2.0 * step);
            proj.see(matrix::max_abs_diff(&fd, &d));
        }
        sum.see((total - matrix::trace(&h)).norm());
    }
    vec![lam.0, proj.0, sum.0]
}

fn injective(d: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for head in injective(d, k - 1) {
        for a in 0..d {
            if !head.contains(&a) {
                let mut t = head.clone();
                t.push(a);
                out.push(t);
            }
        }
    }
    out
}

fn c10_antisym() -> Vec<Measure> {
    let mut rng = sample::rng(110);
    let mut ds = Worst::new("distinct tuple sum vs enumeration (rel)", 1e-8);
    let mut det = Worst::new("det from traces vs LU (rel)", 1e-8);
    for d in 1..=4 {
        for k in 1..=d {
            for repeated in [true, false] {
                let (m, values) = if repeated {
                    // repeated eigenvalues, sometimes with nontrivial blocks
                    let blocks = sample::jordan_blocks(&mut rng, d, 2);
                    let values: Vec<Complex64> =
                        blocks.iter().flat_map(|&(z, s)| std::iter::repeat_n(z, s)).collect();
                    (sample::defective(&mut rng, &blocks), values)
                } else {
                    sample::diagonalizable(&mut rng, d)
                };
                let f = sample::choose_field(&mut rng, k);
                let got = distinct_tuple_sum(&f, &m, k, &tol()).unwrap();
                let want: Complex64 = injective(d, k)
                    .iter()
                    .map(|t| f.eval(&t.iter().map(|&i| values[i]).collect::<Vec<_>>()).unwrap())
                    .sum();
                ds.see((got - want).norm() / want.norm().max(1.0));
            }
        }
        for _ in 0..5 {
            let a = sample::complex_matrix(&mut rng, d);
            let lu = a.clone().lu().determinant();
            det.see((det_from_traces(&a).unwrap() - lu).norm() / lu.norm());
        }
    }
    vec![ds.0, det.0]
}

fn c11_lipschitz() -> Vec<Measure> {
    let mut rng = sample::rng(111);
    let mut w = Worst::new("max ‖f(M1) − f(M2)‖ − ‖M1 − M2‖", 1e-8);
    let f = field("abs(x1)", 1);
    for _ in 0..20 {
        let m1 = sample::real_symmetric(&mut rng, 4);
        let m2 = sample::real_symmetric(&mut rng, 4);
        let eval = |m: &Matrix| {
            let b = Eigenbasis::hermitian(m).unwrap();
            f_otimes_diagonalizable(&f, std::slice::from_ref(m), &[b]).unwrap().as_matrix()
        };
        w.see(matrix::hs_norm(&(eval(&m1) - eval(&m2))) - matrix::hs_norm(&(&m1 - &m2)));
    }
    vec![w.0]
}

fn c12_sylvester() -> Vec<Measure> {
    let mut rng = sample::rng(112);
    let mut w = Worst::new("max ‖AM + MB − I‖", 1e-8);
    let f = field("1/(x1+x2)", 2);
    for _ in 0..10 {
        let d = range(&mut rng, 2, 4);
        let a = identity(d) * c(2.0) + sample::real_matrix(&mut rng, d) * c(0.3);
        let b = identity(d) + sample::real_matrix(&mut rng, d) * c(0.3);
        let m = chain_contract(&f_otimes(&f, &[a.clone(), b.clone()], &tol()).unwrap()).unwrap();
        w.see(matrix::hs_norm(&(&a * &m + &m * &b - identity(d))));
    }
    vec![w.0]
}

fn c13_verify_all() -> Vec<Measure> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_multifunc"))
        .args(["verify", "--suite", "all", "--seed", "42"])
        .output()
        .expect("binary runs");
    let secs = start.elapsed().as_secs_f64();
    vec![
        Measure {
            what: "exit code",
            value: status.status.code().unwrap_or(-1) as f64,
            tol: 0.0,
        },
        Measure {
            what: "seconds",
            value: secs,
            tol: 60.0,
        },
    ]
}

fn main() {
    let criteria: [(&str, &str, fn() -> Vec<Measure>); 13] = [
        ("C01", "Jordan closed form", c01_jordan),
        ("C02", "diagonalizable path", c02_diagonalizable),
        ("C03", "annihilation", c03_annihilation),
        ("C04", "product identity", c04_product),
        ("C05", "composition identity", c05_compose),
        ("C06", "contractions", c06_contraction),
        ("C07", "derivatives", c07_derivatives),
        ("C08", "trace cyclic identity", c08_cyclic),
        ("C09", "eigen-perturbation", c09_eigen),
        ("C10", "antisymmetric sums and determinant", c10_antisym),
        ("C11", "Lipschitz", c11_lipschitz),
        ("C12", "Sylvester chain contraction", c12_sylvester),
        ("C13", "verify --suite all --seed 42", c13_verify_all),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(measures) => {
                let ok = measures.iter().all(Measure::ok);
                let detail: Vec<String> = measures
                    .iter()
                    .map(|m| format!("{} {:.3e} (tol {:.0e})", m.what, m.value, m.tol))
                    .collect();
                println!("{id} {} {name}: {} [{secs:.2}s]", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
                if !ok {
                    failed += 1;
                }
            }
            Err(_) => {
                println!("{id} FAIL {name}: panicked [{secs:.2}s]");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
