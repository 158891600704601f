use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use super::divided::{cluster_nodes, confluent_divided_difference};
use crate::error::EvalError;
use crate::CONFLUENCE_TOL;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ids handed out to the bound variable of a divided-difference node. They
/// live far above any realistic arity so substitution of free variables never
/// touches them.
static NEXT_BOUND: AtomicUsize = AtomicUsize::new(1 << 40);

pub(crate) fn fresh_bound() -> usize {
    NEXT_BOUND.fetch_add(1, Ordering::Relaxed)
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(Complex64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powi(Expr, i32),
    Exp(Expr),
    Log(Expr),
    /// Absolute value; only defined for real arguments.
    Abs(Expr),
    /// Sign of a nonzero real argument (derivative of `Abs`).
    Sign(Expr),
    DividedDifference(DividedDifference),
    SpectralIndicator(SpectralIndicator),
}

/// `body[nodes₀, …, nodesₙ]`: the divided difference of `body` taken in its
/// bound variable, all other variables of `body` read from the enclosing
/// point.
#[derive(Debug)]
pub struct DividedDifference {
    pub body: Expr,
    pub bound: usize,
    pub nodes: Vec<Expr>,
    derivatives: Arc<Mutex<Vec<Expr>>>,
}

impl PartialEq for DividedDifference {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && self.bound == other.bound && self.nodes == other.nodes
    }
}

impl DividedDifference {
    /// `∂^order body / ∂bound^order`, memoised per node family.
    fn body_derivative(&self, order: usize) -> Expr {
        let mut cache = self.derivatives.lock().expect("derivative cache poisoned");
        if cache.is_empty() {
            cache.push(self.body.clone());
        }
        while cache.len() <= order {
            let next = cache.last().unwrap().partial(self.bound);
            cache.push(next);
        }
        cache[order].clone()
    }
}

/// The symmetric function `u⁽λ⁾ₙ(args)`: the divided difference of the
/// indicator of an infinitesimal ball around `lambda`.
#[derive(Debug, PartialEq)]
pub struct SpectralIndicator {
    pub lambda: Complex64,
    pub args: Vec<Expr>,
}

pub(crate) struct Env<'a> {
    free: &'a [Complex64],
    bound: Vec<(usize, Complex64)>,
}

impl<'a> Env<'a> {
    pub(crate) fn new(free: &'a [Complex64]) -> Self {
        Env {
            free,
            bound: Vec::new(),
        }
    }

    fn lookup(&self, var: usize) -> Option<Complex64> {
        if var < self.free.len() {
            return Some(self.free[var]);
        }
        self.bound
            .iter()
            .rev()
            .find(|(id, _)| *id == var)
            .map(|(_, v)| *v)
    }
}

impl Expr {
    fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(z: Complex64) -> Expr {
        Expr::new(Node::Const(z))
    }

    pub fn real(x: f64) -> Expr {
        Expr::constant(Complex64::new(x, 0.0))
    }

    pub fn zero() -> Expr {
        Expr::constant(ZERO)
    }

    pub fn one() -> Expr {
        Expr::constant(ONE)
    }

    pub fn var(index: usize) -> Expr {
        Expr::new(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(z) => Some(*z),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(ZERO)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(ONE)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == ZERO => b,
            (_, Some(y)) if y == ZERO => a,
            _ => Expr::new(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (_, Some(y)) if y == ZERO => a,
            (Some(x), _) if x == ZERO => Expr::neg(b),
            _ => Expr::new(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), _) if x == ZERO => Expr::zero(),
            (_, Some(y)) if y == ZERO => Expr::zero(),
            (Some(x), _) if x == ONE => b,
            (_, Some(y)) if y == ONE => a,
            (Some(x), _) if x == -ONE => Expr::neg(b),
            (_, Some(y)) if y == -ONE => Expr::neg(a),
            _ => Expr::new(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != ZERO => Expr::constant(x / y),
            (Some(x), Some(y)) if x == ZERO && y != ZERO => Expr::zero(),
            (_, Some(y)) if y == ONE => a,
            _ => Expr::new(Node::Div(a, b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const(x) => Expr::constant(-x),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(a)),
        }
    }

    pub fn powi(a: Expr, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return a;
        }
        match a.as_const() {
            Some(x) if x != ZERO || n > 0 => Expr::constant(x.powi(n)),
            _ => Expr::new(Node::Powi(a, n)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(x) => Expr::constant(x.exp()),
            None => Expr::new(Node::Exp(a)),
        }
    }

    pub fn log(a: Expr) -> Expr {
        match a.as_const() {
            Some(x) if x != ZERO => Expr::constant(x.ln()),
            _ => Expr::new(Node::Log(a)),
        }
    }

    pub fn abs(a: Expr) -> Expr {
        Expr::new(Node::Abs(a))
    }

    pub fn sign(a: Expr) -> Expr {
        Expr::new(Node::Sign(a))
    }

    /// `min(a, b) = (a + b − |a − b|) / 2`, real arguments only.
    pub fn min(a: Expr, b: Expr) -> Expr {
        let diff = Expr::abs(Expr::sub(a.clone(), b.clone()));
        Expr::mul(Expr::real(0.5), Expr::sub(Expr::add(a, b), diff))
    }

    pub fn divided_difference(body: Expr, bound: usize, nodes: Vec<Expr>) -> Expr {
        Expr::new(Node::DividedDifference(DividedDifference {
            body,
            bound,
            nodes,
            derivatives: Arc::new(Mutex::new(Vec::new())),
        }))
    }

    fn divided_difference_sharing(dd: &DividedDifference, body: Expr, nodes: Vec<Expr>) -> Expr {
        let derivatives = if body == dd.body {
            Arc::clone(&dd.derivatives)
        } else {
            Arc::new(Mutex::new(Vec::new()))
        };
        Expr::new(Node::DividedDifference(DividedDifference {
            body,
            bound: dd.bound,
            nodes,
            derivatives,
        }))
    }

    pub fn spectral_indicator(lambda: Complex64, args: Vec<Expr>) -> Expr {
        Expr::new(Node::SpectralIndicator(SpectralIndicator { lambda, args }))
    }

    pub fn depends_on(&self, var: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(v) => *v == var,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
            Node::Neg(a)
            | Node::Powi(a, _)
            | Node::Exp(a)
            | Node::Log(a)
            | Node::Abs(a)
            | Node::Sign(a) => a.depends_on(var),
            Node::DividedDifference(dd) => {
                dd.nodes.iter().any(|n| n.depends_on(var))
                    || (var != dd.bound && dd.body.depends_on(var))
            }
            Node::SpectralIndicator(u) => u.args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Largest free-variable index referenced, ignoring bound variables.
    pub(crate) fn max_free_var(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        self.visit_free_vars(&mut Vec::new(), &mut |v| {
            best = Some(best.map_or(v, |b: usize| b.max(v)))
        });
        best
    }

    fn visit_free_vars(&self, bound: &mut Vec<usize>, f: &mut dyn FnMut(usize)) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(v) => {
                if !bound.contains(v) {
                    f(*v)
                }
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.visit_free_vars(bound, f);
                b.visit_free_vars(bound, f);
            }
            Node::Neg(a)
            | Node::Powi(a, _)
            | Node::Exp(a)
            | Node::Log(a)
            | Node::Abs(a)
            | Node::Sign(a) => a.visit_free_vars(bound, f),
            Node::DividedDifference(dd) => {
                for n in &dd.nodes {
                    n.visit_free_vars(bound, f);
                }
                bound.push(dd.bound);
                dd.body.visit_free_vars(bound, f);
                bound.pop();
            }
            Node::SpectralIndicator(u) => {
                for a in &u.args {
                    a.visit_free_vars(bound, f);
                }
            }
        }
    }

    /// Exact symbolic partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Expr {
        if !self.depends_on(var) {
            return Expr::zero();
        }
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(v) => {
                if *v == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => Expr::add(a.partial(var), b.partial(var)),
            Node::Sub(a, b) => Expr::sub(a.partial(var), b.partial(var)),
            Node::Neg(a) => Expr::neg(a.partial(var)),
            Node::Mul(a, b) => Expr::add(
                Expr::mul(a.partial(var), b.clone()),
                Expr::mul(a.clone(), b.partial(var)),
            ),
            Node::Div(a, b) => {
                let da = a.partial(var);
                let db = b.partial(var);
                if db.is_zero() {
                    Expr::div(da, b.clone())
                } else {
                    Expr::div(
                        Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                        Expr::powi(b.clone(), 2),
                    )
                }
            }
            Node::Powi(a, n) => Expr::mul(
                Expr::mul(Expr::real(*n as f64), Expr::powi(a.clone(), n - 1)),
                a.partial(var),
            ),
            Node::Exp(a) => Expr::mul(self.clone(), a.partial(var)),
            Node::Log(a) => Expr::div(a.partial(var), a.clone()),
            Node::Abs(a) => Expr::mul(Expr::sign(a.clone()), a.partial(var)),
            Node::Sign(_) => Expr::zero(),
            Node::DividedDifference(dd) => {
                // ∂/∂t_i f[t_0, …, t_n] = f[t_0, …, t_i, t_i, …, t_n]
                let mut acc = Expr::zero();
                for (i, node) in dd.nodes.iter().enumerate() {
                    let dn = node.partial(var);
                    if dn.is_zero() {
                        continue;
                    }
                    let mut nodes = dd.nodes.clone();
                    nodes.insert(i, node.clone());
                    let term = Expr::divided_difference_sharing(dd, dd.body.clone(), nodes);
                    acc = Expr::add(acc, Expr::mul(dn, term));
                }
                if var != dd.bound {
                    let db = dd.body.partial(var);
                    if !db.is_zero() {
                        let term = Expr::divided_difference_sharing(dd, db, dd.nodes.clone());
                        acc = Expr::add(acc, term);
                    }
                }
                acc
            }
            Node::SpectralIndicator(u) => {
                let mut acc = Expr::zero();
                for (i, arg) in u.args.iter().enumerate() {
                    let da = arg.partial(var);
                    if da.is_zero() {
                        continue;
                    }
                    let mut args = u.args.clone();
                    args.insert(i, arg.clone());
                    acc = Expr::add(acc, Expr::mul(da, Expr::spectral_indicator(u.lambda, args)));
                }
                acc
            }
        }
    }

    /// Replaces free variables: `map(v)` gives the replacement of `Var(v)`,
    /// `None` keeps it.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(v) => map(*v).unwrap_or_else(|| self.clone()),
            Node::Add(a, b) => Expr::add(a.substitute(map), b.substitute(map)),
            Node::Sub(a, b) => Expr::sub(a.substitute(map), b.substitute(map)),
            Node::Mul(a, b) => Expr::mul(a.substitute(map), b.substitute(map)),
            Node::Div(a, b) => Expr::div(a.substitute(map), b.substitute(map)),
            Node::Neg(a) => Expr::neg(a.substitute(map)),
            Node::Powi(a, n) => Expr::powi(a.substitute(map), *n),
            Node::Exp(a) => Expr::exp(a.substitute(map)),
            Node::Log(a) => Expr::log(a.substitute(map)),
            Node::Abs(a) => Expr::abs(a.substitute(map)),
            Node::Sign(a) => Expr::sign(a.substitute(map)),
            Node::DividedDifference(dd) => {
                let bound = dd.bound;
                let inner = |v: usize| if v == bound { None } else { map(v) };
                let body = dd.body.substitute(&inner);
                let nodes = dd.nodes.iter().map(|n| n.substitute(map)).collect();
                Expr::divided_difference_sharing(dd, body, nodes)
            }
            Node::SpectralIndicator(u) => Expr::spectral_indicator(
                u.lambda,
                u.args.iter().map(|a| a.substitute(map)).collect(),
            ),
        }
    }

    /// Rebuilds the tree through the folding constructors.
    pub fn simplify(&self) -> Expr {
        self.substitute(&|_| None)
    }

    pub(crate) fn eval_env(&self, env: &mut Env<'_>) -> Result<Complex64, EvalError> {
        let fail = |reason: &str, env: &Env<'_>| EvalError {
            node: truncate(self.to_string()),
            point: env.free.to_vec(),
            reason: reason.to_string(),
        };
        let value = match self.node() {
            Node::Const(z) => *z,
            Node::Var(v) => match env.lookup(*v) {
                Some(z) => z,
                None => return Err(fail(&format!("variable x{} is not set", v + 1), env)),
            },
            Node::Add(a, b) => a.eval_env(env)? + b.eval_env(env)?,
            Node::Sub(a, b) => a.eval_env(env)? - b.eval_env(env)?,
            Node::Mul(a, b) => a.eval_env(env)? * b.eval_env(env)?,
            Node::Div(a, b) => {
                let num = a.eval_env(env)?;
                let den = b.eval_env(env)?;
                if den == ZERO {
                    return Err(fail("division by zero", env));
                }
                num / den
            }
            Node::Neg(a) => -a.eval_env(env)?,
            Node::Powi(a, n) => {
                let base = a.eval_env(env)?;
                if *n < 0 && base == ZERO {
                    return Err(fail("negative power of zero", env));
                }
                base.powi(*n)
            }
            Node::Exp(a) => a.eval_env(env)?.exp(),
            Node::Log(a) => {
                let x = a.eval_env(env)?;
                if x == ZERO {
                    return Err(fail("logarithm of zero", env));
                }
                x.ln()
            }
            Node::Abs(a) => {
                let x = a.eval_env(env)?;
                Complex64::new(real_part(x).ok_or_else(|| fail("non-real argument", env))?.abs(), 0.0)
            }
            Node::Sign(a) => {
                let x = a.eval_env(env)?;
                let re = real_part(x).ok_or_else(|| fail("non-real argument", env))?;
                if re == 0.0 {
                    return Err(fail("sign is undefined at zero", env));
                }
                Complex64::new(re.signum(), 0.0)
            }
            Node::DividedDifference(dd) => {
                let mut points = Vec::with_capacity(dd.nodes.len());
                for n in &dd.nodes {
                    points.push(n.eval_env(env)?);
                }
                let groups = cluster_nodes(&points, CONFLUENCE_TOL);
                let mut factorial = vec![1.0f64];
                confluent_divided_difference(&groups, |z, order| {
                    while factorial.len() <= order {
                        let k = factorial.len();
                        factorial.push(factorial[k - 1] * k as f64);
                    }
                    let d = dd.body_derivative(order);
                    env.bound.push((dd.bound, z));
                    let value = d.eval_env(env);
                    env.bound.pop();
                    Ok(value? / factorial[order])
                })?
            }
            Node::SpectralIndicator(u) => {
                let mut points = Vec::with_capacity(u.args.len());
                for a in &u.args {
                    points.push(a.eval_env(env)?);
                }
                spectral_indicator_value(u.lambda, &points, CONFLUENCE_TOL)
                    .map_err(|reason| fail(&reason, env))?
            }
        };
        if value.re.is_finite() && value.im.is_finite() {
            Ok(value)
        } else {
            Err(fail("result is not finite", env))
        }
    }

    pub fn eval(&self, point: &[Complex64]) -> Result<Complex64, EvalError> {
        self.eval_env(&mut Env::new(point))
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Powi(..) => 4,
            Node::Const(z) if z.im != 0.0 || z.re < 0.0 => 3,
            _ => 5,
        }
    }
}

fn real_part(x: Complex64) -> Option<f64> {
    if x.im.abs() <= 1e-12 * x.re.abs().max(1.0) {
        Some(x.re)
    } else {
        None
    }
}

fn truncate(mut s: String) -> String {
    const MAX: usize = 120;
    if s.len() > MAX {
        let mut cut = MAX;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
        s.push('…');
    }
    s
}

/// `u⁽λ⁾ₙ(z₀, …, zₙ)` through the expanded sum: with `m` coordinates equal to
/// `λ` and the others `w_h`,
/// `(−1)^(m−1) Σ_{k₀+…=m−1} Π_h (λ − w_h)^−(1+k_h)`, and `0` when `m = 0`.
///
/// Coordinates within `tol` of `λ` count as `λ`; coordinates closer than
/// `100·tol` but farther than `tol` are ambiguous and rejected.
pub(crate) fn spectral_indicator_value(
    lambda: Complex64,
    points: &[Complex64],
    tol: f64,
) -> Result<Complex64, String> {
    let mut m = 0usize;
    let mut others = Vec::new();
    for &z in points {
        let d = (z - lambda).norm();
        if d <= tol {
            m += 1;
        } else if d <= 100.0 * tol {
            return Err(format!(
                "coordinate {z} is ambiguously close to λ = {lambda} (distance {d:e})"
            ));
        } else {
            others.push(lambda - z);
        }
    }
    if m == 0 {
        return Ok(ZERO);
    }
    let total = m - 1;
    if others.is_empty() {
        return Ok(if total == 0 { ONE } else { ZERO });
    }
    let inv: Vec<Complex64> = others.iter().map(|d| d.inv()).collect();
    // Σ over compositions of `total` into `others.len()` parts of Π inv_h^(1+k_h)
    // = Π inv_h · h_total(inv), the complete homogeneous symmetric polynomial.
    let mut complete = vec![ZERO; total + 1];
    complete[0] = ONE;
    for &x in &inv {
        for deg in 1..=total {
            complete[deg] = complete[deg] + x * complete[deg - 1];
        }
    }
    let prefactor: Complex64 = inv.iter().product();
    let sign = if total % 2 == 0 { 1.0 } else { -1.0 };
    Ok(prefactor * complete[total] * sign)
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn fmt_const(z: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match (z.re, z.im) {
        (re, im) if im == 0.0 && re >= 0.0 => write!(f, "{re:?}"),
        (re, im) if im == 0.0 => write!(f, "-{:?}", -re),
        (re, im) if re == 0.0 => {
            if im < 0.0 {
                write!(f, "-{:?}*i", -im)
            } else {
                write!(f, "{im:?}*i")
            }
        }
        (re, im) => {
            if im < 0.0 {
                write!(f, "({re:?}-{:?}*i)", -im)
            } else {
                write!(f, "({re:?}+{im:?}*i)")
            }
        }
    }
}

impl Expr {
    fn fmt_child(&self, child: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < min_prec {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

fn fmt_var(v: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v >= 1 << 40 {
        write!(f, "t{}", v - (1 << 40))
    } else {
        write!(f, "x{}", v + 1)
    }
}

/// Printed form is accepted back by the field parser for every node the text
/// grammar can express.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(z) => fmt_const(*z, f),
            Node::Var(v) => fmt_var(*v, f),
            Node::Add(a, b) => {
                self.fmt_child(a, 1, f)?;
                write!(f, " + ")?;
                self.fmt_child(b, 2, f)
            }
            Node::Sub(a, b) => {
                self.fmt_child(a, 1, f)?;
                write!(f, " - ")?;
                self.fmt_child(b, 2, f)
            }
            Node::Mul(a, b) => {
                self.fmt_child(a, 2, f)?;
                write!(f, "*")?;
                self.fmt_child(b, 3, f)
            }
            Node::Div(a, b) => {
                self.fmt_child(a, 2, f)?;
                write!(f, "/")?;
                self.fmt_child(b, 3, f)
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                self.fmt_child(a, 3, f)
            }
            Node::Powi(a, n) => {
                self.fmt_child(a, 5, f)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Abs(a) => write!(f, "abs({a})"),
            Node::Sign(a) => write!(f, "sign({a})"),
            Node::DividedDifference(dd) => {
                write!(f, "divdiff[")?;
                fmt_var(dd.bound, f)?;
                write!(f, " -> {}](", dd.body)?;
                for (i, n) in dd.nodes.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, ")")
            }
            Node::SpectralIndicator(u) => {
                write!(f, "u[")?;
                fmt_const(u.lambda, f)?;
                write!(f, "](")?;
                for (i, a) in u.args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
