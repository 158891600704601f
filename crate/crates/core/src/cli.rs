//! Command-line front end. Data goes to the output stream, diagnostics to the
//! error stream. Exit codes: 0 success, 1 input error, 2 numerical failure,
//! 3 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use crate::algebraic_ops::{commuting_swap_check, contract_equal_slots_theorem, contract_trace_theorem};
use crate::antisym::{det_from_traces, distinct_tuple_sum, wedge_restrict};
use crate::calculus::{eigenvalue_derivative, frechet_derivative, nth_derivative_curve, projector_derivative, trace_derivative};
use crate::error::{Error, Result};
use crate::funcalc::{f_otimes, slot_spectra, Tolerances};
use crate::matrix::{self, Matrix};
use crate::scalarfield::ScalarField;
use crate::tensor::OperatorTensor;
use crate::verify::{self, Suite, SUITE_NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "multifunc", version, about = "Functions of several variables applied to tuples of matrices")]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct TolArgs {
    /// Eigenvalues closer than this times ‖M‖_HS are merged.
    #[arg(long, global = true, default_value_t = 1e-8)]
    cluster_rel: f64,
    /// Relative threshold for numerical rank.
    #[arg(long, global = true, default_value_t = crate::spectral::DEFAULT_RANK_TOL)]
    rank_tol: f64,
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Scalar field in x1, x2, … (e.g. "exp(x1)*x2").
    #[arg(long)]
    func: String,
    /// Matrix JSON file; repeat once per variable.
    #[arg(long = "mat", required = true)]
    mats: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the result to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the matrix view instead of the tensor.
    #[arg(long)]
    as_matrix: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate f⊗(M1, …, Mk).
    Eval {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Directional derivative of f⊗ in one slot.
    Derivative {
        #[command(flatten)]
        field: FieldArgs,
        /// Slot to differentiate (1-based).
        #[arg(long)]
        slot: usize,
        /// Direction matrix JSON file.
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// n-th derivative of z ↦ f(M + zH).
    Curve {
        #[arg(long)]
        func: String,
        #[arg(long)]
        mat: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Point z, a complex constant such as "0.5" or "0.1+2*i".
        #[arg(long, default_value = "0")]
        at: String,
        /// Print the derivative of the trace instead of the matrix.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Contract f⊗ and compare with the reduced field.
    Contract {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, value_enum)]
        theorem: Theorem,
        /// Slot (1-based).
        #[arg(long)]
        slot: usize,
        /// Second slot (1-based) for `equal` and `swap`.
        #[arg(long)]
        slot2: Option<usize>,
        /// Write the contracted tensor here and print only the field and residual.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Restriction of f⊗(M, …, M) to the k-th exterior power.
    Wedge {
        #[arg(long)]
        func: String,
        #[arg(long)]
        mat: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum of f over distinct eigenvalue tuples.
    DistinctSum {
        #[arg(long)]
        func: String,
        #[arg(long)]
        mat: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Determinant from the traces of powers.
    DetTraces {
        #[arg(long)]
        mat: PathBuf,
    },
    /// Derivative of an eigenprojector (or eigenvalue) along M + tH.
    Projderiv {
        #[arg(long)]
        mat: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        /// Eigenvalue index (1-based) in the sorted spectrum.
        #[arg(long)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, default_value = "0")]
        at: String,
        /// Differentiate the eigenvalue instead of the projector.
        #[arg(long)]
        eigenvalue: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomised oracle suites.
    Verify {
        #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(SUITE_NAMES))]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Trials per suite (each suite's default when omitted).
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Theorem {
    Trace,
    Equal,
    Swap,
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let tol = Tolerances {
        cluster_rel: cli.tol.cluster_rel,
        rank_tol: cli.tol.rank_tol,
    };
    match dispatch(cli.command, &tol, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn dispatch(command: Command, tol: &Tolerances, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Eval { field, output } => {
            let (f, mats) = load_field(&field)?;
            report_spectra(&mats, tol, err)?;
            let t = f_otimes(&f, &mats, tol)?;
            emit_tensor(&t, &output, out)?;
        }
        Command::Derivative {
            field,
            slot,
            dir,
            output,
        } => {
            let (f, mats) = load_field(&field)?;
            let p = slot_index(slot, mats.len())?;
            let h = matrix::read_matrix(&dir)?;
            let t = frechet_derivative(&f, &mats, p, &h, tol)?;
            emit_tensor(&t, &output, out)?;
        }
        Command::Curve {
            func,
            mat,
            dir,
            order,
            at,
            trace,
            out: path,
        } => {
            let f = ScalarField::parse_with_arity(&func, 1)?;
            let m = matrix::read_matrix(&mat)?;
            let h = matrix::read_matrix(&dir)?;
            let z = parse_complex(&at)?;
            if trace {
                let v = trace_derivative(&f, &m, &h, order, z, tol)?;
                emit_text(&scalar_json(v), path.as_deref(), out)?;
            } else {
                let d = nth_derivative_curve(&f, &m, &h, order, z, tol)?;
                emit_text(&matrix::matrix_to_json(&d)?, path.as_deref(), out)?;
            }
        }
        Command::Contract {
            field,
            theorem,
            slot,
            slot2,
            out: path,
        } => {
            let (f, mats) = load_field(&field)?;
            let p = slot_index(slot, mats.len())?;
            let second = || -> Result<usize> {
                let q = slot2.ok_or_else(|| Error::InvalidArgument("this theorem needs --slot2".into()))?;
                slot_index(q, mats.len())
            };
            let value = match theorem {
                Theorem::Trace | Theorem::Equal => {
                    let check = if theorem == Theorem::Trace {
                        contract_trace_theorem(&f, &mats, p, tol)?
                    } else {
                        contract_equal_slots_theorem(&f, &mats, p, second()?, tol)?
                    };
                    let mut value = json!({
                        "field": check.field.to_string(),
                        "residual": check.residual,
                    });
                    if theorem == Theorem::Equal {
                        value["order_residual"] = json!(check.order_residual);
                    }
                    match &path {
                        Some(path) => write_file(path, &check.tensor.to_json()?)?,
                        None => value["tensor"] = to_value(&check.tensor.to_json()?)?,
                    }
                    value
                }
                Theorem::Swap => json!({ "residual": commuting_swap_check(&f, &mats, p, second()?, tol)? }),
            };
            writeln_out(out, &value.to_string())?;
        }
        Command::Wedge { func, mat, k, out: path } => {
            let f = ScalarField::parse_with_arity(&func, k)?;
            let m = matrix::read_matrix(&mat)?;
            let w = wedge_restrict(&f, &m, k, tol)?;
            emit_text(&matrix::matrix_to_json(&w)?, path.as_deref(), out)?;
        }
        Command::DistinctSum { func, mat, k } => {
            let f = ScalarField::parse_with_arity(&func, k)?;
            let m = matrix::read_matrix(&mat)?;
            writeln_out(out, &scalar_json(distinct_tuple_sum(&f, &m, k, tol)?))?;
        }
        Command::DetTraces { mat } => {
            let m = matrix::read_matrix(&mat)?;
            writeln_out(out, &scalar_json(det_from_traces(&m)?))?;
        }
        Command::Projderiv {
            mat,
            dir,
            index,
            order,
            at,
            eigenvalue,
            out: path,
        } => {
            let m = matrix::read_matrix(&mat)?;
            let h = matrix::read_matrix(&dir)?;
            let k = slot_index(index, m.nrows())?;
            let z = parse_complex(&at)?;
            if eigenvalue {
                let v = eigenvalue_derivative(&m, &h, k, order, z, tol)?;
                emit_text(&scalar_json(v), path.as_deref(), out)?;
            } else {
                let d = projector_derivative(&m, &h, k, order, z, tol)?;
                emit_text(&matrix::matrix_to_json(&d)?, path.as_deref(), out)?;
            }
        }
        Command::Verify { suite, seed, trials } => {
            let suites = Suite::parse_selection(&suite)?;
            let mut ok = true;
            for s in suites {
                let start = Instant::now();
                let report = verify::run_suite(s, seed, trials, tol);
                writeln_out(out, report.render().trim_end())?;
                let _ = writeln!(err, "{s}: {:.2}s", start.elapsed().as_secs_f64());
                ok &= report.passed();
            }
            writeln_out(out, if ok { "verify: PASS" } else { "verify: FAIL" })?;
            return Ok(if ok { EXIT_OK } else { EXIT_VERIFY });
        }
    }
    Ok(EXIT_OK)
}

fn load_field(args: &FieldArgs) -> Result<(ScalarField, Vec<Matrix>)> {
    let f = ScalarField::parse_with_arity(&args.func, args.mats.len())?;
    let mats = args.mats.iter().map(matrix::read_matrix).collect::<Result<Vec<_>>>()?;
    Ok((f, mats))
}

fn slot_index(one_based: usize, count: usize) -> Result<usize> {
    if one_based == 0 || one_based > count {
        return Err(Error::InvalidArgument(format!(
            "index {one_based} is out of range 1..={count}"
        )));
    }
    Ok(one_based - 1)
}

/// A constant expression such as `0.5`, `-1` or `0.1+2*i`.
fn parse_complex(text: &str) -> Result<Complex64> {
    let f = ScalarField::parse_with_arity(text, 0)?;
    let z = f.eval(&[])?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidArgument(format!("`{text}` is not a finite number")));
    }
    Ok(z)
}

fn scalar_json(z: Complex64) -> String {
    json!([z.re, z.im]).to_string()
}

fn to_value(text: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn report_spectra(mats: &[Matrix], tol: &Tolerances, err: &mut dyn Write) -> Result<()> {
    for (l, s) in slot_spectra(mats, tol)?.iter().enumerate() {
        let parts: Vec<String> = s
            .nodes()
            .iter()
            .map(|(z, r)| format!("{}^{r}", crate::error::fmt_complex(*z)))
            .collect();
        let _ = writeln!(err, "slot {}: dim {}, spectrum {}", l + 1, s.dim(), parts.join(" "));
    }
    Ok(())
}

fn emit_tensor(t: &OperatorTensor, output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    let text = if output.as_matrix {
        matrix::matrix_to_json(&t.as_matrix())?
    } else {
        t.to_json()?
    };
    emit_text(&text, output.out.as_deref(), out)
}

fn emit_text(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(path) => write_file(path, text),
        None => writeln_out(out, text),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, format!("{text}\n")).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn writeln_out(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}
