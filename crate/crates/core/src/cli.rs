//! Command line interface of the `vchoquet` binary.
//!
//! Exit codes: `0` success, `1` suite violations, `2` spec or usage error,
//! `3` quadrature tolerance not reached.

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::capacities::{parse_capacity_spec, Capacity, DistortionFunction};
use crate::choquet::{choquet_integral, QuadratureConfig};
use crate::error::{Error, Result};
use crate::functions::{parse_function_spec, Function, PiecewiseLinear};
use crate::intervals::IntervalUnion;
use crate::spaces::{lp_norm_with, LpConfig};
use crate::verify::{run_suite, span_residual, OrbitOperator};
use crate::volterra::{
    apply_volterra_detailed, classical_opnorm, iterate_volterra, orbit_closed_form, DEFAULT_GRID,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Significant digits of printed floats.
pub const DIGITS: usize = 9;

#[derive(Debug, Parser)]
#[command(
    name = "vchoquet",
    version,
    about = "Choquet integrals and the Volterra-Choquet operator on [0, 1]"
)]
struct Cli {
    /// Quadrature tolerance; overrides CHOQUET_TOL.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choquet integral of f over [0, 1] or a sub-interval.
    Integrate {
        /// Function spec: JSON, a file holding JSON, or preset:NAME.
        #[arg(long)]
        f: String,
        /// Capacity spec: JSON, a file, or a name such as exp-saturation or power:0.5.
        #[arg(long)]
        capacity: String,
        /// Integration interval `a,b`.
        #[arg(long, value_parser = parse_interval)]
        on: Option<(f64, f64)>,
    },
    /// V f on a uniform grid, as CSV `x,Vf`.
    Volterra {
        #[arg(long)]
        f: String,
        #[arg(long)]
        capacity: String,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Iterates V^k f0 for k = 0..=n, as CSV `x,v0,...,vn`; with `1 - e^{-t}`
    /// and `f0 = 1` also `closed0,...,closedn`.
    Orbit {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        capacity: String,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Starting function, `preset:one` by default.
        #[arg(long)]
        f: Option<String>,
    },
    /// Choquet L_p norm of f over [0, 1].
    Norm {
        #[arg(long)]
        f: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        capacity: String,
    },
    /// Operator norm of the classical Volterra operator on L_2.
    Opnorm {
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value = "identity")]
        capacity: String,
    },
    /// Runs a property suite and prints its report.
    Check {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Report `runtime_ms` as 0 so reports are byte-identical across runs.
        #[arg(long)]
        no_runtime: bool,
    },
    /// Residual of targets against the span of the orbit of f0 = 1, as CSV
    /// `n,target,residual,rms`.
    Span {
        /// JSON array of function specs, inline or in a file.
        #[arg(long)]
        targets: String,
        #[arg(long, default_value_t = 12)]
        n_max: usize,
        #[arg(long, default_value = "exp-saturation")]
        capacity: String,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = OperatorArg::V)]
        operator: OperatorArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OperatorArg {
    /// The Volterra-Choquet operator V.
    V,
    /// I + V.
    IPlusV,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((a, b))
}

/// Rounds to [`DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", DIGITS - 1, x).parse().unwrap_or(x)
}

/// [`DIGITS`] significant digits, in exponent form outside `[1e-4, 1e15)`.
pub fn fmt_float(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && r.is_finite() && !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().map_or(Value::Number(n), |x| json!(round_sig(x)))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Inline text, or the contents of a file when the argument names one.
fn read_spec(arg: &str) -> Result<String> {
    let t = arg.trim();
    if t.starts_with('{') || t.starts_with('[') || t.starts_with("preset:") {
        return Ok(t.to_string());
    }
    let path = Path::new(t);
    if path.is_file() {
        return std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {t}: {e}")));
    }
    Ok(t.to_string())
}

fn function_arg(arg: &str) -> Result<Function> {
    parse_function_spec(&read_spec(arg)?)
}

fn capacity_arg(arg: &str) -> Result<Capacity> {
    parse_capacity_spec(&read_spec(arg)?)
}

fn quadrature(tol: Option<f64>) -> Result<QuadratureConfig> {
    match tol {
        Some(t) => {
            let cfg = QuadratureConfig::with_tolerance(t);
            cfg.validate()?;
            Ok(cfg)
        }
        None => QuadratureConfig::from_env(),
    }
}

fn write_json(out: &mut dyn Write, v: Value) -> std::io::Result<()> {
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&round_json(v)).expect("JSON values serialize")
    )
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "vchoquet: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let cfg = quadrature(cli.tol)?;
    let io = |e: std::io::Error| Error::Usage(format!("cannot write output: {e}"));
    match cli.command {
        Command::Integrate { f, capacity, on } => {
            let f = function_arg(&f)?;
            let mu = capacity_arg(&capacity)?;
            let a = match on {
                Some((lo, hi)) => IntervalUnion::interval(lo, hi)?,
                None => IntervalUnion::full(),
            };
            let r = choquet_integral(&f, &a, &mu, &cfg)?;
            write_json(
                out,
                json!({"value": r.value, "error_estimate": r.error_estimate, "panels_used": r.panels_used}),
            )
            .map_err(io)?;
            Ok(if r.converged { EXIT_OK } else { EXIT_TOLERANCE })
        }
        Command::Volterra { f, capacity, grid } => {
            let f = function_arg(&f)?;
            let mu = capacity_arg(&capacity)?;
            let img = apply_volterra_detailed(&f, &mu, grid, &cfg)?;
            writeln!(out, "x,Vf").map_err(io)?;
            for (x, v) in img.function.nodes().iter().zip(img.function.values()) {
                writeln!(out, "{},{}", fmt_float(*x), fmt_float(*v)).map_err(io)?;
            }
            Ok(if img.converged {
                EXIT_OK
            } else {
                EXIT_TOLERANCE
            })
        }
        Command::Orbit {
            n,
            capacity,
            grid,
            f,
        } => {
            let mu = capacity_arg(&capacity)?;
            let f0 = match f {
                Some(s) => function_arg(&s)?,
                None => Function::Pwl(PiecewiseLinear::constant(1.0)),
            };
            let closed = matches!(mu.distortion(), Some(DistortionFunction::ExpSaturation))
                && f0.range() == (1.0, 1.0);
            let orbit = iterate_volterra(&f0, n, &mu, grid, &cfg)?;
            let mut header = vec!["x".to_string()];
            header.extend((0..=n).map(|k| format!("v{k}")));
            if closed {
                header.extend((0..=n).map(|k| format!("closed{k}")));
            }
            writeln!(out, "{}", header.join(",")).map_err(io)?;
            for (i, x) in orbit.iterates[0].nodes().iter().enumerate() {
                let mut row = vec![fmt_float(*x)];
                row.extend(orbit.iterates.iter().map(|it| fmt_float(it.values()[i])));
                if closed {
                    for k in 0..=n {
                        row.push(fmt_float(if k == 0 {
                            1.0
                        } else {
                            orbit_closed_form(k, *x)?
                        }));
                    }
                }
                writeln!(out, "{}", row.join(",")).map_err(io)?;
            }
            Ok(if orbit.converged {
                EXIT_OK
            } else {
                EXIT_TOLERANCE
            })
        }
        Command::Norm { f, p, capacity } => {
            let f = function_arg(&f)?;
            let mu = capacity_arg(&capacity)?;
            let n = lp_norm_with(&f, &LpConfig::new(p)?, &mu, &cfg)?;
            write_json(out, json!({"lp_norm": n})).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Opnorm {
            grid,
            iters,
            capacity,
        } => {
            let mu = capacity_arg(&capacity)?;
            let estimate = classical_opnorm(&mu, grid, iters)?;
            write_json(
                out,
                json!({"estimate": estimate, "reference": std::f64::consts::FRAC_2_PI}),
            )
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Check {
            suite,
            seed,
            samples,
            no_runtime,
        } => {
            let mut report = run_suite(&suite, seed, samples)?;
            if no_runtime {
                report.runtime_ms = 0;
            }
            let passed = report.passed();
            write_json(
                out,
                serde_json::to_value(&report).expect("reports serialize"),
            )
            .map_err(io)?;
            Ok(if passed { EXIT_OK } else { EXIT_VIOLATIONS })
        }
        Command::Span {
            targets,
            n_max,
            capacity,
            grid,
            operator,
        } => {
            let text = read_spec(&targets)?;
            let specs: Vec<Value> = serde_json::from_str(&text).map_err(|e| {
                Error::Spec(format!(
                    "targets must be a JSON array of function specs: {e}"
                ))
            })?;
            let targets = specs
                .iter()
                .map(|v| match v {
                    Value::String(s) => parse_function_spec(s),
                    other => parse_function_spec(&other.to_string()),
                })
                .collect::<Result<Vec<_>>>()?;
            let mu = capacity_arg(&capacity)?;
            let op = match operator {
                OperatorArg::V => OrbitOperator::Volterra,
                OperatorArg::IPlusV => OrbitOperator::IdentityPlusVolterra,
            };
            let rows = span_residual(&targets, n_max, &mu, grid, op)?;
            writeln!(out, "n,target,residual,rms").map_err(io)?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{}",
                    r.n,
                    r.target,
                    fmt_float(r.residual),
                    fmt_float(r.rms)
                )
                .map_err(io)?;
            }
            Ok(EXIT_OK)
        }
    }
}
