//! Command-line front end. Rationals cross the boundary as `m/q` strings.
//!
//! Exit codes: 0 success, 1 a mathematical violation was found, 2 usage or
//! input error, 3 the regularized error function is unbounded.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::bounds::BoundEngine;
use crate::checker::{
    gap_profile, reduced_fractions, verify_lambda_bound, verify_midconvex, write_certificates_csv,
    write_gap_profile_csv, TestFunction,
};
use crate::dyadic::{dz, dz_iterate, orbit_of};
use crate::errfun::{eval_phi, ErrorFunction};
use crate::error::{Error, Result};
use crate::number::Number;
use crate::numtheory::{euler_sharpened_check, half_totient, mu_orbit};
use crate::rational::Rational;
use crate::takagi::{
    closed_form, eval_closed, fixed_point_solve, functional_equation_residual, orbit_sum,
    PsiFunction,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNBOUNDED: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "midconvex",
    version,
    about = "Exact bounds for approximately midconvex functions"
)]
pub struct Cli {
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dyadic orbit of λ, or the orbit of m under the halving-doubling map mod n.
    Orbit(OrbitArgs),
    /// (weight, scale) pairs of the exact finite Takagi sum at λ.
    ClosedForm {
        #[arg(long, allow_hyphen_values = true)]
        lambda: Rational,
    },
    /// Every upper estimate for the extended error at (λ, u).
    Bound {
        #[arg(long, allow_hyphen_values = true)]
        lambda: Rational,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_number)]
        u: Number,
        /// Error function: pow:c,p | quad:c | zero | table:path.csv
        #[arg(long)]
        phi: String,
    },
    /// Checks Σ weight·scale² = λ(1-λ) for all reduced λ up to a denominator.
    Identity(IdentityArgs),
    /// Iterates the Takagi functional equation on a dyadic grid.
    FixedPoint {
        /// ψ as an error-function spec, e.g. pow:1,2 or zero.
        #[arg(long)]
        psi: String,
        /// Grid of 2^GRID_EXP + 1 points on [0, 1]
        #[arg(long, default_value_t = 10)]
        grid_exp: u32,
        /// Number of applications of the operator
        #[arg(long, default_value_t = 40)]
        iters: u32,
    },
    /// Verifies a test function against φ on a grid and writes violations.
    Check(CheckArgs),
    /// Distance from x (or 2^k x) to the nearest integer.
    Dz {
        #[arg(long, allow_hyphen_values = true)]
        x: Rational,
        #[arg(long, default_value_t = 0)]
        k: u64,
    },
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[arg(long, requires = "m", conflicts_with = "lambda")]
    pub n: Option<u64>,
    #[arg(long, requires = "n")]
    pub m: Option<u64>,
    #[arg(long, required_unless_present = "n")]
    pub lambda: Option<Rational>,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long, default_value_t = 200)]
    pub denominator_max: u64,
    /// Extra random fractions checked against the minimal-period summation.
    #[arg(long, default_value_t = 0)]
    pub samples: u64,
    /// Denominator bound for the random fractions.
    #[arg(long, default_value_t = 10_000)]
    pub sample_denominator_max: u64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Test function: quad:a,b,c | negquad:a | poly:c0,c1,... | abs | table:path.csv
    #[arg(long = "f")]
    pub function: String,
    /// Error function: pow:c,p | quad:c | zero | table:path.csv
    #[arg(long)]
    pub phi: String,
    /// Domain as lo,hi.
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub domain: String,
    /// Grid points for the midpoint check.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Check the λ-bound for every reduced λ in (0,1) with this denominator bound.
    #[arg(long, default_value_t = 0)]
    pub lambda_den_max: u64,
    /// Grid points for the λ-bound check (defaults to min(grid, 17)).
    #[arg(long)]
    pub lambda_grid: Option<usize>,
    /// Emit the gap profile at x,y instead of violation certificates.
    #[arg(long, allow_hyphen_values = true)]
    pub profile: Option<String>,
}

/// Rational when the text parses as one, binary64 otherwise.
pub fn parse_number(s: &str) -> std::result::Result<Number, String> {
    if let Ok(r) = s.parse::<Rational>() {
        return Ok(Number::Exact(r));
    }
    match s.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Number::Float(x)),
        _ => Err(format!("'{s}' is not a number")),
    }
}

fn parse_pair(s: &str) -> Result<(Rational, Rational)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::parse(s, "expected two comma-separated values"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unbounded(_) => EXIT_UNBOUNDED,
        Error::Internal(_) => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::from(e)
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    writeln!(out, "{text}").map_err(io)
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Orbit(args) => cmd_orbit(args, cli.output.unwrap_or(OutputFormat::Text), out),
        Command::ClosedForm { lambda } => {
            cmd_closed_form(lambda, cli.output.unwrap_or(OutputFormat::Json), out)
        }
        Command::Bound { lambda, u, phi } => cmd_bound(
            lambda,
            u,
            phi,
            cli.output.unwrap_or(OutputFormat::Json),
            out,
            err,
        ),
        Command::Identity(args) => cmd_identity(
            args,
            cli.seed,
            cli.output.unwrap_or(OutputFormat::Text),
            out,
        ),
        Command::FixedPoint {
            psi,
            grid_exp,
            iters,
        } => cmd_fixed_point(
            psi,
            *grid_exp,
            *iters,
            cli.output.unwrap_or(OutputFormat::Csv),
            out,
        ),
        Command::Check(args) => cmd_check(args, cli.output.unwrap_or(OutputFormat::Csv), out, err),
        Command::Dz { x, k } => {
            let d = if *k == 0 { dz(x) } else { dz_iterate(x, *k) };
            match cli.output.unwrap_or(OutputFormat::Text) {
                OutputFormat::Json => write_json(out, &json!({ "x": x, "k": k, "dz": d }))?,
                _ => writeln!(out, "{d}").map_err(io)?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_orbit(args: &OrbitArgs, format: OutputFormat, out: &mut dyn Write) -> Result<i32> {
    if let (Some(n), Some(m)) = (args.n, args.m) {
        let orbit = mu_orbit(n, m)?;
        let ell = half_totient(n)?;
        let euler = euler_sharpened_check(n, 2)?;
        // d_Z(2^k m/n) = mu_n^k(m)/n over one full ℓ-block
        let x = Rational::new(m, n)?;
        let mut d = dz(&x);
        let mut consistent = true;
        for k in 0..ell {
            let state = orbit.states[(k % orbit.period) as usize];
            consistent &= d == Rational::new(state, n)?;
            d = dz(&(&d * &Rational::integer(2)));
        }
        let status = if consistent { "pass" } else { "FAIL" };
        match format {
            OutputFormat::Json => write_json(
                out,
                &json!({
                    "n": n, "m": m, "ell": ell, "states": orbit.states,
                    "period": orbit.period, "euler": format!("{euler:?}"), "cross_check": status,
                }),
            )?,
            OutputFormat::Csv => {
                writeln!(out, "k,state").map_err(io)?;
                for (k, s) in orbit.states.iter().enumerate() {
                    writeln!(out, "{k},{s}").map_err(io)?;
                }
            }
            OutputFormat::Text => writeln!(
                out,
                "states [{}], period {}, ℓ={ell}, cross-check {status}",
                join(&orbit.states),
                orbit.period
            )
            .map_err(io)?,
        }
        return Ok(if consistent { EXIT_OK } else { EXIT_VIOLATION });
    }

    let lambda = args
        .lambda
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("give --lambda or --n with --m".into()))?;
    // orbit_of already cross-checks the doubling path against the mu cycle
    let o = orbit_of(lambda)?;
    match format {
        OutputFormat::Json => write_json(
            out,
            &json!({
                "lambda": lambda, "j": o.j, "n": o.n, "ell": o.half_totient,
                "preperiod": o.preperiod, "cycle": o.cycle,
                "minimal_period": o.minimal_period, "cross_check": "pass",
            }),
        )?,
        OutputFormat::Csv => {
            writeln!(out, "k,value,part").map_err(io)?;
            for (k, v) in o.preperiod.iter().enumerate() {
                writeln!(out, "{k},{v},preperiod").map_err(io)?;
            }
            for (i, v) in o.cycle.iter().enumerate() {
                writeln!(out, "{},{v},cycle", o.preperiod.len() + i).map_err(io)?;
            }
        }
        OutputFormat::Text => {
            if !o.preperiod.is_empty() {
                write!(out, "preperiod [{}], ", join(&o.preperiod)).map_err(io)?;
            }
            writeln!(
                out,
                "cycle [{}], period {}, ℓ={}, cross-check pass",
                join(&o.cycle),
                o.minimal_period,
                o.half_totient
            )
            .map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_closed_form(lambda: &Rational, format: OutputFormat, out: &mut dyn Write) -> Result<i32> {
    let form = closed_form(lambda)?;
    let pairs = form.as_string_pairs();
    match format {
        OutputFormat::Json => {
            let text = serde_json::to_string(&pairs).map_err(|e| Error::Internal(e.to_string()))?;
            writeln!(out, "{text}").map_err(io)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "weight,scale").map_err(io)?;
            for [w, s] in &pairs {
                writeln!(out, "{w},{s}").map_err(io)?;
            }
        }
        OutputFormat::Text => {
            for [w, s] in &pairs {
                writeln!(out, "{w} * psi({s})").map_err(io)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_bound(
    lambda: &Rational,
    u: &Number,
    phi: &str,
    format: OutputFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let phi = ErrorFunction::parse(phi)?;
    let report = BoundEngine::new(lambda, &phi)?.report(u)?;
    match format {
        OutputFormat::Json => write_json(out, &report)?,
        OutputFormat::Csv => {
            writeln!(out, "rule,value,certified,best").map_err(io)?;
            for (i, e) in report.estimates.iter().enumerate() {
                let best = report.best == Some(i);
                writeln!(
                    out,
                    "{},{},{},{best}",
                    e.rule, e.upper_estimate, e.certified
                )
                .map_err(io)?;
            }
        }
        OutputFormat::Text => {
            writeln!(
                out,
                "λ = {}, u = {}, φ = {}",
                report.lambda, report.u, report.phi
            )
            .map_err(io)?;
            for (i, e) in report.estimates.iter().enumerate() {
                let mark = if report.best == Some(i) {
                    " (best)"
                } else {
                    ""
                };
                let cert = if e.certified { "" } else { " [uncertified]" };
                writeln!(
                    out,
                    "  {:<18} {}{cert}{mark}",
                    e.rule.name(),
                    e.upper_estimate
                )
                .map_err(io)?;
            }
        }
    }
    if let Some(reason) = &report.unbounded {
        writeln!(err, "φ* is unbounded: {reason}").map_err(io)?;
        return Ok(EXIT_UNBOUNDED);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct IdentityFailure {
    lambda: Rational,
    value: Rational,
    expected: Rational,
}

fn cmd_identity(
    args: &IdentityArgs,
    seed: u64,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<i32> {
    if args.denominator_max < 2 {
        return Err(Error::InvalidArgument(
            "--denominator-max must be >= 2".into(),
        ));
    }
    let square = PsiFunction::monomial(2);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (p, q) in reduced_fractions(args.denominator_max) {
        if p == 0 || p == q {
            continue;
        }
        let lambda = Rational::new(p, q)?;
        let value = eval_closed(&closed_form(&lambda)?, &square)?;
        let expected = &lambda * &(Rational::one() - &lambda);
        let value = value
            .as_exact()
            .cloned()
            .ok_or_else(|| Error::Internal("inexact sum".into()))?;
        if value != expected {
            failures.push(IdentityFailure {
                lambda: lambda.clone(),
                value: value.clone(),
                expected: expected.clone(),
            });
        }
        rows.push((lambda, value, expected));
    }

    // random fractions against the minimal-period orbit summation
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample_failures = Vec::new();
    let psis = [PsiFunction::monomial(1), PsiFunction::monomial(2)];
    for _ in 0..args.samples {
        let q = rng.gen_range(2..=args.sample_denominator_max.max(2));
        let p = rng.gen_range(1..q);
        let lambda = Rational::new(p, q)?;
        let form = closed_form(&lambda)?;
        let orbit = orbit_of(&lambda)?;
        for psi in &psis {
            let a = eval_closed(&form, psi)?;
            let b = orbit_sum(&orbit, psi)?;
            if a != b {
                sample_failures.push(
                    json!({ "lambda": lambda, "psi": psi.description, "closed": a, "orbit": b }),
                );
            }
        }
    }

    let total = rows.len();
    let ok = failures.is_empty() && sample_failures.is_empty();
    match format {
        OutputFormat::Json => write_json(
            out,
            &json!({
                "denominator_max": args.denominator_max,
                "checked": total,
                "failures": failures,
                "samples": args.samples,
                "seed": seed,
                "sample_failures": sample_failures,
                "pass": ok,
            }),
        )?,
        OutputFormat::Csv => {
            writeln!(out, "lambda,value,expected,pass").map_err(io)?;
            for (l, v, e) in &rows {
                writeln!(out, "{l},{v},{e},{}", v == e).map_err(io)?;
            }
        }
        OutputFormat::Text => {
            for f in &failures {
                writeln!(out, "FAIL λ = {}: {} != {}", f.lambda, f.value, f.expected)
                    .map_err(io)?;
            }
            for f in &sample_failures {
                writeln!(out, "FAIL sample {f}").map_err(io)?;
            }
            if failures.is_empty() {
                writeln!(out, "all {total} reduced fractions pass").map_err(io)?;
            } else {
                writeln!(out, "{} of {total} reduced fractions fail", failures.len())
                    .map_err(io)?;
            }
            if args.samples > 0 && sample_failures.is_empty() {
                writeln!(
                    out,
                    "all {} random samples (seed {seed}) match the orbit summation",
                    args.samples
                )
                .map_err(io)?;
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn psi_from_spec(spec: &str) -> Result<PsiFunction> {
    let phi = ErrorFunction::parse(spec)?;
    let (exact, float) = (phi.clone(), phi);
    Ok(PsiFunction::new(
        spec,
        move |t| eval_phi(&exact, &Number::Exact(t.clone())),
        move |t| Ok(eval_phi(&float, &Number::Float(t))?.to_f64()),
    ))
}

fn cmd_fixed_point(
    spec: &str,
    grid_exp: u32,
    iters: u32,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<i32> {
    let psi = psi_from_spec(spec)?;
    let grid = fixed_point_solve(&psi, grid_exp, iters)?;
    let residual = functional_equation_residual(&grid, &psi)?;
    let error_bound = grid.error_bound.unwrap_or(f64::NAN);
    let lambda = |i: usize| Rational::new(i as u64, grid.size() as u64).map(|r| r.to_string());
    match format {
        OutputFormat::Json => {
            let values = (0..grid.values.len())
                .map(|i| Ok(json!([lambda(i)?, grid.values[i]])))
                .collect::<Result<Vec<_>>>()?;
            write_json(
                out,
                &json!({
                    "psi": spec, "grid_exponent": grid_exp, "iterations": iters,
                    "residual": residual, "error_bound": error_bound, "values": values,
                }),
            )?;
        }
        _ => {
            writeln!(out, "lambda,value").map_err(io)?;
            for (i, v) in grid.values.iter().enumerate() {
                writeln!(out, "{},{v}", lambda(i)?).map_err(io)?;
            }
            writeln!(out, "# residual,{residual:e}").map_err(io)?;
            writeln!(out, "# error_bound,{error_bound:e}").map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_check(
    args: &CheckArgs,
    format: OutputFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let (lo, hi) = parse_pair(&args.domain)?;
    let f = TestFunction::parse(&args.function, lo, hi)?;
    let phi = ErrorFunction::parse(&args.phi)?;

    if let Some(profile) = &args.profile {
        let (x, y) = parse_pair(profile)?;
        let den_max = if args.lambda_den_max == 0 {
            12
        } else {
            args.lambda_den_max
        };
        let rows = gap_profile(&f, &phi, &x, &y, den_max)?;
        let failing = rows.iter().filter(|r| !r.holds()).count();
        match format {
            OutputFormat::Json => write_json(out, &rows)?,
            _ => write_gap_profile_csv(&mut *out, &rows)?,
        }
        writeln!(
            err,
            "gap profile: {} rows, {failing} with gap above bound",
            rows.len()
        )
        .map_err(io)?;
        return Ok(if failing == 0 {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        });
    }

    let mut certs = verify_midconvex(&f, &phi, args.grid)?;
    let midpoint_count = certs.len();
    let lambda_grid = args.lambda_grid.unwrap_or(args.grid.min(17));
    let mut lambdas = 0;
    for (p, q) in reduced_fractions(args.lambda_den_max) {
        if p == 0 || p == q {
            continue;
        }
        lambdas += 1;
        certs.extend(verify_lambda_bound(
            &f,
            &phi,
            &Rational::new(p, q)?,
            lambda_grid,
        )?);
    }
    match format {
        OutputFormat::Json => write_json(out, &certs)?,
        _ => write_certificates_csv(&mut *out, &certs)?,
    }
    writeln!(
        err,
        "{} midpoint violations on a {}-point grid; {} λ-bound violations over {lambdas} values of λ on a {lambda_grid}-point grid",
        midpoint_count,
        args.grid,
        certs.len() - midpoint_count
    )
    .map_err(io)?;
    if certs.is_empty() {
        writeln!(err, "certified on grid").map_err(io)?;
    }
    Ok(if certs.is_empty() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}
