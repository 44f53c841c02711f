//! Checks on concrete functions of one variable: the midpoint inequality
//! `f((x+y)/2) <= ½f(x) + ½f(y) + φ((x-y)/2)` on a grid, and the convexity
//! gap `f(λx + (1-λ)y) - λf(x) - (1-λ)f(y)` against the bound engine.
//!
//! Results hold on the sampled grid only.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::bounds::{BoundEngine, BoundReport, Rule};
use crate::errfun::{eval_phi, read_csv_pairs, ErrorFunction};
use crate::error::{Error, Result};
use crate::number::Number;
use crate::numtheory::gcd;
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq)]
pub enum TestKind {
    /// `a x² + b x + c`.
    Quadratic {
        a: Rational,
        b: Rational,
        c: Rational,
    },
    /// `-a x²`.
    NegQuadratic(Rational),
    /// `Σ c_i x^i`, constant term first.
    Polynomial(Vec<Rational>),
    AbsValue,
    /// Piecewise linear through `(x, value)` rows sorted by `x`.
    SampledTable(Vec<(Rational, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub kind: TestKind,
    pub lo: Rational,
    pub hi: Rational,
}

impl TestFunction {
    pub fn new(kind: TestKind, lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!("empty domain [{lo}, {hi}]")));
        }
        let kind = match kind {
            TestKind::SampledTable(mut points) => {
                points.sort_by(|a, b| a.0.cmp(&b.0));
                if points.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(Error::InvalidArgument("table has repeated x values".into()));
                }
                let covers = match (points.first(), points.last()) {
                    (Some(first), Some(last)) => first.0 <= lo && last.0 >= hi,
                    _ => false,
                };
                if !covers {
                    return Err(Error::InvalidArgument(format!(
                        "table does not cover [{lo}, {hi}]"
                    )));
                }
                TestKind::SampledTable(points)
            }
            other => other,
        };
        Ok(TestFunction { kind, lo, hi })
    }

    /// Parses `quad:a,b,c`, `negquad:a`, `poly:c0,c1,...`, `abs` or
    /// `table:path.csv`.
    pub fn parse(spec: &str, lo: Rational, hi: Rational) -> Result<Self> {
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let rationals = || -> Result<Vec<Rational>> {
            args.split(',')
                .map(|s| s.trim().parse::<Rational>())
                .collect()
        };
        let kind = match name {
            "quad" => match rationals()?.as_slice() {
                [a, b, c] => TestKind::Quadratic {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                },
                _ => return Err(Error::parse(spec, "quad takes a,b,c")),
            },
            "negquad" => match rationals()?.as_slice() {
                [a] => TestKind::NegQuadratic(a.clone()),
                _ => return Err(Error::parse(spec, "negquad takes one coefficient")),
            },
            "poly" => TestKind::Polynomial(rationals()?),
            "abs" if args.is_empty() => TestKind::AbsValue,
            "table" if !args.is_empty() => TestKind::SampledTable(read_csv_pairs(Path::new(args))?),
            _ => {
                return Err(Error::parse(
                    spec,
                    "expected quad:, negquad:, poly:, abs or table:",
                ))
            }
        };
        TestFunction::new(kind, lo, hi)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        *x >= self.lo && *x <= self.hi
    }

    /// `f(x)`, exact for every kind except tables.
    pub fn eval(&self, x: &Rational) -> Result<Number> {
        if !self.contains(x) {
            return Err(Error::InvalidArgument(format!(
                "{x} is outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(match &self.kind {
            TestKind::Quadratic { a, b, c } => Number::Exact(&(&(a * x) + b) * x + c),
            TestKind::NegQuadratic(a) => Number::Exact(-(&(a * x) * x)),
            TestKind::Polynomial(coeffs) => Number::Exact(
                coeffs
                    .iter()
                    .rev()
                    .fold(Rational::zero(), |acc, c| &(&acc * x) + c),
            ),
            TestKind::AbsValue => Number::Exact(x.abs()),
            TestKind::SampledTable(points) => Number::Float(interpolate(points, x)),
        })
    }

    /// `grid_count` equally spaced points from `lo` to `hi`.
    pub fn grid(&self, grid_count: usize) -> Result<Vec<Rational>> {
        if grid_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs >= 2 points, got {grid_count}"
            )));
        }
        let step = &(&self.hi - &self.lo) * &Rational::new(1, grid_count as u64 - 1)?;
        Ok((0..grid_count)
            .map(|i| &self.lo + &(&step * &Rational::integer(i as u64)))
            .collect())
    }
}

fn interpolate(points: &[(Rational, f64)], x: &Rational) -> f64 {
    let idx = points.partition_point(|(p, _)| p < x);
    if idx < points.len() && points[idx].0 == *x {
        return points[idx].1;
    }
    // the domain check guarantees 0 < idx < len
    let (x0, v0) = (&points[idx - 1].0, points[idx - 1].1);
    let (x1, v1) = (&points[idx].0, points[idx].1);
    let t = ((x - x0) / (x1 - x0)).to_f64();
    v0 + (v1 - v0) * t
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationCertificate {
    pub x: Rational,
    pub y: Rational,
    pub lambda: Rational,
    pub lhs: Number,
    pub rhs: Number,
    pub rule: String,
}

impl ViolationCertificate {
    /// Recomputes both sides from `(x, y, λ)`.
    pub fn revalidate(&self, f: &TestFunction, phi: &ErrorFunction) -> Result<bool> {
        let (lhs, rhs) = if self.rule == MIDPOINT_RULE {
            midpoint_sides(f, phi, &self.x, &self.y)?
        } else {
            let engine = BoundEngine::new(&self.lambda, phi)?;
            let (lhs, rhs, _, _) = lambda_sides(f, &engine, &self.x, &self.y)?;
            (lhs, rhs)
        };
        Ok(!lhs.le_tol(&rhs))
    }
}

const MIDPOINT_RULE: &str = "midpoint";

fn midpoint_sides(
    f: &TestFunction,
    phi: &ErrorFunction,
    x: &Rational,
    y: &Rational,
) -> Result<(Number, Number)> {
    let half = Rational::half();
    let mid = &(x + y) * &half;
    let lhs = f.eval(&mid)?;
    let u = Number::Exact(&(x - y) * &half);
    let rhs = &(&f.eval(x)?.scale(&half) + &f.eval(y)?.scale(&half)) + &eval_phi(phi, &u)?;
    Ok((lhs, rhs))
}

/// All pairs of a uniform grid of `grid_count` points; an empty result means
/// the inequality holds on the grid.
pub fn verify_midconvex(
    f: &TestFunction,
    phi: &ErrorFunction,
    grid_count: usize,
) -> Result<Vec<ViolationCertificate>> {
    let grid = f.grid(grid_count)?;
    let mut out = Vec::new();
    for (i, x) in grid.iter().enumerate() {
        for y in &grid[i + 1..] {
            let (lhs, rhs) = midpoint_sides(f, phi, x, y)?;
            if !lhs.le_tol(&rhs) {
                out.push(ViolationCertificate {
                    x: x.clone(),
                    y: y.clone(),
                    lambda: Rational::half(),
                    lhs,
                    rhs,
                    rule: MIDPOINT_RULE.into(),
                });
            }
        }
    }
    Ok(out)
}

/// Best certified estimate, or the least estimate when nothing is certified.
fn bound_of(report: &BoundReport) -> Result<(Number, Rule)> {
    if let Some(best) = report.best_estimate() {
        return Ok((best.upper_estimate.clone(), best.rule));
    }
    if let Some(reason) = &report.unbounded {
        return Err(Error::Unbounded(reason.clone()));
    }
    report
        .estimates
        .iter()
        .reduce(|a, b| {
            if b.upper_estimate.cmp_value(&a.upper_estimate).is_lt() {
                b
            } else {
                a
            }
        })
        .map(|e| (e.upper_estimate.clone(), e.rule))
        .ok_or_else(|| Error::Internal(format!("no estimates for λ = {}", report.lambda)))
}

/// `(lhs, rhs, gap, bound)` with `lhs = f(λx + (1-λ)y)` and
/// `rhs = λ f(x) + (1-λ) f(y) + bound`.
fn lambda_sides(
    f: &TestFunction,
    engine: &BoundEngine,
    x: &Rational,
    y: &Rational,
) -> Result<(Number, Number, Number, (Number, Rule))> {
    let lambda = engine.lambda();
    let co = Rational::one() - lambda;
    let z = &(lambda * x) + &(&co * y);
    let lhs = f.eval(&z)?;
    let combo = &f.eval(x)?.scale(lambda) + &f.eval(y)?.scale(&co);
    let gap = &lhs - &combo;
    let report = engine.report(&Number::Exact(x - y))?;
    let bound = bound_of(&report)?;
    let rhs = &combo + &bound.0;
    Ok((lhs, rhs, gap, bound))
}

/// Compares the convexity gap at `λ` with the engine's best bound for every
/// ordered pair of distinct points of a uniform grid of `grid_count` points.
pub fn verify_lambda_bound(
    f: &TestFunction,
    phi: &ErrorFunction,
    lambda: &Rational,
    grid_count: usize,
) -> Result<Vec<ViolationCertificate>> {
    let engine = BoundEngine::new(lambda, phi)?;
    let grid = f.grid(grid_count)?;
    let mut out = Vec::new();
    for x in &grid {
        for y in &grid {
            if x == y {
                continue;
            }
            let (lhs, rhs, gap, (bound, rule)) = lambda_sides(f, &engine, x, y)?;
            if !gap.le_tol(&bound) {
                out.push(ViolationCertificate {
                    x: x.clone(),
                    y: y.clone(),
                    lambda: lambda.clone(),
                    lhs,
                    rhs,
                    rule: rule.name().into(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub lambda: Rational,
    pub num: u64,
    pub den: u64,
    pub gap: Number,
    pub bound: Number,
    pub rule: Rule,
}

impl GapRow {
    pub fn holds(&self) -> bool {
        self.gap.le_tol(&self.bound)
    }
}

/// Reduced fractions `p/q` in `[0, 1]` with `q <= denominator_max`, ordered by
/// denominator then numerator.
pub fn reduced_fractions(denominator_max: u64) -> Vec<(u64, u64)> {
    let mut out = vec![(0, 1), (1, 1)];
    for q in 2..=denominator_max {
        out.extend(
            (1..q)
                .filter(|p| gcd(*p as i64, q as i64) == 1)
                .map(|p| (p, q)),
        );
    }
    out
}

/// Gap and best bound at `(x, y)` for every reduced `λ` with denominator at
/// most `denominator_max`.
pub fn gap_profile(
    f: &TestFunction,
    phi: &ErrorFunction,
    x: &Rational,
    y: &Rational,
    denominator_max: u64,
) -> Result<Vec<GapRow>> {
    if denominator_max == 0 {
        return Err(Error::InvalidArgument(
            "denominator bound must be positive".into(),
        ));
    }
    reduced_fractions(denominator_max)
        .into_iter()
        .map(|(num, den)| {
            let lambda = Rational::new(num, den)?;
            let engine = BoundEngine::new(&lambda, phi)?;
            let (_, _, gap, (bound, rule)) = lambda_sides(f, &engine, x, y)?;
            Ok(GapRow {
                lambda,
                num,
                den,
                gap,
                bound,
                rule,
            })
        })
        .collect()
}

pub fn write_certificates_csv(out: impl Write, certs: &[ViolationCertificate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "lambda", "lhs", "rhs", "rule"])?;
    for c in certs {
        w.write_record([
            c.x.to_string(),
            c.y.to_string(),
            c.lambda.to_string(),
            c.lhs.to_string(),
            c.rhs.to_string(),
            c.rule.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_gap_profile_csv(out: impl Write, rows: &[GapRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "num", "den", "gap", "bound", "rule"])?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.num.to_string(),
            r.den.to_string(),
            r.gap.to_string(),
            r.bound.to_string(),
            r.rule.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::takagi_bound;
    use crate::dyadic::dz;
    use crate::errfun::regularize;

    fn r(p: i64, q: i64) -> Rational {
        Rational::frac(p, q)
    }

    fn quad1() -> ErrorFunction {
        ErrorFunction::quadratic(Rational::one())
    }

    fn f(spec: &str, lo: i64, hi: i64) -> TestFunction {
        TestFunction::parse(spec, Rational::integer(lo), Rational::integer(hi)).unwrap()
    }

    #[test]
    fn parse_and_eval() {
        let q = f("quad:1,-2,3", -5, 5);
        assert_eq!(q.eval(&r(1, 2)).unwrap(), Number::Exact(r(9, 4)));
        let p = f("poly:1,0,0,2", -5, 5);
        assert_eq!(p.eval(&r(1, 2)).unwrap(), Number::Exact(r(5, 4)));
        assert_eq!(
            f("negquad:3", -1, 1).eval(&r(1, 3)).unwrap(),
            Number::Exact(r(-1, 3))
        );
        assert_eq!(
            f("abs", -1, 1).eval(&r(-1, 3)).unwrap(),
            Number::Exact(r(1, 3))
        );
        assert!(f("abs", -1, 1).eval(&r(3, 2)).is_err());
        assert!(TestFunction::parse("cubic:1", Rational::zero(), Rational::one()).is_err());
        assert!(TestFunction::parse("quad:1,2", Rational::zero(), Rational::one()).is_err());
        assert!(TestFunction::parse("abs", Rational::one(), Rational::zero()).is_err());
    }

    #[test]
    fn table_function() {
        let points = vec![(r(0, 1), 0.0), (r(1, 1), 1.0), (r(2, 1), 0.0)];
        let t = TestFunction::new(TestKind::SampledTable(points), r(0, 1), r(2, 1)).unwrap();
        assert_eq!(t.eval(&r(1, 2)).unwrap().to_f64(), 0.5);
        assert_eq!(t.eval(&r(1, 1)).unwrap().to_f64(), 1.0);
        assert_eq!(t.eval(&r(3, 2)).unwrap().to_f64(), 0.5);
        let short = vec![(r(0, 1), 0.0), (r(1, 1), 1.0)];
        assert!(TestFunction::new(TestKind::SampledTable(short), r(0, 1), r(2, 1)).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "x,value\n-1,1\n0,0\n1,1\n").unwrap();
        let spec = format!("table:{}", path.display());
        let t = TestFunction::parse(&spec, r(-1, 1), r(1, 1)).unwrap();
        assert_eq!(t.eval(&r(-1, 2)).unwrap().to_f64(), 0.5);
        assert!(verify_midconvex(&t, &ErrorFunction::zero(), 9)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn midconvex_examples() {
        assert!(
            verify_midconvex(&f("quad:1,0,0", 0, 1), &ErrorFunction::zero(), 50)
                .unwrap()
                .is_empty()
        );
        assert!(verify_midconvex(&f("negquad:1", -1, 1), &quad1(), 50)
            .unwrap()
            .is_empty());
        let certs = verify_midconvex(&f("negquad:1", 0, 1), &ErrorFunction::zero(), 3).unwrap();
        assert!(certs.iter().any(|c| c.x == r(0, 1) && c.y == r(1, 1)));
        let c = certs
            .iter()
            .find(|c| c.y == r(1, 1) && c.x.is_zero())
            .unwrap();
        assert_eq!(
            (c.lhs.clone(), c.rhs.clone()),
            (Number::Exact(r(-1, 4)), Number::Exact(r(-1, 2)))
        );
        assert!(verify_midconvex(&f("abs", 0, 1), &quad1(), 1).is_err());
    }

    #[test]
    fn lambda_bound_examples() {
        assert!(
            verify_lambda_bound(&f("negquad:1", -1, 1), &quad1(), &r(1, 3), 9)
                .unwrap()
                .is_empty()
        );
        assert!(verify_lambda_bound(
            &f("quad:1,0,0", -1, 1),
            &ErrorFunction::power(Rational::one(), Rational::one()).unwrap(),
            &r(2, 7),
            7
        )
        .unwrap()
        .is_empty());
        assert!(verify_lambda_bound(
            &f("poly:0,0,0,0,1", -1, 1),
            &ErrorFunction::zero(),
            &r(1, 2),
            9
        )
        .unwrap()
        .is_empty());
    }

    #[test]
    fn negative_square_gap_is_tight() {
        let neg = f("negquad:1", -1, 1);
        let engine = BoundEngine::new(&r(1, 3), &quad1()).unwrap();
        for x in neg.grid(7).unwrap() {
            for y in neg.grid(7).unwrap() {
                let (_, _, gap, (bound, _)) = lambda_sides(&neg, &engine, &x, &y).unwrap();
                let d = &x - &y;
                assert_eq!(gap, Number::Exact(&r(2, 9) * &(&d * &d)));
                assert_eq!(gap, bound);
            }
        }
    }

    #[test]
    fn gap_profile_examples() {
        let rows = gap_profile(&f("negquad:1", -1, 1), &quad1(), &r(0, 1), &r(1, 1), 6).unwrap();
        assert_eq!(rows.len(), 13);
        for row in &rows {
            let expected = Number::Exact(&row.lambda * &(Rational::one() - &row.lambda));
            assert_eq!(row.gap, expected);
            assert_eq!(row.bound, expected);
        }

        let rows = gap_profile(&f("poly:0", -1, 1), &quad1(), &r(-1, 2), &r(1, 1), 5).unwrap();
        assert!(rows.iter().all(|r| r.gap.is_zero() && r.holds()));

        let (x, y) = (r(-1, 3), r(3, 4));
        let rows = gap_profile(&f("quad:1,0,0", -1, 1), &ErrorFunction::zero(), &x, &y, 7).unwrap();
        for row in &rows {
            let d = &x - &y;
            let expected = -(&(&row.lambda * &(Rational::one() - &row.lambda)) * &(&d * &d));
            assert_eq!(row.gap, Number::Exact(expected));
            assert!(row.holds());
        }
    }

    #[test]
    fn gap_profile_csv_columns() {
        let rows = gap_profile(&f("negquad:1", -1, 1), &quad1(), &r(0, 1), &r(1, 1), 2).unwrap();
        let mut buf = Vec::new();
        write_gap_profile_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "lambda,num,den,gap,bound,rule");
        assert_eq!(lines.next().unwrap(), "0,0,1,0,0,RationalNK");
    }

    #[test]
    fn reduced_fraction_counts() {
        assert_eq!(reduced_fractions(1).len(), 2);
        assert_eq!(reduced_fractions(6).len(), 13);
        let brute = (1..=30u64)
            .flat_map(|q| (0..=q).map(move |p| r(p as i64, q as i64)))
            .collect::<std::collections::BTreeSet<_>>();
        assert_eq!(reduced_fractions(30).len(), brute.len());
    }

    #[test]
    fn certificates_revalidate() {
        let neg = f("negquad:1", 0, 1);
        let zero = ErrorFunction::zero();
        let certs = verify_midconvex(&neg, &zero, 5).unwrap();
        assert!(!certs.is_empty());
        assert!(certs.iter().all(|c| c.revalidate(&neg, &zero).unwrap()));
        let certs = verify_lambda_bound(&neg, &zero, &r(1, 3), 5).unwrap();
        assert!(!certs.is_empty());
        assert!(certs.iter().all(|c| c.revalidate(&neg, &zero).unwrap()));
    }

    /// Bound obtained by chaining the midpoint inequality down the binary
    /// expansion of a dyadic `λ`: `B(λ) = ½ B(2λ) + φ(λu)` for `λ <= ½`,
    /// mirrored above `½`.
    fn midpoint_chain(phi: &ErrorFunction, lambda: &Rational, u: &Rational) -> Number {
        if lambda.is_integer() {
            return Number::zero();
        }
        let two = Rational::integer(2);
        let next = if *lambda <= Rational::half() {
            &two * lambda
        } else {
            &(&two * lambda) - &Rational::one()
        };
        let here = eval_phi(phi, &Number::Exact(&dz(lambda) * u)).unwrap();
        &midpoint_chain(phi, &next, u).scale(&Rational::half()) + &here
    }

    #[test]
    fn sound_where_midconvexity_holds() {
        let cases = [
            (f("negquad:1", -1, 1), quad1()),
            (
                f("negquad:1", -1, 1),
                ErrorFunction::power(Rational::one(), Rational::one()).unwrap(),
            ),
            (f("abs", -1, 1), ErrorFunction::zero()),
            (f("quad:1,0,0", -1, 1), ErrorFunction::zero()),
        ];
        for (func, phi) in &cases {
            assert!(verify_midconvex(func, phi, 17).unwrap().is_empty(), "{phi}");
            let reg = regularize(phi).unwrap();
            for den in [2i64, 4, 8, 16, 32] {
                for num in (1..den).step_by(3) {
                    let lambda = r(num, den);
                    for (x, y) in [
                        (r(-1, 1), r(1, 1)),
                        (r(1, 4), r(-3, 8)),
                        (r(7, 8), r(1, 16)),
                    ] {
                        let u = &x - &y;
                        let chain = midpoint_chain(phi, &lambda, &u);
                        let takagi =
                            takagi_bound(&lambda, &Number::Exact(u.clone()), &reg).unwrap();
                        assert!(takagi.le_tol(&chain), "{phi} λ={lambda}");
                        let engine = BoundEngine::new(&lambda, phi).unwrap();
                        let (_, _, gap, _) = lambda_sides(func, &engine, &x, &y).unwrap();
                        assert!(gap.le_tol(&chain), "{phi} λ={lambda}");
                    }
                    assert!(verify_lambda_bound(func, phi, &lambda, 5)
                        .unwrap()
                        .is_empty());
                }
            }
        }
    }
}
