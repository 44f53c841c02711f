//! Error functions `φ` and their regularization
//! `φ*(u) = inf_{m >= 1} m² φ(u/m)`.
//!
//! Every model is even and vanishes at zero by construction: evaluation only
//! ever sees `|u|`, and tables are rejected if they give `φ(0) != 0`.

use std::fmt;
use std::path::Path;

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::number::Number;
use crate::rational::Rational;

/// Default number of `m` values tried by a bounded infimum search.
pub const DEFAULT_M_MAX: u64 = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum ErrorKind {
    /// `c |u|^p`, `p >= 0`.
    Power {
        c: Number,
        p: Number,
    },
    /// `c u²`.
    Quadratic(Number),
    /// Piecewise linear in `|u|` through the points, sorted by `u >= 0`.
    Table(Vec<(Rational, f64)>),
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorFunction {
    pub kind: ErrorKind,
    /// Half-width of the interval `φ` is defined on.
    pub domain_radius: f64,
    /// Where a table came from, for reporting.
    source: Option<String>,
}

impl ErrorFunction {
    pub fn power(c: impl Into<Number>, p: impl Into<Number>) -> Result<Self> {
        let p = p.into();
        if p.to_f64().is_nan() || p.to_f64() < 0.0 {
            return Err(Error::InvalidArgument(format!("exponent {p} must be >= 0")));
        }
        Ok(ErrorFunction {
            kind: ErrorKind::Power { c: c.into(), p },
            domain_radius: f64::INFINITY,
            source: None,
        })
    }

    pub fn quadratic(c: impl Into<Number>) -> Self {
        ErrorFunction {
            kind: ErrorKind::Quadratic(c.into()),
            domain_radius: f64::INFINITY,
            source: None,
        }
    }

    pub fn zero() -> Self {
        ErrorFunction {
            kind: ErrorKind::Zero,
            domain_radius: f64::INFINITY,
            source: None,
        }
    }

    /// Builds a table model. Points are folded onto `u >= 0`; a missing
    /// `u = 0` row is added as `(0, 0)`.
    pub fn table(points: Vec<(Rational, f64)>) -> Result<Self> {
        let mut folded: Vec<(Rational, f64)> =
            points.into_iter().map(|(u, v)| (u.abs(), v)).collect();
        folded.sort_by(|a, b| a.0.cmp(&b.0));
        let mut pts: Vec<(Rational, f64)> = Vec::with_capacity(folded.len() + 1);
        for (u, v) in folded {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "table value at {u} is not finite"
                )));
            }
            match pts.last() {
                Some((last, w)) if *last == u => {
                    if *w != v {
                        return Err(Error::InvalidArgument(format!(
                            "table gives two values at |u| = {u}; error functions are even"
                        )));
                    }
                }
                _ => pts.push((u, v)),
            }
        }
        match pts.first() {
            Some((u, v)) if u.is_zero() => {
                if *v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "table has φ(0) = {v}, need 0"
                    )));
                }
            }
            _ => pts.insert(0, (Rational::zero(), 0.0)),
        }
        let radius = pts.last().map(|(u, _)| u.to_f64()).unwrap_or(0.0);
        Ok(ErrorFunction {
            kind: ErrorKind::Table(pts),
            domain_radius: radius,
            source: None,
        })
    }

    /// Reads `u,value` rows. A non-numeric first row is treated as a header.
    pub fn table_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_csv_pairs(path)?;
        let mut phi = ErrorFunction::table(rows)?;
        phi.source = Some(path.display().to_string());
        Ok(phi)
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "domain radius {radius} must be positive"
            )));
        }
        if matches!(self.kind, ErrorKind::Table(_)) && radius > self.domain_radius {
            return Err(Error::InvalidArgument(
                "cannot extend a table beyond its last point".into(),
            ));
        }
        self.domain_radius = radius;
        Ok(self)
    }

    /// Parses `pow:c,p`, `quad:c`, `zero` or `table:path.csv`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, args) = spec.split_once(':').unwrap_or((spec, ""));
        match head {
            "zero" if args.is_empty() => Ok(ErrorFunction::zero()),
            "quad" => {
                let c: Rational = args.parse()?;
                Ok(ErrorFunction::quadratic(c))
            }
            "pow" => {
                let (c, p) = args
                    .split_once(',')
                    .ok_or_else(|| Error::parse(spec, "expected pow:c,p"))?;
                let c: Rational = c.parse()?;
                let p: Rational = p.parse()?;
                ErrorFunction::power(c, p)
            }
            "table" if !args.is_empty() => ErrorFunction::table_from_csv(args),
            _ => Err(Error::parse(
                spec,
                "expected pow:c,p | quad:c | zero | table:path.csv",
            )),
        }
    }

    pub fn is_symbolic(&self) -> bool {
        !matches!(self.kind, ErrorKind::Table(_))
    }

    fn check_domain(&self, u: &Number) -> Result<()> {
        let a = u.to_f64().abs();
        if a > self.domain_radius {
            return Err(Error::OutOfDomain {
                magnitude: a,
                radius: self.domain_radius,
            });
        }
        Ok(())
    }
}

impl fmt::Display for ErrorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ErrorKind::Power { c, p } => write!(f, "pow:{c},{p}"),
            ErrorKind::Quadratic(c) => write!(f, "quad:{c}"),
            ErrorKind::Zero => write!(f, "zero"),
            ErrorKind::Table(pts) => match &self.source {
                Some(path) => write!(f, "table:{path}"),
                None => write!(f, "table[{} points]", pts.len()),
            },
        }
    }
}

pub(crate) fn read_csv_pairs(path: &Path) -> Result<Vec<(Rational, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::parse(
                path.display().to_string(),
                format!("row {} has fewer than 2 fields", i + 1),
            ));
        }
        let u = record[0].parse::<Rational>();
        let v = record[1].parse::<f64>();
        match (u, v) {
            (Ok(u), Ok(v)) => rows.push((u, v)),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!("row {} is not numeric", i + 1),
                ))
            }
        }
    }
    Ok(rows)
}

/// `c |u|^p`, exact when `c`, `u` are exact and `p` is a small nonnegative integer.
fn power_value(c: &Number, p: &Number, u: &Number) -> Number {
    let a = u.abs();
    if a.is_zero() || c.is_zero() {
        return Number::zero();
    }
    if let (Number::Exact(c), Number::Exact(p), Number::Exact(a)) = (c, p, &a) {
        if p.is_integer() {
            if let Some(e) = p.numer().to_u32().filter(|e| *e <= 1024) {
                return Number::Exact(c * &a.pow(e));
            }
        }
    }
    Number::Float(c.to_f64() * a.to_f64().powf(p.to_f64()))
}

fn table_value(points: &[(Rational, f64)], a: f64) -> f64 {
    let idx = points.partition_point(|(u, _)| u.to_f64() < a);
    if idx == 0 {
        return points[0].1;
    }
    if idx >= points.len() {
        return points[points.len() - 1].1;
    }
    let (u0, v0) = (points[idx - 1].0.to_f64(), points[idx - 1].1);
    let (u1, v1) = (points[idx].0.to_f64(), points[idx].1);
    if u1 == a {
        return v1;
    }
    v0 + (v1 - v0) * (a - u0) / (u1 - u0)
}

/// `φ(|u|)`.
pub fn eval_phi(phi: &ErrorFunction, u: &Number) -> Result<Number> {
    phi.check_domain(u)?;
    Ok(match &phi.kind {
        ErrorKind::Zero => Number::zero(),
        ErrorKind::Power { c, p } => power_value(c, p, u),
        ErrorKind::Quadratic(c) => power_value(c, &Number::Exact(Rational::integer(2)), u),
        ErrorKind::Table(points) => {
            if u.is_zero() {
                Number::zero()
            } else {
                Number::Float(table_value(points, u.to_f64().abs()))
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegularizationMode {
    /// Closed-form infimum over all `m`.
    AnalyticExact,
    /// Minimum over `1 <= m <= m_max`; an upper approximation of `φ*`.
    BoundedSearch { m_max: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StarForm {
    Same,
    Zero,
    Search,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedErrorFunction {
    pub base: ErrorFunction,
    pub mode: RegularizationMode,
    /// Whether values are the true infimum rather than an upper approximation.
    pub certified: bool,
    star: StarForm,
}

impl RegularizedErrorFunction {
    /// `φ*` as an error function in its own right (analytic mode only).
    pub fn as_error_function(&self) -> Option<ErrorFunction> {
        match self.star {
            StarForm::Same => Some(self.base.clone()),
            StarForm::Zero => Some(ErrorFunction {
                kind: ErrorKind::Zero,
                domain_radius: self.base.domain_radius,
                source: None,
            }),
            StarForm::Search => None,
        }
    }

    pub fn is_exact_capable(&self) -> bool {
        self.star != StarForm::Search && self.base.is_symbolic()
    }
}

fn sign_of(c: &Number) -> std::cmp::Ordering {
    c.cmp_value(&Number::zero())
}

/// Regularizes with the default bounded search size for table models.
pub fn regularize(phi: &ErrorFunction) -> Result<RegularizedErrorFunction> {
    regularize_with(phi, DEFAULT_M_MAX)
}

/// For `c |u|^p`, `m² φ(u/m) = c m^{2-p} |u|^p`, so the infimum over `m` is
/// attained at `m = 1` or in the limit `m → ∞` depending on the signs of `c`
/// and `2 - p`.
pub fn regularize_with(phi: &ErrorFunction, m_max: u64) -> Result<RegularizedErrorFunction> {
    use std::cmp::Ordering::*;
    let analytic = |star| RegularizedErrorFunction {
        base: phi.clone(),
        mode: RegularizationMode::AnalyticExact,
        certified: true,
        star,
    };
    let two = 2.0;
    match &phi.kind {
        ErrorKind::Zero => Ok(analytic(StarForm::Zero)),
        ErrorKind::Quadratic(c) => Ok(analytic(if c.is_zero() {
            StarForm::Zero
        } else {
            StarForm::Same
        })),
        ErrorKind::Power { c, p } => {
            let p = p.to_f64();
            match sign_of(c) {
                Equal => Ok(analytic(StarForm::Zero)),
                Greater if p <= two => Ok(analytic(StarForm::Same)),
                Greater => Ok(analytic(StarForm::Zero)),
                Less if p >= two => Ok(analytic(StarForm::Same)),
                Less => Err(Error::Unbounded(format!(
                    "{phi}: m² φ(u/m) = c m^(2-p) |u|^p tends to -∞"
                ))),
            }
        }
        ErrorKind::Table(_) => regularize_bounded(phi, m_max),
    }
}

/// Bounded infimum search for any model; never certified.
pub fn regularize_bounded(phi: &ErrorFunction, m_max: u64) -> Result<RegularizedErrorFunction> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be >= 1".into()));
    }
    Ok(RegularizedErrorFunction {
        base: phi.clone(),
        mode: RegularizationMode::BoundedSearch { m_max },
        certified: false,
        star: StarForm::Search,
    })
}

/// `φ*(u)`; exact on the analytic path whenever `φ(u)` is.
pub fn eval_phi_star(reg: &RegularizedErrorFunction, u: &Number) -> Result<Number> {
    reg.base.check_domain(u)?;
    match (reg.star, reg.mode) {
        (StarForm::Same, _) => eval_phi(&reg.base, u),
        (StarForm::Zero, _) => Ok(Number::zero()),
        (StarForm::Search, RegularizationMode::BoundedSearch { m_max }) => {
            let mut best: Option<Number> = None;
            for m in 1..=m_max {
                let inv = Rational::frac(1, m as i64);
                let m2 = Rational::integer((m * m) as i64);
                let v = eval_phi(&reg.base, &u.scale(&inv))?.scale(&m2);
                best = Some(match best {
                    Some(b) => b.min(v),
                    None => v,
                });
            }
            Ok(best.unwrap_or_else(Number::zero))
        }
        (StarForm::Search, RegularizationMode::AnalyticExact) => {
            Err(Error::Internal("search form without a bound".into()))
        }
    }
}

/// Checks `(φ*)* = φ*` at the sample points by regularizing again.
pub fn idempotence_check(reg: &RegularizedErrorFunction, samples: &[Number]) -> Result<bool> {
    let star = reg.as_error_function().ok_or_else(|| {
        Error::InvalidArgument("idempotence check needs an analytic regularization".into())
    })?;
    let twice = regularize(&star)?;
    for u in samples {
        let once = eval_phi_star(reg, u)?;
        let again = eval_phi_star(&twice, u)?;
        if !once.eq_tol(&again) {
            return Ok(false);
        }
    }
    Ok(true)
}
