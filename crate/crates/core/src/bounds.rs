//! Upper estimates for the extended error `Φ(λ, u)`: the smallest `E` with
//! `f(λx + (1-λ)y) <= λ f(x) + (1-λ) f(y) + E` for every `φ`-Jensen convex
//! `f` and `x - y = u`.
//!
//! None of the rules computes `Φ` itself; each gives an upper bound and the
//! report picks the least certified one.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::errfun::{eval_phi, eval_phi_star, regularize, ErrorFunction, RegularizedErrorFunction};
use crate::error::{Error, Result};
use crate::number::Number;
use crate::numtheory::reduce_lambda;
use crate::rational::Rational;
use crate::takagi::{
    closed_form, eval_closed, truncated_series, PsiFunction, SeriesArgument, TakagiClosedForm,
};

/// Terms kept by the truncated-series rule.
pub const TRUNCATED_TERMS: u32 = 24;
/// Largest periodic block `ℓ` for which closed forms are built; beyond it the
/// truncated series stands in for them.
pub const MAX_CLOSED_FORM_BLOCK: u64 = 1 << 16;
/// Largest `⟨λ⟩` for which the truncated-series rule is attempted; its tail
/// bound needs `⟨λ⟩` evaluations of `φ*`.
pub const TRUNCATED_MAX_ORDER: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `n k φ*(u/(n+k))` for `λ = n/(n+k)`.
    RationalNK,
    TakagiClosedForm,
    TakagiTruncated,
    /// `λ E(μ, u) + E(λ, μ u)` for a factorization of the target.
    Composition,
    /// `φ(u/2)` at `½`, `2 φ(u/3)` at `⅓, ⅔`, zero at the endpoints.
    IntroSpecialCase,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::RationalNK => "RationalNK",
            Rule::TakagiClosedForm => "TakagiClosedForm",
            Rule::TakagiTruncated => "TakagiTruncated",
            Rule::Composition => "Composition",
            Rule::IntroSpecialCase => "IntroSpecialCase",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub rule: Rule,
    #[serde(rename = "value")]
    pub upper_estimate: Number,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lambda: Rational,
    pub u: Number,
    pub phi: String,
    pub estimates: Vec<Estimate>,
    /// Index of the least certified estimate, `None` when nothing is certified.
    pub best: Option<usize>,
    #[serde(skip)]
    pub unbounded: Option<String>,
}

impl BoundReport {
    pub fn best_estimate(&self) -> Option<&Estimate> {
        self.best.map(|i| &self.estimates[i])
    }

    pub fn estimate(&self, rule: Rule) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.rule == rule)
    }
}

/// `t ↦ φ*(t u)`.
pub fn star_psi(reg: &RegularizedErrorFunction, u: &Number) -> PsiFunction {
    let (reg_exact, reg_float) = (reg.clone(), reg.clone());
    let (u_exact, u_float) = (u.clone(), u.to_f64());
    PsiFunction::new(
        format!("t -> phi*(t*{u})"),
        move |t| eval_phi_star(&reg_exact, &u_exact.scale(t)),
        move |t| Ok(eval_phi_star(&reg_float, &Number::Float(t * u_float))?.to_f64()),
    )
}

/// `n k φ*(u/(n+k))`.
pub fn rational_nk_bound(
    n: u64,
    k: u64,
    u: &Number,
    reg: &RegularizedErrorFunction,
) -> Result<Number> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "n = {n}, k = {k} must both be positive"
        )));
    }
    let nk = Rational::integer(n as i128 * k as i128);
    let inv = Rational::new(1, n as i128 + k as i128)?;
    Ok(eval_phi_star(reg, &u.scale(&inv))?.scale(&nk))
}

fn takagi_with_form(
    form: &TakagiClosedForm,
    u: &Number,
    reg: &RegularizedErrorFunction,
) -> Result<Number> {
    eval_closed(form, &star_psi(reg, u))
}

/// `Σ_k 2^{-k} φ*(d_Z(2^k λ) u)` through the closed form.
pub fn takagi_bound(
    lambda: &Rational,
    u: &Number,
    reg: &RegularizedErrorFunction,
) -> Result<Number> {
    takagi_with_form(&closed_form(lambda)?, u, reg)
}

/// `λ · takagi_bound(μ, u) + takagi_bound(λ, μ u)`, an upper estimate for `Φ(λμ, u)`.
pub fn composition_bound(
    lambda: &Rational,
    mu: &Rational,
    u: &Number,
    reg: &RegularizedErrorFunction,
) -> Result<Number> {
    let inner = takagi_bound(mu, u, reg)?.scale(lambda);
    let outer = takagi_bound(lambda, &u.scale(mu), reg)?;
    Ok(&inner + &outer)
}

/// Special-case values evaluated with `φ` itself; `None` outside
/// `{0, ⅓, ½, ⅔, 1}`.
pub fn intro_special_case(
    lambda: &Rational,
    u: &Number,
    phi: &ErrorFunction,
) -> Result<Option<Number>> {
    if lambda.is_zero() || *lambda == Rational::one() {
        return Ok(Some(Number::zero()));
    }
    if *lambda == Rational::half() {
        return Ok(Some(eval_phi(phi, &u.scale(&Rational::half()))?));
    }
    if *lambda == Rational::frac(1, 3) || *lambda == Rational::frac(2, 3) {
        let v = eval_phi(phi, &u.scale(&Rational::frac(1, 3)))?;
        return Ok(Some(v.scale(&Rational::integer(2))));
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sharpness {
    pub takagi: Number,
    pub rational_nk: Number,
    /// `takagi <= rational_nk` within tolerance.
    pub holds: bool,
    /// Both sides agree (exactly on the rational path).
    pub equal: bool,
}

/// Compares the Takagi bound at `λ = n/(n+m)` with `n m φ*(u/(n+m))`. A
/// result with `holds == false` is a falsification record, not an error.
pub fn sharpness_check(
    n: u64,
    m: u64,
    u: &Number,
    reg: &RegularizedErrorFunction,
) -> Result<Sharpness> {
    let lambda = Rational::new(n, n as i128 + m as i128)?;
    let takagi = takagi_bound(&lambda, u, reg)?;
    let rational_nk = rational_nk_bound(n, m, u, reg)?;
    Ok(Sharpness {
        holds: takagi.le_tol(&rational_nk),
        equal: takagi.eq_tol(&rational_nk),
        takagi,
        rational_nk,
    })
}

/// Precomputed state for reports at a fixed `(λ, φ)` and varying `u`.
#[derive(Clone, Debug)]
pub struct BoundEngine {
    lambda: Rational,
    phi: ErrorFunction,
    reg: std::result::Result<RegularizedErrorFunction, String>,
    /// `None` when the periodic block is too long.
    forms: Option<EngineForms>,
    /// `λ` folded into `[0, ½]`; the sign of `u` flips with it.
    folded: Rational,
    flipped: bool,
    truncated: bool,
}

#[derive(Clone, Debug)]
struct EngineForms {
    lambda: TakagiClosedForm,
    doubled: TakagiClosedForm,
    half: TakagiClosedForm,
}

impl BoundEngine {
    pub fn new(lambda: &Rational, phi: &ErrorFunction) -> Result<Self> {
        BoundEngine::with_block_limit(lambda, phi, MAX_CLOSED_FORM_BLOCK)
    }

    /// Like [`BoundEngine::new`] with a custom limit on the periodic block.
    pub fn with_block_limit(
        lambda: &Rational,
        phi: &ErrorFunction,
        max_block: u64,
    ) -> Result<Self> {
        if !lambda.is_in_unit_interval() {
            return Err(Error::InvalidArgument(format!(
                "λ = {lambda} is not in [0,1]"
            )));
        }
        let reg = match regularize(phi) {
            Ok(reg) => Ok(reg),
            Err(Error::Unbounded(msg)) => Err(msg),
            Err(e) => return Err(e),
        };
        let flipped = *lambda > Rational::half();
        let folded = if flipped {
            Rational::one() - lambda
        } else {
            lambda.clone()
        };
        let doubled = &folded * &Rational::integer(2);
        let block = if lambda.is_integer() {
            0
        } else {
            reduce_lambda(lambda)?.half_totient()
        };
        let forms = if block <= max_block {
            Some(EngineForms {
                lambda: closed_form(lambda)?,
                doubled: closed_form(&doubled)?,
                half: closed_form(&Rational::half())?,
            })
        } else {
            None
        };
        let truncated = forms.is_none()
            && u64::try_from(lambda.denom()).is_ok_and(|d| d <= TRUNCATED_MAX_ORDER);
        Ok(BoundEngine {
            lambda: lambda.clone(),
            phi: phi.clone(),
            reg,
            forms,
            folded,
            flipped,
            truncated,
        })
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn closed_form(&self) -> Option<&TakagiClosedForm> {
        self.forms.as_ref().map(|f| &f.lambda)
    }

    /// The regularization, or the reason it diverges.
    pub fn regularization(&self) -> std::result::Result<&RegularizedErrorFunction, &str> {
        self.reg.as_ref().map_err(String::as_str)
    }

    pub fn report(&self, u: &Number) -> Result<BoundReport> {
        let mut report = BoundReport {
            lambda: self.lambda.clone(),
            u: u.clone(),
            phi: self.phi.to_string(),
            estimates: Vec::new(),
            best: None,
            unbounded: None,
        };
        let reg = match &self.reg {
            Ok(reg) => reg,
            Err(msg) => {
                report.unbounded = Some(msg.clone());
                if let Some(v) = intro_special_case(&self.lambda, u, &self.phi)? {
                    report.estimates.push(Estimate {
                        rule: Rule::IntroSpecialCase,
                        upper_estimate: v,
                        certified: false,
                    });
                }
                return Ok(report);
            }
        };
        let certified = reg.certified;
        let mut push = |rule, value| {
            report.estimates.push(Estimate {
                rule,
                upper_estimate: value,
                certified,
            })
        };

        // λ = n/(n+k) with n, k the reduced numerator and its complement
        let (numer, denom) = (self.lambda.numer(), self.lambda.denom());
        let nk = Rational::integer(numer * (denom - numer));
        let nk_value = if nk.is_zero() {
            Number::zero()
        } else {
            let inv = Rational::from(denom.clone()).recip()?;
            eval_phi_star(reg, &u.scale(&inv))?.scale(&nk)
        };
        push(Rule::RationalNK, nk_value);

        if let Some(forms) = &self.forms {
            push(
                Rule::TakagiClosedForm,
                takagi_with_form(&forms.lambda, u, reg)?,
            );
        }

        if self.truncated {
            let psi = star_psi(reg, u);
            let series = truncated_series(
                &SeriesArgument::Rational(self.lambda.clone()),
                &psi,
                TRUNCATED_TERMS,
            )?;
            push(Rule::TakagiTruncated, &series.value + &series.tail_bound);
        }

        // folded λ = ½ · (2λ); Φ(λ, u) = Φ(1-λ, -u) handles the other half
        if let Some(forms) = &self.forms {
            let v = if self.flipped { -u.clone() } else { u.clone() };
            let inner = takagi_with_form(&forms.doubled, &v, reg)?.scale(&Rational::half());
            let doubled_u = v.scale(&(&self.folded * &Rational::integer(2)));
            let outer = takagi_with_form(&forms.half, &doubled_u, reg)?;
            push(Rule::Composition, &inner + &outer);
        }

        if let Some(v) = intro_special_case(&self.lambda, u, &self.phi)? {
            push(Rule::IntroSpecialCase, v);
        }

        report.best = report
            .estimates
            .iter()
            .enumerate()
            .filter(|(_, e)| e.certified)
            .fold(
                None,
                |best: Option<(usize, &Estimate)>, (i, e)| match best {
                    Some((_, b)) if b.upper_estimate.cmp_value(&e.upper_estimate).is_le() => best,
                    _ => Some((i, e)),
                },
            )
            .map(|(i, _)| i);
        Ok(report)
    }
}

/// Regularizes `φ` and evaluates every applicable rule at `(λ, u)`.
pub fn build_report(lambda: &Rational, u: &Number, phi: &ErrorFunction) -> Result<BoundReport> {
    BoundEngine::new(lambda, phi)?.report(u)
}
