//! Takagi-type series `T_ψ(λ) = Σ_k 2^{-k} ψ(d_Z(2^k λ))`.
//!
//! Three evaluation routes:
//!
//! * [`closed_form`] / [`eval_closed`]: exact finite sum at rational `λ`. For
//!   `λ = m/(2^j n)` the `j` preperiodic terms carry weights `2^{-k}` and the
//!   `ℓ = φ(n)/2` terms of one periodic block carry `1/(2^k - 2^{k-ℓ})`, which
//!   folds the geometric repetition of the block into each weight.
//! * [`truncated_series`]: binary64 partial sums with a tail bound.
//! * [`fixed_point_solve`]: iteration of the half-contraction
//!   `f ↦ ½ f(2λ) + ψ(λ)` (`λ <= ½`), `f ↦ ½ f(2λ-1) + ψ(1-λ)` (`λ > ½`)
//!   on a dyadic grid.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::dyadic::{dz, dz_f64, orbit, DyadicOrbit};
use crate::error::{Error, Result};
use crate::number::Number;
use crate::numtheory::{reduce_lambda, ReducedLambda};
use crate::rational::Rational;

type ExactFn = dyn Fn(&Rational) -> Result<Number> + Send + Sync;
type FloatFn = dyn Fn(f64) -> Result<f64> + Send + Sync;

/// A function on `[0, 1/2]` with an exact route for rational arguments and a
/// binary64 route.
#[derive(Clone)]
pub struct PsiFunction {
    exact: Arc<ExactFn>,
    float: Arc<FloatFn>,
    pub description: String,
}

impl PsiFunction {
    pub fn new(
        description: impl Into<String>,
        exact: impl Fn(&Rational) -> Result<Number> + Send + Sync + 'static,
        float: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        PsiFunction {
            exact: Arc::new(exact),
            float: Arc::new(float),
            description: description.into(),
        }
    }

    /// `t ↦ t^p`.
    pub fn monomial(p: u32) -> Self {
        PsiFunction::new(
            format!("t^{p}"),
            move |t| Ok(Number::Exact(t.pow(p))),
            move |t| Ok(t.powi(p as i32)),
        )
    }

    pub fn zero() -> Self {
        PsiFunction::new("0", |_| Ok(Number::zero()), |_| Ok(0.0))
    }

    pub fn eval(&self, t: &Rational) -> Result<Number> {
        (self.exact)(t)
    }

    pub fn eval_f64(&self, t: f64) -> Result<f64> {
        (self.float)(t)
    }
}

impl fmt::Debug for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiFunction")
            .field("description", &self.description)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedFormTerm {
    pub weight: Rational,
    pub scale: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormSource {
    /// Preperiod plus one folded periodic block.
    PeriodicBlocks,
    /// `λ ∈ {0, 1}`: every orbit term is zero.
    ZeroEndpoint,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClosedFormOptions {
    /// Keep the zero-scale tail as an explicit term. With it the form is exact
    /// even for `ψ(0) != 0`.
    pub keep_zero_scales: bool,
}

/// Finite `(weight, scale)` representation of `T_ψ(λ) = Σ weight · ψ(scale)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TakagiClosedForm {
    pub lambda: Rational,
    /// `None` for the endpoints.
    pub reduced: Option<ReducedLambda>,
    pub terms: Vec<ClosedFormTerm>,
    pub source: FormSource,
    /// Number of preperiodic terms (`j`).
    pub prefix_len: usize,
    /// Number of periodic-block terms (`ℓ`).
    pub block_len: usize,
    // weight_i = numerators[i] / denominator, all integers
    numerators: Vec<BigInt>,
    denominator: BigInt,
}

impl TakagiClosedForm {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(weight, scale)` pairs as fraction strings.
    pub fn as_string_pairs(&self) -> Vec<[String; 2]> {
        self.terms
            .iter()
            .map(|t| [t.weight.to_string(), t.scale.to_string()])
            .collect()
    }
}

pub fn closed_form(lambda: &Rational) -> Result<TakagiClosedForm> {
    closed_form_with(lambda, ClosedFormOptions::default())
}

pub fn closed_form_with(lambda: &Rational, options: ClosedFormOptions) -> Result<TakagiClosedForm> {
    if !lambda.is_in_unit_interval() {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} is not in [0,1]"
        )));
    }
    if lambda.is_zero() || *lambda == Rational::one() {
        let (terms, numerators) = if options.keep_zero_scales {
            let term = ClosedFormTerm {
                weight: Rational::integer(2),
                scale: Rational::zero(),
            };
            (vec![term], vec![BigInt::from(2)])
        } else {
            (Vec::new(), Vec::new())
        };
        return Ok(TakagiClosedForm {
            lambda: lambda.clone(),
            reduced: None,
            terms,
            source: FormSource::ZeroEndpoint,
            prefix_len: 0,
            block_len: 0,
            numerators,
            denominator: BigInt::one(),
        });
    }

    // d_Z(2^k λ) = d_Z(2^k (1-λ)), so work with the representative in (0, 1/2]
    let reduced = reduce_lambda(lambda)?;
    let orbit = orbit(&reduced.canonicalized())?;
    let j = orbit.j as u64;
    let ell = orbit.half_totient;

    // common denominator 2^j (2^ℓ - 1), or 2^j when the block is empty
    let block_factor: BigInt = if ell > 0 {
        (BigInt::one() << ell) - 1
    } else {
        BigInt::one()
    };
    let denominator: BigInt = &block_factor << j;

    let mut terms = Vec::with_capacity((j + ell) as usize + 1);
    let mut numerators = Vec::with_capacity((j + ell) as usize + 1);
    for k in 0..j {
        terms.push(ClosedFormTerm {
            weight: Rational::pow2_inv(k),
            scale: orbit.preperiod[k as usize].clone(),
        });
        numerators.push(&block_factor << (j - k));
    }
    for i in 0..ell {
        // 1/(2^{j+i} - 2^{j+i-ℓ}) = 2^{ℓ-i} / (2^j (2^ℓ - 1))
        let shift = ell - i;
        let weight = if shift >= j {
            Rational::from_reduced(BigInt::one() << (shift - j), block_factor.clone())
        } else {
            Rational::from_reduced(BigInt::one(), &block_factor << (j - shift))
        };
        terms.push(ClosedFormTerm {
            weight,
            scale: orbit.term(j + i).clone(),
        });
        numerators.push(BigInt::one() << shift);
    }
    if ell == 0 && options.keep_zero_scales {
        // tail Σ_{k>=j} 2^{-k} ψ(0) = 2^{1-j} ψ(0)
        terms.push(ClosedFormTerm {
            weight: Rational::pow2_inv(j) * Rational::integer(2),
            scale: Rational::zero(),
        });
        numerators.push(BigInt::from(2));
    }

    let form = TakagiClosedForm {
        lambda: lambda.clone(),
        reduced: Some(reduced),
        terms,
        source: FormSource::PeriodicBlocks,
        prefix_len: j as usize,
        block_len: ell as usize,
        numerators,
        denominator,
    };

    // Σ weight · scale² must reproduce λ(1-λ)
    let check = eval_closed(&form, &PsiFunction::monomial(2))?;
    let expected = Number::Exact(lambda * &(Rational::one() - lambda));
    if check != expected {
        return Err(Error::Internal(format!(
            "closed form of λ = {lambda}: Σ w s² = {check}, expected {expected}"
        )));
    }
    Ok(form)
}

/// `Σ weight · ψ(scale)`, exact whenever every `ψ(scale)` is exact.
pub fn eval_closed(form: &TakagiClosedForm, psi: &PsiFunction) -> Result<Number> {
    if form.terms.is_empty() {
        return Ok(Number::zero());
    }
    let values = form
        .terms
        .iter()
        .map(|t| psi.eval(&t.scale))
        .collect::<Result<Vec<_>>>()?;

    if values.iter().all(Number::is_exact) {
        // One reduction at the end instead of one per term: the weights can
        // carry thousands of bits.
        let exact: Vec<&Rational> = values.iter().filter_map(Number::as_exact).collect();
        let common = exact
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let mut total = BigInt::zero();
        for (num, v) in form.numerators.iter().zip(&exact) {
            if v.is_zero() {
                continue;
            }
            total += num * v.numer() * (&common / v.denom());
        }
        return Ok(Number::Exact(Rational::new(
            total,
            &form.denominator * common,
        )?));
    }

    let sum = form
        .terms
        .iter()
        .zip(&values)
        .map(|(t, v)| t.weight.to_f64() * v.to_f64())
        .sum();
    Ok(Number::Float(sum))
}

/// `Σ_k 2^{-k} ψ(d_Z(2^k λ))` summed directly over an orbit: the preperiod
/// term by term, then one minimal cycle of length `p` scaled by the geometric
/// factor `2^p/(2^p - 1)`. Unlike the closed form this includes the zero
/// tail, so it reads `ψ(0)` when the cycle is `[0]`.
pub fn orbit_sum(orbit: &DyadicOrbit, psi: &PsiFunction) -> Result<Number> {
    let j = orbit.j as u64;
    let p = orbit.minimal_period;
    let pre = orbit
        .preperiod
        .iter()
        .map(|d| psi.eval(d))
        .collect::<Result<Vec<_>>>()?;
    let cyc = orbit
        .cycle
        .iter()
        .map(|d| psi.eval(d))
        .collect::<Result<Vec<_>>>()?;
    let block: BigInt = (BigInt::one() << p) - 1;

    if pre.iter().chain(&cyc).all(Number::is_exact) {
        let values: Vec<&Rational> = pre
            .iter()
            .chain(&cyc)
            .filter_map(Number::as_exact)
            .collect();
        let common = values
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let scaled = |v: &Rational| v.numer() * (&common / v.denom());
        // numerator over 2^j (2^p - 1) · common
        let mut total = BigInt::zero();
        for (k, v) in values[..pre.len()].iter().enumerate() {
            total += (scaled(v) << (j - k as u64)) * &block;
        }
        for (i, v) in values[pre.len()..].iter().enumerate() {
            total += scaled(v) << (p - i as u64);
        }
        return Ok(Number::Exact(Rational::new(total, (block << j) * common)?));
    }

    let mut sum = 0.0;
    for (k, v) in pre.iter().enumerate() {
        sum += v.to_f64() * 0.5f64.powi(k as i32);
    }
    let mut cycle_sum = 0.0;
    for (i, v) in cyc.iter().enumerate() {
        cycle_sum += v.to_f64() * 0.5f64.powi(i as i32);
    }
    let factor = 1.0 / (1.0 - 0.5f64.powi(p as i32));
    Ok(Number::Float(
        sum + 0.5f64.powi(j as i32) * factor * cycle_sum,
    ))
}

/// `⟨λ⟩ = min { m >= 1 : m λ ∈ Z }`, the reduced denominator.
pub fn denominator_order(lambda: &Rational) -> BigInt {
    lambda.denom().clone()
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeriesArgument {
    Real(f64),
    Rational(Rational),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    /// `Σ_{k < terms} 2^{-k} ψ(d_Z(2^k λ))`.
    pub value: Number,
    /// Upper bound on the omitted tail.
    pub tail_bound: Number,
}

/// Extra doublings inspected past the truncation point when estimating
/// `sup |ψ|` on the binary64 route.
const FLOAT_LOOKAHEAD: u32 = 64;

/// Partial sum of the series with a bound on the remainder.
///
/// For a real argument the bound is `2^{1-terms} · max |ψ|` over the scales
/// visited. For a rational argument it is
/// `⟨λ⟩² 2^{-(terms+2)} max_{1<=m<=⟨λ⟩} |ψ(1/m)|`, valid for every `ψ` of the
/// form `t ↦ φ*(t u)`; it is zero at `λ ∈ {0, 1}`.
pub fn truncated_series(
    lambda: &SeriesArgument,
    psi: &PsiFunction,
    terms: u32,
) -> Result<TruncatedSeries> {
    if terms == 0 {
        return Err(Error::InvalidArgument(
            "at least one term is required".into(),
        ));
    }
    match lambda {
        SeriesArgument::Real(x) => {
            if !(0.0..=1.0).contains(x) {
                return Err(Error::InvalidArgument(format!("λ = {x} is not in [0,1]")));
            }
            let mut y = *x;
            let mut value = 0.0;
            let mut weight = 1.0;
            let mut sup = 0.0f64;
            for k in 0..terms + FLOAT_LOOKAHEAD {
                let s = dz_f64(y);
                let v = psi.eval_f64(s)?;
                sup = sup.max(v.abs());
                if k < terms {
                    value += weight * v;
                    weight *= 0.5;
                }
                y = 2.0 * s;
            }
            let tail = if *x == 0.0 || *x == 1.0 {
                psi.eval_f64(0.0)?.abs() * 2f64.powi(1 - terms as i32)
            } else {
                sup * 2f64.powi(1 - terms as i32)
            };
            Ok(TruncatedSeries {
                value: Number::Float(value),
                tail_bound: Number::Float(tail),
            })
        }
        SeriesArgument::Rational(lambda) => {
            if !lambda.is_in_unit_interval() {
                return Err(Error::InvalidArgument(format!(
                    "λ = {lambda} is not in [0,1]"
                )));
            }
            let two = Rational::integer(2);
            let mut d = dz(lambda);
            let mut value = Number::zero();
            for k in 0..terms {
                let v = psi.eval(&d)?;
                value = &value + &v.scale(&Rational::pow2_inv(k as u64));
                d = dz(&(&two * &d));
            }
            let order = denominator_order(lambda);
            let tail_bound = if order.is_one() {
                Number::zero()
            } else {
                let order = order.to_u64().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "⟨{lambda}⟩ is too large for the remainder bound"
                    ))
                })?;
                let mut max = Number::zero();
                for m in 1..=order {
                    max = max.max(psi.eval(&Rational::frac(1, m as i64))?.abs());
                }
                let factor = Rational::integer(BigInt::from(order) * BigInt::from(order))
                    * Rational::pow2_inv(terms as u64 + 2);
                max.scale(&factor)
            };
            Ok(TruncatedSeries { value, tail_bound })
        }
    }
}

/// Samples on the dyadic grid `{ i 2^{-N} : 0 <= i <= 2^N }`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid_exponent: u32,
    pub values: Vec<f64>,
    /// Sup-distance to the exact fixed point, when produced by the solver.
    pub error_bound: Option<f64>,
}

/// Largest grid exponent accepted (2^24 + 1 samples).
pub const MAX_GRID_EXPONENT: u32 = 24;

impl GridFunction {
    pub fn new(grid_exponent: u32, values: Vec<f64>) -> Result<Self> {
        check_grid_exponent(grid_exponent)?;
        let expected = (1usize << grid_exponent) + 1;
        if values.len() != expected {
            return Err(Error::NonDyadicGrid(format!(
                "{} samples, expected 2^{grid_exponent} + 1 = {expected}",
                values.len()
            )));
        }
        Ok(GridFunction {
            grid_exponent,
            values,
            error_bound: None,
        })
    }

    /// Samples `f` at every grid point.
    pub fn sample(grid_exponent: u32, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid_exponent(grid_exponent)?;
        let size = 1usize << grid_exponent;
        let values = (0..=size).map(|i| f(i as f64 / size as f64)).collect();
        GridFunction::new(grid_exponent, values)
    }

    pub fn size(&self) -> usize {
        1 << self.grid_exponent
    }

    pub fn lambda(&self, i: usize) -> f64 {
        i as f64 / self.size() as f64
    }

    /// Value at a dyadic rational of the grid.
    pub fn value_at(&self, lambda: &Rational) -> Option<f64> {
        let scaled = lambda * &Rational::integer(self.size() as i64);
        if !scaled.is_integer() {
            return None;
        }
        scaled
            .numer()
            .to_usize()
            .and_then(|i| self.values.get(i).copied())
    }
}

fn check_grid_exponent(n: u32) -> Result<()> {
    if n == 0 || n > MAX_GRID_EXPONENT {
        return Err(Error::NonDyadicGrid(format!(
            "grid exponent {n} outside 1..={MAX_GRID_EXPONENT}"
        )));
    }
    Ok(())
}

fn psi_on_grid(psi: &PsiFunction, grid_exponent: u32) -> Result<Vec<f64>> {
    let size = 1usize << grid_exponent;
    (0..=size / 2)
        .map(|i| psi.eval_f64(i as f64 / size as f64))
        .collect()
}

/// One application of the two-branch operator on grid values; the doubling
/// maps are the index maps `i ↦ 2i` and `i ↦ 2i - 2^N`.
fn apply_operator(f: &[f64], psi_half: &[f64], out: &mut [f64]) {
    let size = f.len() - 1;
    let half = size / 2;
    for i in 0..=half {
        out[i] = 0.5 * f[2 * i] + psi_half[i];
    }
    for i in half + 1..=size {
        out[i] = 0.5 * f[2 * i - size] + psi_half[size - i];
    }
}

/// Iterates the half-contraction `iterations` times from the zero function.
/// The result is within `2^{-I} · 2 sup|ψ|` of `T_ψ` on the grid.
pub fn fixed_point_solve(
    psi: &PsiFunction,
    grid_exponent: u32,
    iterations: u32,
) -> Result<GridFunction> {
    check_grid_exponent(grid_exponent)?;
    let psi_half = psi_on_grid(psi, grid_exponent)?;
    let sup = psi_half.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let size = 1usize << grid_exponent;
    let mut cur = vec![0.0; size + 1];
    let mut next = vec![0.0; size + 1];
    for _ in 0..iterations {
        apply_operator(&cur, &psi_half, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    debug_assert_eq!(cur[0], cur[size]);
    let mut grid = GridFunction::new(grid_exponent, cur)?;
    grid.error_bound = Some(2.0 * sup * 0.5f64.powi(iterations as i32));
    Ok(grid)
}

/// `max_i |f(λ_i) - (Tf)(λ_i)|` over the grid.
pub fn functional_equation_residual(f: &GridFunction, psi: &PsiFunction) -> Result<f64> {
    let psi_half = psi_on_grid(psi, f.grid_exponent)?;
    let mut image = vec![0.0; f.values.len()];
    apply_operator(&f.values, &psi_half, &mut image);
    Ok(f.values
        .iter()
        .zip(&image)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}
