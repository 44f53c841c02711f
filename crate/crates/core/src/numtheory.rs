//! Integer arithmetic behind the dyadic orbit: totients, the reduced residue
//! set `M_n`, the halving-doubling map `mu_n`, and the decomposition of a
//! rational `λ` as `m / (2^j n)` with `n` odd.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub fn gcd(a: i64, b: i64) -> u64 {
    a.unsigned_abs().gcd(&b.unsigned_abs())
}

/// Euler's totient by trial-division factorization.
pub fn totient(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidArgument("totient(0) is undefined".into()));
    }
    let mut rest = n;
    let mut phi = n;
    let mut p = 2u64;
    while p.saturating_mul(p) <= rest {
        if rest.is_multiple_of(p) {
            while rest.is_multiple_of(p) {
                rest /= p;
            }
            phi -= phi / p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        phi -= phi / rest;
    }
    Ok(phi)
}

/// `ℓ = floor(φ(n) / 2)` for odd `n`; zero exactly when `n = 1`.
pub fn half_totient(n: u64) -> Result<u64> {
    if n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "half_totient needs odd n, got {n}"
        )));
    }
    Ok(totient(n)? / 2)
}

fn check_odd_modulus(n: u64) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "expected odd n >= 3, got {n}"
        )));
    }
    Ok(())
}

/// `M_n`: the integers in `1..=(n-1)/2` coprime to `n`, ascending.
pub fn residue_set(n: u64) -> Result<Vec<u64>> {
    check_odd_modulus(n)?;
    Ok((1..=(n - 1) / 2).filter(|m| m.gcd(&n) == 1).collect())
}

fn in_residue_set(n: u64, m: u64) -> bool {
    m >= 1 && m <= (n - 1) / 2 && m.gcd(&n) == 1
}

/// `mu_n(m) = min(2m, n - 2m)`, a permutation of `M_n`.
pub fn mu(n: u64, m: u64) -> Result<u64> {
    check_odd_modulus(n)?;
    if !in_residue_set(n, m) {
        return Err(Error::InvalidArgument(format!("{m} is not in M_{n}")));
    }
    Ok(mu_unchecked(n, m))
}

#[inline]
pub(crate) fn mu_unchecked(n: u64, m: u64) -> u64 {
    (2 * m).min(n - 2 * m)
}

/// The cycle of `mu_n` through `start`.
///
/// `states` holds one full cycle, `states[0] = start`, and applying `mu_n` to
/// the last state returns to `start`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuOrbit {
    pub n: u64,
    pub start: u64,
    pub states: Vec<u64>,
    /// Minimal period. Always divides `half_totient(n)`.
    pub period: u64,
}

pub fn mu_orbit(n: u64, m: u64) -> Result<MuOrbit> {
    check_odd_modulus(n)?;
    if !in_residue_set(n, m) {
        return Err(Error::InvalidArgument(format!("{m} is not in M_{n}")));
    }
    let ell = half_totient(n)?;
    let mut states = vec![m];
    let mut cur = mu_unchecked(n, m);
    while cur != m {
        if states.len() as u64 >= ell {
            return Err(Error::Internal(format!(
                "mu_{n} did not return to {m} within {ell} steps"
            )));
        }
        states.push(cur);
        cur = mu_unchecked(n, cur);
    }
    let period = states.len() as u64;
    if ell % period != 0 {
        return Err(Error::Internal(format!(
            "period {period} of mu_{n} at {m} does not divide {ell}"
        )));
    }
    Ok(MuOrbit {
        n,
        start: m,
        states,
        period,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SharpenedEuler {
    /// `n | a^ℓ - 1`
    DividesMinus,
    /// `n | a^ℓ + 1`
    DividesPlus,
}

pub fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let m = modulus as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

/// Decides which of `a^ℓ ≡ 1` or `a^ℓ ≡ -1 (mod n)` holds, `ℓ = φ(n)/2`.
pub fn euler_sharpened_check(n: u64, a: i64) -> Result<SharpenedEuler> {
    check_odd_modulus(n)?;
    if gcd(a, n as i64) != 1 {
        return Err(Error::InvalidArgument(format!("{a} is not coprime to {n}")));
    }
    let ell = half_totient(n)?;
    let base = a.rem_euclid(n as i64) as u64;
    let r = mod_pow(base, ell, n);
    if r == 1 {
        Ok(SharpenedEuler::DividesMinus)
    } else if r == n - 1 {
        Ok(SharpenedEuler::DividesPlus)
    } else {
        Err(Error::Internal(format!(
            "{a}^{ell} = {r} (mod {n}) is neither 1 nor -1"
        )))
    }
}

/// A rational `λ ∈ (0,1)` written as `m / (2^j n)` in lowest terms, `n` odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedLambda {
    pub m: u64,
    pub j: u32,
    pub n: u64,
    pub value: Rational,
    /// `value <= 1/2`.
    pub canonical: bool,
}

impl ReducedLambda {
    pub fn denominator(&self) -> u64 {
        self.n << self.j
    }

    pub fn half_totient(&self) -> u64 {
        // n is odd by construction
        half_totient(self.n).unwrap_or(0)
    }

    /// The same decomposition for `1 - λ`, which shares `j` and `n`.
    pub fn complement(&self) -> ReducedLambda {
        let value = Rational::one() - &self.value;
        let canonical = value <= Rational::half();
        ReducedLambda {
            m: self.denominator() - self.m,
            j: self.j,
            n: self.n,
            value,
            canonical,
        }
    }

    /// `λ` if `λ <= 1/2`, otherwise `1 - λ`.
    pub fn canonicalized(&self) -> ReducedLambda {
        if self.canonical {
            self.clone()
        } else {
            self.complement()
        }
    }
}

pub fn reduce_lambda(lambda: &Rational) -> Result<ReducedLambda> {
    if lambda.is_negative() || lambda.is_zero() || *lambda >= Rational::one() {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} is not in (0,1)"
        )));
    }
    let too_big =
        || Error::InvalidArgument(format!("λ = {lambda} has a denominator beyond 64 bits"));
    let denom: &BigInt = lambda.denom();
    let j = denom.trailing_zeros().unwrap_or(0);
    let n = (denom >> j).to_u64().ok_or_else(too_big)?;
    let m = lambda.numer().to_u64().ok_or_else(too_big)?;
    if j >= 64 || (n << j) >> j != n {
        return Err(too_big());
    }
    debug_assert!(n % 2 == 1 && BigInt::from(m).gcd(denom).is_one());
    Ok(ReducedLambda {
        m,
        j: j as u32,
        n,
        value: lambda.clone(),
        canonical: *lambda <= Rational::half(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_totient(n: u64) -> u64 {
        (1..=n).filter(|k| k.gcd(&n) == 1).count() as u64
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(gcd(0, 7), 7);
        assert_eq!(gcd(0, 0), 0);
        assert_eq!(gcd(-12, 18), 6);
        let big = 3i64.pow(30) * 7;
        let oracle = (1..=1701i64)
            .rev()
            .find(|d| big % d == 0 && 1701 % d == 0)
            .unwrap();
        assert_eq!(oracle, 1701);
        assert_eq!(gcd(big, 1701), 1701);
    }

    #[test]
    fn totient_examples() {
        assert_eq!(totient(1).unwrap(), 1);
        assert_eq!(brute_totient(9), 6);
        assert_eq!(totient(9).unwrap(), 6);
        assert_eq!(brute_totient(15), 8);
        assert_eq!(totient(15).unwrap(), 8);
        assert!(totient(0).is_err());
        for n in 1..=500 {
            assert_eq!(totient(n).unwrap(), brute_totient(n), "n = {n}");
        }
    }

    #[test]
    fn half_totient_examples() {
        assert_eq!(half_totient(1).unwrap(), 0);
        assert_eq!(half_totient(5).unwrap(), 2);
        assert_eq!(half_totient(3).unwrap(), 1);
        assert!(half_totient(4).is_err());
    }

    #[test]
    fn residue_set_examples() {
        assert_eq!(residue_set(5).unwrap(), vec![1, 2]);
        assert_eq!(residue_set(9).unwrap(), vec![1, 2, 4]);
        assert_eq!(residue_set(15).unwrap(), vec![1, 2, 4, 7]);
        assert!(residue_set(1).is_err());
        assert!(residue_set(8).is_err());
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu(5, 1).unwrap(), 2);
        assert_eq!(mu(5, 2).unwrap(), 1);
        assert_eq!(mu(15, 4).unwrap(), 7);
        assert!(mu(15, 3).is_err());
        assert!(mu(15, 8).is_err());
    }

    #[test]
    fn mu_orbit_examples() {
        let o = mu_orbit(5, 1).unwrap();
        assert_eq!((o.states, o.period), (vec![1, 2], 2));
        let o = mu_orbit(7, 1).unwrap();
        assert_eq!((o.states, o.period), (vec![1, 2, 3], 3));
        let o = mu_orbit(9, 1).unwrap();
        assert_eq!((o.states, o.period), (vec![1, 2, 4], 3));
        assert!(mu_orbit(9, 3).is_err());
    }

    #[test]
    fn sharpened_euler_examples() {
        // 2^2 = 4 = -1 mod 5; 2^3 = 8 = 1 mod 7; 2^3 = 8 = -1 mod 9
        assert_eq!(
            euler_sharpened_check(5, 2).unwrap(),
            SharpenedEuler::DividesPlus
        );
        assert_eq!(
            euler_sharpened_check(7, 2).unwrap(),
            SharpenedEuler::DividesMinus
        );
        assert_eq!(
            euler_sharpened_check(9, 2).unwrap(),
            SharpenedEuler::DividesPlus
        );
        // (-2)^3 = -8 = 1 mod 9
        assert_eq!(
            euler_sharpened_check(9, -2).unwrap(),
            SharpenedEuler::DividesMinus
        );
        assert!(euler_sharpened_check(9, 3).is_err());
        assert!(euler_sharpened_check(8, 3).is_err());
    }

    #[test]
    fn reduce_lambda_examples() {
        let r = reduce_lambda(&Rational::frac(1, 6)).unwrap();
        assert_eq!((r.m, r.j, r.n), (1, 1, 3));
        let r = reduce_lambda(&Rational::frac(1, 5)).unwrap();
        assert_eq!((r.m, r.j, r.n), (1, 0, 5));
        let r = reduce_lambda(&Rational::frac(3, 4)).unwrap();
        assert_eq!((r.m, r.j, r.n), (3, 2, 1));
        assert!(!r.canonical);
        assert_eq!(r.canonicalized().m, 1);
        assert!(reduce_lambda(&Rational::zero()).is_err());
        assert!(reduce_lambda(&Rational::one()).is_err());
        assert!(reduce_lambda(&Rational::frac(-1, 3)).is_err());
    }

    #[test]
    fn mu_is_bijection_with_period_dividing_ell() {
        for n in (3..1000u64).step_by(2) {
            let set = residue_set(n).unwrap();
            let ell = half_totient(n).unwrap();
            assert_eq!(set.len() as u64, ell);
            let mut image: Vec<u64> = set.iter().map(|&m| mu(n, m).unwrap()).collect();
            image.sort_unstable();
            assert_eq!(image, set, "mu_{n} is not a permutation");
            for &m in &set {
                let mut x = m;
                for _ in 0..ell {
                    x = mu_unchecked(n, x);
                }
                assert_eq!(x, m, "mu_{n}^{ell}({m}) != {m}");
            }
            euler_sharpened_check(n, 2).unwrap();
        }
    }

    #[test]
    fn totient_is_multiplicative() {
        for a in 1..=100u64 {
            for b in 1..=100u64 {
                if a.gcd(&b) == 1 {
                    assert_eq!(
                        totient(a * b).unwrap(),
                        totient(a).unwrap() * totient(b).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn reduce_lambda_round_trips() {
        for q in 2..=300i64 {
            for p in 1..q {
                let lambda = Rational::frac(p, q);
                let r = reduce_lambda(&lambda).unwrap();
                let back = Rational::frac(r.m as i64, (r.n << r.j) as i64);
                assert_eq!(back, lambda);
                assert_eq!(r.n % 2, 1);
            }
        }
    }
}
