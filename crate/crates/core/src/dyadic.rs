//! Distance to the nearest integer and the dyadic orbit `k ↦ d_Z(2^k λ)`.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::numtheory::{half_totient, mu_orbit, reduce_lambda, ReducedLambda};
use crate::rational::Rational;

/// `d_Z(x)`: distance from `x` to the nearest integer, in `[0, 1/2]`.
pub fn dz(x: &Rational) -> Rational {
    let frac = x - x.floor();
    let other = Rational::one() - &frac;
    frac.min(other)
}

/// Binary64 `d_Z`, nearest integer chosen with ties to even.
pub fn dz_f64(x: f64) -> f64 {
    (x - x.round_ties_even()).abs()
}

/// Checks `d_Z(2x) = d_Z(2 d_Z(x)) = min(2 d_Z(x), 1 - 2 d_Z(x))` exactly.
pub fn dz_double_identity_check(x: &Rational) -> bool {
    let two = Rational::integer(2);
    let d = dz(x);
    let lhs = dz(&(&two * x));
    let via_dz = dz(&(&two * &d));
    let closed = (&two * &d).min(Rational::one() - &two * &d);
    lhs == via_dz && via_dz == closed
}

/// `d_Z(2^k x)` computed as `(d_Z ∘ (2 d_Z)^k)(x)`, so the intermediate values
/// stay in `[0, 1]` instead of growing like `2^k`.
pub fn dz_iterate(x: &Rational, k: u64) -> Rational {
    let two = Rational::integer(2);
    let mut y = x.clone();
    for _ in 0..k {
        y = &two * &dz(&y);
    }
    dz(&y)
}

/// The eventually periodic sequence `d_Z(2^k λ)` for rational `λ ∈ [0,1]`.
///
/// For `λ = m / (2^j n)` the first `j` terms form the preperiod and the tail
/// repeats with a minimal period dividing `ℓ = φ(n)/2`. When `n = 1` (which
/// includes `λ ∈ {0, 1}`) the cycle is `[0]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicOrbit {
    pub lambda: Rational,
    /// `None` for `λ ∈ {0, 1}`.
    pub reduced: Option<ReducedLambda>,
    pub j: u32,
    pub n: u64,
    /// `ℓ = floor(φ(n)/2)`.
    pub half_totient: u64,
    pub preperiod: Vec<Rational>,
    pub cycle: Vec<Rational>,
    pub minimal_period: u64,
}

impl DyadicOrbit {
    /// `d_Z(2^k λ)` for any `k`.
    pub fn term(&self, k: u64) -> &Rational {
        let j = self.j as u64;
        if k < j {
            &self.preperiod[k as usize]
        } else {
            &self.cycle[((k - j) % self.minimal_period) as usize]
        }
    }
}

/// Orbit of `λ ∈ (0,1)`. Both the direct doubling recursion and the `mu_n`
/// cycle are computed and must agree on `k <= j + 2ℓ`.
pub fn orbit(lambda: &ReducedLambda) -> Result<DyadicOrbit> {
    let ReducedLambda { m, j, n, .. } = *lambda;
    let ell = half_totient(n)?;

    // direct path on residues: 2^k λ = a_k / den (mod 1), a_{k+1} = 2 a_k mod den,
    // d_Z(2^k λ) = min(a_k, den - a_k) / den
    let den = lambda.denominator() as u128;
    let horizon = j as u64 + 2 * ell;
    let mut direct = Vec::with_capacity(horizon as usize + 1);
    let mut a = m as u128 % den;
    for _ in 0..=horizon {
        direct.push(a.min(den - a));
        a = 2 * a % den;
    }

    let preperiod = direct[..j as usize]
        .iter()
        .map(|&d| Rational::new(BigInt::from(d), BigInt::from(den)))
        .collect::<Result<Vec<_>>>()?;
    let (cycle, states, minimal_period) = if n == 1 {
        (vec![Rational::zero()], vec![0], 1)
    } else {
        // 2^j λ = m/n; normalize m to m' ∈ M_n with n | m - m' or n | m + m'
        let r = m % n;
        let start = r.min(n - r);
        let mu = mu_orbit(n, start)?;
        let cycle: Vec<Rational> = mu
            .states
            .iter()
            .map(|&s| Rational::from_reduced(BigInt::from(s), BigInt::from(n)))
            .collect();
        (cycle, mu.states, mu.period)
    };

    // past the preperiod den = 2^j n, so d_k = state / n means d_k · den = state · 2^j
    for (k, &d) in direct.iter().enumerate().skip(j as usize) {
        let i = (k - j as usize) % minimal_period as usize;
        if d != (states[i] as u128) << j {
            return Err(Error::Internal(format!(
                "λ = {}: d_Z(2^{k} λ) = {d}/{den} by doubling but {} from the mu_{n} cycle",
                lambda.value, cycle[i]
            )));
        }
    }

    Ok(DyadicOrbit {
        lambda: lambda.value.clone(),
        reduced: Some(lambda.clone()),
        j,
        n,
        half_totient: ell,
        preperiod,
        cycle,
        minimal_period,
    })
}

/// Orbit of any rational `λ ∈ [0,1]`; the endpoints give the all-zero orbit.
pub fn orbit_of(lambda: &Rational) -> Result<DyadicOrbit> {
    if !lambda.is_in_unit_interval() {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} is not in [0,1]"
        )));
    }
    if lambda.is_zero() || *lambda == Rational::one() {
        return Ok(DyadicOrbit {
            lambda: lambda.clone(),
            reduced: None,
            j: 0,
            n: 1,
            half_totient: 0,
            preperiod: Vec::new(),
            cycle: vec![Rational::zero()],
            minimal_period: 1,
        });
    }
    orbit(&reduce_lambda(lambda)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::{mod_pow, mu_unchecked, residue_set};
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        Rational::frac(p, q)
    }

    /// `|x - k|` minimized over a window of integers around `x`.
    fn dz_brute(x: &Rational) -> Rational {
        let f = x.floor();
        (-2..=3)
            .map(|k| (x - (&f + Rational::integer(k))).abs())
            .min()
            .unwrap()
    }

    #[test]
    fn dz_examples() {
        assert_eq!(dz(&Rational::zero()), Rational::zero());
        assert_eq!(dz(&r(7, 10)), r(3, 10));
        assert_eq!(dz_brute(&r(-13, 5)), r(2, 5));
        assert_eq!(dz(&r(-13, 5)), r(2, 5));
    }

    #[test]
    fn dz_f64_examples() {
        assert_eq!(dz_f64(0.7), 0.30000000000000004);
        assert_eq!(dz_f64(2.5), 0.5);
        assert_eq!(dz_f64(-2.6), 0.3999999999999999);
    }

    #[test]
    fn double_identity_examples() {
        assert!(dz_double_identity_check(&r(1, 5)));
        assert_eq!(dz(&r(2, 5)), r(2, 5));
        assert!(dz_double_identity_check(&r(2, 5)));
        assert_eq!(dz(&r(4, 5)), r(1, 5));
        assert!(dz_double_identity_check(&r(1, 2)));
    }

    #[test]
    fn dz_iterate_examples() {
        assert_eq!(dz_iterate(&r(1, 5), 2), r(1, 5));
        assert_eq!(dz_iterate(&r(3, 7), 0), dz(&r(3, 7)));
        assert_eq!(dz_iterate(&r(1, 6), 1), r(1, 3));
    }

    #[test]
    fn orbit_examples() {
        let o = orbit_of(&r(1, 5)).unwrap();
        assert!(o.preperiod.is_empty());
        assert_eq!(o.cycle, vec![r(1, 5), r(2, 5)]);
        assert_eq!(o.minimal_period, 2);

        let o = orbit_of(&r(1, 6)).unwrap();
        assert_eq!(o.preperiod, vec![r(1, 6)]);
        assert_eq!(o.cycle, vec![r(1, 3)]);
        assert_eq!((o.minimal_period, o.half_totient), (1, 1));

        let o = orbit_of(&r(1, 4)).unwrap();
        assert_eq!(o.preperiod, vec![r(1, 4), r(1, 2)]);
        assert_eq!(o.cycle, vec![Rational::zero()]);
        assert_eq!(o.half_totient, 0);
    }

    #[test]
    fn endpoint_orbits_are_zero() {
        for lambda in [Rational::zero(), Rational::one()] {
            let o = orbit_of(&lambda).unwrap();
            assert!(o.preperiod.is_empty());
            assert_eq!(o.cycle, vec![Rational::zero()]);
        }
        assert!(orbit_of(&r(3, 2)).is_err());
    }

    #[test]
    fn orbit_matches_naive_doubling() {
        for q in 2..=80i64 {
            for p in 1..q {
                let lambda = r(p, q);
                let o = orbit_of(&lambda).unwrap();
                let horizon = o.j as u64 + 2 * o.minimal_period;
                let mut x = lambda.clone();
                for k in 0..=horizon {
                    // explicit 2^k λ, no recursion
                    assert_eq!(dz(&x), *o.term(k), "λ = {lambda}, k = {k}");
                    x = &x * &Rational::integer(2);
                }
                for c in &o.cycle {
                    assert_eq!(o.n % denom_u64(c).unwrap(), 0);
                    assert!(*c <= Rational::half());
                }
                if o.n >= 3 {
                    assert_eq!(o.half_totient % o.minimal_period, 0);
                }
            }
        }
    }

    /// Numerator of `d_Z(2^k m / n)` over `n`, straight from `2^k m mod n`.
    fn dz_numerator_pow(n: u64, m: u64, k: u64) -> u64 {
        let r = (mod_pow(2, k, n) as u128 * m as u128 % n as u128) as u64;
        r.min(n - r)
    }

    #[test]
    fn iterate_matches_mu_orbit() {
        for n in (3..500u64).step_by(2) {
            let ell = half_totient(n).unwrap();
            for m in residue_set(n).unwrap() {
                let mut state = m;
                for k in 0..=3 * ell {
                    assert_eq!(state, dz_numerator_pow(n, m, k), "n={n} m={m} k={k}");
                    state = mu_unchecked(n, state);
                }
                if n < 60 {
                    let x = r(m as i64, n as i64);
                    for k in 0..=2 * ell {
                        let expected = r(dz_numerator_pow(n, m, k) as i64, n as i64);
                        assert_eq!(dz_iterate(&x, k), expected, "n={n} m={m} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn ell_periodic_from_start_for_odd_denominators() {
        for n in (3..500u64).step_by(2) {
            let ell = half_totient(n).unwrap();
            for m in 1..n {
                if gcd_i(m as i64, n as i64) != 1 {
                    continue;
                }
                for k in 0..=2 * ell {
                    assert_eq!(
                        dz_numerator_pow(n, m, k),
                        dz_numerator_pow(n, m, k + ell),
                        "m/n = {m}/{n}, k = {k}"
                    );
                }
            }
        }
    }

    fn denom_u64(x: &Rational) -> Option<u64> {
        x.denom().to_u64()
    }

    fn gcd_i(a: i64, b: i64) -> u64 {
        crate::numtheory::gcd(a, b)
    }

    fn rational_strategy() -> impl Strategy<Value = Rational> {
        (-1_000_000i64..1_000_000, 1i64..100_000).prop_map(|(p, q)| r(p, q))
    }

    proptest! {
        #[test]
        fn dz_range_and_symmetries(x in rational_strategy()) {
            let d = dz(&x);
            prop_assert!(!d.is_negative() && d <= Rational::half());
            prop_assert_eq!(&d, &dz(&(&x + &Rational::one())));
            prop_assert_eq!(&d, &dz(&-&x));
        }

        #[test]
        fn doubling_identity_holds(x in rational_strategy()) {
            prop_assert!(dz_double_identity_check(&x));
        }
    }
}
