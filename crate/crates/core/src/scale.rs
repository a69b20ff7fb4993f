//! The frequency parameter λ, every derived scale, and exact rational exponents.
//!
//! All scales are powers of λ (times constants):
//!
//! | scale    | value               | λ-exponent |
//! |----------|---------------------|------------|
//! | `r`      | cap angular radius  | −2/3       |
//! | `rho`    | tube cross-section  | −1/2       |
//! | `d`      | density parameter D | +1/12      |
//! | `alpha`  | `c0 · r · √D`       | −5/8       |
//! | `t_half` | `λ^{-3/2} / 2`      | −3/2       |
//! | `x_half` | `λ^{-1/2} / 2`      | −1/2       |

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default constant in `alpha = c0 · r · √D`.
pub const DEFAULT_C0: f64 = 1e-3;

/// An exact rational exponent, always stored in lowest terms with a positive
/// denominator.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RationalExponent(Ratio<i64>);

impl RationalExponent {
    /// Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        RationalExponent(Ratio::new(num, den))
    }

    pub fn try_new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        Ok(Self::new(num, den))
    }

    pub fn integer(n: i64) -> Self {
        RationalExponent(Ratio::from_integer(n))
    }

    pub fn zero() -> Self {
        RationalExponent(Ratio::zero())
    }

    pub fn num(&self) -> i64 {
        *self.0.numer()
    }

    pub fn den(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `self^k` for a non-negative integer power.
    pub fn powi(&self, k: u32) -> Self {
        RationalExponent(self.0.pow(k as i32))
    }
}

impl fmt::Display for RationalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den() == 1 {
            write!(f, "{}", self.num())
        } else {
            write!(f, "{}/{}", self.num(), self.den())
        }
    }
}

impl fmt::Debug for RationalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for RationalExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a rational exponent: `{s}`"));
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| bad())?;
                let d: i64 = d.trim().parse().map_err(|_| bad())?;
                Self::try_new(n, d)
            }
            None => s.parse().map(Self::integer).map_err(|_| bad()),
        }
    }
}

impl Serialize for RationalExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RationalExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for RationalExponent {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        RationalExponent(self.0 + rhs.0)
    }
}

impl Sub for RationalExponent {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        RationalExponent(self.0 - rhs.0)
    }
}

impl Neg for RationalExponent {
    type Output = Self;
    fn neg(self) -> Self {
        RationalExponent(-self.0)
    }
}

impl Mul for RationalExponent {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        RationalExponent(self.0 * rhs.0)
    }
}

impl Mul<i64> for RationalExponent {
    type Output = Self;
    fn mul(self, rhs: i64) -> Self {
        RationalExponent(self.0 * rhs)
    }
}

impl Div<i64> for RationalExponent {
    type Output = Self;
    fn div(self, rhs: i64) -> Self {
        RationalExponent(self.0 / rhs)
    }
}

impl Sum for RationalExponent {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), Add::add)
    }
}

/// Shorthand for `RationalExponent::new`.
pub fn q(num: i64, den: i64) -> RationalExponent {
    RationalExponent::new(num, den)
}

/// λ-exponents of the derived scales.
pub mod exponents {
    use super::{q, RationalExponent};

    pub fn r() -> RationalExponent {
        q(-2, 3)
    }
    pub fn rho() -> RationalExponent {
        q(-1, 2)
    }
    /// `D = λ^{1/12}`.
    pub fn d() -> RationalExponent {
        q(1, 12)
    }
    /// `alpha = c0 · r · D^{1/2}`.
    pub fn alpha() -> RationalExponent {
        r() + d() / 2
    }
    pub fn t_half() -> RationalExponent {
        q(-3, 2)
    }
    pub fn x_half() -> RationalExponent {
        q(-1, 2)
    }
}

/// λ together with all derived scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub lambda: f64,
    pub c0: f64,
    pub r: f64,
    pub rho: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub alpha: f64,
    pub t_half: f64,
    pub x_half: f64,
}

impl ScaleParams {
    pub fn derive(lambda: f64, c0: f64) -> Result<Self> {
        if !(lambda >= 2.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be a finite real >= 2, got {lambda}")));
        }
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::Domain(format!("c0 must be positive, got {c0}")));
        }
        let r = lambda.powf(-2.0 / 3.0);
        let rho = lambda.powf(-0.5);
        let d = lambda.powf(1.0 / 12.0);
        Ok(ScaleParams {
            lambda,
            c0,
            r,
            rho,
            d,
            alpha: c0 * r * d.sqrt(),
            t_half: 0.5 * lambda.powf(-1.5),
            x_half: 0.5 * rho,
        })
    }

    /// `derive(lambda, DEFAULT_C0)`.
    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::derive(lambda, DEFAULT_C0)
    }

    /// `|Q_λ| = 2 t_half · (4/3) π x_half³`.
    pub fn q_volume(&self) -> f64 {
        2.0 * self.t_half * 4.0 / 3.0 * std::f64::consts::PI * self.x_half.powi(3)
    }

    /// Unclipped tube cylinder `2 t_half · (4/3) π ρ³`.
    pub fn tube_cylinder_volume(&self) -> f64 {
        2.0 * self.t_half * 4.0 / 3.0 * std::f64::consts::PI * self.rho.powi(3)
    }

    pub fn lambda_alpha(&self) -> f64 {
        self.lambda * self.alpha
    }

    /// `λ^e` for an exact exponent.
    pub fn lambda_pow(&self, e: RationalExponent) -> f64 {
        self.lambda.powf(e.to_f64())
    }
}

/// Folds a D-exponent into the λ-exponent using `D = λ^{1/12}`.
pub fn effective_lambda_exponent(
    sigma_lambda: RationalExponent,
    sigma_d: RationalExponent,
) -> RationalExponent {
    sigma_lambda + sigma_d * exponents::d()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn derive_at_4096() {
        let s = ScaleParams::with_lambda(4096.0).unwrap();
        assert!(rel(s.r, 2f64.powi(-8)) < 1e-14);
        assert!(rel(s.rho, 2f64.powi(-6)) < 1e-14);
        assert!(rel(s.d, 2.0) < 1e-14);
        assert!(rel(s.alpha, 1e-3 * 2f64.powf(-7.5)) < 1e-13);
        assert!((s.alpha - 5.524e-6).abs() < 1e-9);
    }

    #[test]
    fn derive_at_256() {
        let s = ScaleParams::with_lambda(256.0).unwrap();
        assert_eq!(s.rho, 1.0 / 16.0);
        assert!(rel(s.t_half, 2f64.powi(-13)) < 1e-15);
        assert_eq!(s.x_half, 1.0 / 32.0);
    }

    #[test]
    fn rejects_small_lambda_and_bad_c0() {
        assert!(matches!(ScaleParams::with_lambda(1.5), Err(Error::Domain(_))));
        assert!(ScaleParams::with_lambda(f64::NAN).is_err());
        assert!(ScaleParams::derive(16.0, 0.0).is_err());
        assert!(ScaleParams::with_lambda(2.0).is_ok());
    }

    #[test]
    fn field_identities_hold_on_ladder() {
        for k in 4..=14 {
            let lam = 2f64.powi(k);
            let s = ScaleParams::with_lambda(lam).unwrap();
            let checks = [
                (s.r, lam.powf(-2.0 / 3.0)),
                (s.rho, lam.powf(-0.5)),
                (s.d, lam.powf(1.0 / 12.0)),
                (s.alpha, s.c0 * lam.powf(-5.0 / 8.0)),
                (s.alpha / s.r, s.c0 * s.d.sqrt()),
                (s.alpha / (s.r * s.d.sqrt()), 1e-3),
                (s.t_half, 0.5 * lam.powf(-1.5)),
                (s.x_half, 0.5 * lam.powf(-0.5)),
                (s.c0, DEFAULT_C0),
            ];
            for (got, want) in checks {
                assert!(rel(got, want) <= 1e-12, "lambda={lam}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn alpha_exponent_is_minus_five_eighths() {
        assert_eq!(exponents::alpha(), q(-5, 8));
    }

    #[test]
    fn effective_exponent_examples() {
        assert_eq!(effective_lambda_exponent(q(-9, 2), q(-3, 1)), q(-19, 4));
        assert_eq!(effective_lambda_exponent(q(0, 1), q(0, 1)), q(0, 1));
        assert_eq!(effective_lambda_exponent(q(-2557, 576), q(-3, 1)), q(-2701, 576));
    }

    #[test]
    fn lowest_terms_and_display() {
        let x = q(6, -8);
        assert_eq!((x.num(), x.den()), (-3, 4));
        assert_eq!(x.to_string(), "-3/4");
        assert_eq!(q(4, 2).to_string(), "2");
        assert_eq!("-2557/576".parse::<RationalExponent>().unwrap(), q(-2557, 576));
        assert_eq!(" 7 ".parse::<RationalExponent>().unwrap(), q(7, 1));
        assert!("1/0".parse::<RationalExponent>().is_err());
        assert!("x".parse::<RationalExponent>().is_err());
    }

    fn small_rational() -> impl Strategy<Value = RationalExponent> {
        (-10_000i64..10_000, 1i64..2_000).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #[test]
        fn arithmetic_is_associative_and_commutative(a in small_rational(), b in small_rational(), c in small_rational()) {
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a - a, RationalExponent::zero());
            prop_assert!(a.den() > 0);
        }

        #[test]
        fn string_round_trip(a in small_rational()) {
            let back: RationalExponent = a.to_string().parse().unwrap();
            prop_assert_eq!(back, a);
            let json = serde_json::to_string(&a).unwrap();
            let back: RationalExponent = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
