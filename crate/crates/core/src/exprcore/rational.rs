//! Exact rational arithmetic: the coefficient field for everything symbolic.
//!
//! `Rat` is an arbitrary-precision rational kept in lowest terms with a
//! positive denominator; both invariants are maintained by the backing
//! implementation on every operation.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = num_rational::BigRational;

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational `n/d`. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

pub fn is_zero(r: &Rat) -> bool {
    r.is_zero()
}

pub fn is_one(r: &Rat) -> bool {
    r.is_one()
}

pub fn is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Integer power with negative exponents allowed (exact).
pub fn rat_pow(base: &Rat, exp: i64) -> Rat {
    if exp >= 0 {
        num_traits::pow::Pow::pow(base.clone(), exp as u64)
    } else {
        num_traits::pow::Pow::pow(base.clone().recip(), (-exp) as u64)
    }
}

/// `r^(p/q)` when the result is again rational (exact integer roots of
/// numerator and denominator), otherwise `None`.
pub fn rat_root_pow(r: &Rat, p: i64, q: u32) -> Option<Rat> {
    if q == 0 {
        return None;
    }
    if q == 1 {
        return Some(rat_pow(r, p));
    }
    if r.is_negative() {
        return None;
    }
    let num = r.numer().nth_root(q);
    let den = r.denom().nth_root(q);
    if &num.clone().pow(q) != r.numer() || &den.clone().pow(q) != r.denom() {
        return None;
    }
    Some(rat_pow(&Rat::new(num, den), p))
}

/// Canonical `p/q` or plain integer rendering.
pub fn fmt_rat(r: &Rat) -> alloc::string::String {
    use alloc::string::ToString;
    if is_integer(r) {
        r.numer().to_string()
    } else {
        alloc::format!("{}/{}", r.numer(), r.denom())
    }
}
