//! Exact rational helpers shared by every module.

use std::fmt;

use num::bigint::{BigInt, Sign};
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rand::RngCore;

/// Arbitrary-precision rational, always kept in lowest terms by `num`.
pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// `2^-k`.
pub fn pow2_neg(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

/// `n / 2^k`.
pub fn dyadic(n: u64, k: u32) -> Rational {
    Rational::new(BigInt::from(n), BigInt::one() << k as usize)
}

/// `max(0, x)`.
pub fn clamp0(x: Rational) -> Rational {
    if x.is_negative() {
        Rational::zero()
    } else {
        x
    }
}

/// If `r` is a dyadic rational, return `(numerator, level)` in lowest terms.
pub fn as_dyadic(r: &Rational) -> Option<(BigInt, u32)> {
    let d = r.denom();
    if d.sign() != Sign::Plus {
        return None;
    }
    let tz = d.trailing_zeros().unwrap_or(0);
    if (d >> tz as usize) != BigInt::one() {
        return None;
    }
    Some((r.numer().clone(), tz as u32))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational literal `{0}`")]
pub struct ParseRationalError(pub String);

/// Parse `p/q`, an integer, or a finite decimal such as `0.25`.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let t = s.trim();
    let err = || ParseRationalError(s.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        if fp.is_empty() || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let neg = ip.starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        let ip: BigInt = if ip.is_empty() { BigInt::zero() } else { ip.parse().map_err(|_| err())? };
        let fpn: BigInt = fp.parse().map_err(|_| err())?;
        let scale = num::pow(BigInt::from(10), fp.len());
        let v = Rational::new(ip * &scale + fpn, scale);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(Rational::from_integer(n))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Display wrapper printing `p/q` (or `p` for integers).
pub struct Fmt<'a>(pub &'a Rational);

impl fmt::Display for Fmt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

pub fn show(r: &Rational) -> String {
    Fmt(r).to_string()
}

/// Draw a uniform dyadic `u ∈ [0, 1)` with 128 random bits.
pub fn uniform(rng: &mut dyn RngCore) -> Rational {
    let hi = rng.next_u64() as u128;
    let lo = rng.next_u64() as u128;
    let bits = (hi << 64) | lo;
    Rational::new(BigInt::from(bits), BigInt::one() << 128usize)
}

/// Sample an index with probability proportional to `weights` (all nonnegative).
/// Returns `None` when the total weight is zero.
pub fn sample_index(weights: &[Rational], rng: &mut dyn RngCore) -> Option<usize> {
    let total: Rational = weights.iter().cloned().sum();
    if !total.is_positive() {
        return None;
    }
    let target = uniform(rng) * &total;
    let mut acc = Rational::zero();
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if !w.is_positive() {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}
