//! Exact rational helpers: parsing, rendering and a few integer utilities.
//!
//! Leaf literals are read as exact rationals (`0.9` is `9/10`), and rendered
//! back as a terminating decimal whenever the reduced denominator has no
//! prime factor other than 2 and 5, so that decimal inputs round-trip
//! verbatim. Everything else is rendered as `a/b`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn half() -> Rational {
    rat(1, 2)
}

/// `2^-e` as an exact rational.
pub fn pow2_inv(e: usize) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << e)
}

pub fn in_unit_interval(v: &Rational) -> bool {
    !v.is_negative() && *v <= Rational::one()
}

pub fn is_bit(v: &Rational) -> bool {
    v.is_zero() || v.is_one()
}

/// Parses `"3/4"`, `"0.25"`, `"1"`. Errors carry `offset` added to the
/// position of the offending character.
pub fn parse_rational_at(s: &str, offset: usize) -> Result<Rational> {
    let syntax = |pos: usize, msg: &str| Error::Syntax {
        pos: offset + pos,
        msg: msg.to_string(),
    };
    if s.is_empty() {
        return Err(syntax(0, "empty number"));
    }
    let (neg, body, shift) = match s.strip_prefix('-') {
        Some(rest) => (true, rest, 1),
        None => (false, s, 0),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        let n: BigInt = parse_digits(num).ok_or_else(|| syntax(shift, "bad numerator"))?;
        let d: BigInt =
            parse_digits(den).ok_or_else(|| syntax(shift + num.len() + 1, "bad denominator"))?;
        if d.is_zero() {
            return Err(syntax(shift + num.len() + 1, "zero denominator"));
        }
        Rational::new(n, d)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if whole.is_empty() && frac.is_empty() {
            return Err(syntax(shift, "bad decimal"));
        }
        let w = if whole.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(whole).ok_or_else(|| syntax(shift, "bad decimal"))?
        };
        let f = if frac.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(frac).ok_or_else(|| syntax(shift + whole.len() + 1, "bad decimal"))?
        };
        let scale = num_traits::pow(BigInt::from(10u32), frac.len());
        Rational::new(w * &scale + f, scale)
    } else {
        Rational::from_integer(parse_digits(body).ok_or_else(|| syntax(shift, "bad number"))?)
    };
    Ok(if neg { -value } else { value })
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    parse_rational_at(s.trim(), 0)
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Renders `v` as an exact decimal if it terminates, otherwise as `a/b`.
pub fn format_rational(v: &Rational) -> String {
    if v.is_integer() {
        return v.numer().to_string();
    }
    let den = v.denom();
    let (mut twos, mut fives) = (0usize, 0usize);
    let mut rest = den.clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    while rest.is_even() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", v.numer(), den);
    }
    let digits = twos.max(fives);
    let scaled = v * Rational::from_integer(num_traits::pow(BigInt::from(10u32), digits));
    let n = scaled.to_integer();
    let sign = if n.is_negative() { "-" } else { "" };
    let s = n.abs().to_string();
    let s = if s.len() <= digits {
        format!("{}{}", "0".repeat(digits - s.len() + 1), s)
    } else {
        s
    };
    let (w, f) = s.split_at(s.len() - digits);
    format!("{sign}{w}.{f}")
}

/// Always `a/b` (or a plain integer); used by reports.
pub fn fraction_string(v: &Rational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Smallest `t >= 0` with `2^t >= v`.
pub fn ceil_log2(v: &Rational) -> u32 {
    let mut t = 0u32;
    let mut p = Rational::one();
    while p < *v {
        p *= int(2);
        t += 1;
    }
    t
}

pub fn ceil(v: &Rational) -> BigInt {
    v.ceil().to_integer()
}

/// Largest `a = k / 2^bits` with `a^2 <= v`, for `v >= 0`.
pub fn sqrt_floor(v: &Rational, bits: usize) -> Rational {
    let scale = BigInt::one() << (2 * bits);
    let target = (v * Rational::from_integer(scale)).floor().to_integer();
    let root = target.sqrt();
    Rational::new(root, BigInt::one() << bits)
}

/// lcm of the denominators of `values`.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}
