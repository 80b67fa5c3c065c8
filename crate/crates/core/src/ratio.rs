//! Exact rational scalars.
//!
//! Every probability in the sampling and enumeration layers is a
//! [`Q`] (an arbitrary-precision rational); floating point appears only in
//! the statistics module.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number used for all probabilities and kernel entries.
pub type Q = num_rational::BigRational;

/// Shorthand constructor from an integer pair. Panics on a zero denominator.
pub fn q(numer: i64, denom: i64) -> Q {
    Q::new(BigInt::from(numer), BigInt::from(denom))
}

/// The rational zero.
pub fn q0() -> Q {
    Q::zero()
}

/// The rational one.
pub fn q1() -> Q {
    Q::one()
}

/// Parses `"p/q"` or a plain integer `"k"`. Decimal notation is rejected:
/// the file formats are exact by contract.
pub fn parse_ratio(text: &str) -> Result<Q, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty rational".into());
    }
    let parse_int = |part: &str| -> Result<BigInt, String> {
        if part.is_empty() || !part.chars().enumerate().all(|(i, c)| {
            c.is_ascii_digit() || (i == 0 && (c == '+' || c == '-'))
        }) {
            return Err(format!("`{text}` is not a rational; use p/q or an integer"));
        }
        part.parse::<BigInt>()
            .map_err(|_| format!("`{text}` is not a rational"))
    };
    match s.split_once('/') {
        Some((p, d)) => {
            let numer = parse_int(p)?;
            let denom = parse_int(d)?;
            if denom.is_zero() {
                return Err(format!("`{text}` has a zero denominator"));
            }
            Ok(Q::new(numer, denom))
        }
        None => Ok(Q::from_integer(parse_int(s)?)),
    }
}

/// Renders a rational as `"p/q"`, or `"k"` when the denominator is one.
pub fn format_ratio(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Lossy conversion for statistics and reporting.
pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back on separate numerator/denominator conversion for
        // magnitudes outside f64 range.
        let n = x.numer().to_f64().unwrap_or(if x.numer().is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
        let d = x.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!(parse_ratio("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_ratio("-2/4").unwrap(), q(-1, 2));
        assert_eq!(parse_ratio("7").unwrap(), q(7, 1));
        assert_eq!(parse_ratio(" 1/2 ").unwrap(), q(1, 2));
    }

    #[test]
    fn rejects_decimals_and_garbage() {
        assert!(parse_ratio("0.333").is_err());
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("").is_err());
        assert!(parse_ratio("a/b").is_err());
        assert!(parse_ratio("1e-3").is_err());
    }

    #[test]
    fn formats_reduced() {
        assert_eq!(format_ratio(&q(2, 4)), "1/2");
        assert_eq!(format_ratio(&q(3, 1)), "3");
        assert_eq!(format_ratio(&q0()), "0");
    }
}
