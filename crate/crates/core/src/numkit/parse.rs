use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{BigReal, NumError, MIN_PRECISION_BITS};

/// Named constants understood by [`parse_real`].
pub const NAMED_CONSTANTS: [&str; 5] = ["pi-3", "1/pi", "e-2", "sqrt2-1", "ln2"];

/// Parse a decimal literal (`0.25`, `-1.5e-3`) or a named constant, correctly
/// rounded to `precision_bits`.
pub fn parse_real(expr: &str, precision_bits: u32) -> Result<BigReal, NumError> {
    let prec = precision_bits.max(MIN_PRECISION_BITS);
    let work = prec + 64;
    let trimmed = expr.trim();
    let named = match trimmed {
        "pi-3" => Some(BigReal::pi(work).sub(&BigReal::from_i64(3, work))),
        "1/pi" => Some(BigReal::from_i64(1, work).div(&BigReal::pi(work + 64))?),
        "e-2" => Some(BigReal::e(work).sub(&BigReal::from_i64(2, work))),
        "sqrt2-1" => Some(
            BigReal::from_i64(2, work)
                .sqrt()?
                .sub(&BigReal::from_i64(1, work)),
        ),
        "ln2" => Some(BigReal::ln2(work)),
        _ => None,
    };
    if let Some(v) = named {
        return Ok(v.with_precision(prec));
    }
    let (num, den) = parse_decimal(trimmed).ok_or_else(|| NumError::Unparsable(expr.to_string()))?;
    BigReal::from_ratio(&num, &den, prec)
}

/// [`parse_real`] restricted to the open interval (0, 1).
pub fn parse_unit_interval(expr: &str, precision_bits: u32) -> Result<BigReal, NumError> {
    let x = parse_real(expr, precision_bits)?;
    let one = BigReal::from_i64(1, precision_bits);
    if !x.is_positive() || x.cmp_value(&one).is_ge() {
        return Err(NumError::OutsideUnitInterval(expr.trim().to_string()));
    }
    Ok(x)
}

fn parse_decimal(s: &str) -> Option<(BigInt, BigInt)> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exp10) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let scale = exp10 - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut den = BigInt::one();
    if scale >= 0 {
        num *= ten.pow(scale as u32);
    } else {
        den = ten.pow((-scale) as u32);
    }
    if negative {
        num = -num;
    }
    Some((num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_is_exact() {
        let x = parse_real("0.25", 128).unwrap();
        assert!(x.is_exact());
        assert_eq!(x.to_f64(), 0.25);
        assert_eq!(x.precision_bits(), 128);
    }

    #[test]
    fn tenth_is_rounded() {
        let x = parse_real("0.1", 128).unwrap();
        assert!(!x.is_exact());
        assert_eq!(x.to_f64(), 0.1);
    }

    #[test]
    fn named_constants_are_deterministic() {
        for name in NAMED_CONSTANTS {
            let a = parse_real(name, 128).unwrap();
            let b = parse_real(name, 128).unwrap();
            assert_eq!(a.to_ratio(), b.to_ratio(), "{name}");
        }
        assert_eq!(parse_real("1/pi", 128).unwrap().to_f64(), 1.0 / std::f64::consts::PI);
        let r = parse_real("sqrt2-1", 128).unwrap().to_f64();
        assert!((r - (std::f64::consts::SQRT_2 - 1.0)).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn scientific_and_signed_literals() {
        assert_eq!(parse_real("-1.5e-3", 64).unwrap().to_f64(), -0.0015);
        assert_eq!(parse_real("+2", 64).unwrap().to_f64(), 2.0);
        assert_eq!(parse_real(".5", 64).unwrap().to_f64(), 0.5);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "abc", "1..2", "pi", "0.5x", "-", "."] {
            assert!(matches!(parse_real(bad, 64), Err(NumError::Unparsable(_))), "{bad}");
        }
    }

    #[test]
    fn unit_interval_check() {
        assert!(parse_unit_interval("0.3", 64).is_ok());
        for bad in ["0", "1", "1.5", "-0.2"] {
            assert!(matches!(
                parse_unit_interval(bad, 64),
                Err(NumError::OutsideUnitInterval(_))
            ));
        }
    }
}
