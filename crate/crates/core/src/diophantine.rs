//! Continued fractions and the search for square convergents: rationals
//! `p/q` close to θ with `p`, `q` and `q − p` all perfect squares, built from
//! Pythagorean triples `(2rs, s² − r², r² + s²)` over convergents `r/s` of
//! `ξ = (1 − √θ)/√(1 − θ)`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::numkit::{BigReal, NumError};

/// Half-width of the uncertainty interval used when expanding a rounded
/// value, in units of its last place.
const CF_ULP_MARGIN_BITS: i64 = 6;
/// Bits kept in reserve when deciding whether `|θ − p/q|` is still resolvable.
const ERROR_GUARD_BITS: f64 = 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiophantineError {
    #[error("{0} is outside the open unit interval")]
    OutsideUnitInterval(String),
    #[error("exponent must be at least 2, got {0}")]
    ExponentTooSmall(f64),
    #[error("precision exhausted: only {certified} partial quotients can be certified")]
    PrecisionExhausted { certified: usize },
    #[error("precision exhausted after {found} of {requested} square convergents")]
    SearchPrecisionExhausted { found: usize, requested: usize },
    #[error("no square convergent found among {examined} convergents")]
    NoneFound { examined: usize },
    #[error("{u} is not invertible modulo {q}")]
    NotInvertible { u: BigInt, q: BigInt },
    #[error("modulus must be positive")]
    NonPositiveModulus,
    #[error("invalid design parameter: {0}")]
    InvalidDesign(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

fn ser_bigint<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_bigreal<S: Serializer>(v: &BigReal, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Convergent {
    #[serde(serialize_with = "ser_bigint")]
    pub numerator: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub denominator: BigInt,
}

impl Convergent {
    pub fn to_bigreal(&self, precision_bits: u32) -> BigReal {
        BigReal::from_ratio(&self.numerator, &self.denominator, precision_bits)
            .expect("denominator is positive")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareConvergent {
    #[serde(serialize_with = "ser_bigint")]
    pub p: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub q: BigInt,
    /// `p′` with `p = p′²`.
    #[serde(serialize_with = "ser_bigint")]
    pub p_root: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub q_root: BigInt,
    /// `√(q − p)`.
    #[serde(serialize_with = "ser_bigint")]
    pub qp_root: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub r: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub s: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub m: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub k: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub n: BigInt,
    /// `gcd(k², n²)`, the common factor removed from the unreduced pair.
    #[serde(serialize_with = "ser_bigint")]
    pub gcd_unreduced: BigInt,
    /// `|θ − p/q|`.
    #[serde(serialize_with = "ser_bigreal")]
    pub err: BigReal,
    /// `−ln err / ln q`.
    pub achieved_exponent: f64,
    /// `p/q < θ` strictly for the value that was searched.
    pub below_target: bool,
    /// Found by searching `1 − θ` instead of θ.
    pub complement: bool,
}

impl SquareConvergent {
    pub fn q_f64(&self) -> f64 {
        self.q.to_f64().unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SearchStop {
    CountReached,
    PrecisionExhausted,
    DepthExhausted,
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareSearch {
    pub records: Vec<SquareConvergent>,
    pub stop: SearchStop,
    pub examined: usize,
}

impl SquareSearch {
    /// Turn an incomplete search into the matching error.
    pub fn require(self, count: usize) -> Result<Vec<SquareConvergent>, DiophantineError> {
        if self.records.len() >= count {
            return Ok(self.records);
        }
        if self.records.is_empty() && self.stop != SearchStop::PrecisionExhausted {
            return Err(DiophantineError::NoneFound {
                examined: self.examined,
            });
        }
        match self.stop {
            SearchStop::PrecisionExhausted => Err(DiophantineError::SearchPrecisionExhausted {
                found: self.records.len(),
                requested: count,
            }),
            _ => Err(DiophantineError::NoneFound {
                examined: self.examined,
            }),
        }
    }
}

/// Simultaneous Euclid on two rationals; returns the common prefix of their
/// expansions, skipping a final quotient where either expansion terminates.
fn common_prefix(
    mut a: (BigInt, BigInt),
    mut b: (BigInt, BigInt),
    limit: usize,
    exact: bool,
) -> Vec<BigInt> {
    let mut out = Vec::new();
    while out.len() < limit {
        let (qa, ra) = a.0.div_mod_floor(&a.1);
        let (qb, rb) = b.0.div_mod_floor(&b.1);
        if qa != qb {
            break;
        }
        if !exact && (ra.is_zero() || rb.is_zero()) {
            break;
        }
        out.push(qa);
        if ra.is_zero() {
            break;
        }
        a = (a.1, ra);
        b = (b.1, rb);
    }
    out
}

/// Every partial quotient of `x` that its precision certifies, up to `limit`.
///
/// Exact inputs are expanded exactly. Rounded inputs are expanded on the
/// interval `x ± 64 ulp`, keeping only quotients shared by both endpoints.
pub fn certified_partial_quotients(x: &BigReal, limit: usize) -> Vec<BigInt> {
    let (num, den) = x.to_ratio();
    if x.is_exact() {
        return common_prefix((num.clone(), den.clone()), (num, den), limit, true);
    }
    let eps_exp = x.ulp_exponent() + CF_ULP_MARGIN_BITS;
    // bring x and eps to a common power-of-two denominator
    let (scale_num, scale_den, eps) = if eps_exp >= 0 {
        (num, den, BigInt::one() << eps_exp as usize)
    } else {
        let d_bits = den.bits() as i64 - 1;
        let target = d_bits.max(-eps_exp);
        let num = num << (target - d_bits) as usize;
        let den = BigInt::one() << target as usize;
        let eps = BigInt::one() << (target + eps_exp) as usize;
        (num, den, eps)
    };
    let lo = (&scale_num - &eps, scale_den.clone());
    let hi = (&scale_num + &eps, scale_den);
    common_prefix(lo, hi, limit, false)
}

/// Partial quotients `[a₀; a₁, …]` of `x`, at most `depth` of them.
///
/// Exact rationals may return fewer (their expansion terminates); a rounded
/// input that cannot certify `depth` quotients is an error.
pub fn continued_fraction(x: &BigReal, depth: usize) -> Result<Vec<BigInt>, DiophantineError> {
    let quotients = certified_partial_quotients(x, depth);
    if quotients.len() < depth && !x.is_exact() {
        return Err(DiophantineError::PrecisionExhausted {
            certified: quotients.len(),
        });
    }
    Ok(quotients)
}

/// Convergents from partial quotients by the standard recurrence.
pub fn convergents_from_quotients(quotients: &[BigInt]) -> Vec<Convergent> {
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut out = Vec::with_capacity(quotients.len());
    for a in quotients {
        let h_next = a * &h + &h_prev;
        let k_next = a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        out.push(Convergent {
            numerator: h.clone(),
            denominator: k.clone(),
        });
    }
    out
}

pub fn convergents(x: &BigReal, depth: usize) -> Result<Vec<Convergent>, DiophantineError> {
    Ok(convergents_from_quotients(&continued_fraction(x, depth)?))
}

fn check_unit_interval(theta: &BigReal) -> Result<(), DiophantineError> {
    let one = BigReal::from_i64(1, theta.precision_bits());
    if !theta.is_positive() || theta.cmp_value(&one).is_ge() {
        return Err(DiophantineError::OutsideUnitInterval(theta.to_string()));
    }
    Ok(())
}

/// `ξ = (1 − √θ)/√(1 − θ)`, the point with `2ξ/(ξ² + 1) = √(1 − θ)`.
pub fn xi_transform(theta: &BigReal) -> Result<BigReal, DiophantineError> {
    check_unit_interval(theta)?;
    let prec = theta.precision_bits();
    let work = theta.with_precision(prec + 64);
    let one = BigReal::from_i64(1, prec + 64);
    let num = one.sub(&work.sqrt()?);
    let den = one.sub(&work).sqrt()?;
    Ok(num.div(&den)?.with_precision(prec))
}

/// `p₀` in `[1, q − 1]` with `u·p₀ ≡ 1 (mod q)`.
pub fn mod_inverse(u: &BigInt, q: &BigInt) -> Result<BigInt, DiophantineError> {
    if !q.is_positive() {
        return Err(DiophantineError::NonPositiveModulus);
    }
    let ext = u.mod_floor(q).extended_gcd(q);
    if !ext.gcd.is_one() {
        return Err(DiophantineError::NotInvertible {
            u: u.clone(),
            q: q.clone(),
        });
    }
    Ok(ext.x.mod_floor(q))
}

pub fn exact_sqrt(v: &BigInt) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.sqrt();
    (&r * &r == *v).then_some(r)
}

/// The square candidate built from a convergent `r/s`, before any accuracy test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub r: BigInt,
    pub s: BigInt,
    pub m: BigInt,
    pub k: BigInt,
    pub n: BigInt,
    pub p: BigInt,
    pub q: BigInt,
    pub p_root: BigInt,
    pub q_root: BigInt,
    pub qp_root: BigInt,
    pub gcd_unreduced: BigInt,
}

/// `(m, k, n) = (2rs, s² − r², r² + s²)`, `p/q = k²/n²` reduced by the square
/// common factor.
pub fn witness(r: &BigInt, s: &BigInt) -> Witness {
    let m = BigInt::from(2) * r * s;
    let k = s * s - r * r;
    let n = r * r + s * s;
    debug_assert_eq!(&m * &m + &k * &k, &n * &n);
    let p_unreduced = &k * &k;
    let q_unreduced = &n * &n;
    let d = p_unreduced.gcd(&q_unreduced);
    let g = exact_sqrt(&d).expect("gcd of two squares is a square");
    let p = &p_unreduced / &d;
    let q = &q_unreduced / &d;
    Witness {
        r: r.clone(),
        s: s.clone(),
        p_root: k.abs() / &g,
        q_root: &n / &g,
        qp_root: m.abs() / &g,
        m,
        k,
        n,
        p,
        q,
        gcd_unreduced: d,
    }
}

fn search_one_side(
    target: &BigReal,
    count: usize,
    exponent: f64,
    complement: bool,
    records: &mut Vec<SquareConvergent>,
) -> Result<(SearchStop, usize), DiophantineError> {
    let prec = target.precision_bits();
    let xi = xi_transform(target)?;
    let quotients = certified_partial_quotients(&xi, usize::MAX);
    let certified_all = xi.is_exact();
    let mut examined = 0;
    for conv in convergents_from_quotients(&quotients) {
        if records.len() >= count {
            return Ok((SearchStop::CountReached, examined));
        }
        if conv.numerator.is_zero() {
            continue;
        }
        examined += 1;
        let w = witness(&conv.numerator, &conv.denominator);
        if w.q < BigInt::from(4) {
            continue;
        }
        let log2_q = BigReal::from_bigint(&w.q, 64).ln_abs() / std::f64::consts::LN_2;
        if exponent * log2_q + ERROR_GUARD_BITS > prec as f64 {
            return Ok((SearchStop::PrecisionExhausted, examined));
        }
        let approx = BigReal::from_ratio(&w.p, &w.q, prec + 64)?;
        let diff = target.with_precision(prec + 64).sub(&approx);
        let err = diff.abs().with_precision(prec);
        let ln_q = log2_q * std::f64::consts::LN_2;
        let passes = err.is_zero() || err.ln_abs() < -exponent * ln_q;
        if !passes || records.iter().any(|r| r.q == w.q) {
            continue;
        }
        let achieved_exponent = if err.is_zero() {
            f64::INFINITY
        } else {
            -err.ln_abs() / ln_q
        };
        records.push(SquareConvergent {
            p: w.p,
            q: w.q,
            p_root: w.p_root,
            q_root: w.q_root,
            qp_root: w.qp_root,
            r: w.r,
            s: w.s,
            m: w.m,
            k: w.k,
            n: w.n,
            gcd_unreduced: w.gcd_unreduced,
            err,
            achieved_exponent,
            below_target: diff.is_positive(),
            complement,
        });
    }
    if records.len() >= count {
        Ok((SearchStop::CountReached, examined))
    } else if certified_all {
        Ok((SearchStop::DepthExhausted, examined))
    } else {
        Ok((SearchStop::PrecisionExhausted, examined))
    }
}

/// Search the convergents of `ξ(θ)` for square convergents with
/// `|θ − p/q| < q^{−exponent}`, in increasing `q`.
///
/// If none of the hits lies below θ, `1 − θ` is searched as well and its
/// hits are appended with `complement = true`.
pub fn square_convergents(theta: &BigReal, count: usize, exponent: f64) -> Result<SquareSearch, DiophantineError> {
    check_unit_interval(theta)?;
    if !(exponent >= 2.0) {
        return Err(DiophantineError::ExponentTooSmall(exponent));
    }
    let mut records = Vec::new();
    let (mut stop, mut examined) = search_one_side(theta, count, exponent, false, &mut records)?;
    if !records.iter().any(|r| r.below_target) && records.len() < count {
        let one = BigReal::from_i64(1, theta.precision_bits());
        let complement = one.sub(theta);
        let mut extra = Vec::new();
        let (s2, e2) = search_one_side(&complement, count - records.len(), exponent, true, &mut extra)?;
        examined += e2;
        if !extra.is_empty() {
            stop = s2;
        }
        records.extend(extra);
    }
    records.sort_by(|a, b| a.q.cmp(&b.q).then(a.complement.cmp(&b.complement)));
    Ok(SquareSearch {
        records,
        stop,
        examined,
    })
}

/// Checks that a record is internally consistent against the value it was
/// searched for; returns a description of the first violation.
pub fn validate_record(rec: &SquareConvergent, target: &BigReal) -> Result<(), String> {
    if &rec.m * &rec.m + &rec.k * &rec.k != &rec.n * &rec.n {
        return Err("Pythagorean identity fails".into());
    }
    if &rec.p_root * &rec.p_root != rec.p {
        return Err("p is not the square of p_root".into());
    }
    if &rec.q_root * &rec.q_root != rec.q {
        return Err("q is not the square of q_root".into());
    }
    if &rec.qp_root * &rec.qp_root != &rec.q - &rec.p {
        return Err("q − p is not the square of qp_root".into());
    }
    if exact_sqrt(&rec.gcd_unreduced).is_none() {
        return Err("common factor of the unreduced pair is not a square".into());
    }
    if !rec.p.gcd(&rec.q).is_one() {
        return Err("p/q is not reduced".into());
    }
    let prec = target.precision_bits();
    let err = target
        .sub(&BigReal::from_ratio(&rec.p, &rec.q, prec + 64).map_err(|e| e.to_string())?)
        .abs();
    let tol = err.sub(&rec.err).abs();
    let scale = BigReal::from_ratio(&BigInt::one(), &(BigInt::one() << (prec as usize - 8)), prec)
        .map_err(|e| e.to_string())?;
    if tol.cmp_value(&scale).is_gt() {
        return Err("recorded error does not match θ − p/q".into());
    }
    // the Pythagorean parametrisation is 2-Lipschitz: |m/n − √(1−θ)| < 2|r/s − ξ|
    let xi = xi_transform(target).map_err(|e| e.to_string())?;
    let lhs = BigReal::from_ratio(&rec.m, &rec.n, prec)
        .map_err(|e| e.to_string())?
        .sub(&BigReal::from_i64(1, prec).sub(target).sqrt().map_err(|e| e.to_string())?)
        .abs();
    let rhs = BigReal::from_ratio(&rec.r, &rec.s, prec)
        .map_err(|e| e.to_string())?
        .sub(&xi)
        .abs()
        .mul_int(&BigInt::from(2));
    if lhs.cmp_value(&rhs).is_ge() && !rhs.is_zero() {
        return Err("Lipschitz step |m/n − √(1−θ)| < 2|r/s − ξ| fails".into());
    }
    Ok(())
}

/// Whether `p/q` is among the convergents of `target`; `None` when the
/// classical criterion `|θ − p/q| < 1/(2q²)` does not apply or the expansion
/// cannot be certified far enough.
pub fn appears_among_convergents(rec: &SquareConvergent, target: &BigReal) -> Option<bool> {
    let two_q2 = BigReal::from_bigint(&(BigInt::from(2) * &rec.q * &rec.q), target.precision_bits());
    let bound = BigReal::from_i64(1, target.precision_bits()).div(&two_q2).ok()?;
    if rec.q <= BigInt::from(2) || rec.err.cmp_value(&bound).is_ge() {
        return None;
    }
    let quotients = certified_partial_quotients(target, usize::MAX);
    let convs = convergents_from_quotients(&quotients);
    if convs.iter().any(|c| c.numerator == rec.p && c.denominator == rec.q) {
        return Some(true);
    }
    match convs.last() {
        Some(last) if last.denominator > rec.q => Some(false),
        _ => None,
    }
}

/// A θ with prescribed square convergents.
#[derive(Clone, Debug)]
pub struct EngineeredTheta {
    pub theta: BigReal,
    /// Designed `(p, q)` pairs in increasing `q`.
    pub designed: Vec<(BigInt, BigInt)>,
    pub recommended_precision_bits: u32,
}

/// Builds θ so that the square convergent at each design step has
/// `θ − p/q ≈ 1/(βⱼ q)²`, i.e. frame parameter `β ≈ βⱼ`.
///
/// Starts from `r/s = 1/2` (`p/q = 9/25`) and walks down by `1/Dⱼ` with
/// `Dⱼ ≈ βⱼ² qⱼ² |dθ/dx|`, so that every earlier `r/s` stays a convergent of
/// the final ξ and θ stays above each `p/q`. Square convergents only satisfy
/// the exponent-2 condition here; exponent 3 would need `βⱼ² > qⱼ`.
pub fn engineered_theta(betas: &[f64], precision_bits: u32) -> Result<EngineeredTheta, DiophantineError> {
    if betas.is_empty() {
        return Err(DiophantineError::InvalidDesign("at least one β is required".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 2.0)) {
        return Err(DiophantineError::InvalidDesign(format!("β = {b} must exceed 2")));
    }
    let mut r = BigInt::one();
    let mut s = BigInt::from(2);
    let mut designed = Vec::new();
    let mut log2_last = 0.0;
    for &beta in betas {
        let w = witness(&r, &s);
        let x = r.to_f64().unwrap() / s.to_f64().unwrap();
        let f = 2.0 * x / (1.0 + x * x);
        let df = 2.0 * (1.0 - x * x) / (1.0 + x * x).powi(2);
        let slope = 2.0 * f * df;
        // D = β²|θ'| q² with the float factor carried to 40 fractional bits
        let factor = BigInt::from((beta * beta * slope * (1u64 << 40) as f64).round() as u128);
        let d: BigInt = ((factor * &w.q * &w.q) >> 40usize) + BigInt::one();
        log2_last = BigReal::from_bigint(&w.q, 64).ln_abs() / std::f64::consts::LN_2 + 2.0 * beta.log2();
        designed.push((w.p, w.q));
        // r/s − 1/D = (rD − s)/(sD)
        let num = &r * &d - &s;
        let den = &s * &d;
        let g = num.gcd(&den);
        r = num / &g;
        s = den / &g;
    }
    // θ = 1 − (2rs/(r² + s²))² = ((s² − r²)/(s² + r²))²
    let w = witness(&r, &s);
    let recommended = (2.0 * log2_last + 160.0).ceil() as u32;
    let prec = precision_bits.max(recommended);
    let theta = BigReal::from_ratio(&(&w.k * &w.k), &(&w.n * &w.n), prec)?;
    Ok(EngineeredTheta {
        theta,
        designed,
        recommended_precision_bits: recommended,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::parse_real;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn golden_ratio_expands_to_ones() {
        let five = BigReal::from_i64(5, 256);
        let phi = five.sqrt().unwrap().add(&BigReal::from_i64(1, 256)).div_int(&BigInt::from(2)).unwrap();
        let cf = continued_fraction(&phi, 40).unwrap();
        assert!(cf.iter().all(|a| a.is_one()));
        let convs = convergents(&phi, 20).unwrap();
        let (mut a, mut b) = (BigInt::one(), BigInt::one());
        // convergents are 1/1, 2/1, 3/2, ...
        for c in convs {
            // F_{k+2}/F_{k+1}
            assert_eq!((&c.numerator, &c.denominator), (&b, &a));
            let next = &a + &b;
            a = b;
            b = next;
        }
    }

    #[test]
    fn quarter_is_exact() {
        let x = parse_real("0.25", 128).unwrap();
        assert_eq!(continued_fraction(&x, 10).unwrap(), ints(&[0, 4]));
    }

    #[test]
    fn pi_expansion_and_convergents() {
        let pi = BigReal::pi(256);
        assert_eq!(continued_fraction(&pi, 5).unwrap(), ints(&[3, 7, 15, 1, 292]));
        let convs = convergents(&pi, 4).unwrap();
        let fracs: Vec<(i64, i64)> = convs
            .iter()
            .map(|c| (c.numerator.to_i64().unwrap(), c.denominator.to_i64().unwrap()))
            .collect();
        assert_eq!(fracs, vec![(3, 1), (22, 7), (333, 106), (355, 113)]);
    }

    #[test]
    fn depth_beyond_precision_is_an_error() {
        let pi = BigReal::pi(64);
        assert!(matches!(
            continued_fraction(&pi, 200),
            Err(DiophantineError::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn convergents_satisfy_classical_bound() {
        let x = parse_real("e-2", 256).unwrap();
        for c in convergents(&x, 30).unwrap() {
            let approx = c.to_bigreal(320);
            let err = x.sub(&approx).abs();
            let bound = BigReal::from_i64(1, 320).div(&BigReal::from_bigint(&(&c.denominator * &c.denominator), 320)).unwrap();
            assert!(err.cmp_value(&bound).is_lt());
        }
    }

    #[test]
    fn xi_of_one_half() {
        let xi = xi_transform(&parse_real("0.5", 256).unwrap()).unwrap();
        let expected = BigReal::from_i64(2, 256).sqrt().unwrap().sub(&BigReal::from_i64(1, 256));
        assert!(xi.sub(&expected).abs().to_f64() < 1e-70);
    }

    #[test]
    fn xi_solves_its_defining_equation() {
        for i in 1..10 {
            let theta = BigReal::from_ratio(&BigInt::from(i), &BigInt::from(10), 256).unwrap();
            let xi = xi_transform(&theta).unwrap();
            assert!(xi.is_positive() && xi.to_f64() < 1.0);
            let one = BigReal::from_i64(1, 256);
            let f = xi.mul_int(&BigInt::from(2)).div(&xi.square().add(&one)).unwrap();
            let target = one.sub(&theta).sqrt().unwrap();
            assert!(f.sub(&target).abs().to_f64() < 1e-70);
        }
        assert!(xi_transform(&BigReal::from_i64(1, 64)).is_err());
    }

    #[test]
    fn witness_three_five() {
        let w = witness(&BigInt::from(3), &BigInt::from(5));
        assert_eq!((w.m.clone(), w.k.clone(), w.n.clone()), (BigInt::from(30), BigInt::from(16), BigInt::from(34)));
        assert_eq!(w.gcd_unreduced, BigInt::from(4));
        assert_eq!((w.p.clone(), w.q.clone()), (BigInt::from(64), BigInt::from(289)));
        assert_eq!(&w.q - &w.p, BigInt::from(225));
        assert_eq!(w.qp_root, BigInt::from(15));
    }

    #[test]
    fn mod_inverse_cases() {
        assert_eq!(mod_inverse(&BigInt::from(4), &BigInt::from(9)).unwrap(), BigInt::from(7));
        assert_eq!(mod_inverse(&BigInt::from(1), &BigInt::from(13)).unwrap(), BigInt::from(1));
        assert!(mod_inverse(&BigInt::from(6), &BigInt::from(9)).is_err());
    }

    #[test]
    fn engineered_theta_yields_designed_records() {
        let design = engineered_theta(&[3.5, 6.0], 256).unwrap();
        let search = square_convergents(&design.theta, 2, 2.0).unwrap();
        assert_eq!(search.records.len(), 2);
        for (rec, (p, q)) in search.records.iter().zip(&design.designed) {
            assert_eq!((&rec.p, &rec.q), (p, q));
            assert!(rec.below_target && !rec.complement);
            validate_record(rec, &design.theta).unwrap();
        }
        assert_eq!(design.designed[0], (BigInt::from(9), BigInt::from(25)));
    }
}
