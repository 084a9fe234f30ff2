//! Exact scalar arithmetic: arbitrary-precision rationals and Gaussian
//! rationals, with the text formats used throughout the JSON interfaces.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::KwError;

pub type Rat = BigRational;

/// Scalar field the exact linear algebra is generic over.
pub trait Field:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    fn from_i64(v: i64) -> Self;
    /// A rough size measure used for pivot selection.
    fn pivot_weight(&self) -> usize;
}

impl Field for Rat {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn pivot_weight(&self) -> usize {
        self.numer().bits() as usize + self.denom().bits() as usize
    }
}

pub fn rat_i64(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `"3"`, `"-3/2"` or a decimal like `"0.25"` (converted exactly).
pub fn parse_rat(s: &str) -> Result<Rat, KwError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(KwError::Parse {
            pos: 0,
            msg: "empty rational literal".into(),
        });
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| bad_rat(s))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| bad_rat(s))?;
        if d.is_zero() {
            return Err(KwError::Parse {
                pos: 0,
                msg: format!("zero denominator in `{s}`"),
            });
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let i: BigInt = if int.is_empty() || int == "-" {
            BigInt::from(0)
        } else {
            int.parse().map_err(|_| bad_rat(s))?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad_rat(s));
        }
        let f: BigInt = frac.parse().map_err(|_| bad_rat(s))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mag = i.abs() * &scale + f;
        let v = BigRational::new(mag, scale);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad_rat(s))?;
    Ok(BigRational::from_integer(n))
}

fn bad_rat(s: &str) -> KwError {
    KwError::Parse {
        pos: 0,
        msg: format!("invalid rational literal `{s}`"),
    }
}

/// Gaussian rational `re + im*i`, the scalar type of the pencil module.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GRat {
    pub re: Rat,
    pub im: Rat,
}

impl GRat {
    pub fn new(re: Rat, im: Rat) -> Self {
        GRat { re, im }
    }
    pub fn from_rat(re: Rat) -> Self {
        GRat {
            re,
            im: Zero::zero(),
        }
    }
    pub fn from_i64(v: i64) -> Self {
        Self::from_rat(rat_int(v))
    }
    pub fn i() -> Self {
        GRat {
            re: Zero::zero(),
            im: One::one(),
        }
    }
    pub fn is_real(&self) -> bool {
        Zero::is_zero(&self.im)
    }
    pub fn conj(&self) -> Self {
        GRat {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }
    pub fn norm_sq(&self) -> Rat {
        &self.re * &self.re + &self.im * &self.im
    }
    pub fn inv(&self) -> Self {
        let n = self.norm_sq();
        assert!(!Zero::is_zero(&n), "division by zero Gaussian rational");
        GRat {
            re: &self.re / &n,
            im: -&self.im / &n,
        }
    }
    pub fn to_f64(&self) -> (f64, f64) {
        (rat_to_f64(&self.re), rat_to_f64(&self.im))
    }

    /// Parses `"3/2"`, `"i"`, `"-2i"`, `"3/2+1/4i"`, `"1-i"`.
    pub fn parse(s: &str) -> Result<Self, KwError> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(KwError::Parse {
                pos: 0,
                msg: "empty Gaussian rational".into(),
            });
        }
        // Split on the last '+'/'-' that is not leading and not inside
        // a previous token's slash part.
        if let Some(pos) = split_point(&s) {
            let (a, b) = s.split_at(pos);
            let re = parse_rat(a)?;
            let im = parse_imag(b)?;
            return Ok(GRat { re, im });
        }
        if s.ends_with('i') {
            Ok(GRat {
                re: Zero::zero(),
                im: parse_imag(&s)?,
            })
        } else {
            Ok(GRat::from_rat(parse_rat(&s)?))
        }
    }
}

fn split_point(s: &str) -> Option<usize> {
    if !s.ends_with('i') {
        return None;
    }
    let bytes = s.as_bytes();
    for k in (1..s.len()).rev() {
        if bytes[k] == b'+' || bytes[k] == b'-' {
            return Some(k);
        }
    }
    None
}

fn parse_imag(s: &str) -> Result<Rat, KwError> {
    let body = s.strip_suffix('i').ok_or_else(|| KwError::Parse {
        pos: 0,
        msg: format!("expected imaginary part in `{s}`"),
    })?;
    match body {
        "" | "+" => Ok(One::one()),
        "-" => Ok(-<BigRational as One>::one()),
        _ => parse_rat(body),
    }
}

impl fmt::Display for GRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if Zero::is_zero(&self.im) {
            write!(f, "{}", self.re)
        } else if Zero::is_zero(&self.re) {
            write!(f, "{}i", self.im)
        } else if self.im.is_negative() {
            write!(f, "{}{}i", self.re, self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

impl fmt::Debug for GRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Add for GRat {
    type Output = GRat;
    fn add(self, o: GRat) -> GRat {
        GRat {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}
impl Sub for GRat {
    type Output = GRat;
    fn sub(self, o: GRat) -> GRat {
        GRat {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }
}
impl Mul for GRat {
    type Output = GRat;
    fn mul(self, o: GRat) -> GRat {
        GRat {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}
impl Div for GRat {
    type Output = GRat;
    fn div(self, o: GRat) -> GRat {
        self * o.inv()
    }
}
impl Neg for GRat {
    type Output = GRat;
    fn neg(self) -> GRat {
        GRat {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Zero for GRat {
    fn zero() -> Self {
        GRat::from_i64(0)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(&self.re) && Zero::is_zero(&self.im)
    }
}

impl One for GRat {
    fn one() -> Self {
        GRat::from_i64(1)
    }
}

impl Field for GRat {
    fn from_i64(v: i64) -> Self {
        GRat::from_i64(v)
    }
    fn pivot_weight(&self) -> usize {
        self.re.pivot_weight() + self.im.pivot_weight()
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // Scale down to keep within f64 range for big operands.
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    if nb < 512 && db < 512 {
        num_traits::ToPrimitive::to_f64(n).unwrap_or(f64::NAN)
            / num_traits::ToPrimitive::to_f64(d).unwrap_or(f64::NAN)
    } else {
        let shift = (nb.max(db) - 256).max(0) as u64;
        let ns = n >> shift;
        let ds = d >> shift;
        num_traits::ToPrimitive::to_f64(&ns).unwrap_or(f64::NAN)
            / num_traits::ToPrimitive::to_f64(&ds).unwrap_or(f64::NAN)
    }
}

/// Continued-fraction reconstruction of a rational close to `x` with
/// denominator at most `max_den`. Used to recognize exact pencil
/// eigenvalues from numeric root candidates.
pub fn rationalize(x: f64, max_den: u64) -> Option<Rat> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0) = (BigInt::from(1), BigInt::from(0));
    let (mut p1, mut q1) = (BigInt::from(x.floor() as i64), BigInt::from(1));
    let mut frac = x - x.floor();
    for _ in 0..64 {
        let approx = rat_to_f64(&BigRational::new(p1.clone(), q1.clone().max(BigInt::one())));
        if (approx - x).abs() < 1e-11 * (1.0 + x.abs()) {
            break;
        }
        if frac.abs() < 1e-13 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        if !a.is_finite() || a.abs() > 1e15 {
            break;
        }
        let ai = BigInt::from(a as i64);
        let p2 = &ai * &p1 + &p0;
        let q2 = &ai * &q1 + &q0;
        if q2 > BigInt::from(max_den) {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        frac = inv - a;
    }
    if q1.is_zero() || q1 > BigInt::from(max_den) {
        return None;
    }
    let cand = BigRational::new(p1, q1);
    if (rat_to_f64(&cand) - x).abs() < 1e-8 * (1.0 + x.abs()) {
        Some(cand)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rat("3/2").unwrap(), rat_i64(3, 2));
        assert_eq!(parse_rat("-0.25").unwrap(), rat_i64(-1, 4));
        assert_eq!(parse_rat("7").unwrap(), rat_int(7));
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn parse_gaussian() {
        assert_eq!(GRat::parse("3/2+1/4i").unwrap(), GRat::new(rat_i64(3, 2), rat_i64(1, 4)));
        assert_eq!(GRat::parse("-i").unwrap(), GRat::new(rat_int(0), rat_int(-1)));
        assert_eq!(GRat::parse("1-i").unwrap(), GRat::new(rat_int(1), rat_int(-1)));
        assert_eq!(GRat::parse("5").unwrap(), GRat::from_i64(5));
    }

    #[test]
    fn gaussian_arithmetic() {
        let z = GRat::parse("1+2i").unwrap();
        let w = z.clone() * z.clone().inv();
        assert_eq!(w, GRat::from_i64(1));
    }

    #[test]
    fn rationalize_recovers_simple_fractions() {
        assert_eq!(rationalize(0.5, 1000).unwrap(), rat_i64(1, 2));
        assert_eq!(rationalize(-2.0 / 3.0, 1000).unwrap(), rat_i64(-2, 3));
        assert_eq!(rationalize(5.0, 1000).unwrap(), rat_int(5));
    }
}
