//! Exact scalar arithmetic: rationals and Gaussian rationals.
//!
//! Every symbolic computation in the crate runs over [`GaussianRational`],
//! complex numbers whose real and imaginary parts are arbitrary-precision
//! rationals. Floating point enters only at the numeric boundary (density
//! evaluation, root finding, Monte Carlo).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Arbitrary-precision rational number.
pub type Rat = BigRational;

/// Parse an exact rational from a decimal-free string such as `"3"`, `"-5/7"`.
pub fn parse_rational(s: &str) -> Result<Rat, String> {
    let t = s.trim();
    if t.is_empty() {
        return Err("empty rational literal".into());
    }
    match t.split_once('/') {
        Some((num, den)) => {
            let n: BigInt = num
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {t:?}"))?;
            let d: BigInt = den
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {t:?}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in {t:?}"));
            }
            Ok(Rat::new(n, d))
        }
        None => {
            let n: BigInt = t.parse().map_err(|_| format!("bad integer in {t:?}"))?;
            Ok(Rat::from_integer(n))
        }
    }
}

/// Smallest few Newton steps giving a rational `r` with `r*r >= x`, `r > 0`.
///
/// Used for norm bounds like `2*sqrt(variance)` that must stay rational upper
/// bounds. Precision is capped so denominators do not blow up.
pub fn rational_sqrt_upper(x: &Rat) -> Rat {
    assert!(!x.is_negative(), "sqrt of negative rational");
    if x.is_zero() {
        return Rat::zero();
    }
    // exact when x is a perfect rational square
    {
        use num_integer::Roots;
        let ns = x.numer().sqrt();
        let ds = x.denom().sqrt();
        if &(&ns * &ns) == x.numer() && &(&ds * &ds) == x.denom() {
            return Rat::new(ns, ds);
        }
    }
    let one = Rat::one();
    // start above sqrt(x)
    let mut r = if *x >= one { x.clone() } else { one.clone() };
    for _ in 0..32 {
        let next = (&r + x / &r) / Rat::from_integer(2.into());
        // round up to 64 fractional bits to keep sizes bounded; rounding up
        // preserves the upper-bound property
        let next = round_up_precision(&next, 64);
        if next >= r {
            break;
        }
        r = next;
    }
    debug_assert!(&r * &r >= *x);
    r
}

fn round_up_precision(x: &Rat, bits: u32) -> Rat {
    let scale = BigInt::one() << bits;
    let scaled = x * Rat::from_integer(scale.clone());
    let ceil = scaled.ceil();
    ceil / Rat::from_integer(scale)
}

/// Complex number with exact rational real and imaginary parts.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    pub re: Rat,
    pub im: Rat,
}

impl GaussianRational {
    pub fn new(re: Rat, im: Rat) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::new(Rat::zero(), Rat::zero())
    }

    pub fn one() -> Self {
        Self::new(Rat::one(), Rat::zero())
    }

    pub fn i() -> Self {
        Self::new(Rat::zero(), Rat::one())
    }

    pub fn from_int(n: i64) -> Self {
        Self::new(Rat::from_integer(n.into()), Rat::zero())
    }

    pub fn from_rat(r: Rat) -> Self {
        Self::new(r, Rat::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(Self::new(&self.re / &norm, -(&self.im / &norm)))
    }

    /// `|re| + |im|`, a rational upper bound for the modulus.
    pub fn abs_bound(&self) -> Rat {
        self.re.abs() + self.im.abs()
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl fmt::Debug for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}i", self.im)
        } else if self.im.is_negative() {
            write!(f, "{}{}i", self.re, self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

impl Add for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
}

impl AddAssign<&GaussianRational> for GaussianRational {
    fn add_assign(&mut self, rhs: &GaussianRational) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&GaussianRational> for GaussianRational {
    fn sub_assign(&mut self, rhs: &GaussianRational) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&GaussianRational> for GaussianRational {
    fn mul_assign(&mut self, rhs: &GaussianRational) {
        *self = (&*self) * rhs;
    }
}
