//! The two arithmetic modes: exact rationals and complex doubles.
//!
//! Every algebraic routine is written once against [`Scalar`]; a computation
//! picks one mode and never mixes the two.

use std::fmt::{self, Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graded::Weight;

pub type C64 = Complex64;

/// A positive scaling parameter `r` in `r^{L(0)}`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScaleFactor {
    Exact(BigRational),
    Real(f64),
}

impl ScaleFactor {
    pub fn rational(num: i64, den: i64) -> Self {
        ScaleFactor::Exact(BigRational::new(num.into(), den.into()))
    }

    pub fn one() -> Self {
        ScaleFactor::Exact(BigRational::one())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ScaleFactor::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            ScaleFactor::Real(x) => *x,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            ScaleFactor::Exact(r) => r.is_positive(),
            ScaleFactor::Real(x) => *x > 0.0,
        }
    }

    /// `self * other`, exact when both factors are.
    pub fn product(&self, other: &ScaleFactor) -> ScaleFactor {
        match (self, other) {
            (ScaleFactor::Exact(a), ScaleFactor::Exact(b)) => ScaleFactor::Exact(a * b),
            _ => ScaleFactor::Real(self.to_f64() * other.to_f64()),
        }
    }

    pub(crate) fn check_positive(&self) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::NonPositiveScale(self.to_string()))
        }
    }
}

impl Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleFactor::Exact(r) => write!(f, "{r}"),
            ScaleFactor::Real(x) => write!(f, "{x}"),
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    const EXACT: bool;

    fn from_rational(r: &BigRational) -> Self;

    /// Conversion from a structure-constant table that stores both forms.
    fn from_table(exact: &BigRational, approx: f64) -> Self;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    fn to_c64(&self) -> C64;

    /// Text used in canonical state renderings.
    fn render(&self) -> String;

    fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }

    /// `r^w` for a positive scale factor and a weight.
    fn weight_power(r: &ScaleFactor, w: &Weight) -> Result<Self>;
}

fn rational_to_big(r: &Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn pow_big(r: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        num_traits::pow(r.clone(), e as usize)
    } else {
        num_traits::pow(r.recip(), (-e) as usize)
    }
}

/// `r^{1/n}` when it is rational.
fn exact_root(r: &BigRational, n: u32) -> Option<BigRational> {
    let a = r.numer().nth_root(n);
    let b = r.denom().nth_root(n);
    let root = BigRational::new(a, b);
    (num_traits::pow(root.clone(), n as usize) == *r).then_some(root)
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn from_table(exact: &BigRational, _approx: f64) -> Self {
        exact.clone()
    }

    fn to_c64(&self) -> C64 {
        C64::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn weight_power(r: &ScaleFactor, w: &Weight) -> Result<Self> {
        r.check_positive()?;
        let ScaleFactor::Exact(r) = r else {
            return Err(Error::ExactModeNeedsRational);
        };
        if w.0.is_integer() {
            Ok(pow_big(r, w.0.to_integer()))
        } else if let Some(root) = exact_root(r, *w.0.denom() as u32) {
            Ok(pow_big(&root, *w.0.numer()))
        } else {
            Err(Error::RequiresFloatingMode {
                weight: w.to_string(),
                factor: r.to_string(),
            })
        }
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        C64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
    }

    fn from_table(_exact: &BigRational, approx: f64) -> Self {
        C64::new(approx, 0.0)
    }

    fn to_c64(&self) -> C64 {
        *self
    }

    fn render(&self) -> String {
        if self.im == 0.0 {
            format!("{}", self.re)
        } else {
            format!("({}{:+}i)", self.re, self.im)
        }
    }

    fn weight_power(r: &ScaleFactor, w: &Weight) -> Result<Self> {
        r.check_positive()?;
        let x = r.to_f64();
        if w.0.is_integer() {
            Ok(C64::new(x.powi(w.0.to_integer() as i32), 0.0))
        } else {
            Ok(C64::new(x.powf(w.to_f64()), 0.0))
        }
    }
}

pub(crate) fn big(r: &Rational64) -> BigRational {
    rational_to_big(r)
}
