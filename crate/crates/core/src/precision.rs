//! Arithmetic back-ends for the Gram solve.
//!
//! [`Scalar`] abstracts over hardware `f64` and [`Ext`], a 256-bit binary
//! floating-point number backed by `dashu-float`.  Extended precision is only
//! needed for the exponential Gram matrices of the moment problem, whose
//! condition numbers grow like `exp(c N²)`.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Working precision of [`Ext`], in bits.
pub const EXT_BITS: usize = 256;

/// Which arithmetic the moment solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// `f64` Cholesky with iterative refinement; refuses ill-conditioned systems.
    #[default]
    Double,
    /// 256-bit software floating point throughout.
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "double" | "f64" => Ok(Precision::Double),
            "extended" | "ext" => Ok(Precision::Extended),
            other => Err(format!("unknown precision '{other}' (expected double or extended)")),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Extended => "extended",
        })
    }
}

pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    /// `exp(x) - 1` without cancellation for small `|x|`.
    fn exp_m1(&self) -> Self;
    fn abs(&self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn exp_m1(&self) -> Self {
        f64::exp_m1(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

/// 256-bit binary float.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Ext(FBig<HalfEven, 2>);

impl Ext {
    fn wrap(v: FBig<HalfEven, 2>) -> Self {
        Ext(v.with_precision(EXT_BITS).value())
    }

    /// Exact sum of an `f64` pair `hi + lo` (used to carry double-double
    /// inputs such as `π` into extended precision).
    pub fn from_pair(hi: f64, lo: f64) -> Self {
        Ext::from_f64(hi) + Ext::from_f64(lo)
    }
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ext({:e})", self.to_f64())
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        Ext(self.0 + rhs.0)
    }
}
impl Sub for Ext {
    type Output = Ext;
    fn sub(self, rhs: Ext) -> Ext {
        Ext(self.0 - rhs.0)
    }
}
impl Mul for Ext {
    type Output = Ext;
    fn mul(self, rhs: Ext) -> Ext {
        Ext(self.0 * rhs.0)
    }
}
impl Div for Ext {
    type Output = Ext;
    fn div(self, rhs: Ext) -> Ext {
        Ext(self.0 / rhs.0)
    }
}
impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext(-self.0)
    }
}

impl Scalar for Ext {
    fn from_f64(v: f64) -> Self {
        // Every finite f64 is exactly representable.
        Ext::wrap(FBig::try_from(v).expect("finite value"))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn sqrt(&self) -> Self {
        Ext(self.0.sqrt())
    }
    fn exp(&self) -> Self {
        Ext(self.0.exp())
    }
    fn exp_m1(&self) -> Self {
        Ext(self.0.exp_m1())
    }
    fn abs(&self) -> Self {
        if self.to_f64() < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_carries_more_than_double() {
        let a = Ext::from_f64(1.0);
        let tiny = Ext::from_f64(1e-30);
        let back = (a.clone() + tiny.clone()) - a;
        assert!((back.to_f64() - 1e-30).abs() < 1e-45);
    }

    #[test]
    fn ext_transcendentals_match_f64() {
        for &x in &[-3.0, -0.5, 1e-12, 0.7, 4.0] {
            let e = Ext::from_f64(x);
            assert!((e.exp().to_f64() - x.exp()).abs() <= 2.0 * f64::EPSILON * x.exp());
            let em1 = e.exp_m1().to_f64();
            assert!((em1 - x.exp_m1()).abs() <= 4.0 * f64::EPSILON * x.exp_m1().abs());
        }
        let two = Ext::from_f64(2.0);
        assert!((two.sqrt().to_f64() - std::f64::consts::SQRT_2).abs() < 1e-16);
    }

    #[test]
    fn precision_parses() {
        assert_eq!("double".parse::<Precision>().unwrap(), Precision::Double);
        assert_eq!("Extended".parse::<Precision>().unwrap(), Precision::Extended);
        assert!("quad".parse::<Precision>().is_err());
    }
}
