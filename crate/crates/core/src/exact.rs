//! Exact arithmetic in the real quadratic field Q(√D).
//!
//! Elements are stored as `a + b√D` with rational `a`, `b`. The
//! representation is canonical when `D` is not a perfect square, so
//! structural equality is numeric equality and the ordering is decided
//! exactly by comparing squares.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// An element `a + b√D` of Q(√D). `D` must be a positive non-square.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadSurd<const D: u64> {
    a: BigRational,
    b: BigRational,
}

impl<const D: u64> QuadSurd<D> {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        debug_assert!(!is_square(D), "radicand {D} must not be a perfect square");
        Self { a, b }
    }

    /// The rational number `num/den` embedded in the field.
    pub fn ratio(num: i64, den: i64) -> Self {
        Self::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    /// The generator `√D`.
    pub fn sqrt_d() -> Self {
        Self::new(BigRational::zero(), BigRational::one())
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    pub fn surd_part(&self) -> &BigRational {
        &self.b
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.a.clone(), -self.b.clone())
    }

    /// Field norm `a² − D b²`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - radicand::<D>() * &self.b * &self.b
    }

    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&BigRational::zero());
        let sb = self.b.cmp(&BigRational::zero());
        match (sa, sb) {
            (s, Ordering::Equal) => s,
            (Ordering::Equal, s) => s,
            (x, y) if x == y => x,
            _ => {
                let a2 = &self.a * &self.a;
                let db2 = radicand::<D>() * &self.b * &self.b;
                if a2 > db2 {
                    sa
                } else {
                    sb
                }
            }
        }
    }
}

fn radicand<const D: u64>() -> BigRational {
    BigRational::from_integer(BigInt::from(D))
}

fn is_square(d: u64) -> bool {
    let r = (d as f64).sqrt().round() as u64;
    (r.saturating_sub(1)..=r + 1).any(|x| x * x == d)
}

impl<const D: u64> fmt::Debug for QuadSurd<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}·√{})", self.a, self.b, D)
    }
}

impl<const D: u64> fmt::Display for QuadSurd<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl<const D: u64> Serialize for QuadSurd<D> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64().unwrap_or(f64::NAN))
    }
}

impl<const D: u64> PartialOrd for QuadSurd<D> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const D: u64> Ord for QuadSurd<D> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).signum()
    }
}

impl<const D: u64> Zero for QuadSurd<D> {
    fn zero() -> Self {
        Self::new(BigRational::zero(), BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl<const D: u64> One for QuadSurd<D> {
    fn one() -> Self {
        Self::new(BigRational::one(), BigRational::zero())
    }
}

impl<const D: u64> Neg for QuadSurd<D> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b)
    }
}

impl<const D: u64> Add for QuadSurd<D> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.a + rhs.a, self.b + rhs.b)
    }
}

impl<const D: u64> Sub for QuadSurd<D> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.a - rhs.a, self.b - rhs.b)
    }
}

impl<const D: u64> Mul for QuadSurd<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let a = &self.a * &rhs.a + radicand::<D>() * &self.b * &rhs.b;
        let b = &self.a * &rhs.b + &self.b * &rhs.a;
        Self::new(a, b)
    }
}

impl<const D: u64> Div for QuadSurd<D> {
    type Output = Self;
    /// # Panics
    /// Panics on division by zero.
    fn div(self, rhs: Self) -> Self {
        let n = rhs.norm();
        assert!(!n.is_zero(), "division by zero in Q(√{D})");
        let num = self * rhs.conjugate();
        Self::new(num.a / &n, num.b / n)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:ident) => {
        impl<const D: u64> $tr for QuadSurd<D> {
            fn $m(&mut self, rhs: Self) {
                *self = self.clone().$op(rhs);
            }
        }
    };
}
assign_op!(AddAssign, add_assign, add);
assign_op!(SubAssign, sub_assign, sub);
assign_op!(MulAssign, mul_assign, mul);
assign_op!(DivAssign, div_assign, div);

impl<const D: u64> FromPrimitive for QuadSurd<D> {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self::ratio(n, 1))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Self::new(
            BigRational::from_integer(BigInt::from(n)),
            BigRational::zero(),
        ))
    }
    /// Exact conversion of the binary value of `x`.
    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(|a| Self::new(a, BigRational::zero()))
    }
}

impl<const D: u64> ToPrimitive for QuadSurd<D> {
    fn to_i64(&self) -> Option<i64> {
        self.to_f64().map(|x| x.trunc() as i64)
    }
    fn to_u64(&self) -> Option<u64> {
        self.to_f64()
            .filter(|x| *x >= 0.0)
            .map(|x| x.trunc() as u64)
    }
    fn to_f64(&self) -> Option<f64> {
        let a = self.a.to_f64()?;
        let b = self.b.to_f64()?;
        let r = (D as f64).sqrt();
        // Subtractive cancellation between the two parts is avoided by
        // evaluating through the conjugate when the signs differ.
        if a.signum() * b.signum() < 0.0 && !self.norm().is_zero() {
            let n = self.norm().to_f64()?;
            Some(n / (a - b * r))
        } else {
            Some(a + b * r)
        }
    }
}

impl<const D: u64> QuadSurd<D> {
    /// `|x|` computed exactly.
    pub fn abs_exact(&self) -> Self {
        if self.signum() == Ordering::Less {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Q73 = QuadSurd<73>;

    fn q(a: (i64, i64), b: (i64, i64)) -> Q73 {
        Q73::new(
            BigRational::new(a.0.into(), a.1.into()),
            BigRational::new(b.0.into(), b.1.into()),
        )
    }

    #[test]
    fn sqrt_squares_to_radicand() {
        let s = Q73::sqrt_d();
        assert_eq!(s.clone() * s, Q73::ratio(73, 1));
    }

    #[test]
    fn ordering_against_float() {
        let gamma = q((1, 12), (1, 12));
        assert!((gamma.to_f64().unwrap() - (1.0 + 73f64.sqrt()) / 12.0).abs() < 1e-15);
        assert!(gamma > Q73::ratio(79, 100));
        assert!(gamma < Q73::ratio(80, 100));
        assert!(-gamma.clone() < Q73::zero());
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = q((3, 7), (-2, 5));
        let y = q((-1, 2), (1, 9));
        assert_eq!((x.clone() * y.clone()) / y, x);
    }

    #[test]
    fn conversion_avoids_cancellation() {
        // 9 − √73 + tiny difference: both parts large, opposite signs.
        let x = q((8544, 1000), (-1, 1));
        let expected = 8.544 - 73f64.sqrt();
        assert!((x.to_f64().unwrap() - expected).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn order_matches_f64(a in -50i64..50, b in -50i64..50, c in -50i64..50, d in -50i64..50) {
            let x = q((a, 7), (b, 3));
            let y = q((c, 7), (d, 3));
            let fx = x.to_f64().unwrap();
            let fy = y.to_f64().unwrap();
            if (fx - fy).abs() > 1e-9 {
                prop_assert_eq!(x < y, fx < fy);
            }
            prop_assert_eq!(x.clone() - y.clone() + y.clone(), x);
        }
    }
}
