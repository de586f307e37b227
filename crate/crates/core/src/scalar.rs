//! Scalar abstractions shared by every numeric routine in the crate.
//!
//! [`Field`] is the minimal algebra needed by projections that only use
//! field operations and comparisons (the planar polyhedra of the
//! counter-example), so they can run in exact arithmetic. [`Real`] adds
//! everything nalgebra needs for decompositions and is implemented by
//! `f32` and `f64`.

use nalgebra::{ClosedAddAssign, ClosedDivAssign, ClosedMulAssign, ClosedSubAssign, RealField, Scalar};
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use std::ops::Neg;

/// An ordered field usable as the entry type of iterates.
pub trait Field:
    Scalar
    + PartialOrd
    + Zero
    + One
    + Neg<Output = Self>
    + ClosedAddAssign
    + ClosedSubAssign
    + ClosedMulAssign
    + ClosedDivAssign
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
{
}

impl<T> Field for T where
    T: Scalar
        + PartialOrd
        + Zero
        + One
        + Neg<Output = T>
        + ClosedAddAssign
        + ClosedSubAssign
        + ClosedMulAssign
        + ClosedDivAssign
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
{
}

/// A floating-point field with square roots, trigonometry and the
/// decompositions nalgebra provides.
pub trait Real: Field + RealField + Copy {}

impl<T> Real for T where T: Field + RealField + Copy {}

/// Converts an `f64` literal into `T`.
///
/// # Panics
/// Panics if `T` cannot represent `x` (for instance a NaN into an exact type).
pub fn lit<T: Field>(x: f64) -> T {
    T::from_f64(x).unwrap_or_else(|| panic!("literal {x} is not representable"))
}

/// Lossy conversion to `f64` for reporting.
pub fn to_f64<T: Field>(x: &T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Absolute value using only the ordering.
pub fn abs<T: Field>(x: &T) -> T {
    if *x < T::zero() {
        -x.clone()
    } else {
        x.clone()
    }
}

/// Squared Euclidean norm of a slice of field elements.
pub fn norm_sq<T: Field>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, a| acc + a.clone() * a.clone())
}

/// Squared Euclidean distance between two slices of equal length.
pub fn dist_sq<T: Field>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
        let d = x.clone() - y.clone();
        acc + d.clone() * d
    })
}

/// Machine epsilon of `T` as an `f64`.
pub fn epsilon<T: Real>() -> f64 {
    to_f64(&T::default_epsilon())
}
