//! Scalar abstraction.
//!
//! The exact identity engine and a few float fallbacks share the same
//! algebra (products of differences, determinants, matching sums), so those
//! routines are written once over [`Scalar`] and instantiated with
//! [`ExactScalar`] or `f64`. Random matrices always use complex doubles,
//! with the imaginary part identically zero in the real (β=1) case.

use std::fmt::Debug;
use std::ops::Neg;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Num;

/// Commutative ring/field element usable by the generic algebra.
pub trait Scalar: Clone + Num + Neg<Output = Self> + Debug {}

impl<T> Scalar for T where T: Clone + Num + Neg<Output = T> + Debug {}

/// Arbitrary precision rational; all `vdm` identities are checked in it.
pub type ExactScalar = BigRational;
pub type Real = f64;
pub type Cplx = Complex64;
/// Dense complex matrix. Real ensembles store zero imaginary parts.
pub type CMat = DMatrix<Complex64>;

/// Rational `num/den`.
pub fn rat(num: i64, den: i64) -> ExactScalar {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> ExactScalar {
    BigRational::from_integer(BigInt::from(v))
}

/// Lossy conversion used only for reporting.
pub fn to_f64(x: &ExactScalar) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// `(-1)^k` in any scalar type.
pub fn parity_sign<T: Scalar>(odd: bool) -> T {
    if odd {
        -T::one()
    } else {
        T::one()
    }
}

/// Integer power by repeated squaring.
pub fn powi<T: Scalar>(x: &T, mut e: u32) -> T {
    let mut base = x.clone();
    let mut acc = T::one();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base.clone();
        }
        base = base.clone() * base;
        e >>= 1;
    }
    acc
}
