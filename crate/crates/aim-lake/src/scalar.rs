//! Scalar abstraction shared by every numerical kernel.
//!
//! The kernels are written once against [`Real`] and instantiated for `f32`
//! and `f64`. Dense factorizations need the concrete type, so they are routed
//! through trait hooks implemented per scalar.

use nalgebra::{DMatrix, DVector};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + rustfft::FftNum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Eigenvalues (unsorted) and orthonormal eigenvectors of a symmetric matrix.
    fn symmetric_eigen(m: DMatrix<Self>) -> (DVector<Self>, DMatrix<Self>);

    /// Lower Cholesky factor, or `None` when the matrix is not positive definite.
    fn cholesky_lower(m: DMatrix<Self>) -> Option<DMatrix<Self>>;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn symmetric_eigen(m: DMatrix<Self>) -> (DVector<Self>, DMatrix<Self>) {
                let e = nalgebra::SymmetricEigen::new(m);
                (e.eigenvalues, e.eigenvectors)
            }

            fn cholesky_lower(m: DMatrix<Self>) -> Option<DMatrix<Self>> {
                nalgebra::Cholesky::new(m).map(|c| c.l())
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

/// Converts `T` back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Absolute value without the `Float`/`Signed` method ambiguity.
#[inline]
pub fn abs<T: Real>(x: T) -> T {
    Float::abs(x)
}

/// Euclidean norm of a vector.
#[inline]
pub fn norm2<T: Real>(v: &nalgebra::DVector<T>) -> T {
    v.dot(v).sqrt()
}
