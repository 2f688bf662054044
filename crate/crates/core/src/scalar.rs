//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the library computes in. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable at all.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `base` floored at a small multiple of machine epsilon, so tolerances
    /// written for f64 stay meaningful in single precision.
    fn tol(base: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(256.0);
        Self::lit(base).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Binomial coefficient as a scalar; exact for the small player counts used here.
pub fn binom<S: Scalar>(n: usize, k: usize) -> S {
    if k > n {
        return S::zero();
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    S::lit(acc.round())
}

/// Integer power with `0^0 = 1`.
pub fn ipow<S: Scalar>(x: S, k: usize) -> S {
    let mut acc = S::one();
    for _ in 0..k {
        acc *= x;
    }
    acc
}
