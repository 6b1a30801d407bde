//! Scalar abstraction over the two supported precisions.
//!
//! Training and storage run in `f32`; gradient-check mode switches the
//! whole graph to `f64`. Math functions resolve to `libm` in both cases,
//! so results do not depend on the host's system math library.

use num_traits::Float;

pub trait Scalar:
    Float + core::fmt::Debug + core::fmt::Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

const GELU_SCALE: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_CUBIC: f64 = 0.044_715;

/// GELU in its tanh form.
pub fn gelu<T: Scalar>(x: T) -> T {
    let k = T::from_f64(GELU_SCALE);
    let c = T::from_f64(GELU_CUBIC);
    let half = T::from_f64(0.5);
    let inner = (k * (x + c * x * x * x)).tanh();
    half * x * (T::one() + inner)
}

/// Derivative of [`gelu`].
pub fn gelu_prime<T: Scalar>(x: T) -> T {
    let k = T::from_f64(GELU_SCALE);
    let c = T::from_f64(GELU_CUBIC);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let t = (k * (x + c * x * x * x)).tanh();
    let sech2 = T::one() - t * t;
    half * (T::one() + t) + half * x * sech2 * k * (T::one() + three * c * x * x)
}
