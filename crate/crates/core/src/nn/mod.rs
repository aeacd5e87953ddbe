//! Minimal trainable stack with hand-derived gradients: embedding tables, a
//! 1-D convolution bank over the ball axis with global max-pooling, dense
//! heads, a GRU cell, the losses, and Adam.
//!
//! Parameters live in one flat buffer per model ([`params::ParamSet`]);
//! layers hold offsets into it. Gradients accumulate into a mirror buffer of
//! the same length, which keeps the optimizer and finite-difference checks
//! trivial. Everything is generic over [`Scalar`] so training runs in `f32`
//! while gradient checks run in `f64`.

pub mod adam;
pub mod encoder;
pub mod gru;
pub mod init;
pub mod layers;
pub mod losses;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use encoder::{Encoder, EncoderCache, NetConfig};
pub use params::{ParamId, ParamLayout, ParamLayoutBuilder, ParamSet};

/// Floating-point element type of a model.
pub trait Scalar:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn maxv(self, other: Self) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn is_finite(self) -> bool;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn maxv(self, other: Self) -> Self {
                if self > other {
                    self
                } else {
                    other
                }
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Coarse arithmetic-operation counters used by the complexity checks.
/// Counts multiply-add work executed by forward passes on this thread.
pub mod ops {
    use std::cell::Cell;

    thread_local! {
        static COUNT: Cell<u64> = const { Cell::new(0) };
    }

    pub fn reset() {
        COUNT.with(|c| c.set(0));
    }

    #[inline]
    pub fn add(n: u64) {
        COUNT.with(|c| c.set(c.get() + n));
    }

    pub fn get() -> u64 {
        COUNT.with(|c| c.get())
    }
}
