//! Scalar abstraction: all chain arithmetic is generic over a floating type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating scalar the library computes with.
///
/// `f64` is the default used by the CLI and the concrete aliases at the crate
/// root; `f32` works but narrows every validation tolerance to its own
/// epsilon scale.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Convert from an `f64` constant. Panics on values not representable at
    /// all (never the case for the finite tolerances used here).
    fn cast(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("constant representable in scalar type")
    }

    /// Lossy view as `f64`, for RNG sampling and report rendering.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for input validation (row sums, distribution sums).
    ///
    /// Pinned to `1e-9` for `f64`; wider types of the future inherit that,
    /// `f32` gets an epsilon-scaled version since `1e-9` is below its
    /// resolution around 1.
    fn validation_tolerance() -> Self {
        let pinned = Self::cast(1e-9);
        let floor = Self::epsilon() * Self::cast(64.0);
        if pinned > floor {
            pinned
        } else {
            floor
        }
    }

    /// Relative guard used when comparing graph weights for ties: products
    /// of the same probabilities taken in different orders may differ in the
    /// last ulp.
    fn weight_tie_guard() -> Self {
        Self::epsilon() * Self::cast(64.0)
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}
