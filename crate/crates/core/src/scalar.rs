use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the engine is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Display + Debug + LowerExp + FromStr + Default + Send + Sync + 'static
{
    /// Significant decimal digits kept by [`Scalar::snap`].
    const SNAP_DIGITS: usize;

    /// Round to `SNAP_DIGITS` significant decimal digits.
    ///
    /// Solvers snap computed endpoints and grid coordinates so that values such as
    /// `0.3 - (1 - 0.3)` and `2 * 0.3 - 1` land on the same representation.
    fn snap(self) -> Self {
        if !self.is_finite() || self == Self::zero() {
            return self;
        }
        let text = format!("{:.*e}", Self::SNAP_DIGITS - 1, self);
        text.parse().unwrap_or(self)
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Removes the sign of zero so `-0` and `0` print identically.
    fn unsigned_zero(self) -> Self {
        if self == Self::zero() {
            Self::zero()
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    const SNAP_DIGITS: usize = 12;
}

impl Scalar for f32 {
    const SNAP_DIGITS: usize = 6;
}

/// Prints a scalar in the set grammar: `inf`, `-inf`, or the shortest round-trip decimal.
pub fn fmt_scalar<S: Scalar>(v: S) -> String {
    if v.is_infinite() {
        if v > S::zero() { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", v.unsigned_zero())
    }
}

/// Parses a scalar including the `inf` / `-inf` literals.
pub fn parse_scalar<S: Scalar>(text: &str) -> Option<S> {
    match text.trim() {
        "inf" | "+inf" => Some(S::infinity()),
        "-inf" => Some(S::neg_infinity()),
        t => {
            let v: S = t.parse().ok()?;
            if v.is_nan() { None } else { Some(v) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_merges_rounding_paths() {
        let x = 0.3_f64;
        assert_ne!(x - (1.0 - x), 2.0 * x - 1.0);
        assert_eq!((x - (1.0 - x)).snap(), (2.0 * x - 1.0).snap());
        assert_eq!((-1.0 + 37.0 * 0.01_f64).snap(), -0.63);
    }

    #[test]
    fn scalar_text_roundtrip() {
        for v in [0.1_f64, -2.5, 1e-7, 3.0, f64::INFINITY, f64::NEG_INFINITY] {
            assert_eq!(parse_scalar::<f64>(&fmt_scalar(v)), Some(v));
        }
        assert_eq!(fmt_scalar(-0.0_f64), "0");
        assert_eq!(parse_scalar::<f64>("nan"), None);
    }

    #[test]
    fn f32_snaps_to_six_digits() {
        assert_eq!((0.1_f32 + 0.2_f32).snap(), 0.3_f32);
    }
}
