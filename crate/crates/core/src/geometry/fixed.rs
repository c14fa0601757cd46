//! Q16.16 fixed-point scalar emulating the accelerator's numeric format.
//!
//! A value is a 32-bit two's-complement integer interpreted as `raw / 2^16`,
//! giving 16 signed integer bits and 16 fractional bits. All rounding is
//! round-to-nearest with ties away from zero; arithmetic that leaves the
//! representable range saturates and raises a sticky [`OverflowFlag`] instead
//! of wrapping, so corrupted poses stay observable in tests.

use thiserror::Error;

const FRAC_BITS: u32 = 16;
const SCALE: f64 = 65536.0;
const HALF_ULP_RAW: u64 = 1 << (FRAC_BITS - 1);

#[derive(Debug, Error, PartialEq)]
#[error("value {value} outside Q16.16 range [-32768, 32768)")]
pub struct FixedRangeError {
    pub value: f64,
}

/// Sticky overflow indicator threaded through fixed-point computations.
///
/// Once raised it stays raised; callers query it after a computation to learn
/// whether any intermediate saturated.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OverflowFlag {
    raised: bool,
}

impl OverflowFlag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raise(&mut self) {
        self.raised = true;
    }

    pub fn is_raised(&self) -> bool {
        self.raised
    }

    pub fn merge(&mut self, other: OverflowFlag) {
        self.raised |= other.raised;
    }
}

/// A Q16.16 fixed-point number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct FixedQ16 {
    raw: i32,
}

impl FixedQ16 {
    pub const ZERO: Self = Self { raw: 0 };
    pub const ONE: Self = Self { raw: 1 << FRAC_BITS };
    pub const MIN: Self = Self { raw: i32::MIN };
    pub const MAX: Self = Self { raw: i32::MAX };

    pub const fn from_raw(raw: i32) -> Self {
        Self { raw }
    }

    pub const fn raw(self) -> i32 {
        self.raw
    }

    /// Convert a real value, rounding to the nearest representable Q16.16
    /// (ties away from zero). Values outside the representable range are an
    /// error, never a silent wrap.
    pub fn from_real(value: f64) -> Result<Self, FixedRangeError> {
        if !value.is_finite() {
            return Err(FixedRangeError { value });
        }
        let scaled = (value * SCALE).round();
        if scaled < i32::MIN as f64 || scaled > i32::MAX as f64 {
            return Err(FixedRangeError { value });
        }
        Ok(Self { raw: scaled as i32 })
    }

    /// Convert a real value, saturating out-of-range inputs and raising the
    /// overflow flag.
    pub fn saturating_from_real(value: f64, flag: &mut OverflowFlag) -> Self {
        match Self::from_real(value) {
            Ok(v) => v,
            Err(_) => {
                flag.raise();
                if value < 0.0 {
                    Self::MIN
                } else {
                    Self::MAX
                }
            }
        }
    }

    pub fn to_real(self) -> f64 {
        self.raw as f64 / SCALE
    }

    /// Largest integer not exceeding the value (arithmetic shift keeps the
    /// floor semantics for negatives).
    pub fn floor_int(self) -> i32 {
        self.raw >> FRAC_BITS
    }

    pub fn add(self, rhs: Self, flag: &mut OverflowFlag) -> Self {
        match self.raw.checked_add(rhs.raw) {
            Some(raw) => Self { raw },
            None => {
                flag.raise();
                if (self.raw as i64 + rhs.raw as i64) < 0 {
                    Self::MIN
                } else {
                    Self::MAX
                }
            }
        }
    }

    pub fn sub(self, rhs: Self, flag: &mut OverflowFlag) -> Self {
        match self.raw.checked_sub(rhs.raw) {
            Some(raw) => Self { raw },
            None => {
                flag.raise();
                if (self.raw as i64 - rhs.raw as i64) < 0 {
                    Self::MIN
                } else {
                    Self::MAX
                }
            }
        }
    }

    pub fn neg(self, flag: &mut OverflowFlag) -> Self {
        Self::ZERO.sub(self, flag)
    }

    /// Fixed-point product via an exact 64-bit intermediate, rounded to
    /// nearest with ties away from zero. Saturates on overflow.
    pub fn mul(self, rhs: Self, flag: &mut OverflowFlag) -> Self {
        let product = self.raw as i64 * rhs.raw as i64; // scaled by 2^32
        let negative = product < 0;
        let magnitude = product.unsigned_abs();
        let rounded_mag = (magnitude + HALF_ULP_RAW) >> FRAC_BITS;
        let rounded = if negative {
            -(rounded_mag as i64)
        } else {
            rounded_mag as i64
        };
        if rounded > i32::MAX as i64 {
            flag.raise();
            Self::MAX
        } else if rounded < i32::MIN as i64 {
            flag.raise();
            Self::MIN
        } else {
            Self {
                raw: rounded as i32,
            }
        }
    }

    /// Sine and cosine of the stored angle value.
    ///
    /// Evaluated at extended precision on the quantized argument, then each
    /// result is rounded to the nearest Q16.16. Cannot overflow since both
    /// results lie in [-1, 1].
    pub fn sincos(self) -> (Self, Self) {
        let (s, c) = self.to_real().sin_cos();
        let quantize = |v: f64| Self {
            raw: (v * SCALE).round() as i32,
        };
        (quantize(s), quantize(c))
    }
}

impl std::fmt::Display for FixedQ16 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_real())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn powers_of_two_are_exact() {
        let mut flag = OverflowFlag::new();
        let one = FixedQ16::from_real(1.0).unwrap();
        assert_eq!(one.mul(one, &mut flag), FixedQ16::ONE);
        let half = FixedQ16::from_real(0.5).unwrap();
        assert_eq!(half.mul(half, &mut flag).to_real(), 0.25);
        assert!(!flag.is_raised());
    }

    #[test]
    fn one_third_times_three_is_not_one() {
        // raw(1/3) = round(65536/3) = 21845; 21845 * 3 = 65535, one ulp short
        let third = FixedQ16::from_real(1.0 / 3.0).unwrap();
        assert_eq!(third.raw(), 21845);
        let three = FixedQ16::from_real(3.0).unwrap();
        let mut flag = OverflowFlag::new();
        let product = third.mul(three, &mut flag);
        assert_eq!(product.raw(), 65535);
        assert!(product.to_real() < 1.0);
        assert!(!flag.is_raised());
    }

    #[test]
    fn from_real_range_checks() {
        assert!(FixedQ16::from_real(-32768.0).is_ok());
        assert!(FixedQ16::from_real(32768.0).is_err());
        assert!(FixedQ16::from_real(32767.99999).is_ok());
        assert!(FixedQ16::from_real(f64::NAN).is_err());
        assert!(FixedQ16::from_real(f64::INFINITY).is_err());
    }

    #[test]
    fn mul_saturates_and_raises_flag() {
        let big = FixedQ16::from_real(30000.0).unwrap();
        let mut flag = OverflowFlag::new();
        assert_eq!(big.mul(big, &mut flag), FixedQ16::MAX);
        assert!(flag.is_raised());

        let mut flag = OverflowFlag::new();
        let neg = FixedQ16::from_real(-30000.0).unwrap();
        assert_eq!(big.mul(neg, &mut flag), FixedQ16::MIN);
        assert!(flag.is_raised());
    }

    #[test]
    fn add_saturates() {
        let mut flag = OverflowFlag::new();
        let big = FixedQ16::from_real(30000.0).unwrap();
        assert_eq!(big.add(big, &mut flag), FixedQ16::MAX);
        assert!(flag.is_raised());
    }

    #[test]
    fn sincos_at_zero_is_exact() {
        let (s, c) = FixedQ16::ZERO.sincos();
        assert_eq!(s, FixedQ16::ZERO);
        assert_eq!(c, FixedQ16::ONE);
    }

    #[test]
    fn sincos_near_right_angle() {
        let theta = FixedQ16::from_real(std::f64::consts::FRAC_PI_2).unwrap();
        let (s, c) = theta.sincos();
        // evaluated at the quantized angle, not at exact π/2
        let exact_s = theta.to_real().sin();
        let exact_c = theta.to_real().cos();
        assert!((s.to_real() - exact_s).abs() <= 2f64.powi(-16));
        assert!((c.to_real() - exact_c).abs() <= 2f64.powi(-16));
        assert!((s.to_real() - 1.0).abs() <= 2f64.powi(-16));
        assert!(c.to_real().abs() <= 2f64.powi(-15));
    }

    #[test]
    fn floor_int_matches_math_floor() {
        for v in [-3.7, -3.0, -0.2, 0.0, 0.9, 1.0, 12.3] {
            let f = FixedQ16::from_real(v).unwrap();
            assert_eq!(f.floor_int(), f.to_real().floor() as i32, "v = {v}");
        }
    }

    /// Independent oracle: exact integer arithmetic with a division-based
    /// rounding rule (ties away from zero), no shifts.
    fn mul_oracle(a: i32, b: i32) -> i64 {
        let product = i128::from(a) * i128::from(b);
        let denom: i128 = 65536;
        let quotient = product / denom;
        let remainder = product % denom;
        let half = denom / 2;
        let adjusted = if remainder.abs() >= half {
            quotient + product.signum()
        } else {
            quotient
        };
        adjusted as i64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10000))]

        #[test]
        fn mul_matches_big_integer_oracle(a in any::<i32>(), b in any::<i32>()) {
            let mut flag = OverflowFlag::new();
            let got = FixedQ16::from_raw(a).mul(FixedQ16::from_raw(b), &mut flag);
            let want = mul_oracle(a, b);
            if want > i32::MAX as i64 {
                prop_assert_eq!(got, FixedQ16::MAX);
                prop_assert!(flag.is_raised());
            } else if want < i32::MIN as i64 {
                prop_assert_eq!(got, FixedQ16::MIN);
                prop_assert!(flag.is_raised());
            } else {
                prop_assert_eq!(got.raw() as i64, want);
                prop_assert!(!flag.is_raised());
            }
        }

        #[test]
        fn roundtrip_error_bounded(v in -100.0..100.0f64) {
            let f = FixedQ16::from_real(v).unwrap();
            prop_assert!((f.to_real() - v).abs() <= 2f64.powi(-17));
        }

        #[test]
        fn sincos_pythagorean(theta in -std::f64::consts::PI..std::f64::consts::PI) {
            let f = FixedQ16::from_real(theta).unwrap();
            let (s, c) = f.sincos();
            let norm = s.to_real() * s.to_real() + c.to_real() * c.to_real();
            prop_assert!((norm - 1.0).abs() <= 2f64.powi(-13));
        }
    }
}
