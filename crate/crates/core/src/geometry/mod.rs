//! SE(2) pose algebra and the Q16.16 fixed-point scalar type.

mod fixed;

pub use fixed::{FixedQ16, FixedRangeError, OverflowFlag};

use serde::{Deserialize, Serialize};

/// Normalize an angle to the half-open interval `[-pi, pi)`.
///
/// Panics on non-finite input; callers are expected to keep poses finite.
pub fn normalize_angle(theta: f64) -> f64 {
    assert!(theta.is_finite(), "angle must be finite, got {theta}");
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    // rem_euclid can land exactly on 2*pi for inputs just below the boundary.
    if wrapped >= std::f64::consts::PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

/// A planar robot pose: position in meters, heading in radians.
///
/// The heading is kept normalized to `[-pi, pi)` by every constructor and
/// operation that produces a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    /// Create a pose, normalizing the heading.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite(), "pose must be finite");
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// Pose composition `self ⊕ other`: apply `other` in the frame of `self`.
    ///
    /// ```text
    /// c.x = a.x + b.x cos(a.θ) − b.y sin(a.θ)
    /// c.y = a.y + b.x sin(a.θ) + b.y cos(a.θ)
    /// c.θ = normalize(a.θ + b.θ)
    /// ```
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (sin_t, cos_t) = self.theta.sin_cos();
        Pose2D::new(
            self.x + other.x * cos_t - other.y * sin_t,
            self.y + other.x * sin_t + other.y * cos_t,
            self.theta + other.theta,
        )
    }

    /// Inverse composition `self ⊖ other`: the relative transform `d`
    /// satisfying `other ⊕ d == self`.
    pub fn inverse_compose(&self, other: &Pose2D) -> Pose2D {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let (sin_t, cos_t) = other.theta.sin_cos();
        Pose2D::new(
            dx * cos_t + dy * sin_t,
            -dx * sin_t + dy * cos_t,
            self.theta - other.theta,
        )
    }

    /// Euclidean norm of the translational part.
    pub fn trans_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Magnitude of the rotational part.
    pub fn rot_abs(&self) -> f64 {
        self.theta.abs()
    }
}

impl Default for Pose2D {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn assert_pose_eq(a: &Pose2D, b: &Pose2D, eps: f64) {
        assert_abs_diff_eq!(a.x, b.x, epsilon = eps);
        assert_abs_diff_eq!(a.y, b.y, epsilon = eps);
        // compare headings on the circle
        let dt = normalize_angle(a.theta - b.theta);
        assert!(dt.abs() <= eps, "theta differs: {} vs {}", a.theta, b.theta);
    }

    #[test]
    fn normalize_angle_basics() {
        assert_eq!(normalize_angle(0.0), 0.0);
        // 3π wraps to −π because the interval is half-open at +π
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-PI - 1e-9), PI - 1e-9, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-PI), -PI, epsilon = 0.0);
        // +π maps to −π
        assert_abs_diff_eq!(normalize_angle(PI), -PI, epsilon = 1e-12);
    }

    #[test]
    #[should_panic]
    fn normalize_angle_rejects_nan() {
        normalize_angle(f64::NAN);
    }

    #[test]
    fn compose_identity() {
        let p = Pose2D::new(1.5, -2.0, 0.7);
        assert_pose_eq(&Pose2D::identity().compose(&p), &p, 1e-15);
        assert_pose_eq(&p.compose(&Pose2D::identity()), &p, 1e-15);
    }

    #[test]
    fn compose_quarter_turn() {
        // (1,0,π/2) ⊕ (1,0,0) = (1,1,π/2): the second step is rotated 90°
        let a = Pose2D::new(1.0, 0.0, PI / 2.0);
        let b = Pose2D::new(1.0, 0.0, 0.0);
        let c = a.compose(&b);
        assert_pose_eq(&c, &Pose2D::new(1.0, 1.0, PI / 2.0), 1e-12);
    }

    #[test]
    fn compose_wraps_angle() {
        let half = Pose2D::new(0.0, 0.0, PI);
        let c = half.compose(&half);
        assert_pose_eq(&c, &Pose2D::identity(), 1e-12);
    }

    #[test]
    fn inverse_compose_self_is_identity() {
        let p = Pose2D::new(3.0, -1.0, 1.2);
        assert_pose_eq(&p.inverse_compose(&p), &Pose2D::identity(), 1e-15);
    }

    #[test]
    fn inverse_compose_hand_case() {
        // inverting the quarter-turn compose example above
        let a = Pose2D::new(1.0, 1.0, PI / 2.0);
        let b = Pose2D::new(1.0, 0.0, PI / 2.0);
        assert_pose_eq(&a.inverse_compose(&b), &Pose2D::new(1.0, 0.0, 0.0), 1e-12);
    }

    fn arb_pose() -> impl Strategy<Value = Pose2D> {
        (-50.0..50.0f64, -50.0..50.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn inverse_compose_roundtrip(b in arb_pose(), d in arb_pose()) {
            let a = b.compose(&d);
            let d2 = a.inverse_compose(&b);
            prop_assert!((d2.x - d.x).abs() < 1e-9);
            prop_assert!((d2.y - d.y).abs() < 1e-9);
            prop_assert!(normalize_angle(d2.theta - d.theta).abs() < 1e-9);
        }

        #[test]
        fn compose_then_invert(a in arb_pose(), b in arb_pose()) {
            let rel = a.inverse_compose(&b);
            let back = b.compose(&rel);
            prop_assert!((back.x - a.x).abs() < 1e-9);
            prop_assert!((back.y - a.y).abs() < 1e-9);
            prop_assert!(normalize_angle(back.theta - a.theta).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn compose_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.x - right.x).abs() < 1e-9);
            prop_assert!((left.y - right.y).abs() < 1e-9);
            prop_assert!(normalize_angle(left.theta - right.theta).abs() < 1e-9);
        }
    }
}
