//! Axis-angle rotations: Rodrigues' formula and its exact derivative.
//!
//! Rotations are parameterized as 3-vectors whose direction is the rotation
//! axis and whose magnitude is the angle in radians. The derivative of the
//! rotation matrix with respect to the three axis-angle components follows
//! the closed form of Gallego & Yezzi, with a series fallback near zero.

use nalgebra::{Matrix3, Vector3};

/// Angle threshold below which the small-angle forms are used.
const SMALL_ANGLE: f64 = 1e-9;

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix for the axis-angle vector `omega` (Rodrigues' formula).
pub fn rodrigues(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        // First-order expansion; exact at omega = 0.
        return Matrix3::identity() + skew(omega);
    }
    let theta = theta2.sqrt();
    let k = skew(omega) / theta;
    Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Partial derivatives `∂R/∂ω_i` of the rotation matrix at `omega`.
///
/// Returns the three 3×3 matrices for i = x, y, z. Uses
/// `∂R/∂ω_i = (ω_i [ω]× + [ω × (I − R) e_i]×) / ‖ω‖² · R`
/// away from zero and the limit `[e_i]×` at zero.
pub fn rotation_derivatives(omega: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta2 = omega.norm_squared();
    if theta2 < SMALL_ANGLE {
        return [
            skew(&Vector3::x()),
            skew(&Vector3::y()),
            skew(&Vector3::z()),
        ];
    }
    let r = rodrigues(omega);
    let omega_skew = skew(omega);
    let mut out = [Matrix3::zeros(); 3];
    for i in 0..3 {
        let mut e = Vector3::zeros();
        e[i] = 1.0;
        let v = omega.cross(&((Matrix3::identity() - r) * e));
        out[i] = (omega_skew * omega[i] + skew(&v)) / theta2 * r;
    }
    out
}

/// Axis-angle vector for a yaw rotation (about the +y axis) by `angle` radians.
pub fn yaw_axis_angle(angle: f64) -> Vector3<f64> {
    Vector3::new(0.0, angle, 0.0)
}

/// Yaw angle whose rotation maps the +x axis onto the horizontal direction
/// `(dx, 0, dz)`.
pub fn yaw_aligning_x_to(dx: f64, dz: f64) -> f64 {
    // R_y(a) * x̂ = (cos a, 0, -sin a)
    (-dz).atan2(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_at_zero() {
        assert_eq!(rodrigues(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn matches_nalgebra_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let w = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let ours = rodrigues(&w);
            let theirs = nalgebra::Rotation3::new(w);
            assert_relative_eq!(ours, *theirs.matrix(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_is_orthonormal() {
        let w = Vector3::new(0.3, -1.1, 0.7);
        let r = rodrigues(&w);
        assert_relative_eq!(r * r.transpose(), Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..30 {
            let w = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let d = rotation_derivatives(&w);
            for i in 0..3 {
                let mut wp = w;
                let mut wm = w;
                wp[i] += h;
                wm[i] -= h;
                let fd = (rodrigues(&wp) - rodrigues(&wm)) / (2.0 * h);
                assert_relative_eq!(d[i], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn derivatives_at_zero_are_generators() {
        let d = rotation_derivatives(&Vector3::zeros());
        assert_eq!(d[0], skew(&Vector3::x()));
        assert_eq!(d[1], skew(&Vector3::y()));
        assert_eq!(d[2], skew(&Vector3::z()));
    }

    #[test]
    fn yaw_alignment() {
        // Heading along -x needs a half turn.
        let a = yaw_aligning_x_to(-1.0, 0.0);
        let r = rodrigues(&yaw_axis_angle(a));
        assert_relative_eq!(r * Vector3::x(), -Vector3::x(), epsilon = 1e-12);
        // Generic horizontal heading.
        let d = Vector3::new(0.6, 0.0, -0.8);
        let a = yaw_aligning_x_to(d.x, d.z);
        let r = rodrigues(&yaw_axis_angle(a));
        assert_relative_eq!(r * Vector3::x(), d, epsilon = 1e-12);
    }
}
