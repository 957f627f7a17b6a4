//! SO(3) / SE(3) algebra: hat/vee, axis-angle and roll-pitch-yaw rotation
//! constructions, rotation angle from trace, homogeneous transform
//! composition and inversion.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for orthonormality and determinant checks.
pub const ROTATION_TOL: f64 = 1e-9;

/// Angular speeds below this are treated as zero by [`rodrigues`].
pub const ZERO_SPEED: f64 = 1e-12;

/// Skew-symmetric matrix of `v`, so that `hat(v) * u = v × u`.
///
/// ```text
/// |  0   -v3   v2 |
/// |  v3   0   -v1 |
/// | -v2   v1   0  |
/// ```
#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Reads the three lower/upper entries directly; the
/// input is assumed skew-symmetric.
#[inline]
pub fn vee(w: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)])
}

/// Vee of the skew-symmetric part of `m`, i.e. `vee((m - mᵀ) / 2)`.
#[inline]
pub fn vee_skew_part(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix3<f64>", into = "Matrix3<f64>")]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `R·Rᵀ = I` and `det R = 1` within `tol`.
    pub fn new(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let ortho = (m * m.transpose() - Matrix3::identity()).amax();
        let det = m.determinant();
        if !(ortho <= tol) || !((det - 1.0).abs() <= tol) {
            return Err(Error::InvalidRotation { ortho, det });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        Self::new(self.0, tol).is_ok()
    }
}

impl std::ops::Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl TryFrom<Matrix3<f64>> for Rotation3 {
    type Error = Error;
    fn try_from(m: Matrix3<f64>) -> Result<Self> {
        // Serialized rotations lose a few ulps; accept a looser bound on read.
        Rotation3::new(m, 1e-6)
    }
}

impl From<Rotation3> for Matrix3<f64> {
    fn from(r: Rotation3) -> Self {
        r.0
    }
}

/// Which frame an angular velocity is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Body,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularVelocity {
    pub vector: Vector3<f64>,
    pub frame: Frame,
}

impl AngularVelocity {
    pub fn body(vector: Vector3<f64>) -> Self {
        Self { vector, frame: Frame::Body }
    }

    pub fn global(vector: Vector3<f64>) -> Self {
        Self { vector, frame: Frame::Global }
    }
}

/// Rotation accumulated over `ts` seconds at constant angular velocity.
///
/// The velocity is split into speed `|ω|` and unit axis `u`, and the
/// standard unit-axis Rodrigues formula is applied with angle `|ω|·ts`:
/// `R = I + sin(φ) û + (1 − cos φ) û²`.
pub fn rodrigues(omega: &AngularVelocity, ts: f64) -> Rotation3 {
    debug_assert!(ts > 0.0);
    let speed = omega.vector.norm();
    if speed < ZERO_SPEED {
        return Rotation3::identity();
    }
    let u = hat(&(omega.vector / speed));
    let phi = speed * ts;
    Rotation3(Matrix3::identity() + u * phi.sin() + u * u * (1.0 - phi.cos()))
}

/// Elementary rotation about the x axis.
pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Elementary rotation about the y axis.
pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Elementary rotation about the z axis.
pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rz(yaw) · Ry(pitch) · Rx(roll)` written out entry by entry.
pub fn rpy_matrix(angles: [f64; 3]) -> Rotation3 {
    let (s1, c1) = angles[0].sin_cos();
    let (s2, c2) = angles[1].sin_cos();
    let (s3, c3) = angles[2].sin_cos();
    Rotation3(Matrix3::new(
        c3 * c2,
        c3 * s2 * s1 - s3 * c1,
        c3 * s2 * c1 + s3 * s1,
        s3 * c2,
        s3 * s2 * s1 + c3 * c1,
        s3 * s2 * c1 - c3 * s1,
        -s2,
        c2 * s1,
        c2 * c1,
    ))
}

/// Roll, pitch, yaw such that `rpy_matrix(angles) = r`. Pitch lies in
/// `[-π/2, π/2]`; at gimbal lock roll is set to zero.
pub fn rpy_from_matrix(r: &Rotation3) -> [f64; 3] {
    let m = r.matrix();
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    if m[(2, 0)].abs() < 1.0 - 1e-12 {
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        [roll, pitch, yaw]
    } else {
        // cos(pitch) = 0: only roll ± yaw is observable.
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        [0.0, pitch, yaw]
    }
}

/// Rotation angle in `[0, π]` from `tr R = 1 + 2 cos ρ`.
pub fn rotation_angle(r: &Rotation3) -> f64 {
    ((r.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Rigid transform `[R b; 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomTransform {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl HomTransform {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), t)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Parses a 4×4 homogeneous matrix; the bottom row must be `[0 0 0 1]`.
    pub fn from_matrix(m: &Matrix4<f64>, tol: f64) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)] - 1.0];
        if bottom.iter().any(|v| !(v.abs() <= tol)) {
            return Err(Error::Schema("homogeneous transform bottom row must be [0,0,0,1]".into()));
        }
        let rotation = Rotation3::new(m.fixed_view::<3, 3>(0, 0).into_owned(), tol)?;
        Ok(Self::new(rotation, m.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    /// Row-major 16 entries.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(v: &[f64], tol: f64) -> Result<Self> {
        if v.len() != 16 {
            return Err(Error::Schema(format!("expected 16 row-major entries, got {}", v.len())));
        }
        Self::from_matrix(&Matrix4::from_row_slice(v), tol)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.matrix() * p + self.translation
    }
}

impl std::ops::Mul for HomTransform {
    type Output = HomTransform;
    fn mul(self, rhs: HomTransform) -> HomTransform {
        compose(&self, &rhs)
    }
}

/// `a · b`.
pub fn compose(a: &HomTransform, b: &HomTransform) -> HomTransform {
    HomTransform {
        rotation: a.rotation * b.rotation,
        translation: a.rotation.matrix() * b.translation + a.translation,
    }
}

/// `[Rᵀ, −Rᵀb; 0, 1]`.
pub fn invert(a: &HomTransform) -> HomTransform {
    let rt = a.rotation.transpose();
    HomTransform { rotation: rt, translation: -(rt.matrix() * a.translation) }
}

impl Serialize for HomTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HomTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        HomTransform::from_row_major(&v, 1e-6).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    fn angles() -> impl Strategy<Value = [f64; 3]> {
        (-7.0..7.0f64, -7.0..7.0f64, -7.0..7.0f64).prop_map(|(a, b, c)| [a, b, c])
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        let m = hat(&Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(m, Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0));
    }

    #[test]
    fn rodrigues_zero_and_half_turn() {
        let r = rodrigues(&AngularVelocity::body(Vector3::zeros()), 0.01);
        assert_eq!(r, Rotation3::identity());

        let r = rodrigues(&AngularVelocity::body(Vector3::new(0.0, 0.0, PI)), 1.0);
        let expected = rpy_matrix([0.0, 0.0, PI]);
        assert_relative_eq!(*r.matrix(), *expected.matrix(), epsilon = 1e-12);
        assert_relative_eq!(*r.matrix(), Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)), epsilon = 1e-12);
    }

    #[test]
    fn rpy_quarter_roll() {
        let r = rpy_matrix([FRAC_PI_2, 0.0, 0.0]);
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_relative_eq!(*r.matrix(), expected, epsilon = 1e-15);
        assert_eq!(*rpy_matrix([0.0; 3]).matrix(), Matrix3::identity());
    }

    #[test]
    fn rotation_angle_examples() {
        assert_eq!(rotation_angle(&Rotation3::identity()), 0.0);
        let half = Rotation3::new(Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)), 1e-9).unwrap();
        assert_relative_eq!(rotation_angle(&half), PI, epsilon = 1e-12);
        let r = rpy_matrix([0.3, -0.2, 1.1]);
        assert_eq!(rotation_angle(&(r.transpose() * r)), 0.0);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation3::new(m, ROTATION_TOL).is_err());
        assert!(Rotation3::new(Matrix3::identity() * 1.01, ROTATION_TOL).is_err());
    }

    #[test]
    fn inverse_matches_numeric_inverse() {
        let a = HomTransform::new(rpy_matrix([0.4, 1.2, -2.0]), Vector3::new(0.3, -1.0, 2.5));
        let numeric = a.to_matrix().try_inverse().unwrap();
        assert_relative_eq!(invert(&a).to_matrix(), numeric, epsilon = 1e-12);
        let x = HomTransform::new(rpy_matrix([1.0, 0.1, 0.2]), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(compose(&HomTransform::identity(), &x), x);
    }

    #[test]
    fn row_major_round_trip() {
        let a = HomTransform::new(rpy_matrix([0.4, 1.2, -2.0]), Vector3::new(0.3, -1.0, 2.5));
        let v = a.to_row_major();
        assert_eq!(v[3], 0.3);
        assert_eq!(&v[12..], &[0.0, 0.0, 0.0, 1.0]);
        let b = HomTransform::from_row_major(&v, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn vee_hat_round_trip(v in vec3()) {
            prop_assert_eq!(vee(&hat(&v)), v);
            let w = hat(&v);
            prop_assert_eq!(hat(&vee(&w)), w);
            prop_assert_eq!(w.transpose(), -w);
            prop_assert!((w * v).norm() < 1e-12);
        }

        #[test]
        fn rodrigues_angle(v in vec3(), phi in -10.0..10.0f64) {
            prop_assume!(v.norm() > 1e-3);
            let u = v.normalize();
            let r = rodrigues(&AngularVelocity::body(u * phi), 1.0);
            prop_assert!(r.is_valid(ROTATION_TOL));
            let wrapped = phi.abs() % (2.0 * PI);
            let expected = if wrapped > PI { 2.0 * PI - wrapped } else { wrapped };
            prop_assert!((rotation_angle(&r) - expected).abs() < 1e-6);
        }

        #[test]
        fn conjugation_identity(a in angles(), v in vec3()) {
            let r = *rpy_matrix(a).matrix();
            let lhs = hat(&(r * v));
            let rhs = r * hat(&v) * r.transpose();
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn rpy_matches_axis_product(a in angles()) {
            let r = rpy_matrix(a);
            prop_assert!(r.is_valid(ROTATION_TOL));
            let composed = rot_z(a[2]) * rot_y(a[1]) * rot_x(a[0]);
            prop_assert!((r.matrix() - composed).amax() < 1e-14);
        }

        #[test]
        fn rpy_extraction_inverts(a in angles()) {
            let r = rpy_matrix(a);
            let back = rpy_matrix(rpy_from_matrix(&r));
            prop_assert!((r.matrix() - back.matrix()).amax() < 1e-9);
        }

        #[test]
        fn compose_with_inverse_is_identity(a in angles(), t in vec3()) {
            let x = HomTransform::new(rpy_matrix(a), t);
            let id = compose(&x, &invert(&x));
            prop_assert!((id.to_matrix() - Matrix4::identity()).amax() < 1e-9);
            let back = invert(&invert(&x));
            prop_assert!((back.to_matrix() - x.to_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn rpy_invariant_on_many_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let a = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            assert!(rpy_matrix(a).is_valid(ROTATION_TOL));
        }
    }
}
