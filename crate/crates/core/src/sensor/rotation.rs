use crate::error::{Error, Result};

const MIN_QUATERNION_NORM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Orientation quaternion, scalar part first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_wxyz_f32(q: [f32; 4]) -> Self {
        Self::new(q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64)
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, s * axis.x / n, s * axis.y / n, s * axis.z / n)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n >= MIN_QUATERNION_NORM) {
            return Err(Error::ZeroQuaternion { norm: n });
        }
        Ok(Self::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn to_wxyz_f32(self) -> [f32; 4] {
        [self.w as f32, self.x as f32, self.y as f32, self.z as f32]
    }
}

/// Row-major 3×3 rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        RotationMatrix(t)
    }

    pub fn mul(&self, rhs: &RotationMatrix) -> RotationMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        RotationMatrix(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest elementwise deviation of `R·Rᵀ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.mul(&self.transpose());
        let mut worst: f64 = 0.0;
        for (i, row) in p.0.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// Builds the body-to-NED rotation from an orientation quaternion.
///
/// The quaternion is normalized first; norms below 1e-9 are rejected.
pub fn quaternion_to_rotation(q: Quaternion) -> Result<RotationMatrix> {
    let Quaternion { w, x, y, z } = q.normalized()?;
    Ok(RotationMatrix([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]))
}

/// `R·v`.
pub fn derotate(v: Vec3, r: &RotationMatrix) -> Vec3 {
    let m = &r.0;
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // what a logger writing 7 digits stores for 1/√2
    #[allow(clippy::approx_constant)]
    const H: f64 = 0.7071068;

    fn assert_matrix_close(a: &RotationMatrix, b: [[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.0[i][j] - b[i][j]).abs() <= tol, "{:?} vs {:?}", a.0, b);
            }
        }
    }

    #[test]
    fn identity_quaternion_gives_identity() {
        let r = quaternion_to_rotation(Quaternion::IDENTITY).unwrap();
        assert_eq!(r, RotationMatrix::IDENTITY);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = quaternion_to_rotation(Quaternion::new(H, 0.0, 0.0, H)).unwrap();
        assert_matrix_close(
            &r,
            [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            1e-6,
        );
        let v = derotate(Vec3::new(1.0, 0.0, 0.0), &r);
        assert!(v.x.abs() < 1e-6 && (v.y - 1.0).abs() < 1e-6 && v.z.abs() < 1e-6);
    }

    #[test]
    fn zero_quaternion_rejected() {
        let err = quaternion_to_rotation(Quaternion::new(0.0, 0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::ZeroQuaternion { .. }));
        assert!(quaternion_to_rotation(Quaternion::new(f64::NAN, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn unnormalized_input_is_normalized() {
        let a = quaternion_to_rotation(Quaternion::new(2.0, 0.0, 0.0, 2.0)).unwrap();
        let b = quaternion_to_rotation(Quaternion::new(H, 0.0, 0.0, H)).unwrap();
        assert_matrix_close(&a, b.0, 1e-6);
    }

    #[test]
    fn identity_derotation_is_noop() {
        let v = derotate(Vec3::new(1.0, 2.0, 3.0), &RotationMatrix::IDENTITY);
        assert_eq!(v, Vec3::new(1.0, 2.0, 3.0));
    }

    fn quat() -> impl Strategy<Value = Quaternion> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(w, x, y, z)| {
                w * w + x * x + y * y + z * z > 1e-3
            })
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(q in quat()) {
            let r = quaternion_to_rotation(q).unwrap();
            prop_assert!(r.orthonormality_error() <= 1e-6);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn derotation_preserves_norm(q in quat(), x in -100.0f64..100.0, y in -100.0f64..100.0, z in -100.0f64..100.0) {
            let v = Vec3::new(x, y, z);
            let out = derotate(v, &quaternion_to_rotation(q).unwrap());
            prop_assert!((out.norm() - v.norm()).abs() <= 1e-6 * v.norm().max(1e-12));
        }

        #[test]
        fn double_cover(q in quat()) {
            let a = quaternion_to_rotation(q).unwrap();
            let b = quaternion_to_rotation(Quaternion::new(-q.w, -q.x, -q.y, -q.z)).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((a.0[i][j] - b.0[i][j]).abs() <= 1e-9);
                }
            }
        }
    }
}
