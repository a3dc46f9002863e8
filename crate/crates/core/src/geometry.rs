//! Vectors and axis-angle rotations used to bring sensor readings into the base frame.

use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::error::ParamError;
use crate::math;

/// A 3-vector. The unit (m, m/s, m/s², N) is carried by context.
///
/// Components are expected to stay finite; use [`Vec3::try_new`] at trust boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UNIT_X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const UNIT_Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const UNIT_Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Checked constructor: rejects NaN and infinite components.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self, ParamError> {
        let v = Self::new(x, y, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ParamError::NotFinite {
                name: "vector component",
                value: if !x.is_finite() {
                    x
                } else if !y.is_finite() {
                    y
                } else {
                    z
                },
            })
        }
    }

    pub const fn vertical(z: f64) -> Self {
        Self::new(0.0, 0.0, z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.norm_squared())
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        rhs * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x / rhs, self.y / rhs, self.z / rhs)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation by `angle` radians about a unit `axis`.
///
/// The constructor normalizes the axis and wraps the angle into (-π, π].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    axis: Vec3,
    angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Result<Self, ParamError> {
        if !axis.is_finite() {
            return Err(ParamError::NotFinite {
                name: "axis",
                value: axis.norm(),
            });
        }
        crate::error::finite("angle", angle)?;
        let n = axis.norm();
        if n == 0.0 {
            return Err(ParamError::ZeroAxis);
        }
        Ok(Self {
            axis: axis / n,
            angle: canonical_angle(angle),
        })
    }

    /// Builds the rotation from a rotation vector (axis scaled by angle).
    /// The zero vector maps to the identity.
    pub fn from_rotation_vector(r: Vec3) -> Result<Self, ParamError> {
        let theta = r.norm();
        if theta == 0.0 {
            Ok(Self::identity())
        } else {
            Self::new(r, theta)
        }
    }

    pub fn identity() -> Self {
        Self {
            axis: Vec3::UNIT_Z,
            angle: 0.0,
        }
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn rotation_vector(&self) -> Vec3 {
        self.axis * self.angle
    }

    pub fn inverse(&self) -> Self {
        Self {
            axis: self.axis,
            angle: canonical_angle(-self.angle),
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        rodrigues_rotate(self, v)
    }
}

impl Default for AxisAngle {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical_angle(angle: f64) -> f64 {
    let wrapped = math::remainder(angle, 2.0 * PI);
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Rodrigues' rotation: `v cosθ + (k × v) sinθ + k (k·v)(1 − cosθ)`.
pub fn rodrigues_rotate(r: &AxisAngle, v: Vec3) -> Vec3 {
    let k = r.axis;
    let (s, c) = (math::sin(r.angle), math::cos(r.angle));
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

/// Expresses a sensor-frame reading in the base frame, given the sensor-to-base rotation.
pub fn to_base_frame(r: &AxisAngle, reading: Vec3) -> Vec3 {
    rodrigues_rotate(r, reading)
}

/// The inverse of [`to_base_frame`].
pub fn to_sensor_frame(r: &AxisAngle, base: Vec3) -> Vec3 {
    rodrigues_rotate(&r.inverse(), base)
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::{AxisAngle, Vec3};

    /// On the wire a rotation is its rotation vector (axis × angle, radians).
    impl serde::Serialize for AxisAngle {
        fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            self.rotation_vector().serialize(s)
        }
    }

    impl<'de> serde::Deserialize<'de> for AxisAngle {
        fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            let r = Vec3::deserialize(d)?;
            AxisAngle::from_rotation_vector(r).map_err(serde::de::Error::custom)
        }
    }
}
