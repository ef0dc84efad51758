//! Angle conventions, unit vectors and Euler rotation algebra.
//!
//! Anchor frame conventions: the boresight is the anchor's +Y axis,
//! elevation is measured from the anchor XY plane (positive up) and azimuth
//! from the +Y axis toward +X. Both angles live in `[-90, 90]` degrees, so
//! the visible half-space is `u_y >= 0`.
//!
//! Rotations are composed as `R = Rz(yaw) * Ry(pitch) * Rx(roll)` and map
//! anchor-frame vectors into the user frame. Angles cross every public
//! boundary in degrees; internal math is in radians.

use nalgebra::{Matrix3, Point3 as NaPoint3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the user frame, meters.
pub type Point3 = NaPoint3<f64>;

/// A direction with unit norm.
pub type UnitVector3 = Unit<Vector3<f64>>;

/// Minimum separation between two points for a direction to be defined (m).
pub const MIN_RANGE: f64 = 1e-6;

/// Tolerance on `u_y` before a direction is treated as behind the anchor.
const FOV_TOLERANCE: f64 = 1e-12;

/// `cos(elevation)` below which azimuth is considered undefined.
const ZENITH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{field} {value} outside [-90,90]")]
    AngleOutOfRange { field: &'static str, value: f64 },
    #[error("{field} is not finite")]
    NonFinite { field: &'static str },
    #[error("vector norm {norm} is not unit")]
    NotUnit { norm: f64 },
    #[error("direction outside anchor field of view (u_y = {u_y})")]
    OutsideFieldOfView { u_y: f64 },
    #[error("coincident points (range {range} m)")]
    CoincidentPoints { range: f64 },
}

/// Azimuth/elevation observation in the anchor frame, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub azimuth: f64,
    pub elevation: f64,
}

impl AnglePair {
    /// Validated constructor; both angles must lie in `[-90, 90]`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, GeometryError> {
        let pair = Self { azimuth, elevation };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        check_angle("azimuth", self.azimuth)?;
        check_angle("elevation", self.elevation)
    }
}

fn check_angle(field: &'static str, value: f64) -> Result<(), GeometryError> {
    if !value.is_finite() {
        return Err(GeometryError::NonFinite { field });
    }
    if !(-90.0..=90.0).contains(&value) {
        return Err(GeometryError::AngleOutOfRange { field, value });
    }
    Ok(())
}

/// Result of decoding a direction back into angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedAngles {
    pub angles: AnglePair,
    /// Set when the direction is at the zenith/nadir; azimuth is then 0 by convention.
    pub azimuth_undefined: bool,
}

/// Roll/pitch/yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    /// Each component wrapped into `(-180, 180]`.
    pub fn normalized(&self) -> Self {
        Self {
            roll: wrap_degrees(self.roll),
            pitch: wrap_degrees(self.pitch),
            yaw: wrap_degrees(self.yaw),
        }
    }

    pub fn to_radians(&self) -> Vector3<f64> {
        Vector3::new(
            self.roll.to_radians(),
            self.pitch.to_radians(),
            self.yaw.to_radians(),
        )
    }

    pub fn from_radians(v: &Vector3<f64>) -> Self {
        Self::new(v.x.to_degrees(), v.y.to_degrees(), v.z.to_degrees())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut w = deg % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}

/// Proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix3(Matrix3<f64>);

impl RotationMatrix3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, u: &UnitVector3) -> UnitVector3 {
        Unit::new_normalize(self.0 * u.into_inner())
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (self.0 - other.0).norm()
    }

    /// Largest deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = (self.0.transpose() * self.0 - Matrix3::identity()).amax();
        gram.max((self.0.determinant() - 1.0).abs())
    }

    /// Euler angles such that `compose_rotation(angles)` reproduces this matrix.
    ///
    /// At gimbal lock (`|pitch| = 90°`) roll is set to zero and the whole
    /// residual rotation about z is assigned to yaw.
    pub fn to_euler(&self) -> EulerAngles {
        let m = &self.0;
        let sin_pitch = (-m[(2, 0)]).clamp(-1.0, 1.0);
        let pitch = sin_pitch.asin();
        let cos_pitch = (m[(2, 1)].powi(2) + m[(2, 2)].powi(2)).sqrt();
        let (roll, yaw) = if cos_pitch > 1e-12 {
            (m[(2, 1)].atan2(m[(2, 2)]), m[(1, 0)].atan2(m[(0, 0)]))
        } else {
            (0.0, (-m[(0, 1)]).atan2(m[(1, 1)]))
        };
        EulerAngles::from_radians(&Vector3::new(roll, pitch, yaw)).normalized()
    }
}

impl std::ops::Mul for RotationMatrix3 {
    type Output = RotationMatrix3;
    fn mul(self, rhs: RotationMatrix3) -> RotationMatrix3 {
        RotationMatrix3(self.0 * rhs.0)
    }
}

/// Anchor-frame direction for an azimuth/elevation pair:
/// `(cos el · sin az, cos el · cos az, sin el)`.
pub fn unit_vector_from_angles(a: &AnglePair) -> Result<UnitVector3, GeometryError> {
    a.validate()?;
    let (az, el) = (a.azimuth.to_radians(), a.elevation.to_radians());
    Ok(Unit::new_unchecked(Vector3::new(
        el.cos() * az.sin(),
        el.cos() * az.cos(),
        el.sin(),
    )))
}

/// Exact inverse of [`unit_vector_from_angles`].
pub fn angles_from_unit_vector(u: &Vector3<f64>) -> Result<DecodedAngles, GeometryError> {
    let norm = u.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(GeometryError::NotUnit { norm });
    }
    let u = u / norm;
    let elevation = u.z.clamp(-1.0, 1.0).asin().to_degrees();
    let horizontal = u.x.hypot(u.y);
    if horizontal < ZENITH_TOLERANCE {
        return Ok(DecodedAngles {
            angles: AnglePair {
                azimuth: 0.0,
                elevation: elevation.signum() * 90.0,
            },
            azimuth_undefined: true,
        });
    }
    if u.y < -FOV_TOLERANCE {
        return Err(GeometryError::OutsideFieldOfView { u_y: u.y });
    }
    let azimuth = u.x.atan2(u.y.max(0.0)).to_degrees().clamp(-90.0, 90.0);
    Ok(DecodedAngles {
        angles: AnglePair { azimuth, elevation },
        azimuth_undefined: false,
    })
}

/// Direction from `from` to `to`.
pub fn unit_vector_between(from: &Point3, to: &Point3) -> Result<UnitVector3, GeometryError> {
    let d = to - from;
    let range = d.norm();
    if !range.is_finite() || range <= MIN_RANGE {
        return Err(GeometryError::CoincidentPoints { range });
    }
    Ok(Unit::new_unchecked(d / range))
}

/// Rotation about the x axis by `roll_deg` degrees.
pub fn rotation_x(roll_deg: f64) -> RotationMatrix3 {
    RotationMatrix3(rx(roll_deg.to_radians()))
}

/// Rotation about the y axis by `pitch_deg` degrees.
pub fn rotation_y(pitch_deg: f64) -> RotationMatrix3 {
    RotationMatrix3(ry(pitch_deg.to_radians()))
}

/// Rotation about the z axis by `yaw_deg` degrees.
pub fn rotation_z(yaw_deg: f64) -> RotationMatrix3 {
    RotationMatrix3(rz(yaw_deg.to_radians()))
}

fn rx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn ry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn drx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn dry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn compose_rotation(e: &EulerAngles) -> RotationMatrix3 {
    let r = e.to_radians();
    RotationMatrix3(rz(r.z) * ry(r.y) * rx(r.x))
}

/// Partial derivatives of `R(e)·u` with respect to (roll, pitch, yaw), per radian.
///
/// Column 0 is ∂/∂roll, column 1 ∂/∂pitch, column 2 ∂/∂yaw.
pub fn rotation_jacobian(e: &EulerAngles, u: &Vector3<f64>) -> Matrix3<f64> {
    let r = e.to_radians();
    let (x, y, z) = (rx(r.x), ry(r.y), rz(r.z));
    let d_roll = z * y * drx(r.x) * u;
    let d_pitch = z * dry(r.y) * x * u;
    let d_yaw = drz(r.z) * y * x * u;
    Matrix3::from_columns(&[d_roll, d_pitch, d_yaw])
}
