//! Pinhole camera model and rigid transforms.
//!
//! Camera frame follows the usual optical convention: x to the right, y down,
//! z along the optical axis. The world frame is z-up.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid depth {0}")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("quaternion norm {0} is not 1")]
    NonUnitQuaternion(f64),
}

/// Pinhole intrinsics `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics for a sensor with the given horizontal and vertical fields
    /// of view (radians), principal point at the image center.
    pub fn from_fov(
        width: usize,
        height: usize,
        hfov: f64,
        vfov: f64,
    ) -> Result<Self, GeometryError> {
        let cx = width as f64 / 2.0;
        let cy = height as f64 / 2.0;
        let fx = cx / (hfov / 2.0).tan();
        let fy = cy / (vfov / 2.0).tan();
        Self::new(fx, fy, cx, cy, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        let w = self.width as f64;
        let h = self.height as f64;
        if !(self.cx >= 0.0 && self.cx < w && self.cy >= 0.0 && self.cy < h) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Direction `K⁻¹ (u, v, 1)ᵀ`, i.e. the camera-frame ray with unit z.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Projects a camera-frame point to homogeneous pixel coordinates
    /// `K x = (u·d, v·d, d)`.
    pub fn project_homogeneous(&self, x: &Vec3) -> Vec3 {
        self.matrix() * x
    }
}

/// Camera pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    /// Orientation quaternion as `(w, x, y, z)`.
    pub orientation: [f64; 4],
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        let q = orientation.quaternion();
        Self {
            position: [position.x, position.y, position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), UnitQuaternion::identity())
    }

    /// Checks that the stored quaternion has unit norm within 1e-9.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let [w, x, y, z] = self.orientation;
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > 1e-9 || !norm.is_finite() {
            return Err(GeometryError::NonUnitQuaternion(norm));
        }
        Ok(())
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.orientation;
        UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z))
    }

    /// Pose of a forward-looking camera mounted at `height` above `(x, y)`
    /// with yaw `yaw` (radians, world x-axis = 0, counter-clockwise).
    pub fn camera_at(x: f64, y: f64, height: f64, yaw: f64) -> Self {
        Self::new(Vec3::new(x, y, height), camera_yaw_rotation(yaw))
    }
}

/// Rotation taking optical-frame vectors to a z-up world frame for a level
/// camera looking along `yaw`.
pub fn camera_yaw_rotation(yaw: f64) -> UnitQuaternion<f64> {
    let (s, c) = yaw.sin_cos();
    let forward = Vec3::new(c, s, 0.0);
    let right = Vec3::new(s, -c, 0.0);
    let down = Vec3::new(0.0, 0.0, -1.0);
    let m = Matrix3::from_columns(&[right, down, forward]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// `x_c = d · K⁻¹ (u, v, 1)ᵀ`.
pub fn backproject_pixel(
    u: f64,
    v: f64,
    depth: f64,
    k: &CameraIntrinsics,
    max_depth: f64,
) -> Result<Vec3, GeometryError> {
    if !depth.is_finite() || depth <= 0.0 || depth > max_depth {
        return Err(GeometryError::InvalidDepth(depth));
    }
    if !(u >= 0.0 && v >= 0.0 && u < k.width as f64 && v < k.height as f64) {
        return Err(GeometryError::PixelOutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    Ok(k.ray(u, v) * depth)
}

/// `x_w = R(q) x_c + p`.
pub fn camera_to_world(x_c: &Vec3, pose: &Pose) -> Vec3 {
    pose.rotation() * x_c + pose.translation()
}

/// Distance from `p` to the segment `a`–`b` in the plane.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
