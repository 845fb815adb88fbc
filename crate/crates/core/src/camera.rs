//! Pinhole and orthographic cameras.
//!
//! Image conventions: pixel `(0, 0)` is the top-left pixel, `+x` runs right and
//! `+y` runs down. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` in continuous
//! pixel coordinates, so its center is `(i + 0.5, j + 0.5)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Ray;
use crate::math::Vec3;
use crate::num::Real;

/// Minimum angle between the up vector and the view direction.
const MIN_UP_ANGLE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("camera position coincides with its target")]
    ZeroView,
    #[error("up vector is parallel to the view direction")]
    DegenerateUp,
    #[error("vertical field of view must lie in (0, 180) degrees, got {0}")]
    FieldOfView(f64),
    #[error("orthographic height must be positive, got {0}")]
    OrthoHeight(f64),
    #[error("resolution must be at least 1x1, got {0}x{1}")]
    Resolution(u32, u32),
    #[error("{0}")]
    Grid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Projection<T = f64> {
    /// Vertical field of view in degrees.
    Perspective { fov_y: T },
    /// Visible image height in world units.
    Orthographic { height: T },
}

impl<T: Real> Default for Projection<T> {
    fn default() -> Self {
        Projection::Perspective { fov_y: T::lit(45.0) }
    }
}

impl<T: Real> Projection<T> {
    pub fn cast<U: Real>(self) -> Projection<U> {
        match self {
            Projection::Perspective { fov_y } => Projection::Perspective {
                fov_y: U::lit(fov_y.to_f64_lossy()),
            },
            Projection::Orthographic { height } => Projection::Orthographic {
                height: U::lit(height.to_f64_lossy()),
            },
        }
    }

    fn validate(&self) -> Result<(), CameraError> {
        match *self {
            Projection::Perspective { fov_y } => {
                let f = fov_y.to_f64_lossy();
                if !(f > 0.0 && f < 180.0) {
                    return Err(CameraError::FieldOfView(f));
                }
            }
            Projection::Orthographic { height } => {
                let h = height.to_f64_lossy();
                if !(h > 0.0 && h.is_finite()) {
                    return Err(CameraError::OrthoHeight(h));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawCamera<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct Camera<T = f64> {
    position: Vec3<T>,
    target: Vec3<T>,
    up: Vec3<T>,
    projection: Projection<T>,
    resolution: (u32, u32),
    #[serde(skip)]
    basis: Basis<T>,
}

#[derive(Deserialize)]
struct RawCamera<T> {
    position: Vec3<T>,
    target: Vec3<T>,
    up: Vec3<T>,
    projection: Projection<T>,
    resolution: (u32, u32),
}

impl<T: Real> TryFrom<RawCamera<T>> for Camera<T> {
    type Error = CameraError;

    fn try_from(raw: RawCamera<T>) -> Result<Self, CameraError> {
        Camera::new(raw.position, raw.target, raw.up, raw.projection, raw.resolution)
    }
}

/// Orthonormal camera frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Basis<T> {
    pub forward: Vec3<T>,
    pub right: Vec3<T>,
    pub up: Vec3<T>,
}

/// A point mapped to continuous pixel coordinates plus its depth value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected<T> {
    pub x: T,
    pub y: T,
    pub depth: T,
}

impl<T: Real> Camera<T> {
    pub fn new(
        position: Vec3<T>,
        target: Vec3<T>,
        up: Vec3<T>,
        projection: Projection<T>,
        resolution: (u32, u32),
    ) -> Result<Self, CameraError> {
        if resolution.0 == 0 || resolution.1 == 0 {
            return Err(CameraError::Resolution(resolution.0, resolution.1));
        }
        projection.validate()?;
        let view = target - position;
        if !(view.length() > T::zero()) {
            return Err(CameraError::ZeroView);
        }
        let forward = view.normalized();
        let up_n = up.normalized();
        if !(forward.cross(up_n).length() > T::lit(MIN_UP_ANGLE.sin())) {
            return Err(CameraError::DegenerateUp);
        }
        let right = forward.cross(up_n).normalized();
        let true_up = right.cross(forward);
        Ok(Self {
            position,
            target,
            up: up_n,
            projection,
            resolution,
            basis: Basis {
                forward,
                right,
                up: true_up,
            },
        })
    }

    /// Like [`Camera::new`], but swaps a near-parallel up vector for `+x`.
    pub fn looking_at(
        position: Vec3<T>,
        target: Vec3<T>,
        preferred_up: Vec3<T>,
        projection: Projection<T>,
        resolution: (u32, u32),
    ) -> Result<Self, CameraError> {
        let view = (target - position).normalized();
        let up = if view.dot(preferred_up.normalized()).abs() > T::one() - T::lit(1e-6) {
            Vec3::unit_x()
        } else {
            preferred_up
        };
        Self::new(position, target, up, projection, resolution)
    }

    pub fn position(&self) -> Vec3<T> {
        self.position
    }

    pub fn target(&self) -> Vec3<T> {
        self.target
    }

    pub fn up(&self) -> Vec3<T> {
        self.up
    }

    pub fn projection(&self) -> Projection<T> {
        self.projection
    }

    pub fn resolution(&self) -> (u32, u32) {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.resolution.0 as usize
    }

    pub fn height(&self) -> usize {
        self.resolution.1 as usize
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    pub fn with_resolution(&self, resolution: (u32, u32)) -> Result<Self, CameraError> {
        Self::new(self.position, self.target, self.up, self.projection, resolution)
    }

    /// Half extents of the image plane at unit distance (perspective) or in world units (orthographic).
    fn half_extents(&self) -> (T, T) {
        let aspect = T::lit(self.resolution.0 as f64 / self.resolution.1 as f64);
        let half_h = match self.projection {
            Projection::Perspective { fov_y } => (fov_y.to_radians() * T::lit(0.5)).tan(),
            Projection::Orthographic { height } => height * T::lit(0.5),
        };
        (half_h * aspect, half_h)
    }

    /// Primary ray for `pixel`, offset inside the pixel by `jitter ∈ [0,1)²`.
    pub fn generate_ray(&self, pixel: (u32, u32), jitter: (T, T)) -> Ray<T> {
        debug_assert!(pixel.0 < self.resolution.0 && pixel.1 < self.resolution.1);
        self.ray_at(T::lit(pixel.0 as f64) + jitter.0, T::lit(pixel.1 as f64) + jitter.1)
    }

    /// Ray through continuous pixel coordinates `(x, y)`.
    pub fn ray_at(&self, x: T, y: T) -> Ray<T> {
        let two = T::lit(2.0);
        let sx = x / T::lit(self.resolution.0 as f64) * two - T::one();
        let sy = T::one() - y / T::lit(self.resolution.1 as f64) * two;
        let (half_w, half_h) = self.half_extents();
        let b = &self.basis;
        let (origin, direction) = match self.projection {
            Projection::Perspective { .. } => (
                self.position,
                (b.forward + b.right * (sx * half_w) + b.up * (sy * half_h)).normalized(),
            ),
            Projection::Orthographic { .. } => (
                self.position + b.right * (sx * half_w) + b.up * (sy * half_h),
                b.forward,
            ),
        };
        Ray {
            origin,
            direction,
            t_min: T::zero(),
            t_max: T::infinity(),
        }
    }

    /// Maps a world point to continuous pixel coordinates. `None` when behind the camera.
    pub fn project(&self, p: Vec3<T>) -> Option<Projected<T>> {
        let b = &self.basis;
        let rel = p - self.position;
        let axial = rel.dot(b.forward);
        let (half_w, half_h) = self.half_extents();
        let (sx, sy, depth) = match self.projection {
            Projection::Perspective { .. } => {
                if !(axial > T::zero()) {
                    return None;
                }
                (
                    rel.dot(b.right) / (axial * half_w),
                    rel.dot(b.up) / (axial * half_h),
                    rel.length(),
                )
            }
            Projection::Orthographic { .. } => {
                if axial < T::zero() {
                    return None;
                }
                (rel.dot(b.right) / half_w, rel.dot(b.up) / half_h, axial)
            }
        };
        let half = T::lit(0.5);
        Some(Projected {
            x: (sx + T::one()) * half * T::lit(self.resolution.0 as f64),
            y: (T::one() - sy) * half * T::lit(self.resolution.1 as f64),
            depth,
        })
    }

    /// Depth value of a world point under this camera's depth convention:
    /// Euclidean distance for perspective, distance along the view axis for orthographic.
    pub fn depth_of(&self, p: Vec3<T>) -> T {
        let rel = p - self.position;
        match self.projection {
            Projection::Perspective { .. } => rel.length(),
            Projection::Orthographic { .. } => rel.dot(self.basis.forward),
        }
    }

    /// World-space size of one pixel (vertically) at the depth of `p`.
    pub fn world_per_pixel(&self, p: Vec3<T>) -> T {
        let (_, half_h) = self.half_extents();
        let scale = T::lit(2.0) * half_h / T::lit(self.resolution.1 as f64);
        match self.projection {
            Projection::Perspective { .. } => (p - self.position).dot(self.basis.forward) * scale,
            Projection::Orthographic { .. } => scale,
        }
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        Camera::new(
            self.position.cast(),
            self.target.cast(),
            self.up.cast(),
            self.projection.cast(),
            self.resolution,
        )
        .expect("casting preserves validity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn persp(fov: f64, res: (u32, u32)) -> Camera<f64> {
        Camera::new(
            Vec3::new(1.0, 2.0, -3.0),
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::unit_y(),
            Projection::Perspective { fov_y: fov },
            res,
        )
        .unwrap()
    }

    #[test]
    fn principal_ray_points_at_target() {
        let cam = persp(45.0, (65, 33));
        let ray = cam.generate_ray((32, 16), (0.5, 0.5));
        let expected = (cam.target() - cam.position()).normalized();
        assert!((ray.direction - expected).length() < 1e-12);
    }

    #[test]
    fn orthographic_rays_are_parallel() {
        let cam = Camera::new(
            Vec3::new(0.0, 0.0, -5.0),
            Vec3::zero(),
            Vec3::unit_y(),
            Projection::Orthographic { height: 2.0 },
            (8, 6),
        )
        .unwrap();
        let principal = cam.basis().forward;
        for (x, y) in [(0, 0), (7, 5), (3, 2)] {
            assert_eq!(cam.generate_ray((x, y), (0.25, 0.75)).direction, principal);
        }
    }

    #[test]
    fn fov_90_top_edge_is_45_degrees_up() {
        let cam = persp(90.0, (64, 64));
        let ray = cam.generate_ray((32, 0), (0.0, 0.0));
        let angle = ray.direction.dot(cam.basis().forward).acos();
        assert!((angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(ray.direction.dot(cam.basis().up) > 0.0);
    }

    #[test]
    fn corner_rays_span_fov() {
        let cam = persp(37.0, (40, 30));
        let top = cam.ray_at(20.0, 0.0).direction;
        let bottom = cam.ray_at(20.0, 30.0).direction;
        let span = top.dot(bottom).acos();
        assert!((span - 37f64.to_radians()).abs() < 1e-6);
    }

    #[test]
    fn projection_inverts_ray_generation() {
        let cam = persp(50.0, (40, 30));
        let ray = cam.ray_at(12.25, 7.5);
        let p = cam.project(ray.at(4.0)).unwrap();
        assert!((p.x - 12.25).abs() < 1e-9 && (p.y - 7.5).abs() < 1e-9);
        assert!((p.depth - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_cameras_rejected() {
        let o = Vec3::<f64>::zero();
        let z = Vec3::unit_z();
        let p = Projection::default();
        assert_eq!(Camera::new(o, z, z, p, (4, 4)), Err(CameraError::DegenerateUp));
        assert_eq!(Camera::new(o, o, Vec3::unit_y(), p, (4, 4)), Err(CameraError::ZeroView));
        assert_eq!(
            Camera::new(o, z, Vec3::unit_y(), p, (0, 4)),
            Err(CameraError::Resolution(0, 4))
        );
        let wide = Projection::Perspective { fov_y: 180.0 };
        assert!(matches!(
            Camera::new(o, z, Vec3::unit_y(), wide, (4, 4)),
            Err(CameraError::FieldOfView(_))
        ));
        // looking_at repairs the pole case.
        assert!(Camera::looking_at(o, Vec3::unit_y(), Vec3::unit_y(), p, (4, 4)).is_ok());
    }

    #[test]
    fn json_roundtrip_validates() {
        let cam = persp(45.0, (16, 9));
        let json = serde_json::to_string(&cam).unwrap();
        let back: Camera<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cam);
        let bad = json.replace("\"fov_y\":45.0", "\"fov_y\":0.0");
        assert!(serde_json::from_str::<Camera<f64>>(&bad).is_err());
    }
}
