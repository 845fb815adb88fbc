//! Screen-space ambient occlusion with a normal-oriented hemisphere kernel.
//!
//! For every foreground pixel the world position `P` and normal `N` are
//! rebuilt from depth. Sample points `S = P + r·d` are drawn from a seeded
//! kernel of points uniformly filling the unit hemisphere around `N`, rotated
//! per pixel by a hash of its coordinates. The sampling radius `r` is given in
//! percent of the image height and converted to world units at `P`'s depth.
//!
//! A sample is occluded when the surface seen at its projection is nearer than
//! `S` by more than `bias·r`. That surface depth is reconstructed at the exact
//! sub-pixel location from the covering pixel's position and normal, so sloped
//! //! planes do not shadow themselves through depth quantization. The sample's
//! weight fades with a smoothstep from 1 to 0 as the depth gap between `P` and
//! that surface grows from `0.8·r` to `1.2·r`, so foreground objects far in
//! front of `P` do not shadow it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, same_dims, smoothstep, PassError};
use crate::camera::Camera;
use crate::imaging::{pixel_hash, reconstruct_normals, reconstruct_positions, unit_from_bits, Plane};
use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsaoParams {
    /// Sampling radius in percent of the image height.
    pub radius_pct: f64,
    pub samples: u32,
    /// Depth tolerance as a fraction of the world radius.
    pub bias: f64,
    pub seed: u64,
    pub strength: f64,
}

impl Default for SsaoParams {
    fn default() -> Self {
        Self {
            radius_pct: 1.0,
            samples: 32,
            bias: 0.025,
            seed: 0,
            strength: 1.0,
        }
    }
}

impl SsaoParams {
    pub fn validate(&self) -> Result<(), PassError> {
        if !(self.radius_pct > 0.0 && self.radius_pct.is_finite()) {
            return Err(invalid("radius_pct", "must be positive"));
        }
        if self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if !(self.bias >= 0.0 && self.bias.is_finite()) {
            return Err(invalid("bias", "must be non-negative"));
        }
        if !(0.0..=4.0).contains(&self.strength) {
            return Err(invalid("strength", "must lie in [0, 4]"));
        }
        Ok(())
    }
}

/// Points uniformly distributed in the unit hemisphere `z >= 0`.
fn hemisphere_kernel(samples: u32, seed: u64) -> Vec<Vec3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let z: f64 = rng.random();
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let ring = (1.0 - z * z).max(0.0).sqrt();
            let r = rng.random::<f64>().cbrt();
            Vec3::new(ring * phi.cos(), ring * phi.sin(), z) * r
        })
        .collect()
}

fn tangent_frame(n: Vec3<f64>, angle: f64) -> (Vec3<f64>, Vec3<f64>) {
    let helper = if n.x.abs() < 0.9 {
        Vec3::unit_x()
    } else {
        Vec3::unit_y()
    };
    let t = helper.cross(n).normalized();
    let b = n.cross(t);
    let (s, c) = angle.sin_cos();
    let t2 = t * c + b * s;
    (t2, n.cross(t2))
}

/// Depth of the surface seen at continuous pixel `(x, y)`, taken from the
/// tangent plane of the pixel containing it. Exact on planar patches, where
/// the stored pixel-center depth would be off by up to half a pixel's slope.
/// `None` when the normal is unknown or the view ray grazes the plane.
fn surface_depth(camera: &Camera<f64>, x: f64, y: f64, point: Vec3<f64>, normal: Vec3<f64>) -> Option<f64> {
    if !normal.is_finite() {
        return None;
    }
    let ray = camera.ray_at(x, y);
    let facing = normal.dot(ray.direction);
    if facing.abs() < GRAZING_COS {
        return None;
    }
    let t = normal.dot(point - ray.origin) / facing;
    t.is_finite().then_some(t)
}

/// Below this |cos| between normal and view ray the tangent plane is not trusted.
const GRAZING_COS: f64 = 0.1;

/// Ambient occlusion in `[0, 1]` (0 = open). Background pixels get 0.
pub fn ssao(depth: &Plane, camera: &Camera<f64>, params: &SsaoParams) -> Result<Plane, PassError> {
    params.validate()?;
    same_dims(depth.dims(), (camera.width(), camera.height()))?;
    let (w, h) = depth.dims();
    let positions = reconstruct_positions(depth, camera);
    let normals = reconstruct_normals(&positions, camera);
    let kernel = hemisphere_kernel(params.samples, params.seed);
    let inv_samples = 1.0 / params.samples as f64;
    let fraction = params.radius_pct / 100.0 * h as f64;

    Ok(Plane::par_from_fn(w, h, |x, y| {
        let own = depth.get(x, y) as f64;
        if !own.is_finite() {
            return 0.0;
        }
        let p = positions.vec3(x, y);
        let view = camera.ray_at(x as f64 + 0.5, y as f64 + 0.5).direction;
        let mut n = normals.vec3(x, y);
        if !n.is_finite() {
            n = -view;
        }
        let radius = fraction * camera.world_per_pixel(p);
        if !(radius > 0.0) {
            return 0.0;
        }
        let angle = unit_from_bits(pixel_hash(params.seed, x, y)) * std::f64::consts::TAU;
        let (t, b) = tangent_frame(n, angle);

        let mut occlusion = 0.0;
        for k in &kernel {
            let s = p + (t * k.x + b * k.y + n * k.z) * radius;
            let Some(proj) = camera.project(s) else { continue };
            if !(proj.x >= 0.0 && proj.y >= 0.0 && proj.x < w as f64 && proj.y < h as f64) {
                continue;
            }
            let (sx, sy) = (proj.x as usize, proj.y as usize);
            let buffered = depth.get(sx, sy) as f64;
            if !buffered.is_finite() {
                continue;
            }
            let seen = positions.vec3(sx, sy);
            let surface = surface_depth(camera, proj.x, proj.y, seen, normals.vec3(sx, sy)).unwrap_or(buffered);
            if surface >= proj.depth - params.bias * radius {
                continue;
            }
            let range = (own - surface).abs() / radius;
            occlusion += 1.0 - smoothstep(0.8, 1.2, range);
        }
        (params.strength * occlusion * inv_samples).clamp(0.0, 1.0) as f32
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_fills_hemisphere() {
        let k = hemisphere_kernel(2000, 3);
        assert!(k.iter().all(|d| d.z >= 0.0 && d.length() <= 1.0));
        let mean_r: f64 = k.iter().map(|d| d.length()).sum::<f64>() / k.len() as f64;
        // E[r] = 3/4 for a uniform ball.
        assert!((mean_r - 0.75).abs() < 0.02);
        assert_eq!(k, hemisphere_kernel(2000, 3));
    }

    #[test]
    fn frame_is_orthonormal() {
        let n = Vec3::new(0.3, -0.5, 0.8).normalized();
        let (t, b) = tangent_frame(n, 1.1);
        assert!(t.dot(n).abs() < 1e-12 && b.dot(n).abs() < 1e-12 && t.dot(b).abs() < 1e-12);
        assert!((b.length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(SsaoParams {
            samples: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SsaoParams {
            radius_pct: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SsaoParams {
            strength: 5.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SsaoParams::default().validate().is_ok());
    }
}
