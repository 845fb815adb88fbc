//! G-buffer generation and image-space geometry reconstruction.
//!
//! Depth convention: perspective cameras store the Euclidean distance from the
//! camera position to the hit, orthographic cameras the distance along the view
//! axis. In both cases this equals the ray parameter of the primary ray, which
//! is what makes [`reconstruct_positions`] an exact inverse. Background pixels
//! hold `+inf` depth and `NaN` in every other channel.

use indexmap::IndexMap;
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::Camera;
use crate::geometry::{Bvh, GeometryError, TriangleMesh};
use crate::math::Vec3;
use crate::num::Real;

pub const DEPTH: &str = "depth";
pub const POSITION: &str = "position";
pub const NORMAL: &str = "normal";
pub const SCALAR_PREFIX: &str = "scalar:";

/// Name of the G-buffer channel holding mesh field `field`.
pub fn scalar_channel_name(field: &str) -> String {
    format!("{SCALAR_PREFIX}{field}")
}

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("channel `{0}` not present in G-buffer")]
    MissingChannel(String),
    #[error("channel `{name}` is {got:?}, G-buffer is {expected:?}")]
    ResolutionMismatch {
        name: String,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("channel `{0}` must have 1 or 3 planes")]
    PlaneCount(String),
}

/// A single float32 image plane, row-major, top row first.
#[derive(Clone, Debug)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// Bitwise comparison, so NaN backgrounds compare equal to themselves.
impl PartialEq for Plane {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane data does not match {width}x{height}");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { width, height, data }
    }

    /// Row-parallel construction.
    pub fn par_from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32 + Sync) -> Self {
        let mut data = vec![0.0; width * height];
        data.par_chunks_mut(width.max(1)).enumerate().for_each(|(y, row)| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = f(x, y);
            }
        });
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Edge-clamped access with signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Min and max over finite values, `None` when nothing is finite.
    pub fn finite_range(&self) -> Option<(f32, f32)> {
        self.data
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

/// One named G-buffer entry: a scalar (1 plane) or a 3-vector (3 planes).
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    planes: Vec<Plane>,
}

impl Channel {
    pub fn scalar(plane: Plane) -> Self {
        Self { planes: vec![plane] }
    }

    pub fn vector([x, y, z]: [Plane; 3]) -> Self {
        assert!(x.dims() == y.dims() && y.dims() == z.dims());
        Self { planes: vec![x, y, z] }
    }

    /// Any plane count; used by the container reader, which validates separately.
    pub fn from_planes(planes: Vec<Plane>) -> Self {
        Self { planes }
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Plane> {
        self.planes
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    #[inline]
    pub fn vec3(&self, x: usize, y: usize) -> Vec3<f64> {
        Vec3::new(
            self.planes[0].get(x, y) as f64,
            self.planes[1].get(x, y) as f64,
            self.planes[2].get(x, y) as f64,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GBuffer {
    width: usize,
    height: usize,
    channels: IndexMap<String, Channel>,
    camera: Camera<f64>,
}

impl GBuffer {
    /// A G-buffer holding only its mandatory depth channel.
    pub fn new(camera: Camera<f64>, depth: Plane) -> Result<Self, ImagingError> {
        let expected = (camera.width(), camera.height());
        if depth.dims() != expected {
            return Err(ImagingError::ResolutionMismatch {
                name: DEPTH.into(),
                got: depth.dims(),
                expected,
            });
        }
        let mut channels = IndexMap::new();
        channels.insert(DEPTH.to_owned(), Channel::scalar(depth));
        Ok(Self {
            width: expected.0,
            height: expected.1,
            channels,
            camera,
        })
    }

    pub fn insert(&mut self, name: impl Into<String>, channel: Channel) -> Result<(), ImagingError> {
        let name = name.into();
        if !matches!(channel.planes().len(), 1 | 3) {
            return Err(ImagingError::PlaneCount(name));
        }
        if channel.dims() != (self.width, self.height) {
            return Err(ImagingError::ResolutionMismatch {
                name,
                got: channel.dims(),
                expected: (self.width, self.height),
            });
        }
        self.channels.insert(name, channel);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn camera(&self) -> &Camera<f64> {
        &self.camera
    }

    pub fn channels(&self) -> &IndexMap<String, Channel> {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Result<&Channel, ImagingError> {
        self.channels
            .get(name)
            .ok_or_else(|| ImagingError::MissingChannel(name.to_owned()))
    }

    pub fn depth(&self) -> &Plane {
        &self.channels[DEPTH].planes[0]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RenderOptions {
    pub emit_position: bool,
    pub emit_normal: bool,
    /// `None` shoots through pixel centers; `Some(seed)` jitters deterministically.
    pub jitter_seed: Option<u64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-pixel hash, shared with the SSAO rotation.
pub(crate) fn pixel_hash(seed: u64, x: usize, y: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((y as u64) << 32) | x as u64))
}

pub(crate) fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct PixelSample {
    depth: f32,
    scalars: Vec<f32>,
    position: [f32; 3],
    normal: [f32; 3],
}

const BACKGROUND: PixelSample = PixelSample {
    depth: f32::INFINITY,
    scalars: Vec::new(),
    position: [f32::NAN; 3],
    normal: [f32::NAN; 3],
};

/// Renders depth, the requested scalar fields and optionally world positions and normals.
pub fn render_gbuffer<T: Real>(
    mesh: &TriangleMesh<T>,
    bvh: &Bvh<T>,
    camera: &Camera<T>,
    fields: &[String],
    options: &RenderOptions,
) -> Result<GBuffer, ImagingError> {
    let field_values: Vec<&[T]> = fields.iter().map(|f| mesh.field(f)).collect::<Result<_, _>>()?;
    let (w, h) = (camera.width(), camera.height());

    let rows: Vec<Vec<PixelSample>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let jitter = match options.jitter_seed {
                        None => (T::lit(0.5), T::lit(0.5)),
                        Some(seed) => {
                            let bits = pixel_hash(seed, x, y);
                            (T::lit(unit_from_bits(bits)), T::lit(unit_from_bits(splitmix64(bits))))
                        }
                    };
                    let ray = camera.generate_ray((x as u32, y as u32), jitter);
                    let Some(hit) = bvh.intersect(mesh, &ray) else {
                        return PixelSample {
                            scalars: vec![f32::NAN; fields.len()],
                            ..BACKGROUND
                        };
                    };
                    let tri = mesh.triangles()[hit.triangle_id as usize];
                    let wgt = T::one() - hit.u - hit.v;
                    let scalars = field_values
                        .iter()
                        .map(|vals| {
                            (vals[tri[0] as usize] * wgt
                                + vals[tri[1] as usize] * hit.u
                                + vals[tri[2] as usize] * hit.v)
                                .to_f32_lossy()
                        })
                        .collect();
                    let p = ray.at(hit.t);
                    let mut n = mesh.face_normal(hit.triangle_id as usize).normalized();
                    if n.dot(ray.direction) > T::zero() {
                        n = -n;
                    }
                    PixelSample {
                        depth: hit.t.to_f32_lossy(),
                        scalars,
                        position: [p.x, p.y, p.z].map(Real::to_f32_lossy),
                        normal: [n.x, n.y, n.z].map(Real::to_f32_lossy),
                    }
                })
                .collect()
        })
        .collect();

    let pixels = || rows.iter().flatten();
    let plane_of = |f: &dyn Fn(&PixelSample) -> f32| Plane::new(w, h, pixels().map(f).collect());

    let mut gbuffer = GBuffer::new(camera.cast(), plane_of(&|s| s.depth))?;
    for (i, name) in fields.iter().enumerate() {
        gbuffer.insert(scalar_channel_name(name), Channel::scalar(plane_of(&|s| s.scalars[i])))?;
    }
    if options.emit_position {
        let planes = [0, 1, 2].map(|k| plane_of(&|s| s.position[k]));
        gbuffer.insert(POSITION, Channel::vector(planes))?;
    }
    if options.emit_normal {
        let planes = [0, 1, 2].map(|k| plane_of(&|s| s.normal[k]));
        gbuffer.insert(NORMAL, Channel::vector(planes))?;
    }
    Ok(gbuffer)
}

/// World positions from depth by walking each pixel-center ray to its stored depth.
pub fn reconstruct_positions(depth: &Plane, camera: &Camera<f64>) -> Channel {
    let (w, h) = depth.dims();
    let point = |x: usize, y: usize| -> Option<Vec3<f64>> {
        let d = depth.get(x, y);
        d.is_finite()
            .then(|| camera.ray_at(x as f64 + 0.5, y as f64 + 0.5).at(d as f64))
    };
    let planes = [0, 1, 2].map(|k| Plane::par_from_fn(w, h, |x, y| point(x, y).map_or(f32::NAN, |p| p[k] as f32)));
    Channel::vector(planes)
}

/// Relative floor below which depth differences count as equal.
const DEPTH_NOISE: f64 = 1e-6;
/// Along one axis, a side whose depth step exceeds this multiple of the other
/// side's step is treated as a depth discontinuity.
const DISCONTINUITY_RATIO: f64 = 10.0;

/// Normals from a position channel by finite differences, oriented towards the camera.
///
/// Central differences are used where both neighbours along an axis are
/// finite, one-sided differences where only one is. When the two depth steps
/// along an axis disagree by more than a factor of ten, the pixel sits on a
/// depth discontinuity and only the smaller side is used. Pixels lacking a
/// finite neighbour on either axis get a NaN normal.
pub fn reconstruct_normals(positions: &Channel, camera: &Camera<f64>) -> Channel {
    let (w, h) = positions.dims();
    let at = |x: isize, y: isize| -> Option<Vec3<f64>> {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            return None;
        }
        let p = positions.vec3(x as usize, y as usize);
        p.is_finite().then_some(p)
    };

    let normal_at = |x: usize, y: usize| -> Option<Vec3<f64>> {
        let (xi, yi) = (x as isize, y as isize);
        let p = at(xi, yi)?;
        let d = camera.depth_of(p);
        let noise = DEPTH_NOISE * d.abs();
        let derivative = |minus: Option<Vec3<f64>>, plus: Option<Vec3<f64>>| match (minus, plus) {
            (Some(m), Some(q)) => {
                let (sm, sq) = ((camera.depth_of(m) - d).abs(), (camera.depth_of(q) - d).abs());
                if sm > DISCONTINUITY_RATIO * sq.max(noise) {
                    Some(q - p)
                } else if sq > DISCONTINUITY_RATIO * sm.max(noise) {
                    Some(p - m)
                } else {
                    Some((q - m) * 0.5)
                }
            }
            (Some(m), None) => Some(p - m),
            (None, Some(q)) => Some(q - p),
            (None, None) => None,
        };
        let dx = derivative(at(xi - 1, yi), at(xi + 1, yi))?;
        let dy = derivative(at(xi, yi - 1), at(xi, yi + 1))?;
        let mut n = dx.cross(dy);
        let len = n.length();
        if !(len > 0.0) {
            return None;
        }
        n = n / len;
        let view = camera.ray_at(x as f64 + 0.5, y as f64 + 0.5).direction;
        if n.dot(view) > 0.0 {
            n = -n;
        }
        Some(n)
    };

    let normals: Vec<Option<Vec3<f64>>> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| normal_at(x, y))
        .collect();
    let planes = [0, 1, 2].map(|k| {
        Plane::new(
            w,
            h,
            normals.iter().map(|n| n.map_or(f32::NAN, |n| n[k] as f32)).collect(),
        )
    });
    Channel::vector(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Projection;
    use crate::geometry::shapes;

    fn ortho_head_on(res: u32) -> Camera<f64> {
        Camera::new(
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::unit_y(),
            Projection::Orthographic { height: 2.0 },
            (res, res),
        )
        .unwrap()
    }

    fn plane_z1() -> TriangleMesh<f64> {
        shapes::quad(
            Vec3::new(-5.0, -5.0, 1.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 10.0, 0.0),
        )
    }

    #[test]
    fn constant_field_and_background() {
        let mesh = shapes::icosphere::<f64>(2);
        let n = mesh.vertices().len();
        let mesh = mesh.with_field("c", vec![5.0; n]).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let cam = Camera::new(
            Vec3::new(0.0, 0.0, -4.0),
            Vec3::zero(),
            Vec3::unit_y(),
            Projection::default(),
            (32, 32),
        )
        .unwrap();
        let g = render_gbuffer(&mesh, &bvh, &cam, &["c".into()], &RenderOptions::default()).unwrap();
        let s = &g.channel("scalar:c").unwrap().planes()[0];
        for (d, v) in g.depth().data().iter().zip(s.data()) {
            if d.is_finite() {
                assert!(*d > 0.0);
                assert_eq!(*v, 5.0);
            } else {
                assert!(v.is_nan());
            }
        }
        assert!(g.depth().get(0, 0).is_infinite());
        let err = render_gbuffer(&mesh, &bvh, &cam, &["nope".into()], &RenderOptions::default());
        assert!(matches!(
            err,
            Err(ImagingError::Geometry(GeometryError::UnknownField(_)))
        ));
    }

    #[test]
    fn ortho_plane_reconstructs_exactly() {
        let mesh = plane_z1();
        let bvh = Bvh::build(&mesh).unwrap();
        let cam = ortho_head_on(16);
        let g = render_gbuffer(&mesh, &bvh, &cam, &[], &RenderOptions::default()).unwrap();
        let pos = reconstruct_positions(g.depth(), g.camera());
        assert!(pos.planes()[2].data().iter().all(|&z| z == 1.0));
        let normals = reconstruct_normals(&pos, g.camera());
        for y in 1..15 {
            for x in 1..15 {
                assert_eq!(normals.vec3(x, y), Vec3::new(0.0, 0.0, -1.0));
            }
        }
    }

    #[test]
    fn background_reconstructs_to_nan() {
        let cam = ortho_head_on(4);
        let pos = reconstruct_positions(&Plane::filled(4, 4, f32::INFINITY), &cam);
        assert!(pos.planes().iter().all(|p| p.data().iter().all(|v| v.is_nan())));
    }

    #[test]
    fn isolated_pixel_has_no_normal() {
        let cam = ortho_head_on(5);
        let mut depth = Plane::filled(5, 5, f32::INFINITY);
        depth.set(2, 2, 2.0);
        let n = reconstruct_normals(&reconstruct_positions(&depth, &cam), &cam);
        assert!(n.vec3(2, 2).x.is_nan());
    }

    #[test]
    fn jittered_render_is_deterministic() {
        let mesh = shapes::torus::<f64>(1.0, 0.4, 16, 8);
        let bvh = Bvh::build(&mesh).unwrap();
        let cam = Camera::new(
            Vec3::new(0.0, 2.0, -3.0),
            Vec3::zero(),
            Vec3::unit_y(),
            Projection::default(),
            (24, 16),
        )
        .unwrap();
        let opts = RenderOptions {
            emit_position: true,
            emit_normal: true,
            jitter_seed: Some(9),
        };
        let a = render_gbuffer(&mesh, &bvh, &cam, &[], &opts).unwrap();
        let b = render_gbuffer(&mesh, &bvh, &cam, &[], &opts).unwrap();
        assert_eq!(a, b);
        let c = render_gbuffer(&mesh, &bvh, &cam, &[], &RenderOptions::default()).unwrap();
        assert_ne!(a.depth(), c.depth());
    }

    #[test]
    fn insert_checks_resolution() {
        let mut g = GBuffer::new(ortho_head_on(4), Plane::filled(4, 4, 1.0)).unwrap();
        let err = g
            .insert("scalar:x", Channel::scalar(Plane::filled(3, 4, 0.0)))
            .unwrap_err();
        assert!(matches!(err, ImagingError::ResolutionMismatch { .. }));
        assert!(GBuffer::new(ortho_head_on(4), Plane::filled(5, 4, 1.0)).is_err());
    }
}
