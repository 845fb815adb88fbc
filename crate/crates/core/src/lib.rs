//! Deferred rendering for Cinema image databases.
//!
//! Meshes are ray traced from a camera sampling grid into G-buffers
//! ([`imaging`]), stored as a browsable database ([`cinema`]) and shaded later
//! through a node graph of image-space passes ([`pipeline`], [`passes`]).
//!
//! Geometry and camera math is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases. Stored buffers are always
//! `f32`, camera metadata always `f64`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cinema;
pub mod geometry;
pub mod grid;
pub mod imaging;
pub mod math;
pub mod num;
pub mod passes;
pub mod pipeline;
pub mod session;

pub use num::Real;

pub type Vec3d = math::Vec3<f64>;
pub type Vec3f = math::Vec3<f32>;
pub type Mesh = geometry::TriangleMesh<f64>;
pub type MeshF32 = geometry::TriangleMesh<f32>;
pub type MeshBvh = geometry::Bvh<f64>;
pub type MeshBvhF32 = geometry::Bvh<f32>;
pub type Camera = camera::Camera<f64>;
pub type CameraF32 = camera::Camera<f32>;
pub type SamplingGrid = grid::SamplingGrid<f64>;
pub type SamplingGridF32 = grid::SamplingGrid<f32>;
