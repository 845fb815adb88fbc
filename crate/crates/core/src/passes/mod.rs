//! Image-space shading passes.
//!
//! Every pass is a pure, deterministic function of its inputs and preserves
//! resolution. Depth planes use `+inf` (or NaN) for background; each pass states
//! what it does with background pixels.

mod blur;
mod colormap;
mod composite;
mod fxaa;
mod ibs;
mod modulate;
mod ssao;
mod ssdd;
mod ssdof;

use rayon::prelude::*;
use thiserror::Error;

pub use self::blur::gaussian_blur;
pub use self::colormap::{color_map, ColorMap, ControlPoint};
pub use self::composite::composite;
pub use self::fxaa::{fxaa, FxaaParams};
pub use self::ibs::ibs;
pub use self::modulate::{combine_masks, modulate, ModulateMode};
pub use self::ssao::{ssao, SsaoParams};
pub use self::ssdd::ssdd;
pub use self::ssdof::ssdof;
use crate::imaging::Plane;

#[derive(Debug, Error, PartialEq)]
pub enum PassError {
    #[error("resolution mismatch: {0:?} vs {1:?}")]
    ResolutionMismatch((usize, usize), (usize, usize)),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{0}")]
    InvalidColorMap(String),
    #[error("at least one layer is required")]
    NoLayers,
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PassError {
    PassError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<(), PassError> {
    if a == b {
        Ok(())
    } else {
        Err(PassError::ResolutionMismatch(a, b))
    }
}

/// Four-channel float image. Pass outputs keep every channel within `[0, 1]`.
#[derive(Clone, Debug)]
pub struct RgbaImage {
    width: usize,
    height: usize,
    data: Vec<[f32; 4]>,
}

/// Bitwise comparison.
impl PartialEq for RgbaImage {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

impl RgbaImage {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 4]>) -> Self {
        assert_eq!(data.len(), width * height, "image data does not match {width}x{height}");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, rgba: [f32; 4]) -> Self {
        Self::new(width, height, vec![rgba; width * height])
    }

    /// Row-parallel construction.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 4] + Sync) -> Self {
        let mut data = vec![[0.0; 4]; width * height];
        data.par_chunks_mut(width.max(1)).enumerate().for_each(|(y, row)| {
            for (x, px) in row.iter_mut().enumerate() {
                *px = f(x, y);
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
    pub fn get(&self, x: usize, y: usize) -> [f32; 4] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgba: [f32; 4]) {
        self.data[y * self.width + x] = rgba;
    }

    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> [f32; 4] {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn pixels(&self) -> &[[f32; 4]] {
        &self.data
    }

    /// Channel `c` (0 = r .. 3 = a) as a plane.
    pub fn plane(&self, c: usize) -> Plane {
        Plane::new(self.width, self.height, self.data.iter().map(|p| p[c]).collect())
    }
}

pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

#[inline]
pub fn luma(rgba: [f32; 4]) -> f32 {
    rgba[0] * LUMA_WEIGHTS[0] + rgba[1] * LUMA_WEIGHTS[1] + rgba[2] * LUMA_WEIGHTS[2]
}

#[inline]
pub(crate) fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Per-frame min-max normalization of finite depths; background becomes 1.
/// A frame with a single finite depth value maps it to 0.
pub fn normalize_depth(depth: &Plane) -> Plane {
    let Some((lo, hi)) = depth.finite_range() else {
        return Plane::filled(depth.width(), depth.height(), 1.0);
    };
    let span = hi - lo;
    let data = depth
        .data()
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                1.0
            } else if span > 0.0 {
                (d - lo) / span
            } else {
                0.0
            }
        })
        .collect();
    Plane::new(depth.width(), depth.height(), data)
}
