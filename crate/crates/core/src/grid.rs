//! Camera sampling grids: the set of viewpoints a mesh is captured from.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, CameraError, Projection};
use crate::math::Vec3;
use crate::num::Real;

/// Decimal places kept for automatically generated axis values.
const AXIS_DECIMALS: i32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingGrid<T = f64> {
    cameras: Vec<Camera<T>>,
    axes: IndexMap<String, Vec<f64>>,
}

impl<T: Real> SamplingGrid<T> {
    pub fn new(cameras: Vec<Camera<T>>, axes: IndexMap<String, Vec<f64>>) -> Result<Self, CameraError> {
        let first = cameras
            .first()
            .ok_or_else(|| CameraError::Grid("sampling grid needs at least one camera".into()))?;
        if let Some(c) = cameras.iter().find(|c| c.resolution() != first.resolution()) {
            return Err(CameraError::Grid(format!(
                "cameras disagree on resolution: {:?} vs {:?}",
                first.resolution(),
                c.resolution()
            )));
        }
        for (name, values) in &axes {
            if values.len() != cameras.len() {
                return Err(CameraError::Grid(format!(
                    "axis `{name}` has {} values for {} cameras",
                    values.len(),
                    cameras.len()
                )));
            }
        }
        Ok(Self { cameras, axes })
    }

    pub fn cameras(&self) -> &[Camera<T>] {
        &self.cameras
    }

    pub fn axes(&self) -> &IndexMap<String, Vec<f64>> {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn resolution(&self) -> (u32, u32) {
        self.cameras[0].resolution()
    }
}

fn round_axis(v: f64) -> f64 {
    let scale = 10f64.powi(AXIS_DECIMALS);
    let r = (v * scale).round() / scale;
    // Avoid writing "-0" into the index.
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `n` cameras on a golden-angle spiral over a sphere, all looking at `center`.
///
/// Records `phi` (azimuth in `[0, 360)`) and `theta` (elevation in `[-90, 90]`)
/// in degrees, rounded to three decimals, with `+y` as the polar axis.
pub fn fibonacci_sphere_grid<T: Real>(
    center: Vec3<T>,
    radius: T,
    n: usize,
    resolution: (u32, u32),
    projection: Projection<T>,
) -> Result<SamplingGrid<T>, CameraError> {
    if n == 0 {
        return Err(CameraError::Grid("fibonacci grid needs n >= 1".into()));
    }
    if !(radius > T::zero()) {
        return Err(CameraError::Grid("fibonacci grid needs a positive radius".into()));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut cameras = Vec::with_capacity(n);
    let mut phis = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let ring = (1.0 - y * y).max(0.0).sqrt();
        let a = golden_angle * i as f64;
        let dir = Vec3::new(ring * a.cos(), y, ring * a.sin());
        let position = center + dir.cast::<T>() * radius;
        cameras.push(Camera::looking_at(
            position,
            center,
            Vec3::unit_y(),
            projection,
            resolution,
        )?);
        phis.push(round_axis(dir.z.atan2(dir.x).to_degrees().rem_euclid(360.0)));
        thetas.push(round_axis(y.asin().to_degrees()));
    }
    let mut axes = IndexMap::new();
    axes.insert("phi".to_owned(), phis);
    axes.insert("theta".to_owned(), thetas);
    SamplingGrid::new(cameras, axes)
}

/// Calibration shared by every camera of a manual grid.
#[derive(Clone, Copy, Debug)]
pub struct Calibration<T = f64> {
    pub target: Vec3<T>,
    pub up: Vec3<T>,
    pub projection: Projection<T>,
    pub resolution: (u32, u32),
}

/// One camera per entry, in order. Every entry must name the same axes in the same order.
pub fn manual_grid<T: Real>(
    entries: &[(Vec3<T>, IndexMap<String, f64>)],
    calibration: &Calibration<T>,
) -> Result<SamplingGrid<T>, CameraError> {
    let (_, first_axes) = entries
        .first()
        .ok_or_else(|| CameraError::Grid("manual grid needs at least one camera".into()))?;
    let mut axes: IndexMap<String, Vec<f64>> = first_axes.keys().map(|k| (k.clone(), Vec::new())).collect();
    let mut cameras = Vec::with_capacity(entries.len());
    for (i, (position, values)) in entries.iter().enumerate() {
        if !values.keys().eq(axes.keys()) {
            return Err(CameraError::Grid(format!(
                "camera {i} names axes {:?}, expected {:?}",
                values.keys().collect::<Vec<_>>(),
                axes.keys().collect::<Vec<_>>()
            )));
        }
        for (k, v) in values {
            axes[k].push(*v);
        }
        cameras.push(Camera::looking_at(
            *position,
            calibration.target,
            calibration.up,
            calibration.projection,
            calibration.resolution,
        )?);
    }
    SamplingGrid::new(cameras, axes)
}

fn default_up() -> Vec3<f64> {
    Vec3::unit_y()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManualCamera {
    pub position: Vec3<f64>,
    #[serde(default)]
    pub axes: IndexMap<String, f64>,
}

/// The grid JSON file. See `docs/formats.md` for the schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    Fibonacci {
        center: Vec3<f64>,
        radius: f64,
        n: usize,
        resolution: (u32, u32),
        #[serde(default)]
        projection: Projection<f64>,
        #[serde(default = "default_up")]
        up: Vec3<f64>,
    },
    Manual {
        #[serde(alias = "center")]
        target: Vec3<f64>,
        resolution: (u32, u32),
        #[serde(default)]
        projection: Projection<f64>,
        #[serde(default = "default_up")]
        up: Vec3<f64>,
        cameras: Vec<ManualCamera>,
    },
}

impl GridSpec {
    pub fn resolution(&self) -> (u32, u32) {
        match self {
            GridSpec::Fibonacci { resolution, .. } | GridSpec::Manual { resolution, .. } => *resolution,
        }
    }

    pub fn set_resolution(&mut self, res: (u32, u32)) {
        match self {
            GridSpec::Fibonacci { resolution, .. } | GridSpec::Manual { resolution, .. } => *resolution = res,
        }
    }

    pub fn build<T: Real>(&self) -> Result<SamplingGrid<T>, CameraError> {
        match self {
            GridSpec::Fibonacci {
                center,
                radius,
                n,
                resolution,
                projection,
                up,
            } => {
                let grid = fibonacci_sphere_grid(center.cast(), T::lit(*radius), *n, *resolution, projection.cast())?;
                if *up == default_up() {
                    return Ok(grid);
                }
                let cameras = grid
                    .cameras()
                    .iter()
                    .map(|c| Camera::looking_at(c.position(), c.target(), up.cast(), c.projection(), c.resolution()))
                    .collect::<Result<Vec<_>, _>>()?;
                SamplingGrid::new(cameras, grid.axes().clone())
            }
            GridSpec::Manual {
                target,
                resolution,
                projection,
                up,
                cameras,
            } => {
                let entries: Vec<_> = cameras.iter().map(|c| (c.position.cast(), c.axes.clone())).collect();
                manual_grid(
                    &entries,
                    &Calibration {
                        target: target.cast(),
                        up: up.cast(),
                        projection: projection.cast(),
                        resolution: *resolution,
                    },
                )
            }
        }
    }
}
