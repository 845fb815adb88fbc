use serde::{Deserialize, Serialize};

use super::{invalid, PassError, RgbaImage};
use crate::imaging::Plane;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub position: f32,
    pub rgb: [f32; 3],
}

/// Piecewise-linear transfer function over `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawColorMap")]
pub struct ColorMap {
    points: Vec<ControlPoint>,
    nan_color: [f32; 4],
}

#[derive(Deserialize)]
struct RawColorMap {
    points: Vec<ControlPoint>,
    #[serde(default)]
    nan_color: [f32; 4],
}

impl TryFrom<RawColorMap> for ColorMap {
    type Error = PassError;

    fn try_from(raw: RawColorMap) -> Result<Self, PassError> {
        ColorMap::new(raw.points, raw.nan_color)
    }
}

const PRESETS: &[&str] = &["grayscale", "viridis", "coolwarm", "blues", "reds"];

impl ColorMap {
    /// Positions must start at 0, end at 1 and increase strictly.
    pub fn new(points: Vec<ControlPoint>, nan_color: [f32; 4]) -> Result<Self, PassError> {
        let bad = |m: &str| Err(PassError::InvalidColorMap(m.to_owned()));
        if points.len() < 2 {
            return bad("a color map needs at least two control points");
        }
        if points[0].position != 0.0 || points[points.len() - 1].position != 1.0 {
            return bad("control points must start at 0 and end at 1");
        }
        if points.windows(2).any(|w| !(w[0].position < w[1].position)) {
            return bad("control point positions must increase strictly");
        }
        Ok(Self { points, nan_color })
    }

    pub fn preset_names() -> &'static [&'static str] {
        PRESETS
    }

    /// Built-in maps; NaN maps to transparent black.
    #[allow(clippy::approx_constant)] // sampled palette values, not 1/pi
    pub fn preset(name: &str) -> Option<Self> {
        let rgb: &[[f32; 3]] = match name {
            "grayscale" => &[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]],
            "viridis" => &[
                [0.267, 0.005, 0.329],
                [0.283, 0.141, 0.458],
                [0.254, 0.265, 0.530],
                [0.207, 0.372, 0.553],
                [0.164, 0.471, 0.558],
                [0.128, 0.567, 0.551],
                [0.135, 0.659, 0.518],
                [0.267, 0.749, 0.441],
                [0.478, 0.821, 0.318],
                [0.741, 0.873, 0.150],
                [0.993, 0.906, 0.144],
            ],
            "coolwarm" => &[[0.230, 0.299, 0.754], [0.865, 0.865, 0.865], [0.706, 0.016, 0.150]],
            "blues" => &[[0.969, 0.984, 1.0], [0.420, 0.682, 0.839], [0.031, 0.188, 0.420]],
            "reds" => &[[1.0, 0.961, 0.941], [0.984, 0.416, 0.290], [0.404, 0.0, 0.051]],
            _ => return None,
        };
        let last = (rgb.len() - 1) as f32;
        let points = rgb
            .iter()
            .enumerate()
            .map(|(i, &rgb)| ControlPoint {
                position: i as f32 / last,
                rgb,
            })
            .collect();
        Self::new(points, [0.0; 4]).ok()
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn nan_color(&self) -> [f32; 4] {
        self.nan_color
    }

    pub fn with_nan_color(mut self, nan_color: [f32; 4]) -> Self {
        self.nan_color = nan_color;
        self
    }

    /// Color at `t ∈ [0, 1]` (clamped).
    pub fn lookup(&self, t: f32) -> [f32; 3] {
        let t = t.clamp(0.0, 1.0);
        let i = self.points.partition_point(|p| p.position <= t);
        if i == 0 {
            return self.points[0].rgb;
        }
        if i >= self.points.len() {
            return self.points[self.points.len() - 1].rgb;
        }
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        let f = (t - a.position) / (b.position - a.position);
        [0, 1, 2].map(|k| a.rgb[k] + (b.rgb[k] - a.rgb[k]) * f)
    }
}

/// Maps a scalar plane through `map` over `[lo, hi]`. Non-finite pixels (NaN scalars,
/// infinite background depth) take the map's NaN color; everything else is opaque.
pub fn color_map(scalar: &Plane, range: (f64, f64), map: &ColorMap) -> Result<RgbaImage, PassError> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(invalid("range", format!("degenerate range [{lo}, {hi}]")));
    }
    let nan = map.nan_color;
    Ok(RgbaImage::from_fn(scalar.width(), scalar.height(), |x, y| {
        let v = scalar.get(x, y);
        if !v.is_finite() {
            return nan;
        }
        let t = ((v as f64 - lo) / (hi - lo)).clamp(0.0, 1.0);
        let [r, g, b] = map.lookup(t as f32);
        [r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0), 1.0]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_midpoint_and_nan() {
        let map = ColorMap::preset("grayscale")
            .unwrap()
            .with_nan_color([1.0, 0.0, 1.0, 1.0]);
        let p = Plane::new(5, 1, vec![2.0, 6.0, 4.0, f32::NAN, f32::INFINITY]);
        let img = color_map(&p, (2.0, 6.0), &map).unwrap();
        assert_eq!(img.get(4, 0), [1.0, 0.0, 1.0, 1.0]);
        assert_eq!(img.get(0, 0), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(img.get(1, 0), [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(img.get(2, 0), [0.5, 0.5, 0.5, 1.0]);
        assert_eq!(img.get(3, 0), [1.0, 0.0, 1.0, 1.0]);
        assert!(color_map(&p, (1.0, 1.0), &map).is_err());
    }

    #[test]
    fn presets_are_valid() {
        for name in ColorMap::preset_names() {
            let map = ColorMap::preset(name).unwrap();
            assert_eq!(map.points().last().unwrap().position, 1.0);
        }
        assert!(ColorMap::preset("nope").is_none());
    }

    #[test]
    fn validation() {
        let pt = |position| ControlPoint {
            position,
            rgb: [0.0; 3],
        };
        assert!(ColorMap::new(vec![pt(0.0)], [0.0; 4]).is_err());
        assert!(ColorMap::new(vec![pt(0.0), pt(0.9)], [0.0; 4]).is_err());
        assert!(ColorMap::new(vec![pt(0.0), pt(0.5), pt(0.5), pt(1.0)], [0.0; 4]).is_err());
        let json = r#"{"points":[{"position":0,"rgb":[0,0,0]},{"position":0.5,"rgb":[1,0,0]}]}"#;
        assert!(serde_json::from_str::<ColorMap>(json).is_err());
    }
}
