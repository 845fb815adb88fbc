use serde::{Deserialize, Serialize};

use super::{same_dims, PassError, RgbaImage};
use crate::imaging::Plane;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ModulateMode {
    /// `rgb * (1 - m)`
    MultiplyDarken,
    /// `mix(rgb, color, m)`
    DrawColor { color: [f32; 3] },
}

/// Applies an occlusion or edge mask to an image. Mask values are clamped to
/// `[0, 1]`, NaN counts as 0. Alpha is preserved.
pub fn modulate(image: &RgbaImage, mask: &Plane, mode: ModulateMode) -> Result<RgbaImage, PassError> {
    same_dims(image.dims(), mask.dims())?;
    Ok(RgbaImage::from_fn(image.width(), image.height(), |x, y| {
        let m = mask.get(x, y);
        let m = if m.is_nan() { 0.0 } else { m.clamp(0.0, 1.0) };
        let [r, g, b, a] = image.get(x, y);
        match mode {
            ModulateMode::MultiplyDarken => {
                let k = 1.0 - m;
                [r * k, g * k, b * k, a]
            }
            ModulateMode::DrawColor { color } => {
                let mix = |c: f32, t: f32| (c + (t - c) * m).clamp(0.0, 1.0);
                [mix(r, color[0]), mix(g, color[1]), mix(b, color[2]), a]
            }
        }
    }))
}

/// Union of two occlusion masks: `1 - (1 - a)(1 - b)`.
pub fn combine_masks(a: &Plane, b: &Plane) -> Result<Plane, PassError> {
    same_dims(a.dims(), b.dims())?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&a, &b)| 1.0 - (1.0 - a) * (1.0 - b))
        .collect();
    Ok(Plane::new(a.width(), a.height(), data))
}
