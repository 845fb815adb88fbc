use super::{same_dims, PassError, RgbaImage};
use crate::imaging::Plane;

/// Depth-image compositing: per pixel the layer with the smallest depth wins.
///
/// Ties go to the earliest layer. NaN depth counts as background. Pixels that
/// are background in every layer get `+inf` depth and transparent black.
pub fn composite(layers: &[(&Plane, &RgbaImage)]) -> Result<(Plane, RgbaImage), PassError> {
    let (first_depth, _) = layers.first().ok_or(PassError::NoLayers)?;
    let dims = first_depth.dims();
    for (depth, image) in layers {
        same_dims(dims, depth.dims())?;
        same_dims(dims, image.dims())?;
    }
    let (w, h) = dims;
    let mut depth = Plane::filled(w, h, f32::INFINITY);
    let mut color = RgbaImage::filled(w, h, [0.0; 4]);
    for y in 0..h {
        for x in 0..w {
            let mut best: Option<(f32, usize)> = None;
            for (i, (d, _)) in layers.iter().enumerate() {
                let d = d.get(x, y);
                if d.is_finite() && best.is_none_or(|(b, _)| d < b) {
                    best = Some((d, i));
                }
            }
            if let Some((d, i)) = best {
                depth.set(x, y, d);
                color.set(x, y, layers[i].1.get(x, y));
            }
        }
    }
    Ok((depth, color))
}
