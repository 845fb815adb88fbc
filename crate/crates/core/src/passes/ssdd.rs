use super::{gaussian_blur, invalid, normalize_depth, same_dims, PassError, RgbaImage};
use crate::imaging::Plane;

/// Screen-space depth darkening.
///
/// With `D` the frame-normalized depth (background = 1) and
/// `Δ = blur(D, sigma) - D`, each pixel becomes `rgb + lambda * min(Δ, 0)`,
/// clamped. Pixels behind nearby occluders darken; nearer pixels stay untouched.
/// Alpha is passed through.
pub fn ssdd(depth: &Plane, image: &RgbaImage, sigma: f64, lambda: f64) -> Result<RgbaImage, PassError> {
    same_dims(depth.dims(), image.dims())?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", "must be a non-negative number"));
    }
    let normalized = normalize_depth(depth);
    let blurred = gaussian_blur(&normalized, sigma);
    Ok(RgbaImage::from_fn(image.width(), image.height(), |x, y| {
        let delta = blurred.get(x, y) as f64 - normalized.get(x, y) as f64;
        let shift = (lambda * delta.min(0.0)) as f32;
        let [r, g, b, a] = image.get(x, y);
        [
            (r + shift).clamp(0.0, 1.0),
            (g + shift).clamp(0.0, 1.0),
            (b + shift).clamp(0.0, 1.0),
            a,
        ]
    }))
}
