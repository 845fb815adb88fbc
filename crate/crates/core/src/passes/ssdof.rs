use super::{invalid, same_dims, PassError, RgbaImage};
use crate::imaging::Plane;

/// Below this circle-of-confusion radius (pixels) a pixel is passed through.
const MIN_BLUR_RADIUS: f64 = 0.5;

/// Circle-of-confusion radius in pixels for depth `d`.
fn circle_of_confusion(d: f32, focal_depth: f64, aperture: f64, max_radius: f64) -> f64 {
    let c = if d.is_finite() {
        let d = d as f64;
        aperture * (d - focal_depth).abs() / d
    } else {
        aperture
    };
    c.clamp(0.0, max_radius)
}

/// Screen-space depth of field by scatter-aware disk gathering.
///
/// Each pixel with CoC `c >= 0.5` averages the pixels within distance `c` whose
/// own CoC reaches back to it (`c(q) >= |q - p|`); the pixel itself always
/// contributes. All four channels are averaged.
pub fn ssdof(
    image: &RgbaImage,
    depth: &Plane,
    focal_depth: f64,
    aperture: f64,
    max_radius: f64,
) -> Result<RgbaImage, PassError> {
    same_dims(image.dims(), depth.dims())?;
    if !(focal_depth > 0.0) {
        return Err(invalid("focal_depth", "must be positive"));
    }
    if !(aperture >= 0.0) {
        return Err(invalid("aperture", "must be non-negative"));
    }
    if !(max_radius >= 0.0) {
        return Err(invalid("max_radius", "must be non-negative"));
    }
    if aperture == 0.0 {
        return Ok(image.clone());
    }
    let (w, h) = image.dims();
    let coc = Plane::par_from_fn(w, h, |x, y| {
        circle_of_confusion(depth.get(x, y), focal_depth, aperture, max_radius) as f32
    });
    Ok(RgbaImage::from_fn(w, h, |x, y| {
        let radius = coc.get(x, y) as f64;
        if radius < MIN_BLUR_RADIUS {
            return image.get(x, y);
        }
        let reach = radius.floor() as isize;
        let mut sum = [0.0f64; 4];
        let mut count = 0.0;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (qx, qy) = (x as isize + dx, y as isize + dy);
                if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                    continue;
                }
                let dist = ((dx * dx + dy * dy) as f64).sqrt();
                if dist > radius {
                    continue;
                }
                if dist > 0.0 && (coc.get(qx as usize, qy as usize) as f64) < dist {
                    continue;
                }
                let px = image.get(qx as usize, qy as usize);
                for k in 0..4 {
                    sum[k] += px[k] as f64;
                }
                count += 1.0;
            }
        }
        sum.map(|s| ((s / count) as f32).clamp(0.0, 1.0))
    }))
}
