use super::{invalid, normalize_depth, smoothstep, PassError};
use crate::imaging::Plane;

/// Image-based silhouettes from depth discontinuities.
///
/// On frame-normalized depth, a pixel's edge strength is the largest absolute
/// difference to any of its 8 neighbours, skipping background/background pairs.
/// Pixels above `threshold` seed the mask; the mask is 1 within `halfwidth`
/// pixels (Euclidean) of a seed and fades to 0 over one more pixel with a
/// smoothstep.
pub fn ibs(depth: &Plane, threshold: f64, halfwidth: f64) -> Result<Plane, PassError> {
    if !(threshold > 0.0) {
        return Err(invalid("threshold", "must be positive"));
    }
    if !(halfwidth >= 0.0 && halfwidth.is_finite()) {
        return Err(invalid("halfwidth", "must be a non-negative number"));
    }
    let (w, h) = depth.dims();
    let normalized = normalize_depth(depth);
    let background = |x: usize, y: usize| !depth.get(x, y).is_finite();

    let seeds: Vec<bool> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let here = normalized.get(x, y);
            let mut strength = 0.0f32;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (qx, qy) = (x as isize + dx, y as isize + dy);
                    if (dx, dy) == (0, 0) || qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                        continue;
                    }
                    let (qx, qy) = (qx as usize, qy as usize);
                    if background(x, y) && background(qx, qy) {
                        continue;
                    }
                    strength = strength.max((here - normalized.get(qx, qy)).abs());
                }
            }
            strength as f64 > threshold
        })
        .collect();

    let reach = halfwidth.ceil() as isize + 1;
    Ok(Plane::par_from_fn(w, h, |x, y| {
        let mut nearest = f64::INFINITY;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (qx, qy) = (x as isize + dx, y as isize + dy);
                if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                    continue;
                }
                if seeds[qy as usize * w + qx as usize] {
                    nearest = nearest.min(((dx * dx + dy * dy) as f64).sqrt());
                }
            }
        }
        if nearest <= halfwidth {
            1.0
        } else {
            (1.0 - smoothstep(halfwidth, halfwidth + 1.0, nearest)) as f32
        }
    }))
}
