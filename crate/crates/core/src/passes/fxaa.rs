//! Fast approximate anti-aliasing on the CPU, following the quality preset of
//! the usual FXAA 3.11 formulation: local luma contrast test, edge orientation
//! from a 3x3 neighbourhood, a 12-step end-of-edge search and a blended
//! bilinear resample perpendicular to the edge.

use serde::{Deserialize, Serialize};

use super::{invalid, luma, PassError, RgbaImage};

/// Step sizes of the end-of-edge search, in pixels.
const SEARCH_STEPS: [f32; 12] = [1.0, 1.0, 1.0, 1.0, 1.0, 1.5, 2.0, 2.0, 2.0, 2.0, 4.0, 8.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FxaaParams {
    /// Minimum contrast relative to the local maximum luma.
    pub edge_threshold: f32,
    /// Absolute contrast floor, skips dark regions.
    pub edge_threshold_min: f32,
    /// Amount of sub-pixel aliasing removal.
    pub subpixel: f32,
}

impl Default for FxaaParams {
    fn default() -> Self {
        Self {
            edge_threshold: 0.125,
            edge_threshold_min: 0.0312,
            subpixel: 0.75,
        }
    }
}

/// Bilinear sample at continuous pixel coordinates (centers at `i + 0.5`), edge-clamped.
fn sample(img: &RgbaImage, u: f32, v: f32) -> [f32; 4] {
    let (fx, fy) = (u - 0.5, v - 0.5);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let p00 = img.get_clamped(x0, y0);
    let p10 = img.get_clamped(x0 + 1, y0);
    let p01 = img.get_clamped(x0, y0 + 1);
    let p11 = img.get_clamped(x0 + 1, y0 + 1);
    let mut out = [0.0; 4];
    for k in 0..4 {
        let top = p00[k] + (p10[k] - p00[k]) * tx;
        let bottom = p01[k] + (p11[k] - p01[k]) * tx;
        out[k] = top + (bottom - top) * ty;
    }
    out
}

fn sample_luma(img: &RgbaImage, u: f32, v: f32) -> f32 {
    luma(sample(img, u, v))
}

pub fn fxaa(image: &RgbaImage, params: &FxaaParams) -> Result<RgbaImage, PassError> {
    if !(params.edge_threshold >= 0.0) {
        return Err(invalid("edge_threshold", "must be non-negative"));
    }
    if !(params.edge_threshold_min >= 0.0) {
        return Err(invalid("edge_threshold_min", "must be non-negative"));
    }
    if !(0.0..=1.0).contains(&params.subpixel) {
        return Err(invalid("subpixel", "must lie in [0, 1]"));
    }
    Ok(RgbaImage::from_fn(image.width(), image.height(), |x, y| {
        fxaa_pixel(image, x as isize, y as isize, params)
    }))
}

fn fxaa_pixel(img: &RgbaImage, x: isize, y: isize, params: &FxaaParams) -> [f32; 4] {
    let at = |dx: isize, dy: isize| luma(img.get_clamped(x + dx, y + dy));
    let center_px = img.get_clamped(x, y);
    let c = luma(center_px);
    let (n, s, w, e) = (at(0, -1), at(0, 1), at(-1, 0), at(1, 0));

    let max = c.max(n).max(s).max(w).max(e);
    let min = c.min(n).min(s).min(w).min(e);
    let range = max - min;
    if range < params.edge_threshold_min.max(max * params.edge_threshold) {
        return center_px;
    }

    let (nw, ne, sw, se) = (at(-1, -1), at(1, -1), at(-1, 1), at(1, 1));
    let edge_horizontal = (-2.0 * w + nw + sw).abs() + 2.0 * (-2.0 * c + n + s).abs() + (-2.0 * e + ne + se).abs();
    let edge_vertical = (-2.0 * n + nw + ne).abs() + 2.0 * (-2.0 * c + w + e).abs() + (-2.0 * s + sw + se).abs();
    let horizontal = edge_horizontal >= edge_vertical;

    // Neighbours across the edge: above/below for a horizontal edge, left/right otherwise.
    let (luma1, luma2) = if horizontal { (n, s) } else { (w, e) };
    let gradient1 = luma1 - c;
    let gradient2 = luma2 - c;
    let steepest_is_1 = gradient1.abs() >= gradient2.abs();
    let gradient_scaled = 0.25 * gradient1.abs().max(gradient2.abs());

    let (step, local_average) = if steepest_is_1 {
        (-1.0f32, 0.5 * (luma1 + c))
    } else {
        (1.0f32, 0.5 * (luma2 + c))
    };

    // Start half a pixel across, on the edge itself.
    let (mut u, mut v) = (x as f32 + 0.5, y as f32 + 0.5);
    if horizontal {
        v += step * 0.5;
    } else {
        u += step * 0.5;
    }
    let (du, dv) = if horizontal { (1.0f32, 0.0f32) } else { (0.0, 1.0) };

    let (mut u1, mut v1) = (u, v);
    let (mut u2, mut v2) = (u, v);
    let mut end1 = 0.0f32;
    let mut end2 = 0.0f32;
    let mut done1 = false;
    let mut done2 = false;
    for step_len in SEARCH_STEPS {
        if !done1 {
            u1 -= du * step_len;
            v1 -= dv * step_len;
            end1 = sample_luma(img, u1, v1) - local_average;
            done1 = end1.abs() >= gradient_scaled;
        }
        if !done2 {
            u2 += du * step_len;
            v2 += dv * step_len;
            end2 = sample_luma(img, u2, v2) - local_average;
            done2 = end2.abs() >= gradient_scaled;
        }
        if done1 && done2 {
            break;
        }
    }

    let (dist1, dist2) = if horizontal { (u - u1, u2 - u) } else { (v - v1, v2 - v) };
    let towards_1 = dist1 < dist2;
    let dist = dist1.min(dist2);
    let span = dist1 + dist2;
    let pixel_offset = -dist / span + 0.5;

    let center_smaller = c < local_average;
    let end = if towards_1 { end1 } else { end2 };
    let good_span = (end < 0.0) != center_smaller;
    let edge_offset = if good_span { pixel_offset } else { 0.0 };

    let average = (2.0 * (n + s + w + e) + nw + ne + sw + se) / 12.0;
    let sub1 = ((average - c).abs() / range).clamp(0.0, 1.0);
    let sub2 = (-2.0 * sub1 + 3.0) * sub1 * sub1;
    let sub_offset = sub2 * sub2 * params.subpixel;

    let offset = edge_offset.max(sub_offset);
    let (mut fu, mut fv) = (x as f32 + 0.5, y as f32 + 0.5);
    if horizontal {
        fv += offset * step;
    } else {
        fu += offset * step;
    }
    let mut out = sample(img, fu, fv);
    for ch in out.iter_mut().take(3) {
        *ch = ch.clamp(0.0, 1.0);
    }
    out[3] = center_px[3];
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_unchanged() {
        let img = RgbaImage::filled(8, 8, [0.3, 0.6, 0.2, 0.8]);
        assert_eq!(fxaa(&img, &FxaaParams::default()).unwrap(), img);
    }

    #[test]
    fn rejects_bad_params() {
        let img = RgbaImage::filled(2, 2, [0.0; 4]);
        let p = FxaaParams {
            subpixel: 2.0,
            ..Default::default()
        };
        assert!(fxaa(&img, &p).is_err());
    }

    #[test]
    fn alpha_passes_through() {
        let img = RgbaImage::from_fn(8, 8, |x, y| {
            let v = if x + y > 7 { 1.0 } else { 0.0 };
            [v, v, v, 0.25 + 0.05 * x as f32]
        });
        let out = fxaa(&img, &FxaaParams::default()).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(out.get(x, y)[3], img.get(x, y)[3]);
            }
        }
    }
}
