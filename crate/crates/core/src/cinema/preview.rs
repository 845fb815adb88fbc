//! 8-bit previews and PNG encoding.
//!
//! Quantization rule for every channel: `floor(clamp(v, 0, 1) * 255 + 0.5)`,
//! i.e. round half up.

use super::CinemaError;
use crate::imaging::{GBuffer, ImagingError, Plane};
use crate::passes::RgbaImage;

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Grayscale rendering of a scalar plane over `[lo, hi]`; non-finite pixels become transparent.
pub fn preview_image(plane: &Plane, range: (f64, f64)) -> RgbaImage {
    let (lo, hi) = range;
    let span = hi - lo;
    RgbaImage::from_fn(plane.width(), plane.height(), |x, y| {
        let v = plane.get(x, y);
        if !v.is_finite() {
            return [0.0; 4];
        }
        let t = if span > 0.0 {
            ((v as f64 - lo) / span).clamp(0.0, 1.0) as f32
        } else {
            0.0
        };
        [t, t, t, 1.0]
    })
}

/// 8-bit RGBA PNG with an sRGB chunk.
pub fn encode_png(image: &RgbaImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        encoder.set_color(png::ColorType::Rgba);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_source_srgb(png::SrgbRenderingIntent::Perceptual);
        let mut writer = encoder.write_header().expect("in-memory PNG header");
        let bytes: Vec<u8> = image.pixels().iter().flat_map(|p| p.map(quantize)).collect();
        writer.write_image_data(&bytes).expect("in-memory PNG data");
    }
    out
}

/// PNG preview of a scalar channel mapped from `range` to `[0, 255]`.
pub fn export_png_preview(gbuffer: &GBuffer, channel: &str, range: (f64, f64)) -> Result<Vec<u8>, CinemaError> {
    let ch = gbuffer.channel(channel)?;
    if ch.planes().len() != 1 {
        return Err(ImagingError::PlaneCount(channel.to_owned()).into());
    }
    Ok(encode_png(&preview_image(&ch.planes()[0], range)))
}
