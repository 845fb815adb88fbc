//! The `.gbuf` container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "CDGB"            4 bytes magic
//! version           u32 (= 1)
//! width, height     u32, u32
//! channel_count     u32
//! per channel:
//!   name_len        u16
//!   name            name_len bytes of UTF-8
//!   plane_count     u8
//!   planes          plane_count * width * height f32, plane-major, rows top to bottom
//! camera            UTF-8 JSON, everything up to end of file
//! ```

use super::CinemaError;
use crate::camera::Camera;
use crate::imaging::{Channel, GBuffer, Plane, DEPTH};

pub const MAGIC: &[u8; 4] = b"CDGB";
pub const VERSION: u32 = 1;

/// Size of the encoded file before the camera JSON, for the given channel layout.
pub fn payload_size(width: usize, height: usize, channels: &[(&str, u8)]) -> usize {
    20 + channels
        .iter()
        .map(|(name, planes)| 2 + name.len() + 1 + *planes as usize * width * height * 4)
        .sum::<usize>()
}

pub fn encode(gbuffer: &GBuffer) -> Vec<u8> {
    let (w, h) = (gbuffer.width(), gbuffer.height());
    let layout: Vec<(&str, u8)> = gbuffer
        .channels()
        .iter()
        .map(|(n, c)| (n.as_str(), c.planes().len() as u8))
        .collect();
    let camera = serde_json::to_vec(gbuffer.camera()).expect("camera serializes");
    let mut out = Vec::with_capacity(payload_size(w, h, &layout) + camera.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(gbuffer.channels().len() as u32).to_le_bytes());
    for (name, channel) in gbuffer.channels() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(channel.planes().len() as u8);
        for plane in channel.planes() {
            for v in plane.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&camera);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CinemaError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                CinemaError::Corrupt(format!(
                    "truncated while reading {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CinemaError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<GBuffer, CinemaError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(CinemaError::Corrupt("bad magic, not a .gbuf file".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(CinemaError::Version(version));
    }
    let width = c.u32("width")? as usize;
    let height = c.u32("height")? as usize;
    let count = c.u32("channel count")?;
    let plane_bytes = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| CinemaError::Corrupt("image dimensions overflow".into()))?;

    let mut channels = Vec::with_capacity(count.min(64) as usize);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(c.take(2, "name length")?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(c.take(name_len, "channel name")?)
            .map_err(|_| CinemaError::Corrupt("channel name is not UTF-8".into()))?
            .to_owned();
        let planes = c.take(1, "plane count")?[0];
        let mut data = Vec::with_capacity(planes as usize);
        for _ in 0..planes {
            let raw = c.take(plane_bytes, &format!("channel `{name}`"))?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            data.push(Plane::new(width, height, values));
        }
        channels.push((name, data));
    }

    let camera: Camera<f64> =
        serde_json::from_slice(&bytes[c.pos..]).map_err(|e| CinemaError::Corrupt(format!("camera metadata: {e}")))?;
    if camera.resolution() != (width as u32, height as u32) {
        return Err(CinemaError::Corrupt(format!(
            "camera resolution {:?} does not match image {width}x{height}",
            camera.resolution()
        )));
    }

    let depth_index = channels
        .iter()
        .position(|(n, p)| n == DEPTH && p.len() == 1)
        .ok_or_else(|| CinemaError::Corrupt("no single-plane depth channel".into()))?;
    let (_, mut depth) = channels.remove(depth_index);
    let mut gbuffer = GBuffer::new(camera, depth.remove(0))?;
    // Keep the on-disk channel order: depth is re-inserted first by GBuffer::new, so
    // only files that put depth first roundtrip byte-identically.
    for (name, planes) in channels {
        gbuffer.insert(name, Channel::from_planes(planes))?;
    }
    Ok(gbuffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Projection;
    use crate::math::Vec3;

    fn sample() -> GBuffer {
        let cam = Camera::new(
            Vec3::new(0.0, 0.0, -3.0),
            Vec3::zero(),
            Vec3::unit_y(),
            Projection::default(),
            (3, 2),
        )
        .unwrap();
        let mut g = GBuffer::new(cam, Plane::new(3, 2, vec![1.0, f32::INFINITY, 2.5, 3.0, -0.0, 1e-30])).unwrap();
        g.insert(
            "scalar:s",
            Channel::scalar(Plane::new(3, 2, vec![0.0, f32::NAN, 1.0, 2.0, 3.0, 4.0])),
        )
        .unwrap();
        g
    }

    #[test]
    fn roundtrip_bit_exact() {
        let g = sample();
        let bytes = encode(&g);
        assert_eq!(decode(&bytes).unwrap(), g);
        assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"CDGB");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(bytes[20..22].try_into().unwrap()), 5);
        assert_eq!(&bytes[22..27], b"depth");
        assert_eq!(bytes[27], 1);
    }

    #[test]
    fn size_accounting_for_2048_square() {
        let size = payload_size(2048, 2048, &[("depth", 1)]);
        assert_eq!(size, 16 * 1024 * 1024 + 20 + 2 + 5 + 1);
    }

    #[test]
    fn rejects_bad_version_and_truncation() {
        let mut bytes = encode(&sample());
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(CinemaError::Version(2))));
        let bytes = encode(&sample());
        assert!(matches!(decode(&bytes[..40]), Err(CinemaError::Corrupt(_))));
        assert!(matches!(decode(b"PNG\0"), Err(CinemaError::Corrupt(_))));
    }
}
