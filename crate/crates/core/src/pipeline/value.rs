use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::imaging::{GBuffer, Plane};
use crate::passes::{ColorMap, RgbaImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortType {
    Gbuffer,
    Channel,
    Image,
    Colormap,
    Number,
}

impl fmt::Display for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortType::Gbuffer => "gbuffer",
            PortType::Channel => "channel",
            PortType::Image => "image",
            PortType::Colormap => "colormap",
            PortType::Number => "number",
        })
    }
}

/// A scalar plane, tagged with the camera it was seen from when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelValue {
    pub plane: Arc<Plane>,
    pub camera: Option<Arc<Camera<f64>>>,
}

/// Data flowing along an edge. Large payloads are shared, so caching and
/// fan-out never copy pixels.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Gbuffer(Arc<GBuffer>),
    Channel(ChannelValue),
    Image(Arc<RgbaImage>),
    Colormap(Arc<ColorMap>),
    Number(f64),
}

impl Value {
    pub fn port_type(&self) -> PortType {
        match self {
            Value::Gbuffer(_) => PortType::Gbuffer,
            Value::Channel(_) => PortType::Channel,
            Value::Image(_) => PortType::Image,
            Value::Colormap(_) => PortType::Colormap,
            Value::Number(_) => PortType::Number,
        }
    }

    pub fn as_image(&self) -> Option<&RgbaImage> {
        match self {
            Value::Image(img) => Some(img),
            _ => None,
        }
    }

    pub fn as_channel(&self) -> Option<&ChannelValue> {
        match self {
            Value::Channel(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_gbuffer(&self) -> Option<&GBuffer> {
        match self {
            Value::Gbuffer(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }
}
