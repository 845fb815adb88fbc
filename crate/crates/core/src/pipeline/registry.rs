//! Filter contract and the built-in catalog.
//!
//! A filter declares its ports and parameters in a [`FilterSpec`] and provides
//! a kernel. Every number or color-map parameter is also exposed as an
//! optional input port of the same name: when connected, the upstream value
//! overrides the stored parameter and is validated against the same schema.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Value as Json};

use super::value::{ChannelValue, PortType, Value};
use super::PipelineError;
use crate::imaging::{GBuffer, Plane};
use crate::passes::{self, ColorMap, FxaaParams, ModulateMode, RgbaImage, SsaoParams};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamKind {
    Number {
        #[serde(skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
        /// `min` itself is not allowed.
        exclusive_min: bool,
        step: f64,
        integer: bool,
    },
    Choice {
        options: Vec<String>,
    },
    Text,
    /// `[r, g, b]` in `[0, 1]`.
    Color,
    /// A preset name or an inline `{points, nan_color}` map.
    Colormap {
        presets: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
    pub default: Json,
    pub description: String,
    /// Type of the input port that can drive this parameter, if any.
    pub port: Option<PortType>,
}

impl ParamSpec {
    fn number(name: &str, default: f64, min: Option<f64>, max: Option<f64>, step: f64, description: &str) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Number {
                min,
                max,
                exclusive_min: false,
                step,
                integer: false,
            },
            default: json!(default),
            description: description.into(),
            port: Some(PortType::Number),
        }
    }

    fn positive(name: &str, default: f64, max: Option<f64>, step: f64, description: &str) -> Self {
        let mut p = Self::number(name, default, Some(0.0), max, step, description);
        if let ParamKind::Number { exclusive_min, .. } = &mut p.kind {
            *exclusive_min = true;
        }
        p
    }

    fn integer(name: &str, default: u64, min: u64, max: Option<u64>, description: &str) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Number {
                min: Some(min as f64),
                max: max.map(|m| m as f64),
                exclusive_min: false,
                step: 1.0,
                integer: true,
            },
            default: json!(default),
            description: description.into(),
            port: Some(PortType::Number),
        }
    }

    fn without_port(mut self) -> Self {
        self.port = None;
        self
    }

    /// Checks `value` against the schema and returns its canonical form.
    pub fn validate(&self, value: &Json) -> Result<Json, String> {
        match &self.kind {
            ParamKind::Number {
                min,
                max,
                exclusive_min,
                integer,
                ..
            } => {
                let x = value.as_f64().ok_or("expected a number")?;
                if !x.is_finite() {
                    return Err("expected a finite number".into());
                }
                if let Some(lo) = *min {
                    if x < lo || (*exclusive_min && x == lo) {
                        let op = if *exclusive_min { ">" } else { ">=" };
                        return Err(format!("{x} out of range: must be {op} {lo}"));
                    }
                }
                if let Some(hi) = *max {
                    if x > hi {
                        return Err(format!("{x} out of range: must be <= {hi}"));
                    }
                }
                if *integer {
                    if let Some(u) = value.as_u64() {
                        return Ok(json!(u));
                    }
                    if x.fract() != 0.0 || x > u64::MAX as f64 {
                        return Err(format!("{x} is not an integer"));
                    }
                    return Ok(json!(x as u64));
                }
                Ok(json!(x))
            }
            ParamKind::Choice { options } => {
                let s = value.as_str().ok_or("expected a string")?;
                if options.iter().any(|o| o == s) {
                    Ok(json!(s))
                } else {
                    Err(format!("`{s}` is not one of {options:?}"))
                }
            }
            ParamKind::Text => value
                .as_str()
                .map(|s| json!(s))
                .ok_or_else(|| "expected a string".into()),
            ParamKind::Color => {
                let rgb: [f64; 3] = serde_json::from_value(value.clone()).map_err(|_| "expected [r, g, b]")?;
                if rgb.iter().all(|c| (0.0..=1.0).contains(c)) {
                    Ok(json!(rgb))
                } else {
                    Err("color components must lie in [0, 1]".into())
                }
            }
            ParamKind::Colormap { .. } => {
                parse_colormap(value)?;
                Ok(value.clone())
            }
        }
    }
}

fn parse_colormap(value: &Json) -> Result<ColorMap, String> {
    match value {
        Json::String(name) => ColorMap::preset(name).ok_or_else(|| format!("unknown color map preset `{name}`")),
        Json::Object(_) => serde_json::from_value(value.clone()).map_err(|e| e.to_string()),
        _ => Err("expected a preset name or a color map object".into()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: PortType,
    pub optional: bool,
}

impl PortSpec {
    fn required(name: &str, ty: PortType) -> Self {
        Self {
            name: name.into(),
            ty,
            optional: false,
        }
    }

    fn optional(name: &str, ty: PortType) -> Self {
        Self {
            name: name.into(),
            ty,
            optional: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterSpec {
    pub name: String,
    pub description: String,
    /// Data inputs; parameter ports are listed with their parameters.
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
    pub params: Vec<ParamSpec>,
}

impl FilterSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Type and optionality of an input port, data or parameter.
    pub fn input(&self, name: &str) -> Option<(PortType, bool)> {
        if let Some(p) = self.inputs.iter().find(|p| p.name == name) {
            return Some((p.ty, p.optional));
        }
        self.param(name).and_then(|p| p.port).map(|ty| (ty, true))
    }

    pub fn output(&self, name: &str) -> Option<PortType> {
        self.outputs.iter().find(|p| p.name == name).map(|p| p.ty)
    }

    pub fn default_params(&self) -> IndexMap<String, Json> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.default.clone()))
            .collect()
    }
}

pub type Outputs = IndexMap<String, Value>;

/// Everything a kernel sees: its resolved inputs, its parameters and the
/// G-buffers the pipeline runs on.
pub struct EvalArgs<'a> {
    pub(crate) node: &'a str,
    pub(crate) spec: &'a FilterSpec,
    pub(crate) inputs: HashMap<&'a str, &'a Value>,
    pub(crate) params: &'a IndexMap<String, Json>,
    pub(crate) gbuffers: &'a [Arc<GBuffer>],
}

impl<'a> EvalArgs<'a> {
    pub fn node(&self) -> &str {
        self.node
    }

    pub fn gbuffers(&self) -> &[Arc<GBuffer>] {
        self.gbuffers
    }

    pub fn input(&self, port: &str) -> Option<&'a Value> {
        self.inputs.get(port).copied()
    }

    fn required(&self, port: &str) -> Result<&'a Value, PipelineError> {
        self.input(port).ok_or_else(|| PipelineError::Unconnected {
            node: self.node.to_owned(),
            port: port.to_owned(),
        })
    }

    pub fn image(&self, port: &str) -> Result<&'a RgbaImage, PipelineError> {
        let v = self.required(port)?;
        v.as_image()
            .ok_or_else(|| self.fail(format!("port `{port}` holds a {}", v.port_type())))
    }

    pub fn channel(&self, port: &str) -> Result<&'a ChannelValue, PipelineError> {
        let v = self.required(port)?;
        v.as_channel()
            .ok_or_else(|| self.fail(format!("port `{port}` holds a {}", v.port_type())))
    }

    /// The stored parameter, or the connected override after validation.
    pub fn param(&self, name: &str) -> Result<Json, PipelineError> {
        let spec = self
            .spec
            .param(name)
            .unwrap_or_else(|| panic!("filter `{}` reads undeclared parameter `{name}`", self.spec.name));
        let invalid = |reason: String| PipelineError::InvalidParam {
            node: self.node.to_owned(),
            param: name.to_owned(),
            reason,
        };
        match self.input(name) {
            Some(Value::Number(x)) => spec.validate(&json!(x)).map_err(invalid),
            Some(Value::Colormap(_)) => Ok(Json::Null),
            Some(other) => Err(self.fail(format!("port `{name}` holds a {}", other.port_type()))),
            None => Ok(self.params.get(name).cloned().unwrap_or_else(|| spec.default.clone())),
        }
    }

    pub fn number(&self, name: &str) -> Result<f64, PipelineError> {
        Ok(self.param(name)?.as_f64().expect("validated number"))
    }

    pub fn integer(&self, name: &str) -> Result<u64, PipelineError> {
        Ok(self.param(name)?.as_u64().expect("validated integer"))
    }

    pub fn text(&self, name: &str) -> Result<String, PipelineError> {
        Ok(self.param(name)?.as_str().expect("validated string").to_owned())
    }

    pub fn colormap(&self, name: &str) -> Result<ColorMap, PipelineError> {
        if let Some(Value::Colormap(map)) = self.input(name) {
            return Ok(ColorMap::clone(map));
        }
        parse_colormap(&self.param(name)?).map_err(|reason| PipelineError::InvalidParam {
            node: self.node.to_owned(),
            param: name.to_owned(),
            reason,
        })
    }

    pub fn fail(&self, message: impl ToString) -> PipelineError {
        PipelineError::Filter {
            node: self.node.to_owned(),
            message: message.to_string(),
        }
    }
}

/// A node type. Kernels must be deterministic functions of their arguments.
pub trait Filter: Send + Sync {
    fn spec(&self) -> &FilterSpec;
    fn evaluate(&self, args: &EvalArgs<'_>) -> Result<Outputs, PipelineError>;
}

type Kernel = fn(&EvalArgs<'_>) -> Result<Outputs, PipelineError>;

struct Builtin {
    spec: FilterSpec,
    kernel: Kernel,
}

impl Filter for Builtin {
    fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    fn evaluate(&self, args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
        (self.kernel)(args)
    }
}

/// Filters by name, in registration order.
#[derive(Clone, Default)]
pub struct Registry {
    filters: IndexMap<String, Arc<dyn Filter>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.filters.keys()).finish()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in catalog.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        for (spec, kernel) in builtins() {
            r.register(Arc::new(Builtin { spec, kernel }));
        }
        r
    }

    /// Adds or replaces a filter type.
    pub fn register(&mut self, filter: Arc<dyn Filter>) {
        let spec = filter.spec();
        debug_assert!(
            spec.inputs.iter().all(|i| spec.param(&i.name).is_none()),
            "filter `{}` has a data input named like a parameter",
            spec.name
        );
        self.filters.insert(spec.name.clone(), filter);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Filter>> {
        self.filters.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.filters.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// `{"filters": [spec, ...]}` in registration order.
    pub fn to_json(&self) -> Json {
        let specs: Vec<&FilterSpec> = self.filters.values().map(|f| f.spec()).collect();
        json!({ "filters": specs })
    }
}

/// The f64 that prints like `x`, so f32 defaults read cleanly in JSON.
fn shortest(x: f32) -> f64 {
    x.to_string().parse().expect("f32 display parses")
}

fn pass_err<'a>(args: &'a EvalArgs<'_>) -> impl Fn(passes::PassError) -> PipelineError + 'a {
    move |e| args.fail(e)
}

fn outputs<const N: usize>(values: [(&str, Value); N]) -> Outputs {
    values.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

fn channel_like(source: &ChannelValue, plane: Plane) -> Value {
    Value::Channel(ChannelValue {
        plane: Arc::new(plane),
        camera: source.camera.clone(),
    })
}

fn spec(
    name: &str,
    description: &str,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
    params: Vec<ParamSpec>,
) -> FilterSpec {
    FilterSpec {
        name: name.into(),
        description: description.into(),
        inputs,
        outputs,
        params,
    }
}

use PortType::{Channel as Ch, Colormap as Cm, Gbuffer as Gb, Image as Im, Number as Num};

fn builtins() -> Vec<(FilterSpec, Kernel)> {
    let fxaa_defaults = FxaaParams::default();
    let ssao_defaults = SsaoParams::default();
    vec![
        (
            spec(
                "source",
                "Reads one channel of an input G-buffer.",
                vec![],
                vec![
                    PortSpec::required("gbuffer", Gb),
                    PortSpec::required("depth", Ch),
                    PortSpec::required("channel", Ch),
                    PortSpec::required("min", Num),
                    PortSpec::required("max", Num),
                ],
                vec![
                    ParamSpec::integer("input", 0, 0, None, "index of the selected G-buffer").without_port(),
                    ParamSpec {
                        name: "channel".into(),
                        kind: ParamKind::Text,
                        default: json!("depth"),
                        description: "channel name, e.g. depth or scalar:<field>".into(),
                        port: None,
                    },
                ],
            ),
            source,
        ),
        (
            spec(
                "color_map",
                "Maps a scalar channel through a transfer function.",
                vec![PortSpec::required("scalar", Ch)],
                vec![PortSpec::required("image", Im)],
                vec![
                    ParamSpec {
                        name: "map".into(),
                        kind: ParamKind::Colormap {
                            presets: ColorMap::preset_names().iter().map(|s| s.to_string()).collect(),
                        },
                        default: json!("viridis"),
                        description: "transfer function".into(),
                        port: Some(Cm),
                    },
                    ParamSpec::number("lo", 0.0, None, None, 0.01, "value mapped to the first control point"),
                    ParamSpec::number("hi", 1.0, None, None, 0.01, "value mapped to the last control point"),
                ],
            ),
            color_map,
        ),
        (
            spec(
                "composite",
                "Depth compositing: per pixel, the nearest layer wins.",
                vec![
                    PortSpec::required("depth_a", Ch),
                    PortSpec::required("image_a", Im),
                    PortSpec::optional("depth_b", Ch),
                    PortSpec::optional("image_b", Im),
                    PortSpec::optional("depth_c", Ch),
                    PortSpec::optional("image_c", Im),
                    PortSpec::optional("depth_d", Ch),
                    PortSpec::optional("image_d", Im),
                ],
                vec![PortSpec::required("depth", Ch), PortSpec::required("image", Im)],
                vec![],
            ),
            composite,
        ),
        (
            spec(
                "ssao",
                "Screen-space ambient occlusion; 0 = open, 1 = fully occluded.",
                vec![PortSpec::required("depth", Ch)],
                vec![PortSpec::required("occlusion", Ch)],
                vec![
                    ParamSpec::positive(
                        "radius_pct",
                        ssao_defaults.radius_pct,
                        Some(100.0),
                        0.1,
                        "sampling radius in percent of the image height",
                    ),
                    ParamSpec::integer(
                        "samples",
                        ssao_defaults.samples.into(),
                        1,
                        Some(1024),
                        "samples per pixel",
                    ),
                    ParamSpec::number(
                        "bias",
                        ssao_defaults.bias,
                        Some(0.0),
                        Some(1.0),
                        0.005,
                        "depth tolerance relative to the radius",
                    ),
                    ParamSpec::integer("seed", ssao_defaults.seed, 0, None, "kernel seed"),
                    ParamSpec::number(
                        "strength",
                        ssao_defaults.strength,
                        Some(0.0),
                        Some(4.0),
                        0.05,
                        "occlusion gain",
                    ),
                ],
            ),
            ssao,
        ),
        (
            spec(
                "ssdd",
                "Screen-space depth darkening.",
                vec![PortSpec::required("depth", Ch), PortSpec::required("image", Im)],
                vec![PortSpec::required("image", Im)],
                vec![
                    ParamSpec::positive("sigma", 4.0, Some(64.0), 0.5, "blur radius in pixels"),
                    ParamSpec::number("lambda", 1.0, Some(0.0), Some(20.0), 0.1, "darkening strength"),
                ],
            ),
            ssdd,
        ),
        (
            spec(
                "ssdof",
                "Screen-space depth of field.",
                vec![PortSpec::required("image", Im), PortSpec::required("depth", Ch)],
                vec![PortSpec::required("image", Im)],
                vec![
                    ParamSpec::positive("focal_depth", 1.0, None, 0.01, "in-focus distance in world units"),
                    ParamSpec::number(
                        "aperture",
                        4.0,
                        Some(0.0),
                        Some(64.0),
                        0.1,
                        "blur growth away from the focal depth",
                    ),
                    ParamSpec::number(
                        "max_radius",
                        8.0,
                        Some(0.0),
                        Some(32.0),
                        0.5,
                        "largest blur radius in pixels",
                    ),
                ],
            ),
            ssdof,
        ),
        (
            spec(
                "ibs",
                "Image-based silhouettes from depth discontinuities.",
                vec![PortSpec::required("depth", Ch)],
                vec![PortSpec::required("mask", Ch)],
                vec![
                    ParamSpec::positive(
                        "threshold",
                        0.05,
                        Some(1.0),
                        0.005,
                        "normalized depth jump that counts as an edge",
                    ),
                    ParamSpec::number(
                        "halfwidth",
                        1.0,
                        Some(0.0),
                        Some(16.0),
                        0.5,
                        "line half-width in pixels",
                    ),
                ],
            ),
            ibs,
        ),
        (
            spec(
                "fxaa",
                "Fast approximate anti-aliasing.",
                vec![PortSpec::required("image", Im)],
                vec![PortSpec::required("image", Im)],
                vec![
                    ParamSpec::number(
                        "edge_threshold",
                        shortest(fxaa_defaults.edge_threshold),
                        Some(0.0),
                        Some(1.0),
                        0.005,
                        "relative local contrast needed to process a pixel",
                    ),
                    ParamSpec::number(
                        "edge_threshold_min",
                        shortest(fxaa_defaults.edge_threshold_min),
                        Some(0.0),
                        Some(1.0),
                        0.001,
                        "absolute contrast below which dark areas are skipped",
                    ),
                    ParamSpec::number(
                        "subpixel",
                        shortest(fxaa_defaults.subpixel),
                        Some(0.0),
                        Some(1.0),
                        0.05,
                        "sub-pixel aliasing removal",
                    ),
                ],
            ),
            fxaa,
        ),
        (
            spec(
                "modulate",
                "Applies an occlusion or edge mask to an image.",
                vec![PortSpec::required("image", Im), PortSpec::required("mask", Ch)],
                vec![PortSpec::required("image", Im)],
                vec![
                    ParamSpec {
                        name: "mode".into(),
                        kind: ParamKind::Choice {
                            options: vec!["multiply-darken".into(), "draw-color".into()],
                        },
                        default: json!("multiply-darken"),
                        description: "darken by the mask, or blend towards `color`".into(),
                        port: None,
                    },
                    ParamSpec {
                        name: "color".into(),
                        kind: ParamKind::Color,
                        default: json!([0.0, 0.0, 0.0]),
                        description: "color used by draw-color".into(),
                        port: None,
                    },
                ],
            ),
            modulate,
        ),
    ]
}

fn source(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let index = args.integer("input")? as usize;
    let name = args.text("channel")?;
    let gbuffer = args.gbuffers().get(index).ok_or_else(|| PipelineError::MissingInput {
        node: args.node().to_owned(),
        index,
        available: args.gbuffers().len(),
    })?;
    let missing = || PipelineError::MissingChannel {
        node: args.node().to_owned(),
        channel: name.clone(),
    };
    let channel = gbuffer.channel(&name).map_err(|_| missing())?;
    let [plane] = channel.planes() else {
        return Err(args.fail(format!(
            "channel `{name}` has {} components; select a scalar channel",
            channel.planes().len()
        )));
    };
    let camera = Some(Arc::new(*gbuffer.camera()));
    let (lo, hi) = plane.finite_range().map_or((0.0, 1.0), |(a, b)| (a as f64, b as f64));
    Ok(outputs([
        ("gbuffer", Value::Gbuffer(gbuffer.clone())),
        (
            "depth",
            Value::Channel(ChannelValue {
                plane: Arc::new(gbuffer.depth().clone()),
                camera: camera.clone(),
            }),
        ),
        (
            "channel",
            Value::Channel(ChannelValue {
                plane: Arc::new(plane.clone()),
                camera,
            }),
        ),
        ("min", Value::Number(lo)),
        ("max", Value::Number(hi)),
    ]))
}

fn color_map(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let scalar = args.channel("scalar")?;
    let map = args.colormap("map")?;
    let range = (args.number("lo")?, args.number("hi")?);
    let image = passes::color_map(&scalar.plane, range, &map).map_err(pass_err(args))?;
    Ok(outputs([("image", Value::Image(Arc::new(image)))]))
}

fn composite(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let mut layers = Vec::new();
    for suffix in ["a", "b", "c", "d"] {
        let (dp, ip) = (format!("depth_{suffix}"), format!("image_{suffix}"));
        match (args.input(&dp), args.input(&ip)) {
            (None, None) if suffix != "a" => continue,
            _ => layers.push((args.channel(&dp)?, args.image(&ip)?)),
        }
    }
    let refs: Vec<(&Plane, &RgbaImage)> = layers.iter().map(|(d, i)| (&*d.plane, *i)).collect();
    let (depth, image) = passes::composite(&refs).map_err(pass_err(args))?;
    Ok(outputs([
        ("depth", channel_like(layers[0].0, depth)),
        ("image", Value::Image(Arc::new(image))),
    ]))
}

fn ssao(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let depth = args.channel("depth")?;
    let camera = depth
        .camera
        .as_ref()
        .ok_or_else(|| args.fail("the depth channel carries no camera"))?;
    let params = SsaoParams {
        radius_pct: args.number("radius_pct")?,
        samples: args.integer("samples")? as u32,
        bias: args.number("bias")?,
        seed: args.integer("seed")?,
        strength: args.number("strength")?,
    };
    let ao = passes::ssao(&depth.plane, camera, &params).map_err(pass_err(args))?;
    Ok(outputs([("occlusion", channel_like(depth, ao))]))
}

fn ssdd(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let depth = args.channel("depth")?;
    let image = args.image("image")?;
    let out =
        passes::ssdd(&depth.plane, image, args.number("sigma")?, args.number("lambda")?).map_err(pass_err(args))?;
    Ok(outputs([("image", Value::Image(Arc::new(out)))]))
}

fn ssdof(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let image = args.image("image")?;
    let depth = args.channel("depth")?;
    let out = passes::ssdof(
        image,
        &depth.plane,
        args.number("focal_depth")?,
        args.number("aperture")?,
        args.number("max_radius")?,
    )
    .map_err(pass_err(args))?;
    Ok(outputs([("image", Value::Image(Arc::new(out)))]))
}

fn ibs(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let depth = args.channel("depth")?;
    let mask =
        passes::ibs(&depth.plane, args.number("threshold")?, args.number("halfwidth")?).map_err(pass_err(args))?;
    Ok(outputs([("mask", channel_like(depth, mask))]))
}

fn fxaa(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let image = args.image("image")?;
    let params = FxaaParams {
        edge_threshold: args.number("edge_threshold")? as f32,
        edge_threshold_min: args.number("edge_threshold_min")? as f32,
        subpixel: args.number("subpixel")? as f32,
    };
    let out = passes::fxaa(image, &params).map_err(pass_err(args))?;
    Ok(outputs([("image", Value::Image(Arc::new(out)))]))
}

fn modulate(args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
    let image = args.image("image")?;
    let mask = args.channel("mask")?;
    let mode = match args.text("mode")?.as_str() {
        "draw-color" => {
            let c: [f32; 3] = serde_json::from_value(args.param("color")?).expect("validated color");
            ModulateMode::DrawColor { color: c }
        }
        _ => ModulateMode::MultiplyDarken,
    };
    let out = passes::modulate(image, &mask.plane, mode).map_err(pass_err(args))?;
    Ok(outputs([("image", Value::Image(Arc::new(out)))]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_order_and_names() {
        let r = Registry::standard();
        let names: Vec<_> = r.names().collect();
        assert_eq!(
            names,
            [
                "source",
                "color_map",
                "composite",
                "ssao",
                "ssdd",
                "ssdof",
                "ibs",
                "fxaa",
                "modulate"
            ]
        );
    }

    #[test]
    fn defaults_validate() {
        let r = Registry::standard();
        for name in r.names() {
            for p in &r.get(name).unwrap().spec().params {
                assert_eq!(p.validate(&p.default).as_ref(), Ok(&p.default), "{name}.{}", p.name);
            }
        }
    }

    #[test]
    fn number_validation() {
        let r = Registry::standard();
        let ssao = r.get("ssao").unwrap().spec();
        let samples = ssao.param("samples").unwrap();
        assert!(samples.validate(&json!(0)).is_err());
        assert!(samples.validate(&json!(2.5)).is_err());
        assert_eq!(samples.validate(&json!(64.0)), Ok(json!(64)));
        let radius = ssao.param("radius_pct").unwrap();
        assert!(radius.validate(&json!(0.0)).is_err());
        assert!(radius.validate(&json!("3")).is_err());
        assert_eq!(radius.validate(&json!(3)), Ok(json!(3.0)));
    }

    #[test]
    fn params_become_ports() {
        let r = Registry::standard();
        let cm = r.get("color_map").unwrap().spec();
        assert_eq!(cm.input("lo"), Some((PortType::Number, true)));
        assert_eq!(cm.input("map"), Some((PortType::Colormap, true)));
        assert_eq!(cm.input("scalar"), Some((PortType::Channel, false)));
        let src = r.get("source").unwrap().spec();
        assert_eq!(src.input("channel"), None);
    }

    #[test]
    fn registry_json_lists_ssao_radius() {
        let j = Registry::standard().to_json();
        let ssao = &j["filters"][3];
        assert_eq!(ssao["name"], "ssao");
        let radius = &ssao["params"][0];
        assert_eq!(radius["name"], "radius_pct");
        assert_eq!(radius["type"], "number");
        assert_eq!(radius["default"], 1.0);
        assert_eq!(radius["min"], 0.0);
        assert_eq!(radius["max"], 100.0);
        assert_eq!(radius["exclusive_min"], true);
    }
}
