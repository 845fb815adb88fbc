//! Pipeline JSON, schema version 1:
//!
//! ```json
//! {"schema": 1,
//!  "nodes": [{"id": "src", "type": "source", "params": {"channel": "depth"}}],
//!  "edges": [{"from": ["src", "depth"], "to": ["ao", "depth"]}]}
//! ```
//!
//! `params` may be partial or absent on input; output always lists every
//! parameter. Unknown keys are rejected. Errors carry a JSON pointer to the
//! offending element.

use std::sync::Arc;

use serde_json::{json, Map, Value as Json};

use super::{Endpoint, Pipeline, PipelineError, Registry};

pub const SCHEMA_VERSION: u64 = 1;

/// The stock demo: depth color mapping, ambient occlusion, silhouettes and anti-aliasing.
pub const DEMO_PIPELINE: &str = include_str!("../../pipelines/demo.json");

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> PipelineError {
    PipelineError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Escapes a key for use as a JSON-pointer segment.
fn segment(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn object<'a>(v: &'a Json, pointer: &str, allowed: &[&str]) -> Result<&'a Map<String, Json>, PipelineError> {
    let map = v.as_object().ok_or_else(|| schema(pointer, "expected an object"))?;
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(schema(
            format!("{pointer}/{}", segment(k)),
            format!("unexpected key `{k}`"),
        ));
    }
    Ok(map)
}

fn string<'a>(map: &'a Map<String, Json>, key: &str, pointer: &str) -> Result<&'a str, PipelineError> {
    let p = format!("{pointer}/{key}");
    match map.get(key) {
        Some(Json::String(s)) => Ok(s),
        Some(_) => Err(schema(p, "expected a string")),
        None => Err(schema(p, "missing")),
    }
}

fn endpoint(map: &Map<String, Json>, key: &str, pointer: &str) -> Result<Endpoint, PipelineError> {
    let p = format!("{pointer}/{key}");
    let pair = match map.get(key) {
        Some(Json::Array(a)) if a.len() == 2 => a,
        Some(_) => return Err(schema(p, "expected [node, port]")),
        None => return Err(schema(p, "missing")),
    };
    let part = |i: usize| {
        pair[i]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| schema(format!("{p}/{i}"), "expected a string"))
    };
    Ok(Endpoint::new(part(0)?, part(1)?))
}

impl Pipeline {
    pub fn to_json(&self) -> Json {
        let nodes: Vec<Json> = self
            .nodes()
            .map(|n| json!({ "id": n.id(), "type": n.filter_type(), "params": n.params() }))
            .collect();
        let edges: Vec<Json> = self.edges().map(|e| json!({ "from": e.from, "to": e.to })).collect();
        json!({ "schema": SCHEMA_VERSION, "nodes": nodes, "edges": edges })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("pipeline JSON is always serializable")
    }

    pub fn from_json(value: &Json, registry: Arc<Registry>) -> Result<Self, PipelineError> {
        let top = object(value, "", &["schema", "nodes", "edges"])?;
        match top.get("schema") {
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(_) => {
                return Err(schema(
                    "/schema",
                    format!("unsupported schema version, expected {SCHEMA_VERSION}"),
                ))
            }
            None => return Err(schema("/schema", "missing")),
        }
        let empty = Vec::new();
        let nodes = match top.get("nodes") {
            Some(Json::Array(a)) => a,
            Some(_) => return Err(schema("/nodes", "expected an array")),
            None => return Err(schema("/nodes", "missing")),
        };
        let edges = match top.get("edges") {
            Some(Json::Array(a)) => a,
            Some(_) => return Err(schema("/edges", "expected an array")),
            None => &empty,
        };

        let mut pipeline = Pipeline::new(registry);
        for (i, node) in nodes.iter().enumerate() {
            let p = format!("/nodes/{i}");
            let map = object(node, &p, &["id", "type", "params"])?;
            let id = string(map, "id", &p)?;
            let ty = string(map, "type", &p)?;
            let empty_params = Map::new();
            let params = match map.get("params") {
                Some(Json::Object(m)) => m,
                Some(_) => return Err(schema(format!("{p}/params"), "expected an object")),
                None => &empty_params,
            };
            pipeline.add_node_with(id, ty, params).map_err(|e| {
                let at = match &e {
                    PipelineError::UnknownFilter(_) => format!("{p}/type"),
                    PipelineError::DuplicateNode(_) | PipelineError::EmptyNodeId => format!("{p}/id"),
                    PipelineError::UnknownParam { param, .. } | PipelineError::InvalidParam { param, .. } => {
                        format!("{p}/params/{}", segment(param))
                    }
                    _ => p.clone(),
                };
                e.at(at)
            })?;
        }
        for (i, edge) in edges.iter().enumerate() {
            let p = format!("/edges/{i}");
            let map = object(edge, &p, &["from", "to"])?;
            let from = endpoint(map, "from", &p)?;
            let to = endpoint(map, "to", &p)?;
            if let Some(prev) = pipeline.source_of(&to) {
                return Err(schema(
                    format!("{p}/to"),
                    format!("input {to} is already fed by {prev}"),
                ));
            }
            pipeline.connect(from, to).map_err(|e| e.at(p))?;
        }
        Ok(pipeline)
    }

    pub fn from_slice(bytes: &[u8], registry: Arc<Registry>) -> Result<Self, PipelineError> {
        let value: Json = serde_json::from_slice(bytes).map_err(|e| schema("", format!("malformed JSON: {e}")))?;
        Self::from_json(&value, registry)
    }

    /// The stock demo pipeline on the standard registry.
    pub fn demo() -> Self {
        Self::from_slice(DEMO_PIPELINE.as_bytes(), Arc::new(Registry::standard())).expect("demo pipeline is valid")
    }
}
