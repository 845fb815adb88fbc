//! One request, end to end: pick samples from a database, run a pipeline on
//! them and encode the sink's value. The CLI and the HTTP service both go
//! through [`execute`], so equal requests produce equal bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::cinema::preview::{encode_png, preview_image};
use crate::cinema::{gbuf, read_database, CinemaDatabase, CinemaError, Constraint, INDEX_FILE};
use crate::imaging::{Channel, GBuffer};
use crate::pipeline::{Endpoint, Pipeline, PipelineError, Registry, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Png8,
    Gbuf,
}

impl OutputFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            OutputFormat::Png8 => "image/png",
            OutputFormat::Gbuf => "application/octet-stream",
        }
    }
}

/// Exact axis values naming one sample.
pub type Selector = IndexMap<String, f64>;

/// One selector, or several for pipelines that combine samples
/// (`source.input` indexes this list).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    One(Selector),
    Many(Vec<Selector>),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::One(Selector::new())
    }
}

impl Selection {
    pub fn selectors(&self) -> &[Selector] {
        match self {
            Selection::One(s) => std::slice::from_ref(s),
            Selection::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub database: String,
    #[serde(default)]
    pub select: Selection,
    pub pipeline: Json,
    /// `node:port`
    pub sink: String,
    #[serde(default)]
    pub format: OutputFormat,
    /// Value range for channel previews; defaults to the finite min/max.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Database(#[from] CinemaError),
}

impl SessionError {
    /// HTTP status: 400 malformed or invalid pipeline, 404 unknown database or
    /// sample, 422 a valid graph that cannot run, 500 unreadable data.
    pub fn status(&self) -> u16 {
        match self {
            SessionError::BadRequest(_) => 400,
            SessionError::NotFound(_) => 404,
            SessionError::Pipeline(e) if e.is_execution() => 422,
            SessionError::Pipeline(_) => 400,
            SessionError::Database(_) => 500,
        }
    }

    /// Process exit code: 2 input or parse, 3 pipeline, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::BadRequest(_) | SessionError::NotFound(_) => 2,
            SessionError::Pipeline(_) => 3,
            SessionError::Database(CinemaError::Io { .. }) => 4,
            SessionError::Database(_) => 2,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            SessionError::BadRequest(_) => "bad_request",
            SessionError::NotFound(_) => "not_found",
            SessionError::Pipeline(e) => e.code(),
            SessionError::Database(_) => "database_error",
        }
    }

    pub fn details(&self) -> Json {
        match self {
            SessionError::Pipeline(e) => e.details(),
            _ => json!({}),
        }
    }

    /// `{code, message, details}`
    pub fn to_json(&self) -> Json {
        json!({ "code": self.code(), "message": self.to_string(), "details": self.details() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub bytes: Vec<u8>,
    pub content_type: &'static str,
}

/// Database ids are plain directory names below the root.
fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && !id.contains(['/', '\\']) && Path::new(id).components().count() == 1
}

/// Ids of the databases directly below `root`, sorted.
pub fn list_databases(root: &Path) -> io::Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        let Ok(name) = entry.file_name().into_string() else {
            continue;
        };
        if valid_id(&name) && entry.path().join(INDEX_FILE).is_file() {
            ids.push(name);
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn database_path(root: &Path, id: &str) -> Result<PathBuf, SessionError> {
    let path = root.join(id);
    if valid_id(id) && path.join(INDEX_FILE).is_file() {
        Ok(path)
    } else {
        Err(SessionError::NotFound(format!("unknown database `{id}`")))
    }
}

pub fn open_database(root: &Path, id: &str) -> Result<CinemaDatabase, SessionError> {
    Ok(read_database(&database_path(root, id)?)?)
}

/// `{id, axes: [{name, values}], rows}` with each axis' distinct values ascending.
pub fn index_json(id: &str, db: &CinemaDatabase) -> Json {
    let axes: Vec<Json> = db
        .axes()
        .iter()
        .map(|a| json!({ "name": a, "values": db.distinct_values(a).expect("own axis") }))
        .collect();
    json!({ "id": id, "axes": axes, "rows": db.len() })
}

/// Row of the first sample matching `selector` exactly. An empty selector picks the first row.
pub fn select_row(db: &CinemaDatabase, selector: &Selector) -> Result<usize, SessionError> {
    let predicate = selector
        .iter()
        .map(|(k, v)| (k.clone(), Constraint::Exact(*v)))
        .collect();
    let rows = db.query_indices(&predicate).map_err(|e| match e {
        CinemaError::UnknownAxis(a) => SessionError::NotFound(format!("unknown axis `{a}`")),
        other => other.into(),
    })?;
    rows.first().copied().ok_or_else(|| {
        let pairs: Vec<String> = selector.iter().map(|(k, v)| format!("{k}={v}")).collect();
        SessionError::NotFound(format!("no sample matches {}", pairs.join(",")))
    })
}

fn encode(value: &Value, request: &SessionRequest, context: &[Arc<GBuffer>]) -> Result<Vec<u8>, SessionError> {
    let unsupported = |what: &str| {
        SessionError::BadRequest(format!(
            "sink `{}` is a {what}, which cannot be encoded as {:?}",
            request.sink, request.format
        ))
    };
    match (value, request.format) {
        (Value::Image(img), OutputFormat::Png8) => Ok(encode_png(img)),
        (Value::Channel(ch), OutputFormat::Png8) => {
            let range = match request.range {
                Some([lo, hi]) => (lo, hi),
                None => ch
                    .plane
                    .finite_range()
                    .map_or((0.0, 1.0), |(lo, hi)| (lo as f64, hi as f64)),
            };
            Ok(encode_png(&preview_image(&ch.plane, range)))
        }
        (Value::Gbuffer(g), OutputFormat::Gbuf) => Ok(gbuf::encode(g)),
        (Value::Channel(ch), OutputFormat::Gbuf) => {
            let first = &context[0];
            let mut g = GBuffer::new(*first.camera(), first.depth().clone()).map_err(CinemaError::from)?;
            g.insert("result", Channel::scalar(ch.plane.as_ref().clone()))
                .map_err(CinemaError::from)?;
            Ok(gbuf::encode(&g))
        }
        (v, _) => Err(unsupported(&v.port_type().to_string())),
    }
}

/// Runs `request` against an opened database; `request.database` is not consulted.
pub fn execute(
    db: &CinemaDatabase,
    request: &SessionRequest,
    registry: Arc<Registry>,
) -> Result<Rendered, SessionError> {
    let sink = Endpoint::parse(&request.sink)
        .ok_or_else(|| SessionError::BadRequest(format!("sink `{}` is not of the form node:port", request.sink)))?;
    if let Some([lo, hi]) = request.range {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SessionError::BadRequest(format!(
                "range [{lo}, {hi}] must be finite and increasing"
            )));
        }
    }
    let mut pipeline = Pipeline::from_json(&request.pipeline, registry)?;
    let selectors = request.select.selectors();
    if selectors.is_empty() {
        return Err(SessionError::BadRequest("select must name at least one sample".into()));
    }
    let mut context = Vec::with_capacity(selectors.len());
    for selector in selectors {
        let row = select_row(db, selector)?;
        context.push(Arc::new(db.load_gbuffer(row)?));
    }
    let value = pipeline.execute(&sink, &context)?;
    Ok(Rendered {
        bytes: encode(&value, request, &context)?,
        content_type: request.format.content_type(),
    })
}
