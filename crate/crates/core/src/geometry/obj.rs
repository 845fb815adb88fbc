//! Mesh ingestion: a Wavefront OBJ subset plus a JSON sidecar for scalar fields.
//!
//! Accepted OBJ statements:
//!
//! * `v x y z [w]`: a vertex; `w` is ignored.
//! * `f a b c ...`: a face of three or more vertex references. Each reference is
//!   `i`, `i/t`, `i//n` or `i/t/n`; only `i` is used. Indices are 1-based and
//!   negative indices count back from the most recent vertex. Polygons with more
//!   than three corners are fan-triangulated around their first corner.
//! * `#` starts a comment. Every other statement (`vn`, `vt`, `o`, `g`, `s`,
//!   `usemtl`, `mtllib`, ...) is ignored.
//!
//! The sidecar is `{"fields": {"<name>": [v0, v1, ...]}}` with one value per
//! OBJ vertex, in file order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{GeometryError, TriangleMesh};
use crate::math::Vec3;
use crate::num::Real;

pub fn parse_obj<T: Real>(text: &str, source: &str) -> Result<TriangleMesh<T>, GeometryError> {
    let err = |line: usize, message: String| GeometryError::Obj {
        path: source.to_owned(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| err(line_no, format!("bad coordinate `{t}`: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err(line_no, "vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(T::lit(coords[0]), T::lit(coords[1]), T::lit(coords[2])));
            }
            Some("f") => {
                let corners: Vec<u32> = tokens
                    .map(|t| resolve_index(t, vertices.len()).map_err(|m| err(line_no, m)))
                    .collect::<Result<_, _>>()?;
                if corners.len() < 3 {
                    return Err(err(
                        line_no,
                        format!("face has {} corners, need at least 3", corners.len()),
                    ));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

fn resolve_index(token: &str, vertex_count: usize) -> Result<u32, String> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| format!("bad vertex reference `{token}`"))?;
    let resolved = match i {
        0 => return Err("vertex index 0 is invalid (indices are 1-based)".into()),
        i if i > 0 => i - 1,
        i => vertex_count as i64 + i,
    };
    if resolved < 0 || resolved as usize >= vertex_count {
        return Err(format!("vertex reference `{token}` is out of range"));
    }
    Ok(resolved as u32)
}

pub fn load_obj<T: Real>(path: &Path) -> Result<TriangleMesh<T>, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text, &path.display().to_string())
}

#[derive(Deserialize)]
struct Sidecar {
    fields: BTreeMap<String, Vec<f64>>,
}

/// Attaches every field of a sidecar document to `mesh`.
pub fn apply_fields_json<T: Real>(mesh: &mut TriangleMesh<T>, text: &str) -> Result<(), GeometryError> {
    let sidecar: Sidecar = serde_json::from_str(text).map_err(|e| GeometryError::Sidecar(e.to_string()))?;
    for (name, values) in sidecar.fields {
        mesh.add_field(name, values.into_iter().map(T::lit).collect())?;
    }
    Ok(())
}

pub fn load_fields_json<T: Real>(mesh: &mut TriangleMesh<T>, path: &Path) -> Result<(), GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    apply_fields_json(mesh, &text)
}

/// Serializes vertices and faces. Scalar fields go to [`fields_to_json`].
pub fn to_obj<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(
            out,
            "v {} {} {}",
            v.x.to_f64_lossy(),
            v.y.to_f64_lossy(),
            v.z.to_f64_lossy()
        );
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out
}

pub fn fields_to_json<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let fields: BTreeMap<&str, Vec<f64>> = mesh
        .field_names()
        .map(|name| {
            let values = mesh.field(name).expect("listed field exists");
            (name, values.iter().map(|v| v.to_f64_lossy()).collect())
        })
        .collect();
    serde_json::json!({ "fields": fields }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subset_with_fans_and_negative_indices() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3 4\nf -1 -2 -3\n";
        let mesh: TriangleMesh<f64> = parse_obj(text, "quad.obj").unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3], [3, 2, 1]]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_obj::<f64>("v 0 0 0\nv 1 0 0\nf 1 2 7\n", "bad.obj").unwrap_err();
        assert!(err.to_string().starts_with("bad.obj:3:"), "{err}");
        let err = parse_obj::<f64>("v 0 0\n", "short.obj").unwrap_err();
        assert!(err.to_string().contains(":1:"));
    }

    #[test]
    fn sidecar_roundtrip() {
        let mut mesh = crate::geometry::shapes::icosphere(0);
        let n = mesh.vertices().len();
        mesh.add_field("height", (0..n).map(|i| i as f64 * 0.5).collect())
            .unwrap();
        let obj = to_obj(&mesh);
        let mut back: TriangleMesh<f64> = parse_obj(&obj, "x").unwrap();
        apply_fields_json(&mut back, &fields_to_json(&mesh)).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.field("height").unwrap(), mesh.field("height").unwrap());
    }

    #[test]
    fn sidecar_length_mismatch_rejected() {
        let mut mesh: crate::Mesh = crate::geometry::shapes::icosphere(0);
        let err = apply_fields_json(&mut mesh, r#"{"fields":{"f":[1,2]}}"#).unwrap_err();
        assert!(matches!(err, GeometryError::FieldLength { .. }));
    }
}
