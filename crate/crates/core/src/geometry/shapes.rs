//! Procedural meshes for demos and tests.

use std::collections::HashMap;

use super::TriangleMesh;
use crate::math::Vec3;
use crate::num::Real;

/// Unit sphere approximated by a subdivided icosahedron (`20 * 4^subdivisions` triangles).
pub fn icosphere<T: Real>(subdivisions: u32) -> TriangleMesh<T> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalized();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    TriangleMesh::new(vertices.into_iter().map(|v| v.cast()).collect(), faces).expect("valid icosphere")
}

/// Torus around the y axis with `2 * rings * sides` triangles.
pub fn torus<T: Real>(major: f64, minor: f64, rings: u32, sides: u32) -> TriangleMesh<T> {
    let mut vertices = Vec::with_capacity((rings * sides) as usize);
    for i in 0..rings {
        let u = i as f64 / rings as f64 * std::f64::consts::TAU;
        for j in 0..sides {
            let v = j as f64 / sides as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(
                T::lit(r * u.cos()),
                T::lit(minor * v.sin()),
                T::lit(r * u.sin()),
            ));
        }
    }
    let idx = |i: u32, j: u32| (i % rings) * sides + (j % sides);
    let mut triangles = Vec::with_capacity((2 * rings * sides) as usize);
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("valid torus")
}

/// Two triangles spanning the parallelogram `origin + s*edge_u + t*edge_v`, `s, t ∈ [0,1]`.
pub fn quad<T: Real>(origin: Vec3<T>, edge_u: Vec3<T>, edge_v: Vec3<T>) -> TriangleMesh<T> {
    TriangleMesh::new(
        vec![origin, origin + edge_u, origin + edge_u + edge_v, origin + edge_v],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("valid quad")
}

/// Concatenates meshes. Scalar fields are dropped.
pub fn merge<T: Real>(parts: &[TriangleMesh<T>]) -> TriangleMesh<T> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for part in parts {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(part.vertices());
        triangles.extend(part.triangles().iter().map(|t| t.map(|i| i + base)));
    }
    TriangleMesh::new(vertices, triangles).expect("merged parts are valid")
}
