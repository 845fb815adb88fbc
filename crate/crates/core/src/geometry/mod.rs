//! Triangle meshes and ray intersection.
//!
//! A [`TriangleMesh`] is an indexed triangle surface carrying named per-vertex
//! scalar fields. [`Bvh`] accelerates nearest-hit queries against it.

mod bvh;
pub mod obj;
pub mod shapes;

use std::collections::BTreeMap;

use thiserror::Error;

pub use self::bvh::{Bvh, BvhNode, NodeKind};
use crate::math::Vec3;
use crate::num::Real;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { triangle: usize, index: u32, count: usize },
    #[error("scalar field `{name}` has {len} values, expected {expected}")]
    FieldLength { name: String, len: usize, expected: usize },
    #[error("unknown scalar field `{0}`")]
    UnknownField(String),
    #[error("invalid ray: {0}")]
    InvalidRay(&'static str),
    #[error("{path}:{line}: {message}")]
    Obj { path: String, line: usize, message: String },
    #[error("scalar sidecar: {0}")]
    Sidecar(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug)]
pub struct TriangleMesh<T = f64> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[u32; 3]>,
    scalar_fields: BTreeMap<String, Vec<T>>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        for (triangle, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle,
                    index,
                    count: vertices.len(),
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
            scalar_fields: BTreeMap::new(),
        })
    }

    /// Attaches (or replaces) a per-vertex scalar field.
    pub fn with_field(mut self, name: impl Into<String>, values: Vec<T>) -> Result<Self, GeometryError> {
        self.add_field(name, values)?;
        Ok(self)
    }

    pub fn add_field(&mut self, name: impl Into<String>, values: Vec<T>) -> Result<(), GeometryError> {
        let name = name.into();
        if values.len() != self.vertices.len() {
            return Err(GeometryError::FieldLength {
                name,
                len: values.len(),
                expected: self.vertices.len(),
            });
        }
        self.scalar_fields.insert(name, values);
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn field(&self, name: &str) -> Result<&[T], GeometryError> {
        self.scalar_fields
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| GeometryError::UnknownField(name.to_owned()))
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.scalar_fields.keys().map(String::as_str)
    }

    #[inline]
    pub fn triangle_vertices(&self, id: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[id];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized geometric normal, following the vertex winding.
    pub fn face_normal(&self, id: usize) -> Vec3<T> {
        let [a, b, c] = self.triangle_vertices(id);
        (b - a).cross(c - a)
    }

    pub fn bounds(&self) -> Aabb<T> {
        self.vertices.iter().fold(Aabb::empty(), |acc, &v| acc.grow(v))
    }

    /// Barycentric interpolation of a scalar field at a hit.
    ///
    /// `u` weights the second vertex, `v` the third and `1 - u - v` the first.
    pub fn interpolate_scalar(&self, hit: &Hit<T>, field: &str) -> Result<T, GeometryError> {
        let values = self.field(field)?;
        let [a, b, c] = self.triangles[hit.triangle_id as usize];
        let w = T::one() - hit.u - hit.v;
        Ok(values[a as usize] * w + values[b as usize] * hit.u + values[c as usize] * hit.v)
    }

    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            triangles: self.triangles.clone(),
            scalar_fields: self
                .scalar_fields
                .iter()
                .map(|(k, vals)| (k.clone(), vals.iter().map(|&x| U::lit(x.to_f64_lossy())).collect()))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray<T = f64> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
    pub t_min: T,
    pub t_max: T,
}

impl<T: Real> Ray<T> {
    /// A ray over `[0, +inf)`. `direction` must already be unit length.
    pub fn new(origin: Vec3<T>, direction: Vec3<T>) -> Result<Self, GeometryError> {
        Self::with_range(origin, direction, T::zero(), T::infinity())
    }

    pub fn with_range(origin: Vec3<T>, direction: Vec3<T>, t_min: T, t_max: T) -> Result<Self, GeometryError> {
        if (direction.length() - T::one()).abs() > T::lit(1e-6) {
            return Err(GeometryError::InvalidRay("direction is not unit length"));
        }
        if !(t_min >= T::zero()) {
            return Err(GeometryError::InvalidRay("t_min must be non-negative"));
        }
        if !(t_min < t_max) {
            return Err(GeometryError::InvalidRay("t_min must be below t_max"));
        }
        Ok(Self {
            origin,
            direction,
            t_min,
            t_max,
        })
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit<T = f64> {
    pub t: T,
    pub triangle_id: u32,
    pub u: T,
    pub v: T,
}

impl<T: Real> Hit<T> {
    /// Strict "better than" ordering: nearer wins, equal `t` goes to the lower id.
    #[inline]
    pub fn closer_than(&self, other: &Hit<T>) -> bool {
        self.t < other.t || (self.t == other.t && self.triangle_id < other.triangle_id)
    }
}

/// Möller–Trumbore ray/triangle test. Both faces are reported.
#[inline]
pub fn intersect_triangle<T: Real>(ray: &Ray<T>, tri: &[Vec3<T>; 3], t_max: T) -> Option<(T, T, T)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < T::det_epsilon() {
        return None;
    }
    let inv = T::one() / det;
    let s = ray.origin - tri[0];
    let u = s.dot(p) * inv;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t < ray.t_min || t > t_max {
        return None;
    }
    Some((t, u, v))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T = f64> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn empty() -> Self {
        Self {
            min: Vec3::splat(T::infinity()),
            max: Vec3::splat(T::neg_infinity()),
        }
    }

    pub fn grow(self, p: Vec3<T>) -> Self {
        Self {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    pub fn union(self, o: Self) -> Self {
        Self {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn centroid(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn diagonal(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn surface_area(&self) -> T {
        let d = self.diagonal();
        if d.x < T::zero() {
            return T::zero();
        }
        T::lit(2.0) * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Slab test returning the entry distance when the box overlaps `[t_min, t_max]`.
    #[inline]
    pub fn hit_distance(&self, origin: Vec3<T>, inv_dir: Vec3<T>, t_min: T, t_max: T) -> Option<T> {
        let mut lo = t_min;
        let mut hi = t_max;
        for a in 0..3 {
            let t0 = (self.min[a] - origin[a]) * inv_dir[a];
            let t1 = (self.max[a] - origin[a]) * inv_dir[a];
            let (near, far) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            // NaN (0 * inf) leaves the bound untouched.
            if near > lo {
                lo = near;
            }
            if far < hi {
                hi = far;
            }
        }
        (lo <= hi).then_some(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_z1() -> TriangleMesh<f64> {
        TriangleMesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 1.0),
                Vec3::new(2.0, -1.0, 1.0),
                Vec3::new(-1.0, 2.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_empty_and_bad_indices() {
        assert!(matches!(
            TriangleMesh::<f64>::new(vec![Vec3::zero()], vec![]),
            Err(GeometryError::EmptyMesh)
        ));
        assert!(matches!(
            TriangleMesh::<f64>::new(vec![Vec3::zero(); 3], vec![[0, 1, 3]]),
            Err(GeometryError::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn field_length_checked() {
        let err = tri_z1().with_field("f", vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(
            err,
            GeometryError::FieldLength {
                len: 2,
                expected: 3,
                ..
            }
        ));
    }

    #[test]
    fn axis_aligned_hit_and_miss() {
        let mesh = tri_z1();
        let ray = Ray::new(Vec3::zero(), Vec3::unit_z()).unwrap();
        let (t, _, _) = intersect_triangle(&ray, &mesh.triangle_vertices(0), ray.t_max).unwrap();
        assert_eq!(t, 1.0);
        let shifted: Vec<_> = mesh.vertices().iter().map(|&v| v + Vec3::new(6.0, 0.0, 0.0)).collect();
        let far = TriangleMesh::new(shifted, vec![[0, 1, 2]]).unwrap();
        assert!(intersect_triangle(&ray, &far.triangle_vertices(0), ray.t_max).is_none());
    }

    #[test]
    fn backfaces_are_reported() {
        let mesh = tri_z1();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 2.0), -Vec3::unit_z()).unwrap();
        assert!(intersect_triangle(&ray, &mesh.triangle_vertices(0), ray.t_max).is_some());
    }

    #[test]
    fn ray_validation() {
        assert!(Ray::new(Vec3::<f64>::zero(), Vec3::new(1.0, 1.0, 0.0)).is_err());
        assert!(Ray::with_range(Vec3::<f64>::zero(), Vec3::unit_x(), -1.0, 1.0).is_err());
        assert!(Ray::with_range(Vec3::<f64>::zero(), Vec3::unit_x(), 2.0, 1.0).is_err());
    }

    #[test]
    fn scalar_interpolation_cases() {
        let hit = |u, v| Hit {
            t: 1.0,
            triangle_id: 0,
            u,
            v,
        };
        let m = tri_z1().with_field("c", vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(m.interpolate_scalar(&hit(0.2, 0.7), "c").unwrap(), 5.0);
        let m = tri_z1().with_field("s", vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.interpolate_scalar(&hit(1.0, 0.0), "s").unwrap(), 1.0);
        let m = tri_z1().with_field("w", vec![0.0, 0.0, 3.0]).unwrap();
        let third = 1.0 / 3.0;
        approx::assert_abs_diff_eq!(
            m.interpolate_scalar(&hit(third, third), "w").unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            m.interpolate_scalar(&hit(0.0, 0.0), "nope"),
            Err(GeometryError::UnknownField(_))
        ));
    }
}
