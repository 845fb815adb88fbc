//! Bounding volume hierarchy built with a binned surface-area heuristic.

use super::{intersect_triangle, Aabb, GeometryError, Hit, Ray, TriangleMesh};
use crate::math::Vec3;
use crate::num::Real;

const BIN_COUNT: usize = 16;
const MAX_LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior {
        left: u32,
        right: u32,
    },
    /// Range into [`Bvh::order`].
    Leaf {
        start: u32,
        count: u32,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct BvhNode<T = f64> {
    pub bounds: Aabb<T>,
    pub kind: NodeKind,
}

#[derive(Clone, Debug)]
pub struct Bvh<T = f64> {
    nodes: Vec<BvhNode<T>>,
    order: Vec<u32>,
}

struct PrimInfo<T> {
    bounds: Aabb<T>,
    centroid: Vec3<T>,
}

impl<T: Real> Bvh<T> {
    pub fn build(mesh: &TriangleMesh<T>) -> Result<Self, GeometryError> {
        let count = mesh.triangles().len();
        if count == 0 {
            return Err(GeometryError::EmptyMesh);
        }
        let prims: Vec<PrimInfo<T>> = (0..count)
            .map(|i| {
                let bounds = mesh.triangle_vertices(i).iter().fold(Aabb::empty(), |b, &v| b.grow(v));
                PrimInfo {
                    centroid: bounds.centroid(),
                    bounds,
                }
            })
            .collect();
        let mut bvh = Self {
            nodes: Vec::with_capacity(2 * count / MAX_LEAF_SIZE + 1),
            order: (0..count as u32).collect(),
        };
        bvh.build_range(&prims, 0, count);
        Ok(bvh)
    }

    pub fn nodes(&self) -> &[BvhNode<T>] {
        &self.nodes
    }

    /// Triangle permutation referenced by leaf ranges.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn root_bounds(&self) -> Aabb<T> {
        self.nodes[0].bounds
    }

    pub fn leaf_triangles(&self, node: &BvhNode<T>) -> &[u32] {
        match node.kind {
            NodeKind::Leaf { start, count } => &self.order[start as usize..(start + count) as usize],
            NodeKind::Interior { .. } => &[],
        }
    }

    fn build_range(&mut self, prims: &[PrimInfo<T>], start: usize, end: usize) -> u32 {
        let index = self.nodes.len() as u32;
        let ids = &self.order[start..end];
        let bounds = ids
            .iter()
            .fold(Aabb::empty(), |b, &i| b.union(prims[i as usize].bounds));
        self.nodes.push(BvhNode {
            bounds,
            kind: NodeKind::Leaf {
                start: start as u32,
                count: (end - start) as u32,
            },
        });
        let count = end - start;
        if count <= MAX_LEAF_SIZE {
            return index;
        }

        let centroid_bounds = ids
            .iter()
            .fold(Aabb::empty(), |b, &i| b.grow(prims[i as usize].centroid));
        let extent = centroid_bounds.diagonal();
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };

        let mid = if extent[axis] <= T::zero() {
            // Coincident centroids: SAH cannot separate them.
            start + count / 2
        } else {
            self.sah_split(prims, start, end, axis, &centroid_bounds)
                .unwrap_or(start + count / 2)
        };

        let left = self.build_range(prims, start, mid);
        let right = self.build_range(prims, mid, end);
        self.nodes[index as usize].kind = NodeKind::Interior { left, right };
        index
    }

    /// Partitions `order[start..end]` at the cheapest bin boundary.
    fn sah_split(
        &mut self,
        prims: &[PrimInfo<T>],
        start: usize,
        end: usize,
        axis: usize,
        centroid_bounds: &Aabb<T>,
    ) -> Option<usize> {
        let lo = centroid_bounds.min[axis];
        let scale = T::lit(BIN_COUNT as f64) / (centroid_bounds.max[axis] - lo);
        let bin_of = |c: Vec3<T>| -> usize {
            let b = ((c[axis] - lo) * scale).to_usize().unwrap_or(0);
            b.min(BIN_COUNT - 1)
        };

        let mut bin_bounds = [Aabb::<T>::empty(); BIN_COUNT];
        let mut bin_counts = [0usize; BIN_COUNT];
        for &i in &self.order[start..end] {
            let p = &prims[i as usize];
            let b = bin_of(p.centroid);
            bin_counts[b] += 1;
            bin_bounds[b] = bin_bounds[b].union(p.bounds);
        }

        // Sweep from the right to accumulate suffix areas.
        let mut right_area = [0.0f64; BIN_COUNT];
        let mut right_count = [0usize; BIN_COUNT];
        let mut acc = Aabb::<T>::empty();
        let mut n = 0;
        for b in (1..BIN_COUNT).rev() {
            acc = acc.union(bin_bounds[b]);
            n += bin_counts[b];
            right_area[b] = acc.surface_area().to_f64_lossy();
            right_count[b] = n;
        }

        let mut best: Option<(f64, usize)> = None;
        let mut acc = Aabb::<T>::empty();
        let mut n = 0;
        for split in 1..BIN_COUNT {
            acc = acc.union(bin_bounds[split - 1]);
            n += bin_counts[split - 1];
            if n == 0 || right_count[split] == 0 {
                continue;
            }
            let cost = acc.surface_area().to_f64_lossy() * n as f64 + right_area[split] * right_count[split] as f64;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, split));
            }
        }

        let (_, split) = best?;

        let slice = &mut self.order[start..end];
        let mut left = 0;
        for i in 0..slice.len() {
            if bin_of(prims[slice[i] as usize].centroid) < split {
                slice.swap(i, left);
                left += 1;
            }
        }
        Some(start + left)
    }

    /// Nearest hit within `[ray.t_min, ray.t_max]`; equal distances resolve to the lowest triangle id.
    pub fn intersect(&self, mesh: &TriangleMesh<T>, ray: &Ray<T>) -> Option<Hit<T>> {
        let inv_dir = Vec3::new(
            T::one() / ray.direction.x,
            T::one() / ray.direction.y,
            T::one() / ray.direction.z,
        );
        let mut best: Option<Hit<T>> = None;
        let mut t_far = ray.t_max;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);

        while let Some(index) = stack.pop() {
            let node = &self.nodes[index as usize];
            if node
                .bounds
                .hit_distance(ray.origin, inv_dir, ray.t_min, t_far)
                .is_none()
            {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &id in &self.order[start as usize..(start + count) as usize] {
                        let tri = mesh.triangle_vertices(id as usize);
                        if let Some((t, u, v)) = intersect_triangle(ray, &tri, t_far) {
                            let hit = Hit {
                                t,
                                triangle_id: id,
                                u,
                                v,
                            };
                            if best.as_ref().is_none_or(|b| hit.closer_than(b)) {
                                t_far = t;
                                best = Some(hit);
                            }
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    let l = self.nodes[left as usize]
                        .bounds
                        .hit_distance(ray.origin, inv_dir, ray.t_min, t_far);
                    let r = self.nodes[right as usize]
                        .bounds
                        .hit_distance(ray.origin, inv_dir, ray.t_min, t_far);
                    match (l, r) {
                        (Some(tl), Some(tr)) => {
                            // Push the farther child first so the nearer one is visited next.
                            if tl <= tr {
                                stack.push(right);
                                stack.push(left);
                            } else {
                                stack.push(left);
                                stack.push(right);
                            }
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }
}
