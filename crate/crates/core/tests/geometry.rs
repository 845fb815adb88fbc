use std::time::Instant;

use darkroom_core::geometry::{Bvh, NodeKind, Ray, TriangleMesh};
use darkroom_core::math::Vec3;
use darkroom_core::Mesh;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut impl Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let l = v.length();
        if l > 1e-3 && l <= 1.0 {
            return v / l;
        }
    }
}

/// Small triangles scattered through a cube of half-width 5.
fn random_mesh(rng: &mut impl Rng, triangles: usize) -> Mesh {
    let mut vertices = Vec::with_capacity(triangles * 3);
    for _ in 0..triangles {
        let c = Vec3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        for _ in 0..3 {
            vertices.push(c + random_unit(rng) * rng.random_range(0.2..1.5));
        }
    }
    let tris = (0..triangles as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    TriangleMesh::new(vertices, tris).unwrap()
}

/// Plane intersection followed by a same-side test on the three edges;
/// deliberately a different formulation from the renderer's.
fn oracle_hit(ray: &Ray<f64>, [a, b, c]: [Vec3<f64>; 3]) -> Option<f64> {
    let n = (b - a).cross(c - a);
    let denom = n.dot(ray.direction);
    if denom.abs() < 1e-12 * n.length() {
        return None;
    }
    let t = n.dot(a - ray.origin) / denom;
    if !(t >= ray.t_min && t <= ray.t_max) {
        return None;
    }
    let p = ray.at(t);
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|&(u, v)| (v - u).cross(p - u).dot(n) >= -1e-12 * n.dot(n));
    inside.then_some(t)
}

fn brute_force(mesh: &Mesh, ray: &Ray<f64>) -> Option<(f64, u32)> {
    let mut best: Option<(f64, u32)> = None;
    for id in 0..mesh.triangles().len() {
        if let Some(t) = oracle_hit(ray, mesh.triangle_vertices(id)) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, id as u32));
            }
        }
    }
    best
}

fn random_ray(rng: &mut impl Rng) -> Ray<f64> {
    let origin = random_unit(rng) * 12.0;
    let aim = Vec3::new(
        rng.random_range(-4.0..4.0),
        rng.random_range(-4.0..4.0),
        rng.random_range(-4.0..4.0),
    );
    Ray::new(origin, (aim - origin).normalized()).unwrap()
}

fn agrees(mesh: &Mesh, bvh: &Bvh<f64>, ray: &Ray<f64>) -> Result<(), String> {
    let got = bvh.intersect(mesh, ray).map(|h| (h.t, h.triangle_id));
    match (got, brute_force(mesh, ray)) {
        (None, None) => Ok(()),
        (Some((t, id)), Some((ot, oid))) if id == oid || ((t - ot) / ot).abs() < 1e-6 => Ok(()),
        (g, o) => Err(format!("bvh {g:?} vs oracle {o:?} for {ray:?}")),
    }
}

#[test]
fn bvh_matches_brute_force_on_1000_rays() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mesh = random_mesh(&mut rng, 500);
    let rays: Vec<_> = (0..1000).map(|_| random_ray(&mut rng)).collect();
    let start = Instant::now();
    let bvh = Bvh::build(&mesh).unwrap();
    let hits = rays.iter().filter(|r| bvh.intersect(&mesh, r).is_some()).count();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
    assert!(hits > 300, "fixture should hit often, got {hits}");
    for ray in &rays {
        agrees(&mesh, &bvh, ray).unwrap();
    }
}

#[test]
fn leaf_boxes_cover_their_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mesh = random_mesh(&mut rng, 300);
    let bvh = Bvh::build(&mesh).unwrap();
    for node in bvh.nodes() {
        if let NodeKind::Leaf { .. } = node.kind {
            let tris = bvh.leaf_triangles(node);
            assert!(!tris.is_empty() && tris.len() <= 4);
            for &id in tris {
                for v in mesh.triangle_vertices(id as usize) {
                    assert!(node.bounds.contains(v));
                }
            }
        }
    }
}

#[test]
fn f32_mesh_agrees_with_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = random_mesh(&mut rng, 200);
    let bvh = Bvh::build(&mesh).unwrap();
    let mesh32 = mesh.cast::<f32>();
    let bvh32 = Bvh::build(&mesh32).unwrap();
    let mut compared = 0;
    for _ in 0..300 {
        let ray = random_ray(&mut rng);
        let ray32 = Ray::new(ray.origin.cast::<f32>(), ray.direction.cast::<f32>().normalized()).unwrap();
        if let (Some(a), Some(b)) = (bvh.intersect(&mesh, &ray), bvh32.intersect(&mesh32, &ray32)) {
            assert!((a.t - b.t as f64).abs() < 1e-3 * a.t);
            compared += 1;
        }
    }
    assert!(compared > 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn query_equals_linear_scan(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng, n);
        let bvh = Bvh::build(&mesh).unwrap();
        for _ in 0..32 {
            let ray = random_ray(&mut rng);
            prop_assert!(agrees(&mesh, &bvh, &ray).is_ok(), "{:?}", agrees(&mesh, &bvh, &ray));
        }
    }

    #[test]
    fn shrinking_t_max_below_hit_misses(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng, 20);
        let bvh = Bvh::build(&mesh).unwrap();
        let ray = random_ray(&mut rng);
        if let Some(hit) = bvh.intersect(&mesh, &ray) {
            let short = Ray::with_range(ray.origin, ray.direction, 0.0, hit.t * (1.0 - 1e-9)).unwrap();
            prop_assert!(bvh.intersect(&mesh, &short).is_none());
        }
    }
}
