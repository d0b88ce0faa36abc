#![allow(dead_code)]

use raychannel::scene::{Facet, Material, RadioConfig, ReceiverPlan, Scene, SceneDesc, TrajectoryPlan};
use raychannel::{Vec3, SPEED_OF_LIGHT};

pub const WALL: &str = "concrete";
pub const PANEL: &str = "glass";

pub fn materials() -> Vec<Material> {
    vec![Material::new(WALL, 5.3, 0.02), Material::new(PANEL, 6.3, 0.004)]
}

pub fn quad(id: u32, material: &str, v: [Vec3; 4]) -> Facet {
    Facet {
        id,
        material: material.to_string(),
        vertices: v.to_vec(),
    }
}

/// The six walls of an axis-aligned room with a corner at the origin.
pub fn room_walls(l: f64, w: f64, h: f64) -> Vec<Facet> {
    let p = Vec3::new;
    vec![
        quad(0, WALL, [p(0., 0., 0.), p(l, 0., 0.), p(l, w, 0.), p(0., w, 0.)]),
        quad(1, WALL, [p(0., 0., h), p(0., w, h), p(l, w, h), p(l, 0., h)]),
        quad(2, WALL, [p(0., 0., 0.), p(0., w, 0.), p(0., w, h), p(0., 0., h)]),
        quad(3, WALL, [p(l, 0., 0.), p(l, 0., h), p(l, w, h), p(l, w, 0.)]),
        quad(4, WALL, [p(0., 0., 0.), p(0., 0., h), p(l, 0., h), p(l, 0., 0.)]),
        quad(5, WALL, [p(0., w, 0.), p(l, w, 0.), p(l, w, h), p(0., w, h)]),
    ]
}

/// Vertical rectangular panel centred at (cx, cy) rotated by `angle` about z.
pub fn panel(id: u32, cx: f64, cy: f64, half_width: f64, z0: f64, z1: f64, angle: f64) -> Facet {
    let (s, c) = angle.sin_cos();
    let a = Vec3::new(cx - half_width * c, cy - half_width * s, 0.0);
    let b = Vec3::new(cx + half_width * c, cy + half_width * s, 0.0);
    let p = |v: Vec3, z: f64| Vec3::new(v.x, v.y, z);
    quad(id, PANEL, [p(a, z0), p(b, z0), p(b, z1), p(a, z1)])
}

/// Window that comfortably covers every path the scene can produce.
pub fn window_for(facets: &[Facet], tx: Vec3, receivers: &[Vec3], max_order: u32) -> f64 {
    let pts = facets.iter().flat_map(|f| f.vertices.iter()).chain(receivers).chain([&tx]);
    let (mut lo, mut hi) = (Vec3::new(f64::MAX, f64::MAX, f64::MAX), Vec3::new(f64::MIN, f64::MIN, f64::MIN));
    for p in pts {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    2.0 * (max_order + 2) as f64 * hi.distance(lo) / SPEED_OF_LIGHT + 100e-9
}

/// Scene with the given receiver plan.
pub fn scene_with_plan(facets: Vec<Facet>, tx: Vec3, receivers: ReceiverPlan, max_order: u32) -> raychannel::Result<Scene> {
    let points = receivers.sample_points();
    let mut radio = RadioConfig::uwb(window_for(&facets, tx, &points, max_order));
    radio.max_reflection_order = max_order;
    Scene::new(SceneDesc {
        materials: materials(),
        facets,
        tx_position: tx,
        radio,
        receivers,
        seed: 0,
    })
}

/// Scene whose plan is the single receiver `rx`.
pub fn scene_with(facets: Vec<Facet>, tx: Vec3, rx: Vec3, max_order: u32) -> raychannel::Result<Scene> {
    let plan = ReceiverPlan::Trajectory(TrajectoryPlan {
        waypoints: vec![rx],
        sample_step: 1.0,
    });
    scene_with_plan(facets, tx, plan, max_order)
}

/// Independent segment/polygon crossing test: true when the open segment
/// a→b passes through the closed convex polygon.
pub fn segment_hits_polygon(a: Vec3, b: Vec3, verts: &[Vec3]) -> bool {
    let mut n = Vec3::ZERO;
    for i in 0..verts.len() {
        let (p, q) = (verts[i], verts[(i + 1) % verts.len()]);
        n += Vec3::new((p.y - q.y) * (p.z + q.z), (p.z - q.z) * (p.x + q.x), (p.x - q.x) * (p.y + q.y));
    }
    let n = n * (1.0 / n.norm());
    let da = n.dot(a - verts[0]);
    let db = n.dot(b - verts[0]);
    if da * db > 0.0 || (da - db).abs() < 1e-15 {
        return false;
    }
    let t = da / (da - db);
    let len = a.distance(b);
    if t * len <= 1e-9 || (1.0 - t) * len <= 1e-9 {
        return false;
    }
    let p = a + (b - a) * t;
    (0..verts.len()).all(|i| {
        let (u, v) = (verts[i], verts[(i + 1) % verts.len()]);
        n.dot((v - u).cross(p - u)) >= -1e-12
    })
}

/// True when any facet other than `skip` blocks the segment a→b.
pub fn blocked_by_any(a: Vec3, b: Vec3, facets: &[Facet], skip: &[u32]) -> bool {
    facets
        .iter()
        .filter(|f| !skip.contains(&f.id))
        .any(|f| segment_hits_polygon(a, b, &f.vertices))
}
