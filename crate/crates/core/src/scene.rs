//! Scene description: facets with materials, transmitter anchor, radio
//! configuration and receiver sampling plan.
//!
//! [`SceneDesc`] is the on-disk JSON schema. [`Scene`] is the validated,
//! immutable form with precomputed polygon geometry that the tracer reads.

use std::collections::{HashMap, HashSet};
use std::hash::Hasher;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec3, EPS_GEOM};
use crate::SPEED_OF_LIGHT;

/// Transmitter must keep this clearance from every facet plane, in meters.
pub const TX_PLANE_CLEARANCE: f64 = 1e-6;
/// Receivers must keep this clearance from every facet, in meters.
pub const RX_FACET_CLEARANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub name: String,
    /// Relative permittivity. Permeability is fixed at the vacuum value.
    #[serde(rename = "eps_r")]
    pub rel_permittivity: f64,
    /// Conductivity in S/m.
    #[serde(rename = "sigma")]
    pub conductivity: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, rel_permittivity: f64, conductivity: f64) -> Self {
        Material {
            name: name.into(),
            rel_permittivity,
            conductivity,
        }
    }
}

/// Convex planar polygon. Vertex winding defines the outward normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facet {
    pub id: u32,
    /// Name of an entry in the scene's material list.
    pub material: String,
    pub vertices: Vec<Vec3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    #[serde(rename = "fc_hz")]
    pub center_frequency_hz: f64,
    #[serde(rename = "bw_hz")]
    pub bandwidth_hz: f64,
    #[serde(rename = "tx_dbm")]
    pub tx_power_dbm: f64,
    #[serde(rename = "max_order")]
    pub max_reflection_order: u32,
    #[serde(rename = "window_s")]
    pub cir_window_s: f64,
    #[serde(rename = "oversample")]
    pub oversampling_factor: u32,
}

impl RadioConfig {
    /// UWB defaults: 3.5 GHz carrier, 499.2 MHz channel, -16 dBm, third-order
    /// reflections, 4x oversampling. The window is left for the caller.
    pub fn uwb(cir_window_s: f64) -> Self {
        RadioConfig {
            center_frequency_hz: 3.5e9,
            bandwidth_hz: 499.2e6,
            tx_power_dbm: -16.0,
            max_reflection_order: 3,
            cir_window_s,
            oversampling_factor: 4,
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency_hz
    }

    pub fn with_bandwidth(&self, bandwidth_hz: f64) -> Self {
        RadioConfig {
            bandwidth_hz,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::validation("radio", reason));
        if !(self.center_frequency_hz > 0.0 && self.center_frequency_hz.is_finite()) {
            return bad("center frequency must be positive");
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad("bandwidth must be positive");
        }
        if self.bandwidth_hz >= 2.0 * self.center_frequency_hz {
            return bad("bandwidth must be below twice the center frequency");
        }
        if !self.tx_power_dbm.is_finite() {
            return bad("transmit power must be finite");
        }
        if !(self.cir_window_s > 0.0 && self.cir_window_s.is_finite()) {
            return bad("CIR window must be positive");
        }
        if self.oversampling_factor < 2 {
            return bad("oversampling factor must be at least 2");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPlan {
    /// Corner of the grid. Sample heights are `origin.z + height`.
    pub origin: Vec3,
    pub extent_x: f64,
    pub extent_y: f64,
    pub spacing: f64,
    pub height: f64,
}

impl GridPlan {
    pub fn dims(&self) -> (usize, usize) {
        let count = |extent: f64| (extent / self.spacing + 1e-9).floor() as usize + 1;
        (count(self.extent_x), count(self.extent_y))
    }

    /// Sample point of cell `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> Vec3 {
        Vec3::new(
            self.origin.x + ix as f64 * self.spacing,
            self.origin.y + iy as f64 * self.spacing,
            self.origin.z + self.height,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPlan {
    pub waypoints: Vec<Vec3>,
    pub sample_step: f64,
}

/// Where receivers are placed. Serialized as `{"grid": {..}}` or
/// `{"trajectory": {..}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverPlan {
    Grid(GridPlan),
    Trajectory(TrajectoryPlan),
}

impl ReceiverPlan {
    /// Sample points: row-major with x fastest for grids, increasing arc
    /// length for trajectories.
    pub fn sample_points(&self) -> Vec<Vec3> {
        match self {
            ReceiverPlan::Grid(g) => {
                let (nx, ny) = g.dims();
                (0..ny)
                    .flat_map(|iy| (0..nx).map(move |ix| g.point(ix, iy)))
                    .collect()
            }
            ReceiverPlan::Trajectory(tr) => trajectory_points(tr),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::validation("receivers", reason));
        match self {
            ReceiverPlan::Grid(g) => {
                if !(g.spacing > 0.0 && g.spacing.is_finite()) {
                    return bad("grid spacing must be positive");
                }
                if !(g.extent_x >= 0.0 && g.extent_y >= 0.0) {
                    return bad("grid extents must be non-negative");
                }
                if !g.origin.is_finite() || !g.height.is_finite() {
                    return bad("grid origin and height must be finite");
                }
            }
            ReceiverPlan::Trajectory(tr) => {
                if !(tr.sample_step > 0.0 && tr.sample_step.is_finite()) {
                    return bad("trajectory sample step must be positive");
                }
                if tr.waypoints.is_empty() {
                    return bad("trajectory needs at least one waypoint");
                }
                if tr.waypoints.iter().any(|w| !w.is_finite()) {
                    return bad("waypoints must be finite");
                }
            }
        }
        Ok(())
    }
}

fn trajectory_points(tr: &TrajectoryPlan) -> Vec<Vec3> {
    let mut out = vec![tr.waypoints[0]];
    // Arc length already covered at the start of the current leg, and the
    // arc length of the next sample to emit.
    let mut leg_start = 0.0;
    let mut next = tr.sample_step;
    for leg in tr.waypoints.windows(2) {
        let len = leg[0].distance(leg[1]);
        while next <= leg_start + len + EPS_GEOM {
            let frac = if len > 0.0 {
                ((next - leg_start) / len).min(1.0)
            } else {
                1.0
            };
            out.push(leg[0] + (leg[1] - leg[0]) * frac);
            next += tr.sample_step;
        }
        leg_start += len;
    }
    out
}

/// The JSON scene file, field for field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDesc {
    pub materials: Vec<Material>,
    pub facets: Vec<Facet>,
    #[serde(rename = "tx")]
    pub tx_position: Vec3,
    pub radio: RadioConfig,
    pub receivers: ReceiverPlan,
    pub seed: u64,
}

/// Facet geometry resolved against its material.
#[derive(Clone, Debug)]
pub struct SceneFacet {
    pub id: u32,
    pub polygon: ConvexPolygon,
    pub material: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        Some(it.fold(Aabb { min: first, max: first }, |b, p| Aabb {
            min: Vec3::new(b.min.x.min(p.x), b.min.y.min(p.y), b.min.z.min(p.z)),
            max: Vec3::new(b.max.x.max(p.x), b.max.y.max(p.y), b.max.z.max(p.z)),
        }))
    }

    pub fn diagonal(&self) -> f64 {
        self.max.distance(self.min)
    }

    /// Strict containment with `EPS_GEOM` clearance on every face. Axes
    /// along which the box is flat (a lone ground plane, a single wall) do
    /// not constrain.
    pub fn contains_strict(&self, p: Vec3) -> bool {
        let axis = |v: f64, lo: f64, hi: f64| hi - lo <= EPS_GEOM || (v > lo + EPS_GEOM && v < hi - EPS_GEOM);
        axis(p.x, self.min.x, self.max.x) && axis(p.y, self.min.y, self.max.y) && axis(p.z, self.min.z, self.max.z)
    }
}

/// Validated, immutable scene.
#[derive(Clone, Debug)]
pub struct Scene {
    desc: SceneDesc,
    facets: Vec<SceneFacet>,
    bounds: Option<Aabb>,
    receivers: Vec<Vec3>,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.desc == other.desc
    }
}

impl Scene {
    /// Validates every invariant and precomputes facet geometry.
    pub fn new(desc: SceneDesc) -> Result<Self> {
        let mut material_index = HashMap::new();
        for (i, m) in desc.materials.iter().enumerate() {
            let entity = || format!("material '{}'", m.name);
            if material_index.insert(m.name.as_str(), i).is_some() {
                return Err(Error::validation(entity(), "duplicate material name"));
            }
            if !(m.rel_permittivity >= 1.0 && m.rel_permittivity.is_finite()) {
                return Err(Error::validation(entity(), "relative permittivity must be >= 1"));
            }
            if !(m.conductivity >= 0.0 && m.conductivity.is_finite()) {
                return Err(Error::validation(entity(), "conductivity must be >= 0"));
            }
        }

        let mut ids = HashSet::new();
        let mut facets = Vec::with_capacity(desc.facets.len());
        for f in &desc.facets {
            let entity = || format!("facet {}", f.id);
            if !ids.insert(f.id) {
                return Err(Error::validation(entity(), "duplicate facet id"));
            }
            let material = *material_index
                .get(f.material.as_str())
                .ok_or_else(|| Error::validation(entity(), format!("unknown material '{}'", f.material)))?;
            if f.vertices.len() < 3 {
                return Err(Error::validation(entity(), "needs at least 3 vertices"));
            }
            if f.vertices.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(entity(), "vertex coordinates must be finite"));
            }
            let polygon = ConvexPolygon::new(f.vertices.clone())
                .filter(|p| p.area() > 1e-12)
                .ok_or_else(|| Error::validation(entity(), "degenerate polygon (area <= 1e-12 m^2)"))?;
            if polygon.planarity_error() > EPS_GEOM {
                return Err(Error::validation(entity(), "vertices are not coplanar"));
            }
            if !polygon.is_convex() {
                return Err(Error::validation(entity(), "polygon is not convex"));
            }
            facets.push(SceneFacet {
                id: f.id,
                polygon,
                material,
            });
        }

        desc.radio.validate()?;
        desc.receivers.validate()?;

        let tx = desc.tx_position;
        if !tx.is_finite() {
            return Err(Error::validation("tx", "position must be finite"));
        }
        for f in &facets {
            if f.polygon.plane.signed_distance(tx).abs() <= TX_PLANE_CLEARANCE {
                return Err(Error::validation(
                    format!("facet {}", f.id),
                    "transmitter lies in the facet plane",
                ));
            }
        }

        let bounds = Aabb::from_points(desc.facets.iter().flat_map(|f| f.vertices.iter()));
        if let Some(b) = bounds {
            if !b.contains_strict(tx) {
                return Err(Error::validation("tx", "outside the scene bounding volume"));
            }
        }

        let receivers = desc.receivers.sample_points();
        for (i, &p) in receivers.iter().enumerate() {
            let entity = || format!("receiver sample {i}");
            if let Some(b) = bounds {
                if !b.contains_strict(p) {
                    return Err(Error::validation(entity(), "outside the scene bounding volume"));
                }
            }
            if let Some(f) = facets.iter().find(|f| f.polygon.distance_to(p) <= RX_FACET_CLEARANCE) {
                return Err(Error::validation(entity(), format!("lies on facet {}", f.id)));
            }
            if p.distance(tx) <= EPS_GEOM {
                return Err(Error::validation(entity(), "coincides with the transmitter"));
            }
        }

        let scene = Scene {
            desc,
            facets,
            bounds,
            receivers,
        };
        let needed = scene.max_path_delay_s() + 10.0 / scene.desc.radio.bandwidth_hz;
        if scene.desc.radio.cir_window_s < needed {
            return Err(Error::validation(
                "radio",
                format!(
                    "CIR window {:e} s shorter than longest admissible delay plus guard {:e} s",
                    scene.desc.radio.cir_window_s, needed
                ),
            ));
        }
        Ok(scene)
    }

    pub fn desc(&self) -> &SceneDesc {
        &self.desc
    }

    pub fn into_desc(self) -> SceneDesc {
        self.desc
    }

    pub fn radio(&self) -> &RadioConfig {
        &self.desc.radio
    }

    pub fn tx(&self) -> Vec3 {
        self.desc.tx_position
    }

    pub fn facets(&self) -> &[SceneFacet] {
        &self.facets
    }

    pub fn material(&self, facet: &SceneFacet) -> &Material {
        &self.desc.materials[facet.material]
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.bounds
    }

    /// Receiver sample points of the plan, in canonical order.
    pub fn receiver_points(&self) -> &[Vec3] {
        &self.receivers
    }

    /// Upper bound on any path delay: a path with K reflections has K+1
    /// segments, none longer than the diagonal of the box holding every
    /// facet, the transmitter and every receiver.
    pub fn max_path_delay_s(&self) -> f64 {
        let pts = self
            .desc
            .facets
            .iter()
            .flat_map(|f| f.vertices.iter())
            .chain(std::iter::once(&self.desc.tx_position))
            .chain(self.receivers.iter());
        let diag = Aabb::from_points(pts).map_or(0.0, |b| b.diagonal());
        let segments = if self.facets.is_empty() {
            1
        } else {
            self.desc.radio.max_reflection_order + 1
        };
        segments as f64 * diag / SPEED_OF_LIGHT
    }

    /// Index of the facet with the given id.
    pub fn facet_index(&self, id: u32) -> Option<usize> {
        self.facets.iter().position(|f| f.id == id)
    }

    /// Occlusion test over facet indices; see [`segment_occluded`].
    pub(crate) fn segment_blocked(&self, a: Vec3, b: Vec3, exclude: &[usize]) -> bool {
        let d = b - a;
        let len = d.norm();
        let Some(dir) = d.normalized() else {
            return false;
        };
        self.facets.iter().enumerate().any(|(i, f)| {
            !exclude.contains(&i)
                && f.polygon
                    .intersect_ray(a, dir)
                    .is_some_and(|t| t < len - EPS_GEOM)
        })
    }

    /// Canonical compact JSON, the input of [`Scene::hash`].
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.desc).expect("scene serialization is infallible")
    }

    /// 64-bit FNV-1a of the canonical serialization.
    pub fn hash(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        h.write(self.canonical_json().as_bytes());
        h.finish()
    }
}

/// True iff some facet whose id is not in `exclude_ids` crosses the open
/// segment `(a, b)`, keeping `EPS_GEOM` clearance at both ends.
pub fn segment_occluded(a: Vec3, b: Vec3, scene: &Scene, exclude_ids: &[u32]) -> bool {
    let exclude: Vec<usize> = exclude_ids.iter().filter_map(|&id| scene.facet_index(id)).collect();
    scene.segment_blocked(a, b, &exclude)
}

/// Smallest hit distance `t > EPS_GEOM` of a ray against one facet.
/// Returns `(t, point)`.
pub fn ray_facet_intersect(origin: Vec3, direction: Vec3, facet: &Facet) -> Option<(f64, Vec3)> {
    let poly = ConvexPolygon::new(facet.vertices.clone())?;
    poly.intersect_ray(origin, direction)
        .map(|t| (t, origin + direction * t))
}

pub fn parse_scene(json: &str) -> Result<Scene> {
    Scene::new(serde_json::from_str(json)?)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text)
}

pub fn scene_to_json(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(scene.desc()).expect("scene serialization is infallible");
    s.push('\n');
    s
}

pub fn write_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_json(scene)).map_err(|e| Error::io(path, e))
}

pub const HULL_MATERIAL: &str = "aircraft aluminum";
pub const SEAT_MATERIAL: &str = "seat";
/// Top edge of the seat backs above the floor, in meters.
pub const SEAT_BACK_HEIGHT: f64 = 1.2;
/// Width of the center aisle between the two seat blocks, in meters.
pub const AISLE_WIDTH: f64 = 0.5;
/// Transmitter sits this far below the ceiling.
pub const TX_CEILING_OFFSET: f64 = 0.05;
pub const DEFAULT_GRID_SPACING: f64 = 0.25;
pub const DEFAULT_RX_HEIGHT: f64 = 1.0;

/// Parametric cabin: axis-aligned box hull (x along the length, y across,
/// z up) with `n_seat_rows` pairs of seat backs either side of a center
/// aisle, a transmitter at mid-cabin (a quarter row pitch aft for odd row
/// counts) just under the ceiling, and a receiver grid at 1 m height.
///
/// Facet ids: 0 floor, 1 ceiling, 2/3 end walls at x=0/x=L, 4/5 side walls
/// at y=0/y=W, then two seat backs per row.
pub fn make_cabin_scene(
    length_m: f64,
    width_m: f64,
    height_m: f64,
    n_seat_rows: u32,
    seed: u64,
) -> Result<Scene> {
    if !(length_m >= 4.0 && length_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("cabin length {length_m} m must be >= 4 m")));
    }
    if !(width_m >= 2.0 && width_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("cabin width {width_m} m must be >= 2 m")));
    }
    if !(height_m >= 1.8 && height_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("cabin height {height_m} m must be >= 1.8 m")));
    }
    let (l, w, h) = (length_m, width_m, height_m);
    let p = Vec3::new;
    let quad = |id: u32, material: &str, v: [Vec3; 4]| Facet {
        id,
        material: material.to_string(),
        vertices: v.to_vec(),
    };

    // Hull windings give inward-facing normals.
    let mut facets = vec![
        quad(0, HULL_MATERIAL, [p(0., 0., 0.), p(l, 0., 0.), p(l, w, 0.), p(0., w, 0.)]),
        quad(1, HULL_MATERIAL, [p(0., 0., h), p(0., w, h), p(l, w, h), p(l, 0., h)]),
        quad(2, HULL_MATERIAL, [p(0., 0., 0.), p(0., w, 0.), p(0., w, h), p(0., 0., h)]),
        quad(3, HULL_MATERIAL, [p(l, 0., 0.), p(l, 0., h), p(l, w, h), p(l, w, 0.)]),
        quad(4, HULL_MATERIAL, [p(0., 0., 0.), p(0., 0., h), p(l, 0., h), p(l, 0., 0.)]),
        quad(5, HULL_MATERIAL, [p(0., w, 0.), p(l, w, 0.), p(l, w, h), p(0., w, h)]),
    ];
    let seat_h = SEAT_BACK_HEIGHT.min(h - 0.3);
    let aisle_lo = 0.5 * (w - AISLE_WIDTH);
    let aisle_hi = 0.5 * (w + AISLE_WIDTH);
    for row in 0..n_seat_rows {
        let x = l * (row + 1) as f64 / (n_seat_rows + 1) as f64;
        let id = 6 + 2 * row;
        facets.push(quad(id, SEAT_MATERIAL, [p(x, 0., 0.), p(x, aisle_lo, 0.), p(x, aisle_lo, seat_h), p(x, 0., seat_h)]));
        facets.push(quad(id + 1, SEAT_MATERIAL, [p(x, aisle_hi, 0.), p(x, w, 0.), p(x, w, seat_h), p(x, aisle_hi, seat_h)]));
    }

    let margin = 0.5 * DEFAULT_GRID_SPACING;
    let receivers = ReceiverPlan::Grid(GridPlan {
        origin: p(margin, margin, 0.0),
        extent_x: l - 2.0 * margin,
        extent_y: w - 2.0 * margin,
        spacing: DEFAULT_GRID_SPACING,
        height: DEFAULT_RX_HEIGHT,
    });

    // With an odd row count the middle seat plane passes through mid-cabin,
    // so the transmitter moves a quarter pitch aft.
    let tx_x = if n_seat_rows % 2 == 1 {
        0.5 * l + 0.25 * l / (n_seat_rows + 1) as f64
    } else {
        0.5 * l
    };

    let mut radio = RadioConfig::uwb(0.0);
    let diag = (l * l + w * w + h * h).sqrt();
    let needed = (radio.max_reflection_order + 1) as f64 * diag / SPEED_OF_LIGHT + 10.0 / radio.bandwidth_hz;
    // Rounded up to whole 10 ns.
    radio.cir_window_s = (needed / 10e-9).ceil() * 10e-9;

    Scene::new(SceneDesc {
        materials: vec![
            Material::new(HULL_MATERIAL, 10.0, 1e7),
            Material::new(SEAT_MATERIAL, 3.0, 0.01),
        ],
        facets,
        tx_position: p(tx_x, 0.5 * w, h - TX_CEILING_OFFSET),
        radio,
        receivers,
        seed,
    })
}
