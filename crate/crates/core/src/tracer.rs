//! Image-source multipath solver.
//!
//! For every facet sequence up to the configured reflection order the
//! transmitter is mirrored successively across the facet planes; the path is
//! then back-traced from the receiver through the images, each leg must pierce
//! its facet polygon, and every leg must be unobstructed. Only specular
//! reflection is modelled. Each reflection applies the perpendicular
//! (s-polarized) Fresnel coefficient of the facet material.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Vec3, EPS_GEOM};
use crate::parallel::{map_indexed, Parallelism};
use crate::scene::{Material, Scene};
use crate::{SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Perpendicular-polarization Fresnel reflection coefficient for a wave in
/// vacuum hitting a lossy dielectric half-space with complex permittivity
/// `eps_r - j·sigma/(2π f eps0)`.
pub fn fresnel_reflection(incidence_angle_rad: f64, material: &Material, frequency_hz: f64) -> Complex64 {
    let eps = Complex64::new(
        material.rel_permittivity,
        -material.conductivity / (2.0 * PI * frequency_hz * VACUUM_PERMITTIVITY),
    );
    let (sin, cos) = incidence_angle_rad.sin_cos();
    // Principal root has a non-negative real part, which keeps |Γ| <= 1.
    let root = (eps - sin * sin).sqrt();
    (cos - root) / (cos + root)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteractionKind {
    Reflection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub facet_id: u32,
    pub point: Vec3,
    pub incidence_angle_rad: f64,
    pub fresnel_gamma: Complex64,
}

/// One ray path from transmitter to receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationPath {
    /// tx, interaction points..., rx.
    pub vertices: Vec<Vec3>,
    pub interactions: Vec<Interaction>,
    pub length_m: f64,
    pub delay_s: f64,
    /// Complex field gain relative to a unit transmitted field, isotropic
    /// antennas.
    pub gain: Complex64,
    pub is_los: bool,
}

impl PropagationPath {
    pub fn n_reflections(&self) -> usize {
        self.interactions.len()
    }

    pub fn facet_sequence(&self) -> Vec<u32> {
        self.interactions.iter().map(|i| i.facet_id).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LosState {
    Los,
    Nlos,
    /// No path of any kind reaches the receiver.
    Dead,
}

impl LosState {
    pub fn as_str(self) -> &'static str {
        match self {
            LosState::Los => "LOS",
            LosState::Nlos => "NLOS",
            LosState::Dead => "DEAD",
        }
    }

    pub fn label(self) -> Option<crate::Label> {
        match self {
            LosState::Los => Some(crate::Label::Los),
            LosState::Nlos => Some(crate::Label::Nlos),
            LosState::Dead => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkResult {
    pub rx_position: Vec3,
    /// Ascending by delay; equal delays ordered by facet sequence.
    pub paths: Vec<PropagationPath>,
    pub los_state: LosState,
}

/// Free-space field gain with carrier phase for a path of `length_m`.
fn free_space_gain(length_m: f64, frequency_hz: f64) -> Complex64 {
    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    let cycles = (length_m / wavelength).fract();
    Complex64::from_polar(wavelength / (4.0 * PI * length_m), -2.0 * PI * cycles)
}

fn build_path(scene: &Scene, vertices: Vec<Vec3>, facet_idx: &[usize]) -> PropagationPath {
    let fc = scene.radio().center_frequency_hz;
    let length_m: f64 = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
    let interactions: Vec<Interaction> = facet_idx
        .iter()
        .enumerate()
        .map(|(j, &fi)| {
            let facet = &scene.facets()[fi];
            let point = vertices[j + 1];
            let incoming = (point - vertices[j]).normalized().unwrap_or(Vec3::ZERO);
            let cos = incoming.dot(facet.polygon.plane.normal).abs().min(1.0);
            let incidence_angle_rad = cos.acos();
            Interaction {
                kind: InteractionKind::Reflection,
                facet_id: facet.id,
                point,
                incidence_angle_rad,
                fresnel_gamma: fresnel_reflection(incidence_angle_rad, scene.material(facet), fc),
            }
        })
        .collect();
    let gamma = interactions
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, i| acc * i.fresnel_gamma);
    PropagationPath {
        is_los: interactions.is_empty(),
        gain: free_space_gain(length_m, fc) * gamma,
        delay_s: length_m / SPEED_OF_LIGHT,
        length_m,
        vertices,
        interactions,
    }
}

/// Depth-first enumeration of facet sequences with an image stack.
struct ImageSearch<'a> {
    scene: &'a Scene,
    rx: Vec3,
    max_order: usize,
    seq: Vec<usize>,
    images: Vec<Vec3>,
    found: Vec<PropagationPath>,
}

impl ImageSearch<'_> {
    fn descend(&mut self) {
        let source = *self.images.last().expect("image stack starts with tx");
        for fi in 0..self.scene.facets().len() {
            if self.seq.last() == Some(&fi) {
                continue;
            }
            let plane = self.scene.facets()[fi].polygon.plane;
            if plane.signed_distance(source).abs() <= EPS_GEOM {
                continue;
            }
            self.seq.push(fi);
            self.images.push(plane.mirror(source));
            if let Some(path) = self.back_trace() {
                self.found.push(path);
            }
            if self.seq.len() < self.max_order {
                self.descend();
            }
            self.seq.pop();
            self.images.pop();
        }
    }

    /// Back-traces the current sequence from rx and checks every leg.
    fn back_trace(&self) -> Option<PropagationPath> {
        let k = self.seq.len();
        let facets = self.scene.facets();
        let mut points = vec![Vec3::ZERO; k + 2];
        points[0] = self.images[0];
        points[k + 1] = self.rx;
        let mut from = self.rx;
        for j in (0..k).rev() {
            let image = self.images[j + 1];
            let span = image - from;
            let dist = span.norm();
            let dir = span.normalized()?;
            let t = facets[self.seq[j]].polygon.intersect_ray(from, dir)?;
            if t >= dist - EPS_GEOM {
                return None;
            }
            from += dir * t;
            points[j + 1] = from;
        }
        for j in 0..=k {
            let mut exclude = [usize::MAX; 2];
            if j > 0 {
                exclude[0] = self.seq[j - 1];
            }
            if j < k {
                exclude[1] = self.seq[j];
            }
            if self.scene.segment_blocked(points[j], points[j + 1], &exclude) {
                return None;
            }
        }
        Some(build_path(self.scene, points, &self.seq))
    }
}

fn same_geometry(a: &PropagationPath, b: &PropagationPath) -> bool {
    a.vertices.len() == b.vertices.len()
        && a.vertices
            .iter()
            .zip(&b.vertices)
            .all(|(p, q)| p.distance(*q) <= EPS_GEOM)
}

/// All LOS and specular paths between the scene transmitter and `rx`.
pub fn trace_link(scene: &Scene, rx: Vec3) -> Result<LinkResult> {
    let tx = scene.tx();
    if !rx.is_finite() || rx.distance(tx) <= EPS_GEOM {
        return Err(Error::InvalidArgument("receiver must be finite and distinct from tx".into()));
    }
    if let Some(b) = scene.bounds() {
        if !b.contains_strict(rx) {
            return Err(Error::InvalidArgument(format!("receiver {rx:?} outside scene bounds")));
        }
    }

    let direct_clear = !scene.segment_blocked(tx, rx, &[]);
    let mut search = ImageSearch {
        scene,
        rx,
        max_order: scene.radio().max_reflection_order as usize,
        seq: Vec::new(),
        images: vec![tx],
        found: Vec::new(),
    };
    if direct_clear {
        search.found.push(build_path(scene, vec![tx, rx], &[]));
    }
    if search.max_order > 0 {
        search.descend();
    }

    // Paths through a shared edge of coplanar facets show up once per facet.
    let mut paths: Vec<PropagationPath> = Vec::with_capacity(search.found.len());
    for p in search.found {
        if !paths.iter().any(|q| same_geometry(&p, q)) {
            paths.push(p);
        }
    }
    paths.sort_by(|a, b| {
        a.delay_s
            .total_cmp(&b.delay_s)
            .then_with(|| a.facet_sequence().cmp(&b.facet_sequence()))
    });

    let los_state = if direct_clear {
        LosState::Los
    } else if paths.is_empty() {
        LosState::Dead
    } else {
        LosState::Nlos
    };
    Ok(LinkResult {
        rx_position: rx,
        paths,
        los_state,
    })
}

/// One [`LinkResult`] per receiver sample of the scene plan, in plan order.
pub fn trace_all(scene: &Scene, par: Parallelism) -> Result<Vec<LinkResult>> {
    let points = scene.receiver_points();
    map_indexed(par, points.len(), |i| trace_link(scene, points[i]))
        .into_iter()
        .collect()
}
