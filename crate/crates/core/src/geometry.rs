//! Small 3D vector type and the planar-polygon kernel shared by the scene
//! validator, the occlusion test and the image-source tracer.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Single tolerance used for every geometric comparison, in meters.
pub const EPS_GEOM: f64 = 1e-9;

/// Point or direction in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction. Returns `None` for a zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// Serialized as a bare `[x, y, z]` array.
impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from)
    }
}

/// Infinite plane `normal · p = offset` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Mirror image of `p` across the plane.
    pub fn mirror(&self, p: Vec3) -> Vec3 {
        p - self.normal * (2.0 * self.signed_distance(p))
    }
}

/// Newell's method: area-weighted normal of a polygon, length = 2·area.
pub fn newell_normal(vertices: &[Vec3]) -> Vec3 {
    let mut n = Vec3::ZERO;
    for (i, a) in vertices.iter().enumerate() {
        let b = vertices[(i + 1) % vertices.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}

/// Precomputed convex polygon used in the hot loops.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec3>,
    pub plane: Plane,
    /// Inward-pointing unit normals of each edge, within the polygon plane.
    edge_normals: Vec<Vec3>,
}

impl ConvexPolygon {
    /// Builds the polygon from ordered vertices. Winding defines the normal
    /// (right-hand rule). Returns `None` for fewer than three vertices or a
    /// zero-area polygon; coplanarity and convexity are the caller's problem.
    pub fn new(vertices: Vec<Vec3>) -> Option<Self> {
        if vertices.len() < 3 {
            return None;
        }
        let normal = newell_normal(&vertices).normalized()?;
        let centroid = vertices.iter().fold(Vec3::ZERO, |acc, &v| acc + v) / vertices.len() as f64;
        let plane = Plane {
            normal,
            offset: normal.dot(centroid),
        };
        let edge_normals = vertices
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let b = vertices[(i + 1) % vertices.len()];
                normal.cross(b - a).normalized().unwrap_or(Vec3::ZERO)
            })
            .collect();
        Some(ConvexPolygon {
            vertices,
            plane,
            edge_normals,
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * newell_normal(&self.vertices).norm()
    }

    /// Largest distance of any vertex from the fitted plane.
    pub fn planarity_error(&self) -> f64 {
        self.vertices
            .iter()
            .map(|&v| self.plane.signed_distance(v).abs())
            .fold(0.0, f64::max)
    }

    /// True when every interior angle turns the same way as the normal.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b).dot(self.plane.normal) >= -EPS_GEOM * EPS_GEOM
        })
    }

    /// Point-in-polygon test for a point already on (or near) the plane.
    /// Boundary points within `EPS_GEOM` count as inside.
    pub fn contains_coplanar(&self, p: Vec3) -> bool {
        self.vertices
            .iter()
            .zip(&self.edge_normals)
            .all(|(&v, &en)| en.dot(p - v) >= -EPS_GEOM)
    }

    /// Smallest `t > EPS_GEOM` at which `origin + t·dir` pierces the polygon.
    pub fn intersect_ray(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let denom = self.plane.normal.dot(dir);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = -self.plane.signed_distance(origin) / denom;
        if !(t > EPS_GEOM) {
            return None;
        }
        self.contains_coplanar(origin + dir * t).then_some(t)
    }

    /// Euclidean distance from `p` to the closed polygon.
    pub fn distance_to(&self, p: Vec3) -> f64 {
        let d = self.plane.signed_distance(p);
        let proj = p - self.plane.normal * d;
        if self.contains_coplanar(proj) {
            return d.abs();
        }
        let n = self.vertices.len();
        (0..n)
            .map(|i| segment_point_distance(self.vertices[i], self.vertices[(i + 1) % n], p))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_point_distance(a: Vec3, b: Vec3, p: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * t)
}
