//! Planar predicates for the r-factor proximity map.
//!
//! Everything here is phrased in barycentric coordinates. The vertex region of
//! a point is the vertex with the largest barycentric weight (the median lines
//! of a triangle are exactly the loci `b_i = b_j`), and the r-factor region of
//! `x` in the region of `y_j` is the set of points whose distance to the edge
//! opposite `y_j`, measured in barycentric units, is at least `1 - r(1 - b_j(x))`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on barycentric coordinates when deciding membership.
pub const BARY_TOL: f64 = 1e-12;
/// Coordinate tolerance used for point equality.
pub const POINT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("triangle is degenerate (signed area {0:e})")]
    Degenerate(f64),
    #[error("point ({x}, {y}) lies outside the triangle")]
    Outside { x: f64, y: f64 },
    #[error("invalid r-factor {0}: must be at least 1")]
    InvalidR(f64),
    #[error("affine map is singular")]
    SingularMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Equality up to [`POINT_TOL`] in each coordinate.
    pub fn approx_eq(&self, other: &Point) -> bool {
        (self.x - other.x).abs() <= POINT_TOL && (self.y - other.y).abs() <= POINT_TOL
    }

    fn sub(self, o: Point) -> (f64, f64) {
        (self.x - o.x, self.y - o.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[inline]
fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    cross(b.sub(a), c.sub(a))
}

/// The proximity expansion factor `r`, restricted to `[1, ∞]`.
///
/// `RFactor::INFINITY` is the distinguished value for which every proximity
/// region is the whole triangle.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RFactor(f64);

impl RFactor {
    pub const ONE: RFactor = RFactor(1.0);
    pub const INFINITY: RFactor = RFactor(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self, GeometryError> {
        if value.is_nan() || value < 1.0 {
            return Err(GeometryError::InvalidR(value));
        }
        Ok(RFactor(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl TryFrom<f64> for RFactor {
    type Error = GeometryError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        RFactor::new(v)
    }
}

impl From<RFactor> for f64 {
    fn from(r: RFactor) -> f64 {
        r.0
    }
}

impl fmt::Display for RFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric(pub [f64; 3]);

impl Barycentric {
    pub fn weights(&self) -> [f64; 3] {
        self.0
    }

    pub fn is_inside(&self) -> bool {
        self.0.iter().all(|&b| b >= -BARY_TOL)
    }

    /// Index of the largest weight; ties go to the lowest index.
    pub fn dominant(&self) -> usize {
        let b = self.0;
        let mut j = 0;
        if b[1] > b[j] {
            j = 1;
        }
        if b[2] > b[j] {
            j = 2;
        }
        j
    }

    /// Barycentric distance from the edge opposite vertex `j`, counted from
    /// the vertex: `0` at `y_j`, `1` on the opposite edge.
    #[inline]
    pub fn depth(&self, j: usize) -> f64 {
        1.0 - self.0[j]
    }
}

/// A non-degenerate triangle `T(y1, y2, y3)` with cached centroid and edge
/// midpoints. `midpoints[j]` lies on the edge opposite `vertices[j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    vertices: [Point; 3],
    centroid: Point,
    midpoints: [Point; 3],
    signed_area: f64,
    inv_det: f64,
}

impl Triangle {
    pub fn new(a: Point, b: Point, c: Point) -> Result<Self, GeometryError> {
        let det = orient2d(a, b, c);
        let scale = [a.sub(b), b.sub(c), c.sub(a)]
            .iter()
            .map(|(dx, dy)| dx * dx + dy * dy)
            .fold(0.0, f64::max);
        if !det.is_finite() || det.abs() <= 1e-14 * scale || det == 0.0 {
            return Err(GeometryError::Degenerate(det / 2.0));
        }
        let mid = |p: Point, q: Point| Point::new(0.5 * (p.x + q.x), 0.5 * (p.y + q.y));
        Ok(Triangle {
            vertices: [a, b, c],
            centroid: Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0),
            midpoints: [mid(b, c), mid(c, a), mid(a, b)],
            signed_area: det / 2.0,
            inv_det: 1.0 / det,
        })
    }

    /// The standard equilateral triangle `(0,0), (1,0), (1/2, √3/2)`.
    pub fn standard() -> Self {
        Triangle::new(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 3f64.sqrt() / 2.0),
        )
        .expect("standard triangle is valid")
    }

    pub fn vertices(&self) -> [Point; 3] {
        self.vertices
    }

    pub fn vertex(&self, j: usize) -> Point {
        self.vertices[j]
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn midpoints(&self) -> [Point; 3] {
        self.midpoints
    }

    pub fn signed_area(&self) -> f64 {
        self.signed_area
    }

    pub fn area(&self) -> f64 {
        self.signed_area.abs()
    }

    /// Barycentric coordinates without any inside check.
    #[inline]
    pub fn barycentric(&self, p: Point) -> Barycentric {
        let [a, b, c] = self.vertices;
        let b1 = cross(b.sub(p), c.sub(p)) * self.inv_det;
        let b2 = cross(c.sub(p), a.sub(p)) * self.inv_det;
        let b3 = 1.0 - b1 - b2;
        Barycentric([b1, b2, b3])
    }

    pub fn from_barycentric(&self, w: [f64; 3]) -> Point {
        let [a, b, c] = self.vertices;
        Point::new(
            w[0] * a.x + w[1] * b.x + w[2] * c.x,
            w[0] * a.y + w[1] * b.y + w[2] * c.y,
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        self.barycentric(p).is_inside()
    }

    fn inside_barycentric(&self, p: Point) -> Result<Barycentric, GeometryError> {
        let b = self.barycentric(p);
        if b.is_inside() {
            Ok(b)
        } else {
            Err(GeometryError::Outside { x: p.x, y: p.y })
        }
    }
}

/// Barycentric coordinates of `p` with respect to `tri`.
pub fn barycentric(tri: &Triangle, p: Point) -> Barycentric {
    tri.barycentric(p)
}

/// Vertex region (0-based vertex index) containing `p`.
pub fn vertex_region(tri: &Triangle, p: Point) -> Result<usize, GeometryError> {
    Ok(tri.inside_barycentric(p)?.dominant())
}

/// Precomputed proximity data for one point of a triangle: its vertex region,
/// its depth inside that region, whether it sits on the region's vertex, and
/// its depth with respect to every vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProximityKey {
    pub region: usize,
    pub at_vertex: bool,
    pub depths: [f64; 3],
}

impl ProximityKey {
    pub fn new(tri: &Triangle, p: Point) -> Self {
        let b = tri.barycentric(p);
        let region = b.dominant();
        ProximityKey {
            region,
            at_vertex: p.approx_eq(&tri.vertex(region)),
            depths: [b.depth(0), b.depth(1), b.depth(2)],
        }
    }

    /// Largest depth (in the region's coordinate) still caught by `N^r(x)`.
    #[inline]
    pub fn reach(&self, r: RFactor) -> f64 {
        r.value() * self.depths[self.region] + BARY_TOL
    }
}

/// `y ∈ N^r(x)` evaluated on precomputed keys. `same_point` decides the case
/// where `x` sits on a vertex, whose proximity region is `{x}`.
#[inline]
pub fn key_catches(r: RFactor, x: &ProximityKey, y: &ProximityKey, same_point: bool) -> bool {
    if x.at_vertex {
        same_point
    } else if r.is_infinite() {
        true
    } else {
        y.depths[x.region] <= x.reach(r)
    }
}

/// Whether `y` lies in the r-factor proximity region `N^r(x)`.
pub fn proximity_contains(
    tri: &Triangle,
    r: RFactor,
    x: Point,
    y: Point,
) -> Result<bool, GeometryError> {
    tri.inside_barycentric(x)?;
    tri.inside_barycentric(y)?;
    let kx = ProximityKey::new(tri, x);
    let ky = ProximityKey::new(tri, y);
    Ok(key_catches(r, &kx, &ky, x.approx_eq(&y)))
}

/// Whether `z` lies in the Γ1-region of `x`, i.e. `x ∈ N^r(z)`.
pub fn gamma1_contains(
    tri: &Triangle,
    r: RFactor,
    x: Point,
    z: Point,
) -> Result<bool, GeometryError> {
    proximity_contains(tri, r, z, x)
}

/// An invertible affine map `p ↦ A p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl AffineMap {
    pub fn identity() -> Self {
        AffineMap {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = self.linear;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, p: Point) -> Point {
        let m = self.linear;
        Point::new(
            m[0][0] * p.x + m[0][1] * p.y + self.translation[0],
            m[1][0] * p.x + m[1][1] * p.y + self.translation[1],
        )
    }

    pub fn inverse(&self) -> Result<AffineMap, GeometryError> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(GeometryError::SingularMap);
        }
        let m = self.linear;
        let inv = [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ];
        let t = self.translation;
        Ok(AffineMap {
            linear: inv,
            translation: [
                -(inv[0][0] * t[0] + inv[0][1] * t[1]),
                -(inv[1][0] * t[0] + inv[1][1] * t[1]),
            ],
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let a = self.linear;
        let b = other.linear;
        let lin = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let t = self.apply(Point::new(other.translation[0], other.translation[1]));
        AffineMap {
            linear: lin,
            translation: [t.x, t.y],
        }
    }
}

/// The affine map sending `tri`'s vertices, in order, onto the standard
/// equilateral triangle. Affine maps preserve barycentric coordinates, so
/// vertex regions and proximity regions are carried along exactly.
pub fn to_standard_map(tri: &Triangle) -> Result<AffineMap, GeometryError> {
    let [a, b, c] = tri.vertices();
    let (e1x, e1y) = b.sub(a);
    let (e2x, e2y) = c.sub(a);
    let det = e1x * e2y - e2x * e1y;
    if det == 0.0 {
        return Err(GeometryError::Degenerate(0.0));
    }
    // E^{-1} where E = [b - a | c - a]
    let e_inv = [[e2y / det, -e2x / det], [-e1y / det, e1x / det]];
    let h = 3f64.sqrt() / 2.0;
    // S = [[1, 1/2], [0, √3/2]]
    let lin = [
        [
            e_inv[0][0] + 0.5 * e_inv[1][0],
            e_inv[0][1] + 0.5 * e_inv[1][1],
        ],
        [h * e_inv[1][0], h * e_inv[1][1]],
    ];
    let map = AffineMap {
        linear: lin,
        translation: [0.0, 0.0],
    };
    let ta = map.apply(a);
    Ok(AffineMap {
        linear: lin,
        translation: [-ta.x, -ta.y],
    })
}
