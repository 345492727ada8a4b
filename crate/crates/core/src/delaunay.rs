//! Delaunay triangulation of the anchor set and the area weights used by the
//! multi-triangle statistic.
//!
//! Construction is incremental Bowyer–Watson. Instead of a bounding
//! super-triangle the hull is closed off with ghost triangles that share a
//! single vertex at infinity, so points outside the current hull are handled
//! by the same cavity logic as interior ones.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{orient2d, GeometryError, Point, Triangle, BARY_TOL, POINT_TOL};
use crate::nulldist::{NullDistError, Weights};

const GHOST: usize = usize::MAX;
/// Relative slack of the in-circle test.
const INCIRCLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelaunayError {
    #[error("need at least 3 anchor points, got {0}")]
    TooFewPoints(usize),
    #[error("anchor point {0} is not finite")]
    NonFinite(usize),
    #[error("anchor points {0} and {1} coincide")]
    Duplicate(usize, usize),
    #[error("all anchor points are collinear")]
    Collinear,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Weights(#[from] NullDistError),
}

#[derive(Debug, Clone, Serialize)]
pub struct Triangulation {
    points: Vec<Point>,
    /// Vertex indices into `points`, counter-clockwise, smallest index first,
    /// sorted lexicographically.
    indices: Vec<[usize; 3]>,
    #[serde(skip)]
    triangles: Vec<Triangle>,
    hull: Vec<usize>,
    hull_area: f64,
    weights: Vec<f64>,
}

impl Triangulation {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn indices(&self) -> &[[usize; 3]] {
        &self.indices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Convex hull vertices in counter-clockwise order, collinear boundary
    /// points included.
    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    pub fn hull_area(&self) -> f64 {
        self.hull_area
    }

    /// Raw `A(T_j) / A(hull)` values.
    pub fn area_fractions(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights(&self) -> Result<Weights, DelaunayError> {
        Ok(Weights::new(self.weights.clone())?)
    }

    /// Index of the first triangle containing `p`, or `None` outside the hull.
    pub fn locate(&self, p: Point) -> Option<usize> {
        self.triangles
            .iter()
            .position(|t| t.barycentric(p).weights().iter().all(|&b| b >= -BARY_TOL))
    }
}

fn incircle(a: Point, b: Point, c: Point, d: Point) -> (f64, f64) {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let al = adx * adx + ady * ady;
    let bl = bdx * bdx + bdy * bdy;
    let cl = cdx * cdx + cdy * cdy;
    let det =
        al * (bdx * cdy - bdy * cdx) - bl * (adx * cdy - ady * cdx) + cl * (adx * bdy - ady * bdx);
    let scale = al * (bdx * cdy).abs().max((bdy * cdx).abs())
        + bl * (adx * cdy).abs().max((ady * cdx).abs())
        + cl * (adx * bdy).abs().max((ady * bdx).abs());
    (det, scale)
}

struct Mesh<'a> {
    pts: &'a [Point],
    tris: Vec<Option<[usize; 3]>>,
    edges: HashMap<(usize, usize), usize>,
}

impl<'a> Mesh<'a> {
    fn add(&mut self, t: [usize; 3]) {
        let id = self.tris.len();
        for k in 0..3 {
            self.edges.insert((t[k], t[(k + 1) % 3]), id);
        }
        self.tris.push(Some(t));
    }

    fn remove(&mut self, id: usize) {
        if let Some(t) = self.tris[id].take() {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                if self.edges.get(&e) == Some(&id) {
                    self.edges.remove(&e);
                }
            }
        }
    }

    fn conflicts(&self, t: [usize; 3], p: Point) -> bool {
        if t[2] == GHOST {
            let (u, v) = (self.pts[t[0]], self.pts[t[1]]);
            let o = orient2d(u, v, p);
            if o != 0.0 {
                return o > 0.0;
            }
            // on the hull line: only the open segment belongs to this ghost
            let dot = (p.x - u.x) * (v.x - u.x) + (p.y - u.y) * (v.y - u.y);
            let len = (v.x - u.x).powi(2) + (v.y - u.y).powi(2);
            return dot > 0.0 && dot < len;
        }
        let (det, scale) = incircle(self.pts[t[0]], self.pts[t[1]], self.pts[t[2]], p);
        det > INCIRCLE_TOL * scale
    }

    fn containing(&self, p: Point) -> Option<usize> {
        let mut ghost = None;
        for (id, t) in self.tris.iter().enumerate() {
            let Some(t) = *t else { continue };
            if t[2] == GHOST {
                if ghost.is_none() && self.conflicts(t, p) {
                    ghost = Some(id);
                }
                continue;
            }
            let [a, b, c] = t.map(|i| self.pts[i]);
            if orient2d(a, b, p) >= 0.0 && orient2d(b, c, p) >= 0.0 && orient2d(c, a, p) >= 0.0 {
                return Some(id);
            }
        }
        ghost
    }

    fn insert(&mut self, pi: usize) {
        let p = self.pts[pi];
        let seed = self
            .containing(p)
            .expect("every point lies in a triangle or beyond a hull edge");
        let mut cavity: HashSet<usize> = HashSet::from([seed]);
        let mut queue = VecDeque::from([seed]);
        while let Some(id) = queue.pop_front() {
            let t = self.tris[id].expect("live triangle");
            for k in 0..3 {
                let twin = (t[(k + 1) % 3], t[k]);
                if let Some(&nb) = self.edges.get(&twin) {
                    if !cavity.contains(&nb) && self.conflicts(self.tris[nb].unwrap(), p) {
                        cavity.insert(nb);
                        queue.push_back(nb);
                    }
                }
            }
        }
        // Tolerance can leave the cavity non star-shaped around p; grow it
        // until every real boundary edge sees p strictly on its left.
        loop {
            let mut grow = Vec::new();
            for &id in &cavity {
                let t = self.tris[id].unwrap();
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    if a == GHOST || b == GHOST {
                        continue;
                    }
                    let Some(&nb) = self.edges.get(&(b, a)) else {
                        continue;
                    };
                    if cavity.contains(&nb) {
                        continue;
                    }
                    if orient2d(self.pts[a], self.pts[b], p) <= 0.0 {
                        grow.push(nb);
                    }
                }
            }
            if grow.is_empty() {
                break;
            }
            cavity.extend(grow);
        }

        let mut boundary = Vec::new();
        let mut ids: Vec<usize> = cavity.iter().copied().collect();
        ids.sort_unstable();
        for &id in &ids {
            let t = self.tris[id].unwrap();
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let inner = self
                    .edges
                    .get(&(b, a))
                    .is_some_and(|nb| cavity.contains(nb));
                if !inner {
                    boundary.push((a, b));
                }
            }
        }
        for id in ids {
            self.remove(id);
        }
        for (a, b) in boundary {
            let t = if a == GHOST {
                [b, pi, GHOST]
            } else if b == GHOST {
                [pi, a, GHOST]
            } else {
                [a, b, pi]
            };
            self.add(t);
        }
    }
}

fn check_duplicates(points: &[Point]) -> Result<(), DelaunayError> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].x.total_cmp(&points[j].x).then(i.cmp(&j)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].x - points[i].x > POINT_TOL {
                break;
            }
            if points[i].approx_eq(&points[j]) {
                return Err(DelaunayError::Duplicate(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

/// Andrew's monotone chain, keeping collinear boundary points.
fn convex_hull(points: &[Point]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
    });
    let build = |iter: &mut dyn Iterator<Item = usize>| {
        let mut chain: Vec<usize> = Vec::new();
        for i in iter {
            while chain.len() >= 2
                && orient2d(
                    points[chain[chain.len() - 2]],
                    points[chain[chain.len() - 1]],
                    points[i],
                ) < 0.0
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain
    };
    let mut lower = build(&mut order.iter().copied());
    let mut upper = build(&mut order.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(points: &[Point], ring: &[usize]) -> f64 {
    let n = ring.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let (a, b) = (points[ring[k]], points[ring[(k + 1) % n]]);
            a.x * b.y - a.y * b.x
        })
        .sum();
    twice.abs() / 2.0
}

/// Delaunay triangulation of `points`. Output is deterministic for a fixed
/// input order.
pub fn triangulate(points: &[Point]) -> Result<Triangulation, DelaunayError> {
    if points.len() < 3 {
        return Err(DelaunayError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(DelaunayError::NonFinite(i));
    }
    check_duplicates(points)?;

    let (a, b) = (0, 1);
    let (pa, pb) = (points[a], points[b]);
    let lab = ((pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2)).sqrt();
    let c = (2..points.len())
        .find(|&i| {
            let pc = points[i];
            let lac = ((pc.x - pa.x).powi(2) + (pc.y - pa.y).powi(2)).sqrt();
            orient2d(pa, pb, pc).abs() > 1e-14 * lab * lac
        })
        .ok_or(DelaunayError::Collinear)?;

    let mut mesh = Mesh {
        pts: points,
        tris: Vec::new(),
        edges: HashMap::new(),
    };
    let first = if orient2d(pa, pb, points[c]) > 0.0 {
        [a, b, c]
    } else {
        [a, c, b]
    };
    mesh.add(first);
    for k in 0..3 {
        mesh.add([first[(k + 1) % 3], first[k], GHOST]);
    }
    for i in 2..points.len() {
        if i != c {
            mesh.insert(i);
        }
    }

    let mut indices: Vec<[usize; 3]> = mesh
        .tris
        .iter()
        .flatten()
        .filter(|t| t[2] != GHOST)
        .map(|&t| {
            let m = (0..3).min_by_key(|&k| t[k]).unwrap();
            [t[m], t[(m + 1) % 3], t[(m + 2) % 3]]
        })
        .collect();
    indices.sort_unstable();

    let triangles = indices
        .iter()
        .map(|t| Triangle::new(points[t[0]], points[t[1]], points[t[2]]))
        .collect::<Result<Vec<_>, _>>()?;
    let hull = convex_hull(points);
    let hull_area = polygon_area(points, &hull);
    let weights = triangles.iter().map(|t| t.area() / hull_area).collect();
    Ok(Triangulation {
        points: points.to_vec(),
        indices,
        triangles,
        hull,
        hull_area,
        weights,
    })
}
