//! The data-random proximity catch digraph and its density statistics.
//!
//! Only arc counts are kept. Within one triangle, `y ∈ N^r(x)` reduces to a
//! threshold on the depth of `y` with respect to `x`'s region vertex, so
//! sorting the three depth columns once lets every out-degree be read off by
//! binary search, for any number of `r` values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delaunay::Triangulation;
use crate::geometry::{key_catches, Point, ProximityKey, RFactor, Triangle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcdError {
    #[error("point {index} at {point} lies outside the convex hull of the anchor points")]
    OutsideHull { index: usize, point: Point },
    #[error("point {0} is not finite")]
    NonFinite(usize),
    #[error("need at least 2 points for a density, got {0}")]
    TooFewPoints(usize),
    #[error("no triangle holds two or more points, so no arcs are possible")]
    NoPossibleArcs,
    #[error("{got} weights supplied for {expected} triangles")]
    WeightCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutsidePolicy {
    /// Fail on the first point outside the hull.
    #[default]
    Reject,
    /// Discard such points and report how many were dropped.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TriangleCount {
    pub points: usize,
    pub arcs: u64,
}

impl TriangleCount {
    pub fn possible_arcs(&self) -> u64 {
        let n = self.points as u64;
        n * n.saturating_sub(1)
    }

    pub fn density(&self) -> Option<f64> {
        (self.points >= 2).then(|| self.arcs as f64 / self.possible_arcs() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcDigraph {
    pub n: usize,
    pub per_triangle: Vec<TriangleCount>,
    pub total_arcs: u64,
    pub r: RFactor,
    /// Points discarded under [`OutsidePolicy::Drop`].
    pub dropped: usize,
}

impl PcDigraph {
    /// `|A| / (n(n−1))`.
    pub fn relative_density(&self) -> Result<f64, PcdError> {
        if self.n < 2 {
            return Err(PcdError::TooFewPoints(self.n));
        }
        let n = self.n as f64;
        Ok(self.total_arcs as f64 / (n * (n - 1.0)))
    }

    /// `|A| / Σ n_j(n_j−1)`.
    pub fn adjusted_density(&self) -> Result<f64, PcdError> {
        let possible: u64 = self
            .per_triangle
            .iter()
            .map(TriangleCount::possible_arcs)
            .sum();
        if possible == 0 {
            return Err(PcdError::NoPossibleArcs);
        }
        Ok(self.total_arcs as f64 / possible as f64)
    }

    /// `Σ w_j² ρ_j` over triangles holding at least two points.
    pub fn weighted_u_with(&self, weights: &[f64]) -> Result<f64, PcdError> {
        if weights.len() != self.per_triangle.len() {
            return Err(PcdError::WeightCount {
                expected: self.per_triangle.len(),
                got: weights.len(),
            });
        }
        let mut any = false;
        let mut u = 0.0;
        for (c, w) in self.per_triangle.iter().zip(weights) {
            if let Some(rho) = c.density() {
                any = true;
                u += w * w * rho;
            }
        }
        if !any {
            return Err(PcdError::NoPossibleArcs);
        }
        Ok(u)
    }

    pub fn weighted_u(&self, tr: &Triangulation) -> Result<f64, PcdError> {
        self.weighted_u_with(tr.area_fractions())
    }
}

/// Arc counter for the points of one triangle.
#[derive(Debug, Clone)]
pub struct TriangleArcs {
    points: Vec<Point>,
    keys: Vec<ProximityKey>,
    /// Depth columns, each sorted ascending.
    sorted: [Vec<f64>; 3],
}

impl TriangleArcs {
    pub fn new(tri: &Triangle, points: Vec<Point>) -> Self {
        let keys: Vec<ProximityKey> = points.iter().map(|&p| ProximityKey::new(tri, p)).collect();
        let sorted = std::array::from_fn(|j| {
            let mut col: Vec<f64> = keys.iter().map(|k| k.depths[j]).collect();
            col.sort_unstable_by(f64::total_cmp);
            col
        });
        TriangleArcs {
            points,
            keys,
            sorted,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn coincident(&self, i: usize) -> u64 {
        let p = self.points[i];
        self.points
            .iter()
            .enumerate()
            .filter(|&(j, q)| j != i && p.approx_eq(q))
            .count() as u64
    }

    /// Number of arcs among these points for the given `r`.
    pub fn count(&self, r: RFactor) -> u64 {
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        self.keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                if k.at_vertex {
                    self.coincident(i)
                } else if r.is_infinite() {
                    (n - 1) as u64
                } else {
                    let reach = k.reach(r);
                    let caught = self.sorted[k.region].partition_point(|&d| d <= reach);
                    caught as u64 - 1
                }
            })
            .sum()
    }

    /// Reference count by the direct double loop.
    pub fn count_direct(&self, r: RFactor) -> u64 {
        let mut arcs = 0;
        for (i, x) in self.keys.iter().enumerate() {
            for (j, y) in self.keys.iter().enumerate() {
                if i != j && key_catches(r, x, y, self.points[i].approx_eq(&self.points[j])) {
                    arcs += 1;
                }
            }
        }
        arcs
    }
}

/// Points assigned to the triangles of a tessellation, ready to be counted
/// for any number of `r` values.
#[derive(Debug, Clone)]
pub struct Partition {
    cells: Vec<TriangleArcs>,
    dropped: usize,
}

impl Partition {
    pub fn new(tr: &Triangulation, xs: &[Point], policy: OutsidePolicy) -> Result<Self, PcdError> {
        let mut buckets: Vec<Vec<Point>> = vec![Vec::new(); tr.len()];
        let mut dropped = 0;
        for (index, &p) in xs.iter().enumerate() {
            if !p.is_finite() {
                return Err(PcdError::NonFinite(index));
            }
            match tr.locate(p) {
                Some(j) => buckets[j].push(p),
                None if policy == OutsidePolicy::Drop => dropped += 1,
                None => return Err(PcdError::OutsideHull { index, point: p }),
            }
        }
        let cells = tr
            .triangles()
            .iter()
            .zip(buckets)
            .map(|(t, pts)| TriangleArcs::new(t, pts))
            .collect();
        Ok(Partition { cells, dropped })
    }

    /// All points in a single triangle, none checked against it.
    pub fn single(tri: &Triangle, xs: Vec<Point>) -> Self {
        Partition {
            cells: vec![TriangleArcs::new(tri, xs)],
            dropped: 0,
        }
    }

    pub fn cells(&self) -> &[TriangleArcs] {
        &self.cells
    }

    pub fn digraph(&self, r: RFactor) -> PcDigraph {
        self.build(r, TriangleArcs::count)
    }

    pub fn digraph_direct(&self, r: RFactor) -> PcDigraph {
        self.build(r, TriangleArcs::count_direct)
    }

    fn build(&self, r: RFactor, count: fn(&TriangleArcs, RFactor) -> u64) -> PcDigraph {
        let per_triangle: Vec<TriangleCount> = self
            .cells
            .iter()
            .map(|c| TriangleCount {
                points: c.len(),
                arcs: count(c, r),
            })
            .collect();
        PcDigraph {
            n: per_triangle.iter().map(|c| c.points).sum(),
            total_arcs: per_triangle.iter().map(|c| c.arcs).sum(),
            per_triangle,
            r,
            dropped: self.dropped,
        }
    }
}

pub fn build_digraph(
    tr: &Triangulation,
    xs: &[Point],
    r: RFactor,
    policy: OutsidePolicy,
) -> Result<PcDigraph, PcdError> {
    Ok(Partition::new(tr, xs, policy)?.digraph(r))
}
