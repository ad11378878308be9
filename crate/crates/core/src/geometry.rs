//! Placement regions, minimum-spacing checks, and spatial range queries.
//!
//! Antennas move inside an axis-aligned square centered at the local origin
//! and must keep a minimum pairwise distance `D`. Distance comparisons are
//! closed with a small absolute slack so that points sitting exactly on a
//! `D`-circle (the common case after a boundary projection) count as feasible.

use thiserror::Error;

use crate::Point;

/// Absolute slack for closed distance comparisons under floating point.
pub const DISTANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("region side must be positive, got {0}")]
    NonPositiveSide(f64),
    #[error("minimum distance must be positive, got {0}")]
    NonPositiveMinDistance(f64),
    #[error("region of side {side} cannot hold {count} antennas at spacing {min_distance}: hexagonal packing admits at most {bound}")]
    PackingInfeasible {
        side: f64,
        min_distance: f64,
        count: usize,
        bound: usize,
    },
}

/// Square placement region of a fluid array, centered at the local origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementRegion {
    /// Side length of the square (meters).
    pub side: f64,
    /// Minimum pairwise antenna distance `D` (meters).
    pub min_distance: f64,
}

impl PlacementRegion {
    pub fn new(side: f64, min_distance: f64) -> Result<Self, GeometryError> {
        if !(side > 0.0) {
            return Err(GeometryError::NonPositiveSide(side));
        }
        if !(min_distance > 0.0) {
            return Err(GeometryError::NonPositiveMinDistance(min_distance));
        }
        Ok(Self { side, min_distance })
    }

    /// Half the side length; coordinates live in `[-half, half]`.
    pub fn half(&self) -> f64 {
        0.5 * self.side
    }

    /// Closed membership test with the standard slack.
    pub fn contains(&self, p: &Point) -> bool {
        let h = self.half() + DISTANCE_SLACK;
        p.x.abs() <= h && p.y.abs() <= h
    }

    /// Largest antenna count the region can possibly hold at spacing `D`,
    /// from the hexagonal packing density bound: disks of radius `D/2`
    /// with centers in the square fit inside a square of side `side + D`.
    pub fn packing_bound(&self) -> usize {
        let a = self.side + self.min_distance;
        let d = self.min_distance;
        (2.0 * a * a / (3.0f64.sqrt() * d * d)).floor() as usize
    }

    /// Check that `count` antennas can be packed; used at scenario load.
    pub fn admits(&self, count: usize) -> Result<(), GeometryError> {
        let bound = self.packing_bound();
        if count > bound {
            return Err(GeometryError::PackingInfeasible {
                side: self.side,
                min_distance: self.min_distance,
                count,
                bound,
            });
        }
        Ok(())
    }
}

/// Ordered 2-D coordinates of all movable antennas on one side.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionVector {
    points: Vec<Point>,
}

impl PositionVector {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn set_point(&mut self, i: usize, p: Point) {
        self.points[i] = p;
    }

    /// All points inside `region` (closed comparison).
    pub fn inside(&self, region: &PlacementRegion) -> bool {
        self.points.iter().all(|p| region.contains(p))
    }
}

/// True iff all pairwise distances are at least `d` (with slack).
pub fn min_distance_satisfied(apv: &PositionVector, d: f64) -> bool {
    let pts = apv.points();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if (pts[i] - pts[j]).norm() < d - DISTANCE_SLACK {
                return false;
            }
        }
    }
    true
}

/// Euclidean projection of `p` onto the closed square region: clamp each
/// coordinate to `[-side/2, side/2]`.
pub fn project_to_square(p: &Point, region: &PlacementRegion) -> Point {
    let h = region.half();
    Point::new(p.x.clamp(-h, h), p.y.clamp(-h, h))
}

/// Balanced KD-tree over a fixed point set. Median split on alternating
/// axes; point sets here are tiny, so the tree is rebuilt per batch.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

#[derive(Debug, Clone)]
struct KdNode {
    point_idx: usize,
    left: Option<usize>,
    right: Option<usize>,
    axis: u8,
}

/// Build an index over `points`.
pub fn build_index(points: &PositionVector) -> SpatialIndex {
    let pts = points.points().to_vec();
    let mut nodes = Vec::with_capacity(pts.len());
    let mut order: Vec<usize> = (0..pts.len()).collect();
    let root = build_node(&pts, &mut order, 0, &mut nodes);
    SpatialIndex {
        points: pts,
        nodes,
        root,
    }
}

fn build_node(
    pts: &[Point],
    order: &mut [usize],
    depth: usize,
    nodes: &mut Vec<KdNode>,
) -> Option<usize> {
    if order.is_empty() {
        return None;
    }
    let axis = (depth % 2) as u8;
    order.sort_by(|&a, &b| {
        let (ka, kb) = (pts[a][axis as usize], pts[b][axis as usize]);
        ka.partial_cmp(&kb).unwrap()
    });
    let mid = order.len() / 2;
    let point_idx = order[mid];
    let node_idx = nodes.len();
    nodes.push(KdNode {
        point_idx,
        left: None,
        right: None,
        axis,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(pts, lo, depth + 1, nodes);
    let right = build_node(pts, &mut hi[1..], depth + 1, nodes);
    nodes[node_idx].left = left;
    nodes[node_idx].right = right;
    Some(node_idx)
}

impl SpatialIndex {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all stored points `p` with `‖p − center‖ ≤ radius`
    /// (inclusive boundary), sorted ascending.
    pub fn range_query(&self, center: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(root) = self.root {
            self.query_node(root, center, radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn query_node(&self, node_idx: usize, center: &Point, radius: f64, out: &mut Vec<usize>) {
        let node = &self.nodes[node_idx];
        let p = self.points[node.point_idx];
        if (p - center).norm() <= radius {
            out.push(node.point_idx);
        }
        let axis = node.axis as usize;
        let delta = center[axis] - p[axis];
        // The splitting plane passes through the node point; a subtree can be
        // skipped only when the plane is farther than the query radius.
        if delta <= radius {
            if let Some(left) = node.left {
                self.query_node(left, center, radius, out);
            }
        }
        if -delta <= radius {
            if let Some(right) = node.right {
                self.query_node(right, center, radius, out);
            }
        }
    }
}
