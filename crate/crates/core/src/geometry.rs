//! Plane-segment geometry.
//!
//! Planes are modelled as 2D line segments carrying a unit normal: the
//! infinite line satisfies `n · x + d = 0` and the segment marks the extent
//! actually observed. This module provides the closest-point form, the
//! flattening of raw 3D wall points into such segments, and the two cleanup
//! passes (duplicate merging, intersection splitting) that noisy detections
//! need before any relational reasoning.

use std::fmt;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Point2<f64>;
pub type Vec2 = Vector2<f64>;

/// Tolerance on `|n| - 1` accepted for input normals.
pub const UNIT_NORMAL_TOL: f64 = 1e-9;
/// Perpendicular distance below which a neighbouring endpoint cuts a segment.
pub const SPLIT_PERP_TOL: f64 = 0.3;
/// Split children narrower than this are discarded as slivers.
pub const MIN_SPLIT_WIDTH: f64 = 0.1;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("normal is not unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("points collapse to a single location along the plane")]
    DegenerateSegment,
    #[error("segment direction is not perpendicular to the normal (|n·t| = {0})")]
    SkewedNormal(f64),
}

/// Opaque plane identifier.
///
/// Merging joins the ancestor ids with `+`; splitting appends `#<child>`.
/// Ordering is lexicographic on the underlying string, which every
/// deterministic tie-break in the crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaneId(pub String);

impl PlaneId {
    pub fn new(id: impl Into<String>) -> Self {
        PlaneId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlaneId {
    fn from(value: &str) -> Self {
        PlaneId(value.to_owned())
    }
}

/// A raw planar detection: the fitted infinite plane plus its support points.
///
/// Points are 3D; the vertical axis is dropped during flattening, so only
/// walls (vertical planes) should be fed through this type.
#[derive(Debug, Clone)]
pub struct PlaneObservation {
    /// Unit normal of the fitted plane, already projected to the ground plane.
    pub normal: Vec2,
    /// Plane offset, `n · x + d = 0` for points `x` on the plane.
    pub offset_d: f64,
    /// Supporting points, `[x, y, z]`.
    pub points: Vec<[f64; 3]>,
}

/// A flattened plane segment with the derived quantities used everywhere
/// downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFeature {
    pub id: PlaneId,
    /// Unit normal; points away from the surface the plane was observed on.
    pub normal: Vec2,
    /// Segment length.
    pub width: f64,
    /// Segment midpoint.
    pub centroid: Point,
    pub endpoints: [Point; 2],
}

impl PlaneFeature {
    /// Builds a feature from its endpoints, deriving width and centroid.
    ///
    /// Fails if the normal is not unit length, the endpoints coincide, or the
    /// segment direction is not perpendicular to the normal.
    pub fn from_endpoints(
        id: PlaneId,
        normal: Vec2,
        e0: Point,
        e1: Point,
    ) -> Result<Self, GeometryError> {
        check_unit_normal(&normal)?;
        let chord = e1 - e0;
        let width = chord.norm();
        if width < 1e-12 {
            return Err(GeometryError::DegenerateSegment);
        }
        let skew = (normal.dot(&chord) / width).abs();
        if skew > 1e-6 {
            return Err(GeometryError::SkewedNormal(skew));
        }
        Ok(PlaneFeature {
            id,
            normal,
            width,
            centroid: Point::from((e0.coords + e1.coords) * 0.5),
            endpoints: [e0, e1],
        })
    }

    /// Unit vector along the segment, from `endpoints[0]` to `endpoints[1]`.
    pub fn direction(&self) -> Vec2 {
        (self.endpoints[1] - self.endpoints[0]).normalize()
    }

    /// Plane offset `d` such that `n · x + d = 0` on the line.
    pub fn offset(&self) -> f64 {
        -self.normal.dot(&self.centroid.coords)
    }

    /// Re-checks the internal invariants (unit normal, consistent width,
    /// centroid at the midpoint, normal perpendicular to the chord).
    pub fn validate(&self) -> Result<(), GeometryError> {
        let rebuilt = PlaneFeature::from_endpoints(
            self.id.clone(),
            self.normal,
            self.endpoints[0],
            self.endpoints[1],
        )?;
        if (rebuilt.width - self.width).abs() > 1e-9 * self.width.max(1.0)
            || (rebuilt.centroid - self.centroid).norm() > 1e-9
        {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(())
    }
}

fn check_unit_normal(normal: &Vec2) -> Result<(), GeometryError> {
    let norm = normal.norm();
    if (norm - 1.0).abs() > UNIT_NORMAL_TOL {
        return Err(GeometryError::NonUnitNormal(norm));
    }
    Ok(())
}

/// Rotates a vector by +90 degrees; used as the in-plane tangent direction.
fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// The point of the infinite plane closest to the origin, `-d · n`.
pub fn closest_point(normal: &Vec2, offset_d: f64) -> Result<Point, GeometryError> {
    check_unit_normal(normal)?;
    Ok(Point::from(normal * -offset_d))
}

/// Flattens a raw observation into a plane segment.
///
/// The vertical coordinate of every support point is dropped, the remaining
/// 2D points are projected onto the plane's line, and the extremal
/// projections become the segment endpoints. The result does not depend on
/// the order of the input points.
pub fn flatten_to_feature(
    id: PlaneId,
    obs: &PlaneObservation,
) -> Result<PlaneFeature, GeometryError> {
    check_unit_normal(&obs.normal)?;
    if obs.points.len() < 2 {
        return Err(GeometryError::TooFewPoints {
            needed: 2,
            got: obs.points.len(),
        });
    }
    let tangent = perp(&obs.normal);
    // The tangent passes through the closest point, so the tangential
    // coordinate of a point equals that of its projection onto the line.
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for p in &obs.points {
        let s = tangent.x * p[0] + tangent.y * p[1];
        s_min = s_min.min(s);
        s_max = s_max.max(s);
    }
    if s_max - s_min < 1e-12 {
        return Err(GeometryError::DegenerateSegment);
    }
    let origin = closest_point(&obs.normal, obs.offset_d)?;
    let e0 = origin + tangent * s_min;
    let e1 = origin + tangent * s_max;
    PlaneFeature::from_endpoints(id, obs.normal, e0, e1)
}

/// Thresholds deciding when two segments describe the same physical plane.
#[derive(Debug, Clone)]
pub struct DedupParams {
    /// Maximum angle between normals, radians.
    pub angle_tol: f64,
    /// Maximum difference of the plane offsets `d`, metres.
    pub offset_tol: f64,
    /// Maximum gap between the projected extents, metres.
    pub gap_tol: f64,
}

impl Default for DedupParams {
    fn default() -> Self {
        DedupParams {
            angle_tol: 5.0_f64.to_radians(),
            offset_tol: 0.10,
            gap_tol: 0.15,
        }
    }
}

/// Merges segments that describe the same physical plane.
///
/// Two segments merge when their normals agree within `angle_tol`, their
/// offsets within `offset_tol`, and their extents overlap or leave a gap
/// below `gap_tol`. Merging is transitive within a pass and the pass repeats
/// until no pair merges, so the result is idempotent. A merged segment takes
/// the width-weighted average plane and the union of the member extents; its
/// id joins the sorted member ids with `+`.
pub fn dedup_planes(planes: &[PlaneFeature], params: &DedupParams) -> Vec<PlaneFeature> {
    let mut current: Vec<PlaneFeature> = planes.to_vec();
    loop {
        let n = current.len();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if mergeable(&current[i], &current[j], params) {
                    uf.union(i, j);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            groups[uf.find(i)].push(i);
        }
        if groups.iter().all(|g| g.len() <= 1) {
            current.sort_by(|a, b| a.id.cmp(&b.id));
            return current;
        }
        let mut merged: Vec<PlaneFeature> = Vec::new();
        for group in groups.into_iter().filter(|g| !g.is_empty()) {
            let members: Vec<&PlaneFeature> = group.iter().map(|&i| &current[i]).collect();
            merged.push(merge_group(&members));
        }
        current = merged;
    }
}

fn mergeable(a: &PlaneFeature, b: &PlaneFeature, params: &DedupParams) -> bool {
    if a.normal.dot(&b.normal) < params.angle_tol.cos() {
        return false;
    }
    if (a.offset() - b.offset()).abs() > params.offset_tol {
        return false;
    }
    // Compare extents along a's tangent; within the angular tolerance the
    // frames differ too little to matter.
    let tangent = perp(&a.normal);
    let (a0, a1) = projected_extent(a, &tangent);
    let (b0, b1) = projected_extent(b, &tangent);
    let gap = (b0 - a1).max(a0 - b1).max(0.0);
    gap <= params.gap_tol
}

fn projected_extent(plane: &PlaneFeature, tangent: &Vec2) -> (f64, f64) {
    let s0 = tangent.dot(&plane.endpoints[0].coords);
    let s1 = tangent.dot(&plane.endpoints[1].coords);
    (s0.min(s1), s0.max(s1))
}

fn merge_group(members: &[&PlaneFeature]) -> PlaneFeature {
    if members.len() == 1 {
        return members[0].clone();
    }
    let total_width: f64 = members.iter().map(|m| m.width).sum();
    let mut normal = Vec2::zeros();
    let mut offset = 0.0;
    for m in members {
        normal += m.normal * m.width;
        offset += m.offset() * m.width;
    }
    let normal = normal.normalize();
    let offset = offset / total_width;
    let origin = Point::from(normal * -offset);
    let tangent = perp(&normal);
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for m in members {
        for e in &m.endpoints {
            let s = tangent.dot(&(e - origin));
            s_min = s_min.min(s);
            s_max = s_max.max(s);
        }
    }
    let mut components: Vec<&str> = members
        .iter()
        .flat_map(|m| m.id.as_str().split('+'))
        .collect();
    components.sort_unstable();
    components.dedup();
    let id = PlaneId::new(components.join("+"));
    PlaneFeature::from_endpoints(id, normal, origin + tangent * s_min, origin + tangent * s_max)
        .expect("merged segment spans its members and keeps a unit normal")
}

/// Splits segments where another segment's endpoint lands on them.
///
/// An endpoint of a different segment cuts a segment when it projects into
/// the interior and lies within [`SPLIT_PERP_TOL`] of the line. Children
/// narrower than [`MIN_SPLIT_WIDTH`] are dropped; the rest inherit the parent
/// normal and are named `<parent>#<k>` in order along the segment. Cut
/// positions are measured against the original input, so earlier splits do
/// not spawn new cuts.
pub fn split_planes(planes: &[PlaneFeature]) -> Vec<PlaneFeature> {
    let mut out = Vec::new();
    for (idx, target) in planes.iter().enumerate() {
        let tangent = target.direction();
        let base = target.endpoints[0];
        let offset = target.offset();
        let mut cuts: Vec<f64> = Vec::new();
        for (jdx, other) in planes.iter().enumerate() {
            if jdx == idx {
                continue;
            }
            for e in &other.endpoints {
                let perp_dist = (target.normal.dot(&e.coords) + offset).abs();
                if perp_dist >= SPLIT_PERP_TOL {
                    continue;
                }
                let s = tangent.dot(&(e - base));
                if s > 1e-9 && s < target.width - 1e-9 {
                    cuts.push(s);
                }
            }
        }
        if cuts.is_empty() {
            out.push(target.clone());
            continue;
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(&cuts);
        bounds.push(target.width);
        let mut child = 0usize;
        for pair in bounds.windows(2) {
            let (s0, s1) = (pair[0], pair[1]);
            if s1 - s0 <= MIN_SPLIT_WIDTH {
                continue;
            }
            let id = PlaneId::new(format!("{}#{}", target.id, child));
            child += 1;
            out.push(
                PlaneFeature::from_endpoints(
                    id,
                    target.normal,
                    base + tangent * s0,
                    base + tangent * s1,
                )
                .expect("split child keeps the parent's normal and direction"),
            );
        }
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(id: &str, normal: Vec2, e0: (f64, f64), e1: (f64, f64)) -> PlaneFeature {
        PlaneFeature::from_endpoints(
            PlaneId::new(id),
            normal,
            Point::new(e0.0, e0.1),
            Point::new(e1.0, e1.1),
        )
        .unwrap()
    }

    #[test]
    fn closest_point_lies_on_plane_and_along_normal() {
        let n = Vec2::new(0.6, 0.8);
        let d = -2.5;
        let p = closest_point(&n, d).unwrap();
        assert_relative_eq!(n.dot(&p.coords) + d, 0.0, epsilon = 1e-12);
        // p is parallel to n: cross product vanishes.
        assert_relative_eq!(n.x * p.y - n.y * p.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closest_point_rejects_non_unit_normal() {
        let err = closest_point(&Vec2::new(1.0, 1.0), 0.0).unwrap_err();
        assert!(matches!(err, GeometryError::NonUnitNormal(_)));
    }

    #[test]
    fn flatten_recovers_exact_segment() {
        // Points on the line x = 3 (normal pointing -x), heights mixed in.
        let obs = PlaneObservation {
            normal: Vec2::new(-1.0, 0.0),
            offset_d: 3.0,
            points: vec![[3.0, 1.0, 0.3], [3.0, 4.0, 2.1], [3.0, 2.2, 1.0]],
        };
        let f = flatten_to_feature(PlaneId::new("p"), &obs).unwrap();
        assert_relative_eq!(f.width, 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.centroid.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.centroid.y, 2.5, epsilon = 1e-12);
        for e in &f.endpoints {
            assert_relative_eq!(f.normal.dot(&e.coords) + obs.offset_d, 0.0, epsilon = 1e-12);
        }
    }

    /// Total-least-squares line fit used as an independent check on
    /// flattening of noisy observations.
    fn tls_fit(points: &[[f64; 3]]) -> (Vec2, Point, f64) {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
        let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
        for p in points {
            let (dx, dy) = (p[0] - mx, p[1] - my);
            cxx += dx * dx;
            cxy += dx * dy;
            cyy += dy * dy;
        }
        let angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        let dir = Vec2::new(angle.cos(), angle.sin());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            let s = dir.x * (p[0] - mx) + dir.y * (p[1] - my);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (dir, Point::new(mx, my), hi - lo)
    }

    #[test]
    fn flatten_tracks_least_squares_fit_on_noisy_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let normal = Vec2::new(angle.cos(), angle.sin());
            let tangent = perp(&normal);
            let d: f64 = rng.random_range(-5.0..5.0);
            let origin = Point::from(normal * -d);
            let half = rng.random_range(1.0..4.0);
            let points: Vec<[f64; 3]> = (0..60)
                .map(|k| {
                    let s = -half + 2.0 * half * (k as f64) / 59.0;
                    let noise = rng.random_range(-0.01..0.01);
                    let p = origin + tangent * s + normal * noise;
                    [p.x, p.y, rng.random_range(0.0..3.0)]
                })
                .collect();
            let obs = PlaneObservation {
                normal,
                offset_d: d,
                points: points.clone(),
            };
            let f = flatten_to_feature(PlaneId::new("n"), &obs).unwrap();
            let (dir, center, span) = tls_fit(&points);
            assert!((f.width - span).abs() < 0.05, "width {} vs {}", f.width, span);
            assert!((f.centroid - center).norm() < 0.05);
            assert!(f.direction().dot(&dir).abs() > 0.999);
        }
    }

    #[test]
    fn flatten_rejects_degenerate_input() {
        let obs = PlaneObservation {
            normal: Vec2::new(1.0, 0.0),
            offset_d: 0.0,
            points: vec![[0.0, 1.0, 0.0]],
        };
        assert!(matches!(
            flatten_to_feature(PlaneId::new("p"), &obs),
            Err(GeometryError::TooFewPoints { .. })
        ));
        let obs = PlaneObservation {
            normal: Vec2::new(1.0, 0.0),
            offset_d: 0.0,
            points: vec![[0.0, 1.0, 0.0], [0.3, 1.0, 2.0]],
        };
        assert!(matches!(
            flatten_to_feature(PlaneId::new("p"), &obs),
            Err(GeometryError::DegenerateSegment)
        ));
    }

    #[test]
    fn dedup_merges_collinear_fragments_with_union_extent() {
        let a = seg("a", Vec2::new(0.0, 1.0), (0.0, 0.0), (2.0, 0.0));
        let b = seg("b", Vec2::new(0.0, 1.0), (2.1, 0.0), (4.0, 0.0));
        let out = dedup_planes(&[a, b], &DedupParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id.as_str(), "a+b");
        assert_relative_eq!(out[0].width, 4.0, epsilon = 1e-9);
        assert_relative_eq!(out[0].centroid.x, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn dedup_respects_gap_offset_and_angle_limits() {
        let params = DedupParams::default();
        let base = seg("a", Vec2::new(0.0, 1.0), (0.0, 0.0), (2.0, 0.0));
        // Gap too wide.
        let far = seg("b", Vec2::new(0.0, 1.0), (2.2, 0.0), (4.0, 0.0));
        assert_eq!(dedup_planes(&[base.clone(), far], &params).len(), 2);
        // Offset too different.
        let lifted = seg("b", Vec2::new(0.0, 1.0), (0.0, 0.2), (2.0, 0.2));
        assert_eq!(dedup_planes(&[base.clone(), lifted], &params).len(), 2);
        // Normal rotated past the angle tolerance.
        let t = 8.0_f64.to_radians();
        let rot = seg(
            "b",
            Vec2::new(-t.sin(), t.cos()),
            (2.05, 0.0),
            (2.05 + 2.0 * t.cos(), 2.0 * t.sin()),
        );
        assert_eq!(dedup_planes(&[base, rot], &params).len(), 2);
    }

    #[test]
    fn dedup_chains_transitively() {
        // a-b and b-c mergeable, a-c not directly (gap too large); one plane
        // must still come out.
        let a = seg("a", Vec2::new(0.0, 1.0), (0.0, 0.0), (1.0, 0.0));
        let b = seg("b", Vec2::new(0.0, 1.0), (1.1, 0.0), (2.1, 0.0));
        let c = seg("c", Vec2::new(0.0, 1.0), (2.2, 0.0), (3.2, 0.0));
        let out = dedup_planes(&[a, b, c], &DedupParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id.as_str(), "a+b+c");
        assert_relative_eq!(out[0].width, 3.2, epsilon = 1e-9);
    }

    #[test]
    fn split_cuts_at_interior_junction() {
        // A long wall with a perpendicular wall ending on its middle.
        let long = seg("w", Vec2::new(0.0, 1.0), (0.0, 0.0), (6.0, 0.0));
        let stub = seg("s", Vec2::new(1.0, 0.0), (3.0, 0.05), (3.0, 2.0));
        let out = split_planes(&[long, stub.clone()]);
        let children: Vec<&PlaneFeature> =
            out.iter().filter(|p| p.id.as_str().starts_with("w#")).collect();
        assert_eq!(children.len(), 2);
        assert_eq!(children[0].id.as_str(), "w#0");
        assert_eq!(children[1].id.as_str(), "w#1");
        assert_relative_eq!(children[0].width, 3.0, epsilon = 1e-9);
        assert_relative_eq!(children[1].width, 3.0, epsilon = 1e-9);
        for c in &children {
            assert_relative_eq!(c.normal.x, 0.0, epsilon = 1e-12);
            assert_relative_eq!(c.normal.y, 1.0, epsilon = 1e-12);
        }
        // The stub's far endpoint is too far from the long wall to cut it,
        // and nothing cuts the stub interior; the stub survives intact.
        assert!(out.iter().any(|p| p.id == stub.id && p.width == stub.width));
    }

    #[test]
    fn split_ignores_far_endpoints_and_drops_slivers() {
        let long = seg("w", Vec2::new(0.0, 1.0), (0.0, 0.0), (6.0, 0.0));
        // Endpoint 0.4 above the line: outside the perpendicular tolerance.
        let far = seg("f", Vec2::new(1.0, 0.0), (3.0, 0.4), (3.0, 2.0));
        let out = split_planes(&[long.clone(), far]);
        assert!(out.iter().any(|p| p.id.as_str() == "w" && p.width == 6.0));
        // Endpoint 0.05 in from the end: the short child is a sliver.
        let near_end = seg("f", Vec2::new(1.0, 0.0), (5.95, 0.05), (5.95, 2.0));
        let out = split_planes(&[long, near_end]);
        let w_children: Vec<&PlaneFeature> = out
            .iter()
            .filter(|p| p.id.as_str().starts_with("w"))
            .collect();
        assert_eq!(w_children.len(), 1);
        assert_eq!(w_children[0].id.as_str(), "w#0");
        assert_relative_eq!(w_children[0].width, 5.95, epsilon = 1e-9);
    }

    fn random_segments(seed: u64, n: usize) -> Vec<PlaneFeature> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let normal = Vec2::new(angle.cos(), angle.sin());
                let tangent = perp(&normal);
                let origin = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                let half: f64 = rng.random_range(0.3..3.0);
                PlaneFeature::from_endpoints(
                    PlaneId::new(format!("p{i:02}")),
                    normal,
                    origin - tangent * half,
                    origin + tangent * half,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn dedup_is_idempotent_on_random_inputs() {
        for seed in 0..30 {
            let planes = random_segments(seed, 12);
            let params = DedupParams::default();
            let once = dedup_planes(&planes, &params);
            let twice = dedup_planes(&once, &params);
            assert_eq!(once, twice, "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn flatten_is_permutation_invariant(seed in 0u64..500, rot in 0usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let normal = Vec2::new(angle.cos(), angle.sin());
            let tangent = perp(&normal);
            let d: f64 = rng.random_range(-4.0..4.0);
            let origin = Point::from(normal * -d);
            let points: Vec<[f64; 3]> = (0..8)
                .map(|_| {
                    let s: f64 = rng.random_range(-3.0..3.0);
                    let p = origin + tangent * s;
                    [p.x, p.y, rng.random_range(0.0..2.5)]
                })
                .collect();
            let mut shuffled = points.clone();
            let shift = rot % points.len();
            shuffled.rotate_left(shift);
            let obs = |pts: Vec<[f64; 3]>| PlaneObservation { normal, offset_d: d, points: pts };
            let a = flatten_to_feature(PlaneId::new("p"), &obs(points));
            let b = flatten_to_feature(PlaneId::new("p"), &obs(shuffled));
            match (a, b) {
                (Ok(fa), Ok(fb)) => prop_assert_eq!(fa, fb),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one ordering flattened, the other failed"),
            }
        }

        #[test]
        fn split_children_partition_their_parent(seed in 0u64..200) {
            let planes = random_segments(seed, 8);
            let out = split_planes(&planes);
            // Children of one parent are contiguous, ordered, disjoint, and
            // inside the parent extent.
            for parent in &planes {
                let children: Vec<&PlaneFeature> = out
                    .iter()
                    .filter(|p| {
                        p.id == parent.id
                            || p.id.as_str().starts_with(&format!("{}#", parent.id))
                    })
                    .collect();
                prop_assert!(!children.is_empty() || parent.width <= MIN_SPLIT_WIDTH + 2e-9);
                let tangent = parent.direction();
                let base = parent.endpoints[0];
                let mut last_end = -1e-9;
                let mut covered = 0.0;
                for c in &children {
                    prop_assert!(c.normal.dot(&parent.normal) > 1.0 - 1e-9);
                    let s0 = tangent.dot(&(c.endpoints[0] - base));
                    let s1 = tangent.dot(&(c.endpoints[1] - base));
                    prop_assert!(s0 >= last_end - 1e-9);
                    prop_assert!(s1 <= parent.width + 1e-9);
                    prop_assert!(c.width > MIN_SPLIT_WIDTH);
                    last_end = s1;
                    covered += c.width;
                }
                prop_assert!(covered <= parent.width + 1e-6);
            }
        }
    }
}
