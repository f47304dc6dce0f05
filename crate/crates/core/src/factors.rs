//! Room/wall nodes and the least-squares refinement over planes and centers.
//!
//! Planes are parameterized as (θ, d) with normal n = (cos θ, sin θ) and the
//! plane equation n·p + d = 0, which keeps normals unit-length without
//! constraints. Each room or wall node ties its center to the midlines of
//! anti-parallel plane pairs; [`SceneFactorGraph::refine`] runs
//! Levenberg-damped Gauss–Newton over the stacked weighted residuals.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2};
use thiserror::Error;

use crate::geometry::{PlaneFeature, PlaneId, Point, Vec2};

/// Pairing two planes requires their normal dot product below this.
pub const PAIR_DOT_MAX: f64 = -0.7;
/// Wall members must oppose more sharply than room pairs.
pub const WALL_DOT_MAX: f64 = -0.9;
/// Two-plane rooms tolerate anti-parallelism up to 25 degrees off.
const ROOM2_MAX_OFF_ANGLE: f64 = 25.0 * std::f64::consts::PI / 180.0;
/// Refinement stops once the accepted step is this small.
const STEP_TOL: f64 = 1e-10;
/// Damping past this is treated as an unsolvable system.
const DAMPING_MAX: f64 = 1e12;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("room has no member planes")]
    EmptyRoom,
    #[error("degenerate room: {0}")]
    DegenerateRoom(String),
    #[error("information matrix is not symmetric positive-definite")]
    BadInformation,
    #[error("unknown plane id {0}")]
    UnknownPlane(PlaneId),
    #[error("duplicate plane id {0}")]
    DuplicatePlane(PlaneId),
    #[error(
        "normal equations of dimension {dim} remained singular with damping up to {damping:.3e}"
    )]
    SingularSystem { dim: usize, damping: f64 },
}

/// One plane's optimizable parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneVar {
    pub theta: f64,
    /// Offset in n·p + d = 0.
    pub d: f64,
}

impl PlaneVar {
    pub fn new(theta: f64, d: f64) -> Self {
        PlaneVar { theta, d }
    }

    pub fn normal(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    pub fn from_feature(feature: &PlaneFeature) -> Self {
        PlaneVar {
            theta: feature.normal.y.atan2(feature.normal.x),
            d: feature.offset(),
        }
    }
}

fn information_ok(m: &Matrix2<f64>) -> bool {
    let scale = 1.0 + m.amax();
    (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-9 * scale
        && m[(0, 0)] > 0.0
        && m.determinant() > 0.0
}

/// Mean of the member planes' centroids; the initializer for every node
/// center.
pub fn room_center(plane_ids: &[PlaneId], planes: &[PlaneFeature]) -> Result<Point, FactorError> {
    if plane_ids.is_empty() {
        return Err(FactorError::EmptyRoom);
    }
    let mut sum = Vec2::zeros();
    for id in plane_ids {
        let plane = planes
            .iter()
            .find(|p| &p.id == id)
            .ok_or_else(|| FactorError::UnknownPlane(id.clone()))?;
        sum += plane.centroid.coords;
    }
    Ok(Point::from(sum / plane_ids.len() as f64))
}

/// A four-plane room candidate in the factor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomNode4 {
    pub center: Point,
    pub plane_ids: [PlaneId; 4],
    pub information: Matrix2<f64>,
}

impl RoomNode4 {
    pub fn new(
        center: Point,
        plane_ids: [PlaneId; 4],
        information: Matrix2<f64>,
    ) -> Result<Self, FactorError> {
        if !information_ok(&information) {
            return Err(FactorError::BadInformation);
        }
        Ok(RoomNode4 {
            center,
            plane_ids,
            information,
        })
    }
}

/// A two-plane room candidate; `anchor` pins the free direction along the
/// pair midline and is held fixed during refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomNode2 {
    pub center: Point,
    pub plane_ids: [PlaneId; 2],
    pub anchor: Point,
    pub information: Matrix2<f64>,
}

impl RoomNode2 {
    pub fn new(
        center: Point,
        plane_ids: [PlaneId; 2],
        anchor: Point,
        normals: [Vec2; 2],
        information: Matrix2<f64>,
    ) -> Result<Self, FactorError> {
        if !information_ok(&information) {
            return Err(FactorError::BadInformation);
        }
        if normals[0].dot(&normals[1]) >= -ROOM2_MAX_OFF_ANGLE.cos() {
            return Err(FactorError::DegenerateRoom(
                "two-plane room members must be anti-parallel within 25 degrees".to_owned(),
            ));
        }
        Ok(RoomNode2 {
            center,
            plane_ids,
            anchor,
            information,
        })
    }
}

/// A paired wall surface.
#[derive(Debug, Clone, PartialEq)]
pub struct WallNode {
    pub center: Point,
    pub plane_ids: [PlaneId; 2],
    /// Mean of the member centroids, held fixed during refinement.
    pub anchor: Point,
    pub information: Matrix2<f64>,
}

impl WallNode {
    pub fn new(
        center: Point,
        plane_ids: [PlaneId; 2],
        anchor: Point,
        normals: [Vec2; 2],
        information: Matrix2<f64>,
    ) -> Result<Self, FactorError> {
        if !information_ok(&information) {
            return Err(FactorError::BadInformation);
        }
        if normals[0].dot(&normals[1]) >= WALL_DOT_MAX {
            return Err(FactorError::DegenerateRoom(
                "wall members must oppose with normal dot below -0.9".to_owned(),
            ));
        }
        Ok(WallNode {
            center,
            plane_ids,
            anchor,
            information,
        })
    }
}

/// A residual plus its Jacobian blocks.
///
/// `wrt_planes[k]` differentiates the residual against input plane `k`, with
/// column 0 for θ and column 1 for d; `wrt_center` is always the identity
/// because the residual is center-minus-prediction.
#[derive(Debug, Clone)]
pub struct Residual2<const N: usize> {
    pub value: Vec2,
    pub wrt_center: Matrix2<f64>,
    pub wrt_planes: [Matrix2<f64>; N],
}

/// Angle in [0, 2π) used to pick a deterministic pair reference.
fn angle_key(n: Vec2) -> f64 {
    let a = n.y.atan2(n.x);
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// The three perfect matchings of four planes; the most anti-parallel one
/// wins, and every pair must clear the dot threshold.
fn best_antiparallel_pairing(normals: &[Vec2; 4]) -> Option<[[usize; 2]; 2]> {
    const MATCHINGS: [[[usize; 2]; 2]; 3] = [
        [[0, 1], [2, 3]],
        [[0, 2], [1, 3]],
        [[0, 3], [1, 2]],
    ];
    MATCHINGS
        .into_iter()
        .map(|m| {
            let score: f64 = m
                .iter()
                .map(|&[i, j]| normals[i].dot(&normals[j]))
                .sum();
            (score, m)
        })
        .filter(|(_, m)| {
            m.iter()
                .all(|&[i, j]| normals[i].dot(&normals[j]) < PAIR_DOT_MAX)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, m)| m)
}

/// Accumulates one pair's midline term ((d_b − d_a)/2)·n_a into `f` and the
/// plane Jacobian blocks of the residual (center − f).
fn midline_term(
    planes: [(usize, &PlaneVar); 2],
    f: &mut Vec2,
    wrt_planes: &mut [Matrix2<f64>],
) {
    // Reference the member with the smaller normal angle so the result does
    // not depend on input order.
    let [(ia, pa), (ib, pb)] = if angle_key(planes[0].1.normal()) <= angle_key(planes[1].1.normal())
    {
        planes
    } else {
        [planes[1], planes[0]]
    };
    let na = pa.normal();
    let na_perp = Vec2::new(-na.y, na.x);
    let half = (pb.d - pa.d) / 2.0;
    *f += half * na;
    // residual = center − f, so each block is −∂f/∂(θ, d).
    wrt_planes[ia].set_column(0, &(-half * na_perp));
    wrt_planes[ia].set_column(1, &(0.5 * na));
    wrt_planes[ib].set_column(1, &(-0.5 * na));
}

/// Residual of a four-plane room: center minus the intersection of the two
/// pair midlines.
///
/// Planes are matched into anti-parallel pairs by most-negative normal dot
/// product; the value is invariant under input permutation.
pub fn residual_room4(
    center: &Point,
    planes: &[PlaneVar; 4],
) -> Result<Residual2<4>, FactorError> {
    let normals = [
        planes[0].normal(),
        planes[1].normal(),
        planes[2].normal(),
        planes[3].normal(),
    ];
    let pairing = best_antiparallel_pairing(&normals).ok_or_else(|| {
        FactorError::DegenerateRoom(
            "four-plane room has no anti-parallel pairing with dot below -0.7".to_owned(),
        )
    })?;
    let mut f = Vec2::zeros();
    let mut wrt_planes = [Matrix2::zeros(); 4];
    for [i, j] in pairing {
        midline_term([(i, &planes[i]), (j, &planes[j])], &mut f, &mut wrt_planes);
    }
    Ok(Residual2 {
        value: center.coords - f,
        wrt_center: Matrix2::identity(),
        wrt_planes,
    })
}

/// Residual of a two-plane room: center minus the anchor's projection onto
/// the pair midline, f = p − (n_a·p − (d_b − d_a)/2)·n_a.
pub fn residual_room2(
    center: &Point,
    a: &PlaneVar,
    b: &PlaneVar,
    anchor: &Point,
) -> Result<Residual2<2>, FactorError> {
    let (na, nb) = (a.normal(), b.normal());
    if na.dot(&nb) >= PAIR_DOT_MAX {
        return Err(FactorError::DegenerateRoom(
            "two-plane pair is not anti-parallel (normal dot must fall below -0.7)".to_owned(),
        ));
    }
    let ((ia, pa), (ib, pb)) = if angle_key(na) <= angle_key(nb) {
        ((0usize, a), (1usize, b))
    } else {
        ((1usize, b), (0usize, a))
    };
    let na = pa.normal();
    let na_perp = Vec2::new(-na.y, na.x);
    let p = anchor.coords;
    let s = na.dot(&p) - (pb.d - pa.d) / 2.0;
    let f = p - s * na;
    let mut wrt_planes = [Matrix2::zeros(); 2];
    // ∂f/∂θ_a = −(n_a'·p)·n_a − s·n_a'; residual negates it.
    wrt_planes[ia].set_column(0, &(na_perp.dot(&p) * na + s * na_perp));
    // ∂f/∂d_a = −n_a/2 and ∂f/∂d_b = n_a/2, negated for the residual.
    wrt_planes[ia].set_column(1, &(0.5 * na));
    wrt_planes[ib].set_column(1, &(-0.5 * na));
    Ok(Residual2 {
        value: center.coords - f,
        wrt_center: Matrix2::identity(),
        wrt_planes,
    })
}

/// Wall residual: the two-plane form with the anchor fixed at the mean of
/// the member centroids.
pub fn residual_wall(
    center: &Point,
    a: &PlaneVar,
    b: &PlaneVar,
    centroid_a: &Point,
    centroid_b: &Point,
) -> Result<Residual2<2>, FactorError> {
    let anchor = Point::from((centroid_a.coords + centroid_b.coords) / 2.0);
    residual_room2(center, a, b, &anchor)
}

/// Settings for [`SceneFactorGraph::refine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Initial Levenberg damping added to the normal-equation diagonal.
    pub damping: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iterations: 50,
            damping: 1e-6,
        }
    }
}

/// What a refinement run did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Accepted Gauss–Newton steps.
    pub iterations: usize,
    /// Whether the step norm fell below tolerance.
    pub converged: bool,
}

/// Plane variables, node centers, and the factors binding them.
#[derive(Debug, Clone, Default)]
pub struct SceneFactorGraph {
    plane_ids: Vec<PlaneId>,
    plane_vars: Vec<PlaneVar>,
    priors: Vec<(usize, PlaneVar, Matrix2<f64>)>,
    rooms4: Vec<(RoomNode4, [usize; 4])>,
    rooms2: Vec<(RoomNode2, [usize; 2])>,
    walls: Vec<(WallNode, [usize; 2])>,
}

impl SceneFactorGraph {
    pub fn new() -> Self {
        SceneFactorGraph::default()
    }

    pub fn add_plane(&mut self, id: PlaneId, var: PlaneVar) -> Result<usize, FactorError> {
        if self.plane_ids.contains(&id) {
            return Err(FactorError::DuplicatePlane(id));
        }
        self.plane_ids.push(id);
        self.plane_vars.push(var);
        Ok(self.plane_vars.len() - 1)
    }

    /// Anchors a plane to its measured parameters with the given weight.
    pub fn add_plane_prior(
        &mut self,
        id: &PlaneId,
        measured: PlaneVar,
        information: Matrix2<f64>,
    ) -> Result<(), FactorError> {
        if !information_ok(&information) {
            return Err(FactorError::BadInformation);
        }
        let index = self.plane_index(id)?;
        self.priors.push((index, measured, information));
        Ok(())
    }

    pub fn add_room4(&mut self, node: RoomNode4) -> Result<(), FactorError> {
        let indices = [
            self.plane_index(&node.plane_ids[0])?,
            self.plane_index(&node.plane_ids[1])?,
            self.plane_index(&node.plane_ids[2])?,
            self.plane_index(&node.plane_ids[3])?,
        ];
        // Reject rooms that cannot pair up front instead of mid-refinement.
        residual_room4(&node.center, &indices.map(|i| self.plane_vars[i]))?;
        self.rooms4.push((node, indices));
        Ok(())
    }

    pub fn add_room2(&mut self, node: RoomNode2) -> Result<(), FactorError> {
        let indices = [
            self.plane_index(&node.plane_ids[0])?,
            self.plane_index(&node.plane_ids[1])?,
        ];
        residual_room2(
            &node.center,
            &self.plane_vars[indices[0]],
            &self.plane_vars[indices[1]],
            &node.anchor,
        )?;
        self.rooms2.push((node, indices));
        Ok(())
    }

    pub fn add_wall(&mut self, node: WallNode) -> Result<(), FactorError> {
        let indices = [
            self.plane_index(&node.plane_ids[0])?,
            self.plane_index(&node.plane_ids[1])?,
        ];
        residual_room2(
            &node.center,
            &self.plane_vars[indices[0]],
            &self.plane_vars[indices[1]],
            &node.anchor,
        )?;
        self.walls.push((node, indices));
        Ok(())
    }

    pub fn plane(&self, id: &PlaneId) -> Option<&PlaneVar> {
        self.plane_ids
            .iter()
            .position(|p| p == id)
            .map(|i| &self.plane_vars[i])
    }

    /// All plane variables with their ids, in insertion order.
    pub fn planes(&self) -> impl Iterator<Item = (&PlaneId, &PlaneVar)> {
        self.plane_ids.iter().zip(&self.plane_vars)
    }

    pub fn rooms4(&self) -> impl Iterator<Item = &RoomNode4> {
        self.rooms4.iter().map(|(node, _)| node)
    }

    pub fn rooms2(&self) -> impl Iterator<Item = &RoomNode2> {
        self.rooms2.iter().map(|(node, _)| node)
    }

    pub fn walls(&self) -> impl Iterator<Item = &WallNode> {
        self.walls.iter().map(|(node, _)| node)
    }

    fn plane_index(&self, id: &PlaneId) -> Result<usize, FactorError> {
        self.plane_ids
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| FactorError::UnknownPlane(id.clone()))
    }

    fn dim(&self) -> usize {
        2 * (self.plane_vars.len() + self.rooms4.len() + self.rooms2.len() + self.walls.len())
    }

    fn room4_offset(&self, k: usize) -> usize {
        2 * (self.plane_vars.len() + k)
    }

    fn room2_offset(&self, k: usize) -> usize {
        2 * (self.plane_vars.len() + self.rooms4.len() + k)
    }

    fn wall_offset(&self, k: usize) -> usize {
        2 * (self.plane_vars.len() + self.rooms4.len() + self.rooms2.len() + k)
    }

    /// Every factor's (residual, information, variable blocks).
    fn evaluate(&self) -> Result<Vec<(Vec2, Matrix2<f64>, Vec<(usize, Matrix2<f64>)>)>, FactorError>
    {
        let mut out = Vec::new();
        for &(index, measured, information) in &self.priors {
            let var = &self.plane_vars[index];
            let dtheta = wrap_angle(var.theta - measured.theta);
            out.push((
                Vec2::new(dtheta, var.d - measured.d),
                information,
                vec![(2 * index, Matrix2::identity())],
            ));
        }
        for (k, (node, indices)) in self.rooms4.iter().enumerate() {
            let res = residual_room4(&node.center, &indices.map(|i| self.plane_vars[i]))?;
            let mut blocks = vec![(self.room4_offset(k), res.wrt_center)];
            for (slot, &i) in indices.iter().enumerate() {
                blocks.push((2 * i, res.wrt_planes[slot]));
            }
            out.push((res.value, node.information, blocks));
        }
        for (k, (node, indices)) in self.rooms2.iter().enumerate() {
            let res = residual_room2(
                &node.center,
                &self.plane_vars[indices[0]],
                &self.plane_vars[indices[1]],
                &node.anchor,
            )?;
            let blocks = vec![
                (self.room2_offset(k), res.wrt_center),
                (2 * indices[0], res.wrt_planes[0]),
                (2 * indices[1], res.wrt_planes[1]),
            ];
            out.push((res.value, node.information, blocks));
        }
        for (k, (node, indices)) in self.walls.iter().enumerate() {
            let res = residual_room2(
                &node.center,
                &self.plane_vars[indices[0]],
                &self.plane_vars[indices[1]],
                &node.anchor,
            )?;
            let blocks = vec![
                (self.wall_offset(k), res.wrt_center),
                (2 * indices[0], res.wrt_planes[0]),
                (2 * indices[1], res.wrt_planes[1]),
            ];
            out.push((res.value, node.information, blocks));
        }
        Ok(out)
    }

    /// Sum of rᵀΛr over all factors.
    pub fn cost(&self) -> Result<f64, FactorError> {
        Ok(self
            .evaluate()?
            .iter()
            .map(|(r, info, _)| (r.transpose() * info * r)[(0, 0)])
            .sum())
    }

    fn apply_step(&mut self, step: &DVector<f64>) {
        for (i, var) in self.plane_vars.iter_mut().enumerate() {
            var.theta += step[2 * i];
            var.d += step[2 * i + 1];
        }
        for (k, (node, _)) in self.rooms4.iter_mut().enumerate() {
            let o = 2 * (self.plane_vars.len() + k);
            node.center.x += step[o];
            node.center.y += step[o + 1];
        }
        let rooms2_base = self.plane_vars.len() + self.rooms4.len();
        for (k, (node, _)) in self.rooms2.iter_mut().enumerate() {
            let o = 2 * (rooms2_base + k);
            node.center.x += step[o];
            node.center.y += step[o + 1];
        }
        let walls_base = rooms2_base + self.rooms2.len();
        for (k, (node, _)) in self.walls.iter_mut().enumerate() {
            let o = 2 * (walls_base + k);
            node.center.x += step[o];
            node.center.y += step[o + 1];
        }
    }

    /// Levenberg-damped Gauss–Newton over all variables.
    ///
    /// Steps are accepted only when the cost does not increase; rejected
    /// steps raise the damping tenfold and accepted ones relax it. Stops on
    /// a step norm below 1e-10 or the iteration cap.
    pub fn refine(&mut self, config: &RefineConfig) -> Result<RefineReport, FactorError> {
        let dim = self.dim();
        let mut cost = self.cost()?;
        let initial_cost = cost;
        let mut damping = config.damping.max(1e-12);
        let mut iterations = 0;
        let mut converged = dim == 0;
        'outer: for _ in 0..config.max_iterations {
            let factors = self.evaluate()?;
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            let mut g = DVector::<f64>::zeros(dim);
            for (r, info, blocks) in &factors {
                for &(col_a, ja) in blocks {
                    let jt_info = ja.transpose() * info;
                    let jt_info_r = jt_info * r;
                    g[col_a] += jt_info_r[0];
                    g[col_a + 1] += jt_info_r[1];
                    for &(col_b, jb) in blocks {
                        let block = jt_info * jb;
                        for a in 0..2 {
                            for b in 0..2 {
                                h[(col_a + a, col_b + b)] += block[(a, b)];
                            }
                        }
                    }
                }
            }
            loop {
                let mut damped = h.clone();
                for i in 0..dim {
                    damped[(i, i)] += damping;
                }
                let Some(chol) = Cholesky::new(damped) else {
                    damping *= 10.0;
                    if damping > DAMPING_MAX {
                        return Err(FactorError::SingularSystem { dim, damping });
                    }
                    continue;
                };
                let step = chol.solve(&(-&g));
                if step.norm() < STEP_TOL {
                    converged = true;
                    break 'outer;
                }
                let mut candidate = self.clone();
                candidate.apply_step(&step);
                let candidate_cost = candidate.cost()?;
                if candidate_cost <= cost {
                    *self = candidate;
                    cost = candidate_cost;
                    iterations += 1;
                    damping = (damping / 10.0).max(1e-12);
                    break;
                }
                damping *= 10.0;
                if damping > DAMPING_MAX {
                    // Solvable but not improvable: a flat or stalled spot.
                    break 'outer;
                }
            }
        }
        Ok(RefineReport {
            initial_cost,
            final_cost: cost,
            iterations,
            converged,
        })
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    (a + PI).rem_euclid(2.0 * PI) - PI
}
