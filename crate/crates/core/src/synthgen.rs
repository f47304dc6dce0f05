//! Seeded synthetic floorplan generation.
//!
//! Layouts are built on a jittered grid: rooms occupy grid cells, optional
//! corridor rows separate room rows, and neighbouring rooms either share a
//! thin partition — producing a wall, i.e. two anti-parallel planes a few
//! centimetres apart — or stand apart behind thicker structural walls.
//! Corridors are rooms with only their two long sides observed. All
//! randomness flows through a single seeded generator, so a config
//! reproduces its layout bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use nalgebra::Rotation2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PlaneFeature, PlaneId, Point, Vec2};

/// Label carried by a ground-truth edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    SameRoom,
    SameWall,
    None,
}

/// A directed labeled edge between two planes.
#[derive(Debug, Clone, PartialEq)]
pub struct GtEdge {
    pub src: PlaneId,
    pub dst: PlaneId,
    pub label: EdgeLabel,
}

/// A room entity: its center and the planes bounding it.
#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub id: String,
    /// Mean of the member planes' centroids.
    pub center: Point,
    /// Sorted member plane ids.
    pub plane_ids: Vec<PlaneId>,
}

/// A wall entity: two anti-parallel planes forming the faces of one wall.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub id: String,
    /// Midpoint of the two plane centroids.
    pub center: Point,
    /// Sorted pair of member plane ids.
    pub plane_ids: [PlaneId; 2],
}

/// A complete synthetic scene: planes plus ground-truth entities and edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub planes: Vec<PlaneFeature>,
    pub rooms: Vec<Room>,
    pub walls: Vec<Wall>,
    pub gt_edges: Vec<GtEdge>,
}

impl Layout {
    pub fn plane(&self, id: &PlaneId) -> Option<&PlaneFeature> {
        self.planes.iter().find(|p| &p.id == id)
    }

    /// Checks the structural invariants: unique plane ids, every plane in
    /// exactly one room, walls referencing two existing planes with
    /// anti-parallel normals, room plane counts in {2, 4}, room centers at
    /// the mean of their planes' centroids, and symmetric edge labels.
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidLayout(msg));
        let mut ids = BTreeSet::new();
        for p in &self.planes {
            if !ids.insert(&p.id) {
                return bad(format!("duplicate plane id {}", p.id));
            }
        }
        let mut in_room: BTreeSet<&PlaneId> = BTreeSet::new();
        for room in &self.rooms {
            if room.plane_ids.len() != 2 && room.plane_ids.len() != 4 {
                return bad(format!(
                    "room {} has {} planes",
                    room.id,
                    room.plane_ids.len()
                ));
            }
            let mut centroid_sum = Vec2::zeros();
            for pid in &room.plane_ids {
                let Some(plane) = self.plane(pid) else {
                    return bad(format!("room {} references missing plane {pid}", room.id));
                };
                if !in_room.insert(pid) {
                    return bad(format!("plane {pid} appears in two rooms"));
                }
                centroid_sum += plane.centroid.coords;
            }
            let mean = centroid_sum / room.plane_ids.len() as f64;
            if (mean - room.center.coords).norm() > 1e-9 {
                return bad(format!("room {} center is not the centroid mean", room.id));
            }
        }
        if in_room.len() != self.planes.len() {
            return bad("some planes belong to no room".to_owned());
        }
        let mut in_wall: BTreeSet<&PlaneId> = BTreeSet::new();
        for wall in &self.walls {
            let (Some(a), Some(b)) = (self.plane(&wall.plane_ids[0]), self.plane(&wall.plane_ids[1]))
            else {
                return bad(format!("wall {} references a missing plane", wall.id));
            };
            if a.normal.dot(&b.normal) >= -0.99 {
                return bad(format!("wall {} planes are not anti-parallel", wall.id));
            }
            for pid in &wall.plane_ids {
                if !in_wall.insert(pid) {
                    return bad(format!("plane {pid} appears in two walls"));
                }
            }
        }
        let mut seen: BTreeMap<(&PlaneId, &PlaneId), EdgeLabel> = BTreeMap::new();
        for e in &self.gt_edges {
            if e.src == e.dst {
                return bad(format!("self edge on {}", e.src));
            }
            seen.insert((&e.src, &e.dst), e.label);
        }
        for ((src, dst), label) in &seen {
            if seen.get(&(dst, src)) != Some(label) {
                return bad(format!("edge {src} -> {dst} has no matching reverse"));
            }
        }
        Ok(())
    }
}

/// Parameters of the synthetic layout generator.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    /// Number of rooms, inclusive range (corridors come on top of this).
    pub n_rooms: RangeInclusive<usize>,
    /// Base room side length in metres, inclusive range.
    pub room_size: RangeInclusive<f64>,
    /// Uniform jitter applied to grid boundary positions, metres.
    pub jitter_pos: f64,
    /// Uniform jitter applied to room/layout orientation, radians.
    pub jitter_rot: f64,
    /// Relative size jitter multiplying each sampled side length.
    pub jitter_size: f64,
    /// Probability of inserting a corridor between two room rows.
    pub corridor_prob: f64,
    /// Neighbourhood size for negative edge labels.
    pub k_negatives: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_rooms: 4..=9,
            room_size: 3.5..=7.0,
            jitter_pos: 0.3,
            jitter_rot: 10.0_f64.to_radians(),
            jitter_size: 0.2,
            corridor_prob: 0.25,
            k_negatives: 15,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no layout satisfied the size constraints after {0} attempts")]
    Infeasible(usize),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

/// Attempts before giving up on a config whose rooms never fit.
const MAX_ATTEMPTS: usize = 64;
/// Smallest acceptable interior extent of a generated room, metres.
const MIN_ROOM_EXTENT: f64 = 0.8;
/// Probability that two adjacent rooms share a thin partition (a wall).
const SHARED_PARTITION_PROB: f64 = 0.7;
/// Thickness range of a shared partition, metres.
const WALL_GAP: RangeInclusive<f64> = 0.05..=0.4;
/// Inset range used on sides that do not share a partition, metres.
const FREE_INSET: RangeInclusive<f64> = 0.35..=0.8;
/// Inset range between a corridor and its bounding grid lines, metres.
const CORRIDOR_INSET: RangeInclusive<f64> = 0.1..=0.25;
/// Corridor strip height range, metres.
const CORRIDOR_HEIGHT: RangeInclusive<f64> = 1.6..=2.8;

/// Generates a fully labeled floorplan: rooms, walls, planes, and the
/// ground-truth edges produced by [`label_edges`].
///
/// Deterministic given the config, including the seed.
pub fn generate_layout(config: &GenConfig) -> Result<Layout, GenError> {
    validate_config(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(layout) = try_generate(config, &mut rng) {
            let layout = label_edges(layout, config.k_negatives);
            debug_assert!(layout.validate().is_ok());
            return Ok(layout);
        }
    }
    Err(GenError::Infeasible(MAX_ATTEMPTS))
}

fn validate_config(config: &GenConfig) -> Result<(), GenError> {
    let fail = |msg: &str| Err(GenError::InvalidConfig(msg.to_owned()));
    if config.n_rooms.is_empty() || *config.n_rooms.start() == 0 {
        return fail("n_rooms range must be non-empty and start at 1 or more");
    }
    if config.room_size.is_empty() || *config.room_size.start() <= 0.0 {
        return fail("room_size range must be non-empty and positive");
    }
    if config.jitter_pos < 0.0 || config.jitter_rot < 0.0 || config.jitter_size < 0.0 {
        return fail("jitter amounts must be non-negative");
    }
    if config.jitter_size >= 1.0 {
        return fail("jitter_size must stay below 1");
    }
    if !(0.0..=1.0).contains(&config.corridor_prob) {
        return fail("corridor_prob must be a probability");
    }
    if config.k_negatives == 0 {
        return fail("k_negatives must be at least 1");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Strip {
    Rooms(usize),
    Corridor,
}

/// One generation attempt; `None` means a sampled room came out too small
/// and the caller should retry with fresh randomness.
fn try_generate(config: &GenConfig, rng: &mut ChaCha8Rng) -> Option<Layout> {
    let n_rooms = rng.random_range(config.n_rooms.clone());
    let cols = (n_rooms as f64).sqrt().ceil() as usize;
    let rows = n_rooms.div_ceil(cols);

    let sample_size = |rng: &mut ChaCha8Rng| -> f64 {
        let base = rng.random_range(config.room_size.clone());
        let scale = if config.jitter_size > 0.0 {
            1.0 + rng.random_range(-config.jitter_size..=config.jitter_size)
        } else {
            1.0
        };
        (base * scale).max(0.05)
    };
    let col_w: Vec<f64> = (0..cols).map(|_| sample_size(rng)).collect();
    let row_h: Vec<f64> = (0..rows).map(|_| sample_size(rng)).collect();

    // Vertical structure: room rows with optional corridor strips between.
    let mut strips = Vec::new();
    for r in 0..rows {
        strips.push(Strip::Rooms(r));
        if r + 1 < rows && config.corridor_prob > 0.0 && rng.random_bool(config.corridor_prob) {
            strips.push(Strip::Corridor);
        }
    }

    let mut x_bounds = vec![0.0];
    for w in &col_w {
        x_bounds.push(x_bounds.last().unwrap() + w);
    }
    let mut y_bounds = vec![0.0];
    let mut strip_min = Vec::new();
    for strip in &strips {
        let (h, min_h) = match strip {
            Strip::Rooms(r) => (row_h[*r], row_h[*r] * 0.5),
            Strip::Corridor => (rng.random_range(CORRIDOR_HEIGHT), 1.0),
        };
        y_bounds.push(y_bounds.last().unwrap() + h);
        strip_min.push(min_h);
    }
    let x_min: Vec<f64> = col_w.iter().map(|w| w * 0.5).collect();
    jitter_boundaries(&mut x_bounds, &x_min, config.jitter_pos, rng);
    jitter_boundaries(&mut y_bounds, &strip_min, config.jitter_pos, rng);

    let row_interval: BTreeMap<usize, (f64, f64)> = strips
        .iter()
        .enumerate()
        .filter_map(|(s, strip)| match strip {
            Strip::Rooms(r) => Some((*r, (y_bounds[s], y_bounds[s + 1]))),
            Strip::Corridor => None,
        })
        .collect();
    // Room rows with no corridor strip between them are physically adjacent.
    let adjacent_rows: Vec<bool> = (0..rows.saturating_sub(1))
        .map(|r| {
            strips
                .windows(2)
                .any(|w| w[0] == Strip::Rooms(r) && w[1] == Strip::Rooms(r + 1))
        })
        .collect();

    // Which cells hold rooms.
    let mut cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .collect();
    cells.shuffle(rng);
    let occupied: BTreeSet<(usize, usize)> = cells.into_iter().take(n_rooms).collect();

    // Partition decisions between adjacent occupied cells. `Some(gap)` means
    // the cells share a thin partition and will contribute a wall.
    let sample_partition = |rng: &mut ChaCha8Rng| -> Option<f64> {
        rng.random_bool(SHARED_PARTITION_PROB)
            .then(|| rng.random_range(WALL_GAP))
    };
    let mut vpart: BTreeMap<(usize, usize), Option<f64>> = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            if occupied.contains(&(r, c)) && occupied.contains(&(r, c + 1)) {
                vpart.insert((r, c), sample_partition(rng));
            }
        }
    }
    let mut hpart: BTreeMap<(usize, usize), Option<f64>> = BTreeMap::new();
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            if adjacent_rows[r] && occupied.contains(&(r, c)) && occupied.contains(&(r + 1, c)) {
                hpart.insert((r, c), sample_partition(rng));
            }
        }
    }

    // Interior rectangle of each room after insetting from its cell.
    let shared_inset = |part: Option<&Option<f64>>| part.and_then(|p| p.map(|gap| gap * 0.5));
    let mut rects: BTreeMap<(usize, usize), [f64; 4]> = BTreeMap::new();
    for &(r, c) in &occupied {
        let mut inset = [0.0; 4];
        let sides = [
            (c > 0).then(|| vpart.get(&(r, c.wrapping_sub(1)))).flatten(),
            vpart.get(&(r, c)),
            (r > 0).then(|| hpart.get(&(r.wrapping_sub(1), c))).flatten(),
            hpart.get(&(r, c)),
        ];
        for (k, side) in sides.iter().enumerate() {
            inset[k] = match shared_inset(*side) {
                Some(half_gap) => half_gap,
                None => rng.random_range(FREE_INSET),
            };
        }
        let (y0s, y1s) = row_interval[&r];
        let rect = [
            x_bounds[c] + inset[0],
            x_bounds[c + 1] - inset[1],
            y0s + inset[2],
            y1s - inset[3],
        ];
        if rect[1] - rect[0] < MIN_ROOM_EXTENT || rect[3] - rect[2] < MIN_ROOM_EXTENT {
            return None;
        }
        rects.insert((r, c), rect);
    }

    // Corridor rectangles: full-width strips with small vertical insets.
    let mut corridor_rects = Vec::new();
    for (s, strip) in strips.iter().enumerate() {
        if *strip == Strip::Corridor {
            let x0 = x_bounds[0] + rng.random_range(FREE_INSET);
            let x1 = x_bounds[cols] - rng.random_range(FREE_INSET);
            let y0 = y_bounds[s] + rng.random_range(CORRIDOR_INSET);
            let y1 = y_bounds[s + 1] - rng.random_range(CORRIDOR_INSET);
            if x1 - x0 < MIN_ROOM_EXTENT || y1 - y0 < MIN_ROOM_EXTENT {
                return None;
            }
            corridor_rects.push([x0, x1, y0, y1]);
        }
    }

    // Rooms connected through shared partitions rotate as one block so the
    // wall faces stay exactly anti-parallel; only standalone rooms get an
    // individual orientation jitter.
    let cell_index: BTreeMap<(usize, usize), usize> = occupied
        .iter()
        .enumerate()
        .map(|(i, &cell)| (cell, i))
        .collect();
    let mut block = BlockUnion::new(occupied.len());
    for (&(r, c), part) in &vpart {
        if part.is_some() {
            block.union(cell_index[&(r, c)], cell_index[&(r, c + 1)]);
        }
    }
    for (&(r, c), part) in &hpart {
        if part.is_some() {
            block.union(cell_index[&(r, c)], cell_index[&(r + 1, c)]);
        }
    }
    let block_sizes = block.sizes();

    let mut room_angle = vec![0.0; occupied.len()];
    for (i, &(r, c)) in occupied.iter().enumerate() {
        if config.jitter_rot <= 0.0 || block_sizes[block.find(i)] != 1 {
            continue;
        }
        let mut angle = rng.random_range(-config.jitter_rot..=config.jitter_rot);
        let rect = rects[&(r, c)];
        let (y0s, y1s) = row_interval[&r];
        let cell = [x_bounds[c], x_bounds[c + 1], y0s, y1s];
        for _ in 0..8 {
            if rotated_rect_fits(&rect, angle, &cell) {
                room_angle[i] = angle;
                break;
            }
            angle *= 0.5;
        }
    }

    let layout_angle = if config.jitter_rot > 0.0 {
        rng.random_range(-config.jitter_rot..=config.jitter_rot)
    } else {
        0.0
    };
    let layout_center = Point::new(
        (x_bounds[0] + x_bounds[cols]) * 0.5,
        (y_bounds[0] + y_bounds[y_bounds.len() - 1]) * 0.5,
    );
    let shift = Vec2::new(rng.random_range(-10.0..=10.0), rng.random_range(-10.0..=10.0));

    // Emit planes. Sides are indexed W, E, S, N; normals face inward.
    let mut layout = Layout::default();
    let mut emit_room = |rect: [f64; 4], local_angle: f64, room_idx: usize, sides: &[usize]| {
        let [x0, x1, y0, y1] = rect;
        let rect_center = Point::new((x0 + x1) * 0.5, (y0 + y1) * 0.5);
        let local = Rotation2::new(local_angle);
        let global = Rotation2::new(layout_angle);
        let place = |p: Point| -> Point {
            let locally = rect_center + local * (p - rect_center);
            layout_center + global * (locally - layout_center) + shift
        };
        let side_defs: [(&str, Vec2, Point, Point); 4] = [
            ("w", Vec2::x(), Point::new(x0, y0), Point::new(x0, y1)),
            ("e", -Vec2::x(), Point::new(x1, y0), Point::new(x1, y1)),
            ("s", Vec2::y(), Point::new(x0, y0), Point::new(x1, y0)),
            ("n", -Vec2::y(), Point::new(x0, y1), Point::new(x1, y1)),
        ];
        let mut plane_ids = Vec::new();
        for &side in sides {
            let (suffix, normal, e0, e1) = &side_defs[side];
            let id = PlaneId::new(format!("r{room_idx:02}_{suffix}"));
            let normal = global * local * normal;
            let plane = PlaneFeature::from_endpoints(id.clone(), normal, place(*e0), place(*e1))
                .expect("grid room sides are valid segments");
            layout.planes.push(plane);
            plane_ids.push(id);
        }
        plane_ids.sort();
        let center = mean_centroid(&layout, &plane_ids);
        layout.rooms.push(Room {
            id: format!("room_{room_idx:02}"),
            center,
            plane_ids,
        });
    };

    let mut side_planes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, &(r, c)) in occupied.iter().enumerate() {
        emit_room(rects[&(r, c)], room_angle[i], i, &[0, 1, 2, 3]);
        side_planes.insert((r, c), i);
    }
    let n_cells = occupied.len();
    for (k, rect) in corridor_rects.iter().enumerate() {
        emit_room(*rect, 0.0, n_cells + k, &[2, 3]);
    }

    // Wall entities from shared partitions: the east/west (or north/south)
    // faces of the two rooms flanking the partition.
    let mut wall_idx = 0;
    let mut push_wall = |layout: &mut Layout, a: PlaneId, b: PlaneId| {
        let mut pair = [a, b];
        pair.sort();
        let center = mean_centroid(layout, &pair);
        layout.walls.push(Wall {
            id: format!("wall_{wall_idx:02}"),
            center,
            plane_ids: pair,
        });
        wall_idx += 1;
    };
    for (&(r, c), part) in &vpart {
        if part.is_some() {
            let left = side_planes[&(r, c)];
            let right = side_planes[&(r, c + 1)];
            push_wall(
                &mut layout,
                PlaneId::new(format!("r{left:02}_e")),
                PlaneId::new(format!("r{right:02}_w")),
            );
        }
    }
    for (&(r, c), part) in &hpart {
        if part.is_some() {
            let below = side_planes[&(r, c)];
            let above = side_planes[&(r + 1, c)];
            push_wall(
                &mut layout,
                PlaneId::new(format!("r{below:02}_n")),
                PlaneId::new(format!("r{above:02}_s")),
            );
        }
    }

    layout.planes.sort_by(|a, b| a.id.cmp(&b.id));
    layout.rooms.sort_by(|a, b| a.id.cmp(&b.id));
    layout.walls.sort_by(|a, b| a.id.cmp(&b.id));
    Some(layout)
}

fn mean_centroid(layout: &Layout, ids: &[PlaneId]) -> Point {
    let mut sum = Vec2::zeros();
    for id in ids {
        sum += layout.plane(id).expect("member plane was just emitted").centroid.coords;
    }
    Point::from(sum / ids.len() as f64)
}

/// Jitters interior boundaries while keeping each interval at least its
/// stated minimum extent.
fn jitter_boundaries(bounds: &mut [f64], min_extents: &[f64], amount: f64, rng: &mut ChaCha8Rng) {
    if amount <= 0.0 {
        return;
    }
    for i in 1..bounds.len() - 1 {
        let lo_margin = (bounds[i] - bounds[i - 1] - min_extents[i - 1]).max(0.0);
        let hi_margin = (bounds[i + 1] - bounds[i] - min_extents[i]).max(0.0);
        let delta = rng.random_range(-amount..=amount);
        bounds[i] += delta.clamp(-lo_margin, hi_margin);
    }
}

/// Whether `rect` rotated by `angle` about its own center stays inside `cell`.
fn rotated_rect_fits(rect: &[f64; 4], angle: f64, cell: &[f64; 4]) -> bool {
    let (hw, hh) = ((rect[1] - rect[0]) * 0.5, (rect[3] - rect[2]) * 0.5);
    let (cx, cy) = ((rect[0] + rect[1]) * 0.5, (rect[2] + rect[3]) * 0.5);
    let (c, s) = (angle.cos().abs(), angle.sin().abs());
    let (rw, rh) = (hw * c + hh * s, hw * s + hh * c);
    cx - rw >= cell[0] && cx + rw <= cell[1] && cy - rh >= cell[2] && cy + rh <= cell[3]
}

struct BlockUnion {
    parent: Vec<usize>,
}

impl BlockUnion {
    fn new(n: usize) -> Self {
        BlockUnion {
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
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn sizes(&mut self) -> Vec<usize> {
        let mut sizes = vec![0; self.parent.len()];
        for i in 0..self.parent.len() {
            sizes[self.find(i)] += 1;
        }
        sizes
    }
}

/// Fills in ground-truth edge labels.
///
/// Every ordered plane pair within a room becomes a `same_room` edge and
/// every wall's pair a `same_wall` edge, both directions. Negative (`none`)
/// edges cover the remaining mutual k-nearest-neighbour pairs by centroid
/// distance; mutuality keeps the labeled out-degree bounded by k while the
/// edge set stays symmetric.
pub fn label_edges(mut layout: Layout, k_negatives: usize) -> Layout {
    let mut edges: BTreeMap<(PlaneId, PlaneId), EdgeLabel> = BTreeMap::new();
    for room in &layout.rooms {
        for a in &room.plane_ids {
            for b in &room.plane_ids {
                if a != b {
                    edges.insert((a.clone(), b.clone()), EdgeLabel::SameRoom);
                }
            }
        }
    }
    for wall in &layout.walls {
        let [a, b] = &wall.plane_ids;
        edges.insert((a.clone(), b.clone()), EdgeLabel::SameWall);
        edges.insert((b.clone(), a.clone()), EdgeLabel::SameWall);
    }
    let n = layout.planes.len();
    let neighbourhoods: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                let da = (layout.planes[a].centroid - layout.planes[i].centroid).norm();
                let db = (layout.planes[b].centroid - layout.planes[i].centroid).norm();
                da.total_cmp(&db)
                    .then_with(|| layout.planes[a].id.cmp(&layout.planes[b].id))
            });
            order.into_iter().take(k_negatives).collect()
        })
        .collect();
    for i in 0..n {
        for &j in &neighbourhoods[i] {
            if j > i && neighbourhoods[j].contains(&i) {
                let key = (layout.planes[i].id.clone(), layout.planes[j].id.clone());
                if !edges.contains_key(&key) {
                    edges.insert(key.clone(), EdgeLabel::None);
                    edges.insert((key.1, key.0), EdgeLabel::None);
                }
            }
        }
    }
    layout.gt_edges = edges
        .into_iter()
        .map(|((src, dst), label)| GtEdge { src, dst, label })
        .collect();
    layout
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_room_config(seed: u64) -> GenConfig {
        GenConfig {
            seed,
            n_rooms: 1..=1,
            corridor_prob: 0.0,
            ..GenConfig::default()
        }
    }

    #[test]
    fn single_room_is_four_inward_planes_and_no_walls() {
        let layout = generate_layout(&single_room_config(7)).unwrap();
        assert_eq!(layout.rooms.len(), 1);
        assert_eq!(layout.planes.len(), 4);
        assert!(layout.walls.is_empty());
        let room = &layout.rooms[0];
        for plane in &layout.planes {
            // Inward normal: the room center is on the positive side.
            let to_center = room.center - plane.centroid;
            assert!(plane.normal.dot(&to_center) > 0.0);
        }
        let mean: Vec2 = layout
            .planes
            .iter()
            .map(|p| p.centroid.coords)
            .sum::<Vec2>()
            / 4.0;
        assert!((mean - room.center.coords).norm() < 1e-9);
    }

    #[test]
    fn identical_configs_reproduce_identical_layouts() {
        let config = GenConfig {
            seed: 99,
            ..GenConfig::default()
        };
        let a = generate_layout(&config).unwrap();
        let b = generate_layout(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn four_room_grid_produces_wall_pairs() {
        let config = GenConfig {
            seed: 42,
            n_rooms: 4..=4,
            corridor_prob: 0.0,
            ..GenConfig::default()
        };
        let layout = generate_layout(&config).unwrap();
        assert!(!layout.walls.is_empty(), "2x2 grid grew no shared partition");
        for wall in &layout.walls {
            let a = layout.plane(&wall.plane_ids[0]).unwrap();
            let b = layout.plane(&wall.plane_ids[1]).unwrap();
            assert!(a.normal.dot(&b.normal) < -0.99);
            let gap = (a.offset() + b.offset()).abs();
            assert!(
                (0.05..=0.4 + 1e-9).contains(&gap),
                "wall gap {gap} outside the partition range"
            );
        }
    }

    #[test]
    fn single_room_labels_form_a_clique_without_negatives() {
        let layout = generate_layout(&single_room_config(3)).unwrap();
        assert_eq!(layout.gt_edges.len(), 12);
        assert!(layout
            .gt_edges
            .iter()
            .all(|e| e.label == EdgeLabel::SameRoom));
    }

    #[test]
    fn wall_pairs_are_labeled_same_wall_not_same_room() {
        let config = GenConfig {
            seed: 42,
            n_rooms: 4..=4,
            corridor_prob: 0.0,
            ..GenConfig::default()
        };
        let layout = generate_layout(&config).unwrap();
        assert!(!layout.walls.is_empty());
        for wall in &layout.walls {
            let [a, b] = &wall.plane_ids;
            let label = layout
                .gt_edges
                .iter()
                .find(|e| &e.src == a && &e.dst == b)
                .map(|e| e.label);
            assert_eq!(label, Some(EdgeLabel::SameWall));
        }
    }

    #[test]
    fn labeled_out_degree_stays_within_k() {
        // A ~30-plane layout exercises the neighbourhood cap.
        let config = GenConfig {
            seed: 5,
            n_rooms: 7..=7,
            corridor_prob: 0.5,
            ..GenConfig::default()
        };
        let layout = generate_layout(&config).unwrap();
        assert!(layout.planes.len() >= 28);
        let mut out_degree: BTreeMap<&PlaneId, usize> = BTreeMap::new();
        for e in &layout.gt_edges {
            *out_degree.entry(&e.src).or_default() += 1;
        }
        for (id, degree) in out_degree {
            assert!(degree <= 15, "{id} has {degree} outgoing labeled edges");
        }
    }

    #[test]
    fn generated_layouts_carry_both_positive_labels() {
        for seed in [7, 8, 9] {
            let config = GenConfig {
                seed,
                ..GenConfig::default()
            };
            let layout = generate_layout(&config).unwrap();
            let count = |label| layout.gt_edges.iter().filter(|e| e.label == label).count();
            assert!(count(EdgeLabel::SameRoom) >= 12, "seed {seed}");
            assert!(count(EdgeLabel::SameWall) >= 2, "seed {seed}");
            assert!(count(EdgeLabel::None) > 0, "seed {seed}");
        }
    }

    #[test]
    fn generated_layouts_satisfy_structural_invariants() {
        for seed in 0..40 {
            let config = GenConfig {
                seed,
                ..GenConfig::default()
            };
            let layout = generate_layout(&config).unwrap();
            layout.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            for room in &layout.rooms {
                assert!(room.plane_ids.len() == 2 || room.plane_ids.len() == 4);
            }
        }
    }

    #[test]
    fn corridors_appear_as_two_plane_rooms() {
        let config = GenConfig {
            seed: 11,
            n_rooms: 6..=6,
            corridor_prob: 1.0,
            ..GenConfig::default()
        };
        let layout = generate_layout(&config).unwrap();
        let corridors: Vec<&Room> = layout
            .rooms
            .iter()
            .filter(|r| r.plane_ids.len() == 2)
            .collect();
        assert!(!corridors.is_empty());
        for corridor in corridors {
            let a = layout.plane(&corridor.plane_ids[0]).unwrap();
            let b = layout.plane(&corridor.plane_ids[1]).unwrap();
            // The two long sides face each other.
            assert!(a.normal.dot(&b.normal) < -0.99);
            let separation = (a.centroid - b.centroid).norm();
            assert!(separation > 0.4, "corridor sides {separation} m apart");
        }
    }

    #[test]
    fn undersized_rooms_are_rejected_as_infeasible() {
        let config = GenConfig {
            seed: 1,
            n_rooms: 2..=2,
            room_size: 0.5..=0.6,
            jitter_size: 0.0,
            corridor_prob: 0.0,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_layout(&config),
            Err(GenError::Infeasible(_))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = GenConfig::default();
        config.k_negatives = 0;
        assert!(matches!(
            generate_layout(&config),
            Err(GenError::InvalidConfig(_))
        ));
        let mut config = GenConfig::default();
        config.n_rooms = 3..=2;
        assert!(matches!(
            generate_layout(&config),
            Err(GenError::InvalidConfig(_))
        ));
    }
}
