//! Minimal SVG rendering of layouts and detections.
//!
//! Produces a self-contained `<svg>` document: plane segments as lines,
//! room memberships as translucent polygons, wall pairs as dashed
//! connectors, and node centers as circles. Ground truth is drawn in
//! muted grey/blue, predictions in warm colors, so overlaying both shows
//! disagreements at a glance.

use scenegraph_core::geometry::Point;
use scenegraph_core::pipeline::SceneDetection;
use scenegraph_core::synthgen::Layout;

const MARGIN: f64 = 1.0;
const CANVAS: f64 = 640.0;

const GT_PLANE: &str = "#556070";
const GT_ROOM_FILL: &str = "#5b8dbf";
const GT_WALL: &str = "#5b8dbf";
const PRED_ROOM_FILL: &str = "#e2853a";
const PRED_WALL: &str = "#c03a2b";

/// Maps world coordinates into a y-flipped pixel viewport.
struct Viewport {
    min: Point,
    scale: f64,
    height: f64,
}

impl Viewport {
    fn fit(layout: &Layout) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for plane in &layout.planes {
            for e in &plane.endpoints {
                min.x = min.x.min(e.x);
                min.y = min.y.min(e.y);
                max.x = max.x.max(e.x);
                max.y = max.y.max(e.y);
            }
        }
        if !min.x.is_finite() {
            // Empty layout: any fixed box works, nothing will be drawn in it.
            min = Point::new(0.0, 0.0);
            max = Point::new(1.0, 1.0);
        }
        min.x -= MARGIN;
        min.y -= MARGIN;
        max.x += MARGIN;
        max.y += MARGIN;
        let span = (max.x - min.x).max(max.y - min.y).max(1e-9);
        let scale = CANVAS / span;
        Viewport {
            min,
            scale,
            height: (max.y - min.y) * scale,
        }
    }

    fn x(&self, p: &Point) -> f64 {
        (p.x - self.min.x) * self.scale
    }

    fn y(&self, p: &Point) -> f64 {
        self.height - (p.y - self.min.y) * self.scale
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn line(out: &mut String, vp: &Viewport, a: &Point, b: &Point, stroke: &str, extra: &str) {
    out.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"2\"{extra}/>\n",
        fmt(vp.x(a)),
        fmt(vp.y(a)),
        fmt(vp.x(b)),
        fmt(vp.y(b)),
    ));
}

fn circle(out: &mut String, vp: &Viewport, c: &Point, r: f64, fill: &str) {
    out.push_str(&format!(
        "  <circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"{fill}\"/>\n",
        fmt(vp.x(c)),
        fmt(vp.y(c)),
    ));
}

/// Polygon over member centroids, ordered by angle around the center so the
/// hull never self-intersects for convex room shapes.
fn room_polygon(
    out: &mut String,
    vp: &Viewport,
    layout: &Layout,
    center: &Point,
    plane_ids: &[scenegraph_core::geometry::PlaneId],
    fill: &str,
) {
    let mut corners: Vec<Point> = plane_ids
        .iter()
        .filter_map(|id| layout.plane(id))
        .map(|p| p.centroid)
        .collect();
    if corners.len() < 3 {
        return;
    }
    corners.sort_by(|a, b| {
        let ang = |p: &Point| (p.y - center.y).atan2(p.x - center.x);
        ang(a).total_cmp(&ang(b))
    });
    let points: Vec<String> = corners
        .iter()
        .map(|p| format!("{},{}", fmt(vp.x(p)), fmt(vp.y(p))))
        .collect();
    out.push_str(&format!(
        "  <polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"0.25\" stroke=\"none\"/>\n",
        points.join(" "),
    ));
}

fn wall_connector(
    out: &mut String,
    vp: &Viewport,
    layout: &Layout,
    plane_ids: &[scenegraph_core::geometry::PlaneId; 2],
    stroke: &str,
) {
    if let (Some(a), Some(b)) = (layout.plane(&plane_ids[0]), layout.plane(&plane_ids[1])) {
        line(
            out,
            vp,
            &a.centroid,
            &b.centroid,
            stroke,
            " stroke-dasharray=\"6 4\"",
        );
    }
}

/// Renders a layout, optionally overlaying a detection, into an SVG string.
pub fn render_svg(layout: &Layout, prediction: Option<&SceneDetection>) -> String {
    let vp = Viewport::fit(layout);
    let width = CANVAS;
    let height = vp.height.max(1.0);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height),
    ));
    out.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"#fdfdfb\"/>\n");

    // Ground truth underneath: room fills, wall connectors, then segments.
    for room in &layout.rooms {
        room_polygon(&mut out, &vp, layout, &room.center, &room.plane_ids, GT_ROOM_FILL);
    }
    for wall in &layout.walls {
        wall_connector(&mut out, &vp, layout, &wall.plane_ids, GT_WALL);
    }
    for plane in &layout.planes {
        line(
            &mut out,
            &vp,
            &plane.endpoints[0],
            &plane.endpoints[1],
            GT_PLANE,
            "",
        );
    }
    for room in &layout.rooms {
        circle(&mut out, &vp, &room.center, 4.0, GT_ROOM_FILL);
    }

    // Predictions on top, in warm colors.
    if let Some(detection) = prediction {
        for room in &detection.rooms {
            room_polygon(
                &mut out,
                &vp,
                layout,
                &room.center,
                &room.plane_ids,
                PRED_ROOM_FILL,
            );
        }
        for wall in &detection.walls {
            wall_connector(&mut out, &vp, layout, &wall.plane_ids, PRED_WALL);
        }
        for room in &detection.rooms {
            circle(&mut out, &vp, &room.center, 5.0, PRED_ROOM_FILL);
        }
        for wall in &detection.walls {
            circle(&mut out, &vp, &wall.center, 3.0, PRED_WALL);
        }
    }

    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenegraph_core::pipeline::DetectedRoom;
    use scenegraph_core::synthgen::{GenConfig, generate_layout};

    fn four_room_layout() -> Layout {
        generate_layout(&GenConfig {
            seed: 11,
            n_rooms: 4..=4,
            corridor_prob: 0.0,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn four_rooms_render_at_least_sixteen_segments() {
        let svg = render_svg(&four_room_layout(), None);
        let lines = svg.matches("<line").count();
        assert!(lines >= 16, "only {lines} segments");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn predictions_add_overlay_marks() {
        let layout = four_room_layout();
        let plain = render_svg(&layout, None);
        let detection = SceneDetection {
            rooms: vec![DetectedRoom {
                id: "room_00".to_owned(),
                center: layout.rooms[0].center,
                plane_ids: layout.rooms[0].plane_ids.clone(),
            }],
            ..SceneDetection::default()
        };
        let overlaid = render_svg(&layout, Some(&detection));
        assert!(overlaid.matches("<circle").count() > plain.matches("<circle").count());
        assert!(overlaid.contains(PRED_ROOM_FILL));
    }

    #[test]
    fn an_empty_layout_still_produces_a_document() {
        let layout = Layout {
            planes: vec![],
            rooms: vec![],
            walls: vec![],
            gt_edges: vec![],
        };
        let svg = render_svg(&layout, None);
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("<line"));
    }
}
