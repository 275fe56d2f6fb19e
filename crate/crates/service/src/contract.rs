//! Shapes and conversions the browser console relies on.

use tacticforge_core::domain::{Point, Workspace};

/// Canvas pixel to field metres. The canvas spans the whole workspace with
/// its origin top-left, so y is flipped.
pub fn canvas_to_field(ws: &Workspace, canvas_w: f64, canvas_h: f64, px: f64, py: f64) -> Point {
    Point::new(
        ws.x_min + px / canvas_w * (ws.x_max - ws.x_min),
        ws.y_max - py / canvas_h * (ws.y_max - ws.y_min),
    )
}

pub fn field_to_canvas(ws: &Workspace, canvas_w: f64, canvas_h: f64, p: Point) -> (f64, f64) {
    (
        (p.x - ws.x_min) / (ws.x_max - ws.x_min) * canvas_w,
        (ws.y_max - p.y) / (ws.y_max - ws.y_min) * canvas_h,
    )
}
