use super::{clip, Point, Polygon};
use crate::error::{Error, Result};

/// Ratio of miter length to offset distance above which a join is beveled.
pub const MITER_LIMIT: f64 = 2.0;

/// Uniform parallel offset of the boundary.
///
/// Negative `distance` moves edges inward, positive outward. Joins on the
/// opening side of a corner are mitered up to [`MITER_LIMIT`] and beveled
/// beyond it. The raw offset path is cleaned with a positive-winding fill,
/// so a shrink may return several pieces or none at all.
pub fn offset_polygon(poly: &Polygon, distance: f64) -> Result<Vec<Polygon>> {
    if !distance.is_finite() {
        return Err(Error::InvalidPolygon(format!("offset distance {distance} is not finite")));
    }
    if distance == 0.0 {
        return Ok(vec![poly.clone()]);
    }
    let raw = raw_offset_path(poly.points(), distance);
    Ok(clip::positive_fill(&raw))
}

fn raw_offset_path(pts: &[Point], d: f64) -> Vec<[f64; 2]> {
    let n = pts.len();
    let normals: Vec<Point> = (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len = dx.hypot(dy);
            // Outward normal for positive signed area.
            Point::new(dy / len, -dx / len)
        })
        .collect();

    let mut out = Vec::with_capacity(n * 3);
    for i in 0..n {
        let p = pts[i];
        let n1 = normals[(i + n - 1) % n];
        let n2 = normals[i];
        let turn = n1.cross(n2);
        let cos = n1.x * n2.x + n1.y * n2.y;
        let at = |nv: Point| [p.x + nv.x * d, p.y + nv.y * d];

        if turn * d < 0.0 || (turn == 0.0 && cos < 0.0) {
            // Offset edges overlap here; route through the vertex and let
            // the winding fill discard the resulting loop.
            out.push(at(n1));
            out.push([p.x, p.y]);
            out.push(at(n2));
        } else if cos > 1.0 - 1e-12 {
            out.push(at(n2));
        } else {
            // |miter| / |d| = 1 / cos(half angle) = sqrt(2 / (1 + cos))
            // Inclusive with a little slack so exact 60° corners stay mitered.
            let ratio = (2.0 / (1.0 + cos)).sqrt();
            if ratio <= MITER_LIMIT * (1.0 + 1e-9) {
                let k = 1.0 / (1.0 + cos);
                out.push([p.x + (n1.x + n2.x) * k * d, p.y + (n1.y + n2.y) * k * d]);
            } else {
                out.push(at(n1));
                out.push(at(n2));
            }
        }
    }
    out
}
