//! Boolean polygon operations backed by `i_overlay`.

use i_overlay::core::fill_rule::FillRule;
use i_overlay::core::overlay_rule::OverlayRule;
use i_overlay::float::simplify::SimplifyShape;
use i_overlay::float::single::SingleFloatOverlay;

use super::{Point, Polygon};
use crate::error::Result;

/// Pieces smaller than this (px^2) are numerical residue of the overlay.
const MIN_PIECE_AREA: f64 = 1e-9;

type Shapes = Vec<Vec<Vec<[f64; 2]>>>;

fn outer_contours(shapes: Shapes) -> Vec<Polygon> {
    shapes
        .into_iter()
        .filter_map(|mut shape| {
            if shape.is_empty() {
                return None;
            }
            let outer = shape.swap_remove(0);
            Polygon::new(outer.into_iter().map(Point::from).collect()).ok()
        })
        .filter(|p| p.area() > MIN_PIECE_AREA)
        .collect()
}

fn area_of(shapes: &Shapes) -> f64 {
    shapes
        .iter()
        .flat_map(|shape| shape.iter())
        .map(|contour| {
            let n = contour.len();
            let mut s = 0.0;
            for i in 0..n {
                let a = contour[i];
                let b = contour[(i + 1) % n];
                s += a[0] * b[1] - a[1] * b[0];
            }
            s / 2.0
        })
        .sum::<f64>()
        .abs()
}

/// Regions of a possibly self-intersecting closed path with positive
/// winding number. Holes are dropped.
pub(crate) fn positive_fill(path: &[[f64; 2]]) -> Vec<Polygon> {
    outer_contours(path.simplify_shape(FillRule::Positive))
}

/// Area of `a ∩ b`. Symmetric: the operands are put in a canonical order
/// first so swapping them gives a bit-identical result.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    let (first, second) = canonical_pair(a, b);
    let shapes = first
        .to_coords()
        .overlay(&second.to_coords(), OverlayRule::Intersect, FillRule::NonZero);
    area_of(&shapes)
}

fn canonical_pair<'a>(a: &'a Polygon, b: &'a Polygon) -> (&'a Polygon, &'a Polygon) {
    let key = |p: &Polygon| -> Vec<(u64, u64)> {
        p.points().iter().map(|q| (q.x.to_bits(), q.y.to_bits())).collect()
    };
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn polygon_iou(a: &Polygon, b: &Polygon) -> Result<f64> {
    if a == b {
        return Ok(1.0);
    }
    let (ax0, ay0, ax1, ay1) = a.bounds();
    let (bx0, by0, bx1, by1) = b.bounds();
    if ax1 <= bx0 || bx1 <= ax0 || ay1 <= by0 || by1 <= ay0 {
        return Ok(0.0);
    }
    let inter = intersection_area(a, b);
    let (area_a, area_b) = if std::ptr::eq(canonical_pair(a, b).0, a) {
        (a.area(), b.area())
    } else {
        (b.area(), a.area())
    };
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Clips `poly` to the rectangle `[0, width] x [0, height]`.
pub fn clip_to_rect(poly: &Polygon, height: f64, width: f64) -> Vec<Polygon> {
    let (x0, y0, x1, y1) = poly.bounds();
    if x0 >= 0.0 && y0 >= 0.0 && x1 <= width && y1 <= height {
        return vec![poly.clone()];
    }
    let rect = vec![[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]];
    outer_contours(
        poly.to_coords()
            .overlay(&rect, OverlayRule::Intersect, FillRule::NonZero),
    )
}
