//! Polygon primitives and raster conversion.
//!
//! Coordinates are pixel units with x to the right and y down. A cell at
//! row `r`, column `c` covers `[c, c+1) x [r, r+1)` and its center is
//! `(c + 0.5, r + 0.5)`.
//!
//! Polygons are normalized so that their shoelace signed area is positive.
//! With y pointing down that is a clockwise walk on screen; all offset signs
//! in this crate are defined against that orientation (negative = inward).

mod clip;
pub(crate) mod contour;
mod offset;
mod raster;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clip::{clip_to_rect, intersection_area, polygon_iou};
pub use contour::{trace_components, trace_contours, Component};
pub use offset::{offset_polygon, MITER_LIMIT};
pub use raster::{fill_polygon, rasterize, BinaryMap, Raster, ScoreMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Closed polygon with positive signed area and no repeated consecutive
/// vertices. The closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Vec<[f64; 2]>")]
pub struct Polygon {
    points: Vec<Point>,
}

impl Polygon {
    /// Normalizes `points` into a polygon: drops consecutive duplicates
    /// (including a repeated closing point) and reverses negatively wound
    /// input.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidPolygon(format!(
                "non-finite coordinate ({}, {})",
                p.x, p.y
            )));
        }
        let mut pts: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        while pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 distinct points, got {}",
                pts.len()
            )));
        }
        let signed = signed_area(&pts);
        if signed == 0.0 || !signed.is_finite() {
            return Err(Error::InvalidPolygon("zero enclosed area".into()));
        }
        if signed < 0.0 {
            pts.reverse();
        }
        Ok(Self { points: pts })
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Result<Self> {
        Self::new(coords.iter().copied().map(Point::from).collect())
    }

    /// Axis-aligned rectangle with top-left corner `(x, y)`.
    pub fn rect(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(vec![
            Point::new(x, y),
            Point::new(x + w, y),
            Point::new(x + w, y + h),
            Point::new(x, y + h),
        ])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn to_coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|&p| p.into()).collect()
    }

    /// `(min_x, min_y, max_x, max_y)`
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        self.map_points(|p| Point::new(p.x + dx, p.y + dy))
    }

    pub fn scale(&self, sx: f64, sy: f64) -> Result<Polygon> {
        Polygon::new(self.points.iter().map(|p| Point::new(p.x * sx, p.y * sy)).collect())
    }

    fn map_points(&self, f: impl Fn(Point) -> Point) -> Polygon {
        Polygon {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Even-odd point containment.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y <= p.y) != (b.y <= p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when no two non-adjacent edges touch and adjacent edges share
    /// only their common vertex. O(n^2).
    pub fn is_simple(&self) -> bool {
        let n = self.points.len();
        let edges: Vec<(Point, Point)> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Collinear fold-back onto the shared vertex.
                    let shared = if j == i + 1 { b } else { a };
                    let (u, v) = if j == i + 1 { (a, d) } else { (b, c) };
                    if u.sub(shared).cross(v.sub(shared)) == 0.0
                        && (u.sub(shared).x * v.sub(shared).x + u.sub(shared).y * v.sub(shared).y) > 0.0
                    {
                        return false;
                    }
                } else if segments_touch(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.to_coords()
    }
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<[f64; 2]>::deserialize(d)?;
        Polygon::from_coords(&coords).map_err(serde::de::Error::custom)
    }
}

fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        s += a.x * b.y - a.y * b.x;
    }
    s / 2.0
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Absolute enclosed area (shoelace).
pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.area().abs()
}

/// Sum of edge lengths including the closing edge.
pub fn polygon_perimeter(poly: &Polygon) -> f64 {
    poly.perimeter()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(side: f64) -> Polygon {
        Polygon::rect(0.0, 0.0, side, side).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(polygon_area(&sq(1.0)), 1.0);
        let tri = Polygon::from_coords(&[[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(polygon_area(&tri), 6.0);
        assert_eq!(polygon_area(&sq(40.0)), 1600.0);
    }

    #[test]
    fn perimeter_examples() {
        assert_eq!(polygon_perimeter(&sq(1.0)), 4.0);
        let tri = Polygon::from_coords(&[[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(polygon_perimeter(&tri), 12.0);
        assert_eq!(polygon_perimeter(&sq(40.0)), 160.0);
    }

    #[test]
    fn orientation_is_normalized() {
        let cw = Polygon::from_coords(&[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(cw.area() > 0.0);
        assert_eq!(cw.points()[0], Point::new(1.0, 0.0));
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0]]),
            Err(Error::InvalidPolygon(_))
        ));
        assert!(Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(Polygon::from_coords(&[[0.0, 0.0], [1.0, f64::NAN], [2.0, 1.0]]).is_err());
        // A repeated closing point is dropped, not rejected.
        let closed =
            Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(closed.len(), 3);
    }

    #[test]
    fn simplicity() {
        assert!(sq(3.0).is_simple());
        let bowtie = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(3.0, 0.0),
            Point::new(0.0, 2.0),
        ]);
        // Bowtie has zero net area in this layout only if symmetric; this one is not.
        if let Ok(p) = bowtie {
            assert!(!p.is_simple());
        }
    }

    #[test]
    fn containment() {
        let s = sq(4.0);
        assert!(s.contains(Point::new(0.5, 0.5)));
        assert!(!s.contains(Point::new(4.5, 0.5)));
    }
}
