use std::f64::consts::TAU;

use fepe_core::geometry::{offset_polygon, polygon_iou, rasterize, trace_contours};
use fepe_core::{BinaryMap, Point, Polygon};
use proptest::prelude::*;

const CANVAS: usize = 200;

/// Convex polygon with vertices on a circle at sorted random angles.
fn convex() -> impl Strategy<Value = Polygon> {
    (10.0..60.0f64, prop::collection::vec(0.0..TAU, 3..9), -20.0..20.0f64, -20.0..20.0f64).prop_filter_map(
        "degenerate",
        |(r, mut angles, dx, dy)| {
            angles.sort_by(f64::total_cmp);
            let c = CANVAS as f64 / 2.0;
            let pts = angles
                .iter()
                .map(|a| Point::new(c + dx + r * a.cos(), c + dy + r * a.sin()))
                .collect();
            let p = Polygon::new(pts).ok()?;
            (p.area() > 1.0 && min_corner_deg(&p) > 1.0).then_some(p)
        },
    )
}

/// Convex polygon with 4–8 vertices whose angular gaps differ by at most
/// 2x, which keeps every interior angle at or above 60°.
fn blunt_convex() -> impl Strategy<Value = Polygon> {
    (10.0..60.0f64, prop::collection::vec(1.0..2.0f64, 4..9), 0.0..TAU).prop_map(|(r, weights, phase)| {
        let total: f64 = weights.iter().sum();
        let c = CANVAS as f64 / 2.0;
        let mut a = phase;
        let pts = weights
            .iter()
            .map(|w| {
                a += w / total * TAU;
                Point::new(c + r * a.cos(), c + r * a.sin())
            })
            .collect();
        Polygon::new(pts).unwrap()
    })
}

/// Largest inward offset before some edge shrinks to zero length: an edge
/// of length e between interior angles a and b lasts until
/// d = e / (cot(a/2) + cot(b/2)).
fn collapse_distance(p: &Polygon) -> f64 {
    let pts = p.points();
    let n = pts.len();
    let angle = |i: usize| {
        let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        let (u, v) = ((a.x - b.x, a.y - b.y), (c.x - b.x, c.y - b.y));
        ((u.0 * v.0 + u.1 * v.1) / (u.0.hypot(u.1) * v.0.hypot(v.1))).clamp(-1.0, 1.0).acos()
    };
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let e = (pts[j].x - pts[i].x).hypot(pts[j].y - pts[i].y);
            e / (1.0 / (angle(i) / 2.0).tan() + 1.0 / (angle(j) / 2.0).tan())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest distance across the polygon, measured perpendicular to an edge.
fn min_width(p: &Polygon) -> f64 {
    p.edges()
        .map(|(a, b)| {
            let len = (b.x - a.x).hypot(b.y - a.y);
            p.points()
                .iter()
                .map(|q| ((b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x)).abs() / len)
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

fn min_corner_deg(p: &Polygon) -> f64 {
    let pts = p.points();
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            let (u, v) = ((a.x - b.x, a.y - b.y), (c.x - b.x, c.y - b.y));
            let cos = (u.0 * v.0 + u.1 * v.1) / (u.0.hypot(u.1) * v.0.hypot(v.1));
            cos.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .fold(180.0, f64::min)
}

fn total_area(polys: &[Polygon]) -> f64 {
    polys.iter().map(Polygon::area).sum()
}

fn map_iou(a: &BinaryMap, b: &BinaryMap) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        inter += (*x & *y) as usize;
        union += (*x | *y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Independent 8-connected component count (iterative DFS).
fn flood_count(h: usize, w: usize, cells: &[u8]) -> usize {
    let mut seen = vec![false; h * w];
    let mut count = 0;
    for start in 0..h * w {
        if cells[start] == 0 || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            for (dr, dc) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                let (nr, nc) = (r + dr, c + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                    let n = nr as usize * w + nc as usize;
                    if cells[n] != 0 && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
    }
    count
}

proptest! {
    #[test]
    fn offset_area_is_monotone(p in convex(), d in -15.0..15.0f64) {
        let out = offset_polygon(&p, d).unwrap();
        if d < 0.0 && !out.is_empty() {
            prop_assert!(total_area(&out) < p.area());
        }
        if d >= 0.0 {
            prop_assert!(total_area(&out) >= p.area() * (1.0 - 1e-12));
        }
    }

    // Corners sharper than 60° exceed the miter limit on the way out and are
    // beveled, and an edge that collapses while shrinking takes its corner
    // with it; the generator and the offset bound exclude both.
    #[test]
    fn shrink_then_expand_recovers_polygon(p in blunt_convex(), t in 0.01..0.99f64) {
        prop_assert!(min_corner_deg(&p) >= 60.0 - 1e-9);
        let d = t * collapse_distance(&p).min(min_width(&p) / 2.0);
        let shrunk = offset_polygon(&p, -d).unwrap();
        prop_assert_eq!(shrunk.len(), 1);
        let back = offset_polygon(&shrunk[0], d).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert!(polygon_iou(&back[0], &p).unwrap() >= 0.99);
    }

    #[test]
    fn raster_trace_round_trip(p in convex()) {
        let m = rasterize(&p, CANVAS, CANVAS).unwrap();
        prop_assume!(m.count_ones() >= 100);
        let contours = trace_contours(&m);
        prop_assert!(!contours.is_empty());
        let mut back = BinaryMap::new(CANVAS, CANVAS);
        for c in &contours {
            prop_assert!(c.is_simple());
            back.or_assign(&rasterize(c, CANVAS, CANVAS).unwrap());
        }
        prop_assert!(map_iou(&back, &m) >= 0.9);
    }

    #[test]
    fn area_and_perimeter_invariant(p in convex(), dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
        let moved = p.translate(dx, dy);
        let rot = Polygon::new(p.points().iter().map(|q| Point::new(-q.y, q.x)).collect()).unwrap();
        for q in [&moved, &rot] {
            prop_assert!((q.area() - p.area()).abs() <= 1e-9 * p.area());
            prop_assert!((q.perimeter() - p.perimeter()).abs() <= 1e-9 * p.perimeter());
        }
    }

    #[test]
    fn iou_is_symmetric(a in convex(), b in convex()) {
        prop_assert_eq!(polygon_iou(&a, &b).unwrap(), polygon_iou(&b, &a).unwrap());
        prop_assert!((polygon_iou(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn trace_count_matches_flood_fill(
        (h, w, cells) in (1usize..14, 1usize..14).prop_flat_map(|(h, w)| {
            (Just(h), Just(w), prop::collection::vec(prop::bool::weighted(0.45).prop_map(u8::from), h * w))
        })
    ) {
        let m = BinaryMap::from_vec(h, w, cells.clone()).unwrap();
        prop_assert_eq!(trace_contours(&m).len(), flood_count(h, w, &cells));
    }
}
