//! Outer-boundary extraction for 8-connected foreground components.
//!
//! The boundary is walked along pixel edges (the crack boundary) and the
//! polygon joins the midpoints of consecutive edges. Compared with the raw
//! staircase this cuts every corner by an eighth of a pixel, keeps 45° runs
//! straight and keeps the perimeter close to that of the underlying shape
//! (the staircase overstates a diagonal by √2). Rasterizing the polygon
//! reproduces the component exactly, and two pixels touching only at a
//! corner become a narrow neck, so the polygon stays simple.

use std::collections::VecDeque;

use super::{BinaryMap, Point, Polygon};

/// One traced 8-connected foreground component.
#[derive(Debug, Clone)]
pub struct Component {
    pub polygon: Polygon,
    /// Row-major flat indices of the component's pixels, ascending.
    pub pixels: Vec<usize>,
}

/// Outer contours of all 8-connected components, ordered by each
/// component's first pixel in row-major order. Holes are ignored.
pub fn trace_contours(map: &BinaryMap) -> Vec<Polygon> {
    trace_components(map).into_iter().map(|c| c.polygon).collect()
}

pub fn trace_components(map: &BinaryMap) -> Vec<Component> {
    let (labels, pixels) = label_components(map);
    let w = map.width();
    pixels
        .into_iter()
        .enumerate()
        .map(|(i, pixels)| {
            let start = pixels[0];
            let polygon = trace_outer(&labels, map.height(), w, i as u32 + 1, start % w, start / w);
            Component { polygon, pixels }
        })
        .collect()
}

/// 8-connected labeling. Label 0 is background; components are numbered
/// from 1 in order of their first pixel.
pub(crate) fn label_components(map: &BinaryMap) -> (Vec<u32>, Vec<Vec<usize>>) {
    let (h, w) = (map.height(), map.width());
    let cells = map.as_slice();
    let mut labels = vec![0u32; h * w];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if cells[start] == 0 || labels[start] != 0 {
            continue;
        }
        let id = comps.len() as u32 + 1;
        let mut members = Vec::new();
        labels[start] = id;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            members.push(idx);
            let (r, c) = ((idx / w) as isize, (idx % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if cells[n] != 0 && labels[n] == 0 {
                        labels[n] = id;
                        queue.push_back(n);
                    }
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    (labels, comps)
}

/// Walks the outer crack boundary clockwise on screen (positive shoelace
/// area), keeping the component on the right-hand side. Starts at the top-left
/// corner of the component's first pixel heading +x.
fn trace_outer(labels: &[u32], h: usize, w: usize, id: u32, sx: usize, sy: usize) -> Polygon {
    let inside = |cx: i64, cy: i64| -> bool {
        cx >= 0 && cy >= 0 && (cx as usize) < w && (cy as usize) < h && labels[cy as usize * w + cx as usize] == id
    };
    let start = (sx as i64, sy as i64);
    let start_dir = (1i64, 0i64);
    let (mut v, mut d) = (start, start_dir);
    let mut verts: Vec<(i64, i64)> = Vec::new();
    loop {
        verts.push(v);
        v = (v.0 + d.0, v.1 + d.1);
        // Interior normal: clockwise rotation on screen.
        let n = (-d.1, d.0);
        // Cell centers ahead of v, on the interior and exterior sides.
        let cell = |side: i64| -> (i64, i64) {
            let cx2 = 2 * v.0 + d.0 + side * n.0;
            let cy2 = 2 * v.1 + d.1 + side * n.1;
            (cx2.div_euclid(2), cy2.div_euclid(2))
        };
        let (fi, fo) = (cell(1), cell(-1));
        d = if inside(fo.0, fo.1) {
            (d.1, -d.0)
        } else if inside(fi.0, fi.1) {
            d
        } else {
            n
        };
        if v == start && d == start_dir {
            break;
        }
    }
    build_polygon(&verts)
}

fn build_polygon(verts: &[(i64, i64)]) -> Polygon {
    let n = verts.len();
    let pts = (0..n)
        .map(|i| {
            let (a, b) = (verts[i], verts[(i + 1) % n]);
            Point::new((a.0 + b.0) as f64 / 2.0, (a.1 + b.1) as f64 / 2.0)
        })
        .collect();
    Polygon::new(drop_collinear(pts)).expect("traced boundary encloses at least one pixel")
}

fn drop_collinear(pts: Vec<Point>) -> Vec<Point> {
    let n = pts.len();
    let keep: Vec<Point> = (0..n)
        .filter(|&i| {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) != 0.0
        })
        .map(|i| pts[i])
        .collect();
    if keep.len() >= 3 {
        keep
    } else {
        pts
    }
}
