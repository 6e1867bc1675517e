use super::Point;
use crate::interchange::BinaryMask;

// Clockwise neighbour order (y down), starting west.
const DIRS: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("neighbouring pixels")
}

/// Outer borders of the 8-connected foreground components of `mask`.
///
/// Each border is traced by border following: start at the component's
/// first pixel in raster order, find the first foreground neighbour
/// clockwise from the west, then repeatedly search counter-clockwise around
/// the current pixel. Vertices are the centers of the border pixels in
/// traversal order; a pixel on a one-pixel-wide bridge appears once per
/// visit. Components are returned in raster order of their first pixel.
/// Holes are ignored.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Vec<Point>> {
    let win = mask.window();
    if win.is_empty() {
        return Vec::new();
    }
    let on = |x: i64, y: i64| mask.get_i(x, y);

    // Row runs `[x0, x1)` in raster order, labeled with union-find.
    let mut runs: Vec<(i64, i64, i64)> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut prev_row = 0..0;
    for y in win.y0 as i64..(win.y0 + win.h) as i64 {
        let row_start = runs.len();
        let mut x = win.x0 as i64;
        let x_end = (win.x0 + win.w) as i64;
        while x < x_end {
            if !on(x, y) {
                x += 1;
                continue;
            }
            let x0 = x;
            while x < x_end && on(x, y) {
                x += 1;
            }
            let id = runs.len();
            runs.push((x0, x, y));
            parent.push(id);
            for p in prev_row.clone() {
                let (px0, px1, _) = runs[p];
                // 8-connected: runs touch if they overlap after widening by one.
                if px0 <= x && x0 <= px1 {
                    union(&mut parent, p, id);
                }
            }
        }
        prev_row = row_start..runs.len();
    }

    // Roots are merged toward the smaller index, so each root is the
    // component's raster-first run.
    (0..runs.len())
        .filter(|&i| find(&mut parent, i) == i)
        .map(|i| follow_border(&on, (runs[i].0, runs[i].2)))
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    let (lo, hi) = (ra.min(rb), ra.max(rb));
    parent[hi] = lo;
}

fn follow_border(on: &impl Fn(i64, i64) -> bool, start: (i64, i64)) -> Vec<Point> {
    let center = |(x, y): (i64, i64)| Point::new(x as f64 + 0.5, y as f64 + 0.5);

    // The west neighbour of a raster-first pixel is background.
    let first = (0..8).find_map(|k| {
        let (dx, dy) = DIRS[k];
        on(start.0 + dx, start.1 + dy).then_some((start.0 + dx, start.1 + dy))
    });
    let Some(first) = first else {
        return vec![center(start)];
    };

    let mut points = Vec::new();
    let mut prev = first;
    let mut cur = start;
    loop {
        points.push(center(cur));
        let back = dir_index(prev.0 - cur.0, prev.1 - cur.1);
        // Counter-clockwise from the pixel after `prev`.
        let next = (1..=8)
            .map(|k| {
                let (dx, dy) = DIRS[(back + 8 - k) % 8];
                (cur.0 + dx, cur.1 + dy)
            })
            .find(|&(x, y)| on(x, y))
            .expect("a border pixel with a neighbour");
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
    }
    points
}
