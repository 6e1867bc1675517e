use super::{convex_hull, GeometryError, Point, RotatedBox};

/// Minimum-area enclosing rectangle.
///
/// One side of the optimal rectangle is collinear with an edge of the convex
/// hull, so the search walks the hull edges with rotating calipers: for each
/// edge the three support points (furthest along the edge, furthest before
/// it, and furthest away from it) only ever advance, giving `O(h)` work after
/// the hull.
///
/// `edge_w` of the result lies along the flush hull edge.
pub fn min_area_rect(points: &[Point]) -> Result<RotatedBox, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Empty);
    }
    let hull = convex_hull(points);
    let m = hull.len();
    if m < 3 {
        return Err(GeometryError::Degenerate);
    }

    let at = |i: usize| hull[i % m];
    let mut best: Option<(f64, RotatedBox)> = None;
    // Support indices: max along edge, max away from edge, min along edge.
    let (mut far, mut top, mut near) = (1usize, 1usize, 0usize);

    for i in 0..m {
        let origin = at(i);
        let e = at(i + 1) - origin;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let u = e * (1.0 / len);
        let v = u.perp();
        let pu = |k: usize| (at(k) - origin).dot(u);
        let pv = |k: usize| (at(k) - origin).dot(v);

        if i == 0 {
            far = (0..m).max_by(|&a, &b| pu(a).total_cmp(&pu(b))).unwrap();
            top = (0..m).max_by(|&a, &b| pv(a).total_cmp(&pv(b))).unwrap();
            near = (0..m).min_by(|&a, &b| pu(a).total_cmp(&pu(b))).unwrap();
        } else {
            for _ in 0..m {
                if pu(far + 1) > pu(far) {
                    far += 1;
                } else {
                    break;
                }
            }
            for _ in 0..m {
                if pv(top + 1) > pv(top) {
                    top += 1;
                } else {
                    break;
                }
            }
            for _ in 0..m {
                if pu(near + 1) < pu(near) {
                    near += 1;
                } else {
                    break;
                }
            }
        }

        let (lo, hi, depth) = (pu(near), pu(far), pv(top));
        let area = (hi - lo) * depth;
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let center = origin + u * ((lo + hi) / 2.0) + v * (depth / 2.0);
            let rect = RotatedBox {
                center,
                edge_w: u * ((hi - lo) / 2.0),
                edge_h: v * (depth / 2.0),
            };
            best = Some((area, rect));
        }
    }

    match best {
        Some((area, rect)) if area > 0.0 => Ok(rect),
        _ => Err(GeometryError::Degenerate),
    }
}
