use crate::error::{Error, Result};

/// Radius of the circle, centred on the baseline midpoint `(0.5, 0.5)` in code
/// space, that C and D must fall in. The default is the circle with the
/// baseline AB as diameter, so codes lie within `0.5 +- sqrt(2)/2`.
pub const DEFAULT_ACCEPT_RADIUS: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Four-star geometric hash, invariant to translation, rotation and
/// positive scale.
///
/// In the frame where A sits at `(0, 0)` and B at `(1, 1)`, the code is
/// `(xC, yC, xD, yD)`. Canonical form has `xC <= xD` and `xC + xD <= 1`.
/// `star_ids` follow the canonical A, B, C, D order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadHash {
    pub code: [f64; 4],
    pub star_ids: [usize; 4],
}

impl QuadHash {
    pub fn distance(&self, code: &[f64; 4]) -> f64 {
        self.code
            .iter()
            .zip(code)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn quad_hash(points: [(f64, f64); 4], star_ids: [usize; 4]) -> Result<QuadHash> {
    quad_hash_with(points, star_ids, DEFAULT_ACCEPT_RADIUS)
}

/// [`quad_hash`] with an explicit acceptance radius.
pub fn quad_hash_with(
    points: [(f64, f64); 4],
    star_ids: [usize; 4],
    accept_radius: f64,
) -> Result<QuadHash> {
    let d2 = |i: usize, j: usize| {
        let (a, b) = (points[i], points[j]);
        (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
    };
    let mut best = (0, 1);
    for i in 0..4 {
        for j in i + 1..4 {
            if d2(i, j) == 0.0 {
                return Err(Error::DegenerateQuad("coincident points"));
            }
            if d2(i, j) > d2(best.0, best.1) {
                best = (i, j);
            }
        }
    }
    let (ia, ib) = best;
    let mut rest = (0..4).filter(|&k| k != ia && k != ib);
    let (ic, id) = (rest.next().unwrap(), rest.next().unwrap());

    // z -> (z - A) (1 + i) / (B - A)
    let (ax, ay) = points[ia];
    let (bx, by) = (points[ib].0 - ax, points[ib].1 - ay);
    let norm = bx * bx + by * by;
    let map = |k: usize| {
        let (zx, zy) = (points[k].0 - ax, points[k].1 - ay);
        // (z)(1+i) = (zx - zy, zx + zy); divide by (bx + i by)
        let (px, py) = (zx - zy, zx + zy);
        ((px * bx + py * by) / norm, (py * bx - px * by) / norm)
    };
    let (mut c, mut d) = (map(ic), map(id));
    for p in [c, d] {
        if ((p.0 - 0.5).powi(2) + (p.1 - 0.5).powi(2)).sqrt() > accept_radius * (1.0 + 1e-12) {
            return Err(Error::DegenerateQuad("C or D outside the acceptance circle"));
        }
    }

    let mut ids = [star_ids[ia], star_ids[ib], star_ids[ic], star_ids[id]];
    if c.0 + d.0 > 1.0 {
        ids.swap(0, 1);
        c = (1.0 - c.0, 1.0 - c.1);
        d = (1.0 - d.0, 1.0 - d.1);
    }
    if c.0 > d.0 {
        ids.swap(2, 3);
        std::mem::swap(&mut c, &mut d);
    }
    Ok(QuadHash {
        code: [c.0, c.1, d.0, d.1],
        star_ids: ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_example() {
        let q = quad_hash([(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)], [0, 1, 2, 3]).unwrap();
        assert_eq!(q.code, [0.0, 1.0, 1.0, 0.0]);
        assert_eq!(q.star_ids, [0, 1, 3, 2]);
    }

    #[test]
    fn collinear_triple_outside_circle() {
        // B, C, D collinear; C lies outside the circle on AB
        let pts = [(0.0, 0.0), (10.0, 0.0), (8.8, 3.6), (9.5, 1.5)];
        assert!(matches!(
            quad_hash(pts, [0, 1, 2, 3]),
            Err(Error::DegenerateQuad(_))
        ));
    }

    #[test]
    fn coincident_points() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (0.0, 0.0), (0.5, 0.2)];
        assert!(matches!(
            quad_hash(pts, [0, 1, 2, 3]),
            Err(Error::DegenerateQuad(_))
        ));
    }

    #[test]
    fn invariant_under_similarity() {
        let pts = [(3.0, 1.0), (10.0, 9.0), (5.0, 6.5), (8.0, 4.0)];
        let q = quad_hash(pts, [0, 1, 2, 3]).unwrap();
        let (s, c) = 37f64.to_radians().sin_cos();
        let moved = pts.map(|(x, y)| (3.0 * (c * x - s * y) + 5.0, 3.0 * (s * x + c * y) - 2.0));
        let r = quad_hash(moved, [0, 1, 2, 3]).unwrap();
        assert!(q.distance(&r.code) < 1e-9);
        assert_eq!(q.star_ids, r.star_ids);
    }

    #[test]
    fn canonical_constraints_hold() {
        let pts = [(0.0, 0.0), (7.0, 2.0), (5.0, 3.0), (2.0, 1.5)];
        let q = quad_hash(pts, [0, 1, 2, 3]).unwrap();
        assert!(q.code[0] <= q.code[2]);
        assert!(q.code[0] + q.code[2] <= 1.0);
    }
}
