use std::collections::HashMap;

use super::index::{for_each_quad, QuadIndex};
use super::quad::quad_hash;
use super::{SimilarityTransform, StarList};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    /// Image extent in pixels; catalog stars predicted outside are not
    /// counted during verification.
    pub image_width: f64,
    pub image_height: f64,
    /// Code-space lookup radius.
    pub code_tolerance: f64,
    /// Image-pixel radius for a predicted star to count as matched.
    pub match_radius: f64,
    pub accept_fraction: f64,
    pub min_matches: usize,
    /// Only the brightest detections are combined into quads.
    pub max_detected: usize,
    /// Detected quads tried before giving up.
    pub max_quads: usize,
    /// Least-squares refits on the matched set before the final check.
    pub refine_iterations: usize,
}

impl SolveParams {
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            image_width: width as f64,
            image_height: height as f64,
            code_tolerance: 0.01,
            match_radius: 1.5,
            accept_fraction: 0.5,
            min_matches: 10,
            max_detected: 30,
            max_quads: 30_000,
            refine_iterations: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Image to canvas (catalog) coordinates.
    pub transform: SimilarityTransform,
    pub matched: usize,
    pub predicted: usize,
    pub quads_tried: usize,
}

/// Uniform bucket grid over detected positions for nearest-neighbour
/// queries within a fixed radius.
struct Buckets<'a> {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
    points: &'a [(f64, f64)],
}

impl<'a> Buckets<'a> {
    fn new(points: &'a [(f64, f64)], cell: f64) -> Self {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            map.entry(Self::key(x, y, cell)).or_default().push(i);
        }
        Self { cell, map, points }
    }

    fn key(x: f64, y: f64, cell: f64) -> (i64, i64) {
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    }

    fn nearest_within(&self, x: f64, y: f64, radius: f64) -> Option<usize> {
        let (kx, ky) = Self::key(x, y, self.cell);
        let mut best: Option<(f64, usize)> = None;
        for gx in kx - 1..=kx + 1 {
            for gy in ky - 1..=ky + 1 {
                for &i in self.map.get(&(gx, gy)).into_iter().flatten() {
                    let (px, py) = self.points[i];
                    let d2 = (px - x).powi(2) + (py - y).powi(2);
                    if d2 <= radius * radius && best.is_none_or(|(b, _)| d2 < b) {
                        best = Some((d2, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

struct Verification {
    predicted: usize,
    pairs: Vec<(usize, usize)>,
}

/// Predicts the brightest in-frame catalog stars, at most one per
/// detection, and pairs each with its nearest detection in range.
fn verify(
    transform: &SimilarityTransform,
    catalog: &StarList,
    buckets: &Buckets,
    params: &SolveParams,
) -> Verification {
    let inv = transform.inverse();
    let mut predicted = 0;
    let mut pairs = Vec::new();
    for (ci, (cx, cy)) in catalog.positions().enumerate() {
        if predicted == buckets.points.len() {
            break;
        }
        let (x, y) = inv.apply(cx, cy);
        let inside = x >= -0.5
            && y >= -0.5
            && x < params.image_width - 0.5
            && y < params.image_height - 0.5;
        if !inside {
            continue;
        }
        predicted += 1;
        if let Some(di) = buckets.nearest_within(x, y, params.match_radius) {
            pairs.push((ci, di));
        }
    }
    Verification { predicted, pairs }
}

/// Recovers the image-to-catalog similarity from detected stars.
///
/// Detected quads are hashed in brightness order and looked up in `index`.
/// Each hit proposes the least-squares similarity through its four
/// correspondences, which is refined on all stars it matches and then
/// accepted if enough predicted catalog stars land on a detection. The
/// first accepted proposal wins; `Ok(None)` means no proposal survived
/// within the quad budget.
pub fn solve(
    detected: &StarList,
    index: &QuadIndex,
    catalog: &StarList,
    params: &SolveParams,
) -> Result<Option<Solution>> {
    if detected.len() < 4 {
        return Err(Error::TooFewStars(detected.len()));
    }
    let det: Vec<(f64, f64)> = detected.positions().collect();
    let cat: Vec<(f64, f64)> = catalog.positions().collect();
    let buckets = Buckets::new(&det, params.match_radius.max(1e-9));
    let pool = det.len().min(params.max_detected);

    let mut tried = 0;
    let mut found = None;
    for_each_quad(pool, |ids| {
        if tried >= params.max_quads {
            return false;
        }
        tried += 1;
        let Ok(q) = quad_hash(ids.map(|i| det[i]), ids) else {
            return true;
        };
        for hit in index.lookup(&q.code, params.code_tolerance) {
            if hit.star_ids.iter().any(|&i| i >= cat.len()) {
                continue;
            }
            let from = q.star_ids.map(|i| det[i]);
            let to = hit.star_ids.map(|i| cat[i]);
            let Ok(mut t) = SimilarityTransform::fit(&from, &to) else {
                continue;
            };
            let mut check = verify(&t, catalog, &buckets, params);
            for _ in 0..params.refine_iterations {
                if check.pairs.len() < 4 {
                    break;
                }
                let (f, c): (Vec<_>, Vec<_>) =
                    check.pairs.iter().map(|&(ci, di)| (det[di], cat[ci])).unzip();
                match SimilarityTransform::fit(&f, &c) {
                    Ok(refit) => t = refit,
                    Err(_) => break,
                }
                check = verify(&t, catalog, &buckets, params);
            }
            let required = params.min_matches.min(check.predicted.min(detected.len()));
            let matched = check.pairs.len();
            if check.predicted > 0
                && matched >= required.max(4)
                && matched as f64 >= params.accept_fraction * check.predicted as f64
            {
                found = Some(Solution {
                    transform: t,
                    matched,
                    predicted: check.predicted,
                    quads_tried: tried,
                });
                return false;
            }
        }
        true
    });
    Ok(found)
}
