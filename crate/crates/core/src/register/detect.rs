use super::{Star, StarList};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// MAD-to-sigma factor for Gaussian noise.
const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Detection threshold above background, in noise sigmas.
    pub k_sigma: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { k_sigma: 8.0 }
    }
}

fn median(v: &mut [f64]) -> f64 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Per-pixel noise sigma from the median absolute difference of
/// horizontally adjacent pixels. The difference of two independent samples
/// has sigma `sqrt(2)` times the pixel sigma.
pub fn estimate_noise<T: Scalar>(image: &Grid<T>) -> f64 {
    let w = image.width();
    let mut diffs: Vec<f64> = image
        .data()
        .chunks_exact(w)
        .flat_map(|row| row.windows(2).map(|p| (p[1] - p[0]).abs().to_f64_lossy()))
        .collect();
    if diffs.is_empty() {
        return 0.0;
    }
    MAD_TO_SIGMA * median(&mut diffs) / std::f64::consts::SQRT_2
}

/// Sub-pixel offset of the extremum of the least-squares quadratic through a
/// 3x3 patch (`patch[row][col]`, centre at `[1][1]`). `None` when the fit has
/// no maximum or it lies more than one pixel out.
fn quadratic_peak(patch: &[[f64; 3]; 3]) -> Option<(f64, f64)> {
    let (mut b, mut c, mut d, mut e, mut f) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (row, line) in patch.iter().enumerate() {
        for (col, &v) in line.iter().enumerate() {
            let x = col as f64 - 1.0;
            let y = row as f64 - 1.0;
            b += x * v;
            c += y * v;
            e += x * y * v;
            // x^2 - 2/3 and y^2 - 2/3 are orthogonal to 1 on the grid
            d += (x * x - 2.0 / 3.0) * v;
            f += (y * y - 2.0 / 3.0) * v;
        }
    }
    let (b, c, e, d, f) = (b / 6.0, c / 6.0, e / 4.0, d / 2.0, f / 2.0);
    // gradient zero: [2d e; e 2f] [x y]^T = -[b c]^T
    let det = 4.0 * d * f - e * e;
    if !(d < 0.0 && det > 0.0) {
        return None;
    }
    let x = (-b * 2.0 * f + c * e) / det;
    let y = (-c * 2.0 * d + b * e) / det;
    (x.abs() <= 1.0 && y.abs() <= 1.0).then_some((x, y))
}

/// Largest plateau explored before giving up on a peak.
const MAX_PLATEAU: usize = 4096;

/// 8-connected region of pixels equal to the one at `(x, y)`. Returns its
/// centroid and area, or `None` if a pixel bordering it is brighter (not a
/// maximum) or it grows past `MAX_PLATEAU`.
fn plateau(px: &[f64], w: usize, h: usize, x: usize, y: usize) -> Option<(f64, f64, usize)> {
    let v = px[y * w + x];
    let mut seen = std::collections::HashSet::from([(x, y)]);
    let mut stack = vec![(x, y)];
    let (mut sx, mut sy) = (0.0, 0.0);
    while let Some((cx, cy)) = stack.pop() {
        sx += cx as f64;
        sy += cy as f64;
        for ny in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                let n = px[ny * w + nx];
                if n > v {
                    return None;
                }
                if n == v && seen.insert((nx, ny)) {
                    if seen.len() > MAX_PLATEAU {
                        return None;
                    }
                    stack.push((nx, ny));
                }
            }
        }
    }
    let area = seen.len();
    Some((sx / area as f64, sy / area as f64, area))
}

/// Finds local maxima more than `k_sigma` noise sigmas above the median
/// background, refines each with a 3x3 quadratic fit (flat tops use the
/// plateau centroid) and returns the `max_stars` brightest.
pub fn detect_stars<T: Scalar>(
    image: &Grid<T>,
    max_stars: usize,
    params: &DetectParams,
) -> Result<StarList> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(Error::ShapeMismatch(format!(
            "star detection needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let px: Vec<f64> = image.data().iter().map(|v| v.to_f64_lossy()).collect();
    crate::rankcore::check_finite(&px)?;
    let background = median(&mut px.clone());
    let sigma = estimate_noise(image);
    let threshold = background + params.k_sigma * sigma;
    let at = |x: usize, y: usize| px[y * w + x];

    let mut stars = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = at(x, y);
            if v <= threshold {
                continue;
            }
            // plateaus: only the first pixel in raster order counts
            let mut is_peak = true;
            'nb: for dy in 0..3 {
                for dx in 0..3 {
                    if (dx, dy) == (1, 1) {
                        continue;
                    }
                    let n = at(x + dx - 1, y + dy - 1);
                    let earlier = dy < 1 || (dy == 1 && dx < 1);
                    if n > v || (earlier && n == v) {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if !is_peak {
                continue;
            }
            let mut patch = [[0.0; 3]; 3];
            let mut flux = 0.0;
            let mut flat = false;
            for (dy, row) in patch.iter_mut().enumerate() {
                for (dx, cell) in row.iter_mut().enumerate() {
                    let n = at(x + dx - 1, y + dy - 1);
                    flat |= (dx, dy) != (1, 1) && n == v;
                    *cell = n - background;
                    flux += *cell;
                }
            }
            let (sx, sy) = if flat {
                // saturated or quantized top: centroid of the plateau
                match plateau(&px, w, h, x, y) {
                    Some((cx, cy, area)) => {
                        flux = flux.max(area as f64 * (v - background));
                        (cx, cy)
                    }
                    None => continue,
                }
            } else {
                let (ox, oy) = quadratic_peak(&patch).unwrap_or((0.0, 0.0));
                (x as f64 + ox, y as f64 + oy)
            };
            stars.push(Star {
                x: sx,
                y: sy,
                flux: if flux > 0.0 { flux } else { v - background },
            });
        }
    }
    let mut list = StarList::new(stars)?;
    list.0.truncate(max_stars);
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn field(w: usize, h: usize, stars: &[(f64, f64, f64)], noise: f64, seed: u64) -> Grid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sigma = 1.5f64;
        Grid::from_fn(w, h, |x, y| {
            let mut v = 10.0;
            for &(sx, sy, amp) in stars {
                let r2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
                v += amp * (-r2 / (2.0 * sigma * sigma)).exp();
            }
            v + noise * normal.sample(&mut rng)
        })
        .unwrap()
    }

    #[test]
    fn blank_image_has_no_stars() {
        let g = Grid::filled(16, 16, 3.0f64).unwrap();
        assert!(detect_stars(&g, 10, &DetectParams::default()).unwrap().is_empty());
    }

    #[test]
    fn too_small_image() {
        let g = Grid::filled(2, 5, 0.0f64).unwrap();
        assert!(matches!(
            detect_stars(&g, 10, &DetectParams::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn single_star_centroid() {
        let truth = (20.3, 15.7);
        let g = field(40, 32, &[(truth.0, truth.1, 100.0)], 1.0, 1);
        let s = detect_stars(&g, 10, &DetectParams::default()).unwrap();
        assert_eq!(s.len(), 1);
        let star = s.stars()[0];
        assert!((star.x - truth.0).abs() < 0.1, "{star:?}");
        assert!((star.y - truth.1).abs() < 0.1, "{star:?}");
    }

    #[test]
    fn brighter_star_first() {
        let g = field(64, 64, &[(12.2, 40.6, 50.0), (45.5, 20.1, 100.0)], 1.0, 2);
        let s = detect_stars(&g, 10, &DetectParams::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.stars()[0].x - 45.5).abs() < 0.2);
        assert!((s.stars()[1].x - 12.2).abs() < 0.2);
    }

    #[test]
    fn saturated_star_uses_plateau_centroid() {
        let g = field(40, 40, &[(20.3, 17.6, 500.0)], 0.5, 3).map(|v| v.min(100.0));
        let s = detect_stars(&g, 10, &DetectParams::default()).unwrap();
        assert_eq!(s.len(), 1);
        let star = s.stars()[0];
        assert!((star.x - 20.3).abs() < 0.3 && (star.y - 17.6).abs() < 0.3, "{star:?}");
    }

    #[test]
    fn max_stars_caps_output() {
        let g = field(64, 64, &[(12.2, 40.6, 50.0), (45.5, 20.1, 100.0)], 1.0, 2);
        assert_eq!(detect_stars(&g, 1, &DetectParams::default()).unwrap().len(), 1);
    }

    #[test]
    fn noise_estimate_matches_injected_sigma() {
        let g = field(512, 512, &[], 2.0, 3);
        let s = estimate_noise(&g);
        assert!((s - 2.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn quadratic_peak_exact_for_quadratic() {
        let (px, py) = (0.3, -0.2);
        let mut patch = [[0.0; 3]; 3];
        for (r, row) in patch.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let (x, y) = (c as f64 - 1.0, r as f64 - 1.0);
                *v = 5.0 - (x - px).powi(2) - 2.0 * (y - py).powi(2) + 0.3 * (x - px) * (y - py);
            }
        }
        let (x, y) = quadratic_peak(&patch).unwrap();
        assert!((x - px).abs() < 1e-12 && (y - py).abs() < 1e-12);
    }
}
