use std::f64::consts::PI;

use enhance_core::consensus::Canvas;
use enhance_core::register::{
    build_index, quad_hash, resample, solve, SimilarityTransform, SolveParams, Star, StarList,
};
use enhance_core::Grid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn point() -> impl Strategy<Value = (f64, f64)> {
    (0.0..100.0f64, 0.0..100.0f64)
}

fn transform() -> impl Strategy<Value = SimilarityTransform> {
    (0.2..5.0f64, 0.0..2.0 * PI, -500.0..500.0f64, -500.0..500.0f64)
        .prop_map(|(s, r, dx, dy)| SimilarityTransform::new(s, r, dx, dy).unwrap())
}

proptest! {
    #[test]
    fn quad_code_is_similarity_invariant(pts in prop::array::uniform4(point()), t in transform(), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let moved: [(f64, f64); 4] = std::array::from_fn(|k| {
            let (x, y) = pts[perm[k]];
            t.apply(x, y)
        });
        let ids: [usize; 4] = perm.try_into().unwrap();
        if let (Ok(a), Ok(b)) = (quad_hash(pts, [0, 1, 2, 3]), quad_hash(moved, ids)) {
            prop_assert!(a.distance(&b.code) <= 1e-9);
            // same stars play the same roles
            prop_assert_eq!(a.star_ids, b.star_ids);
            let [xc, _, xd, _] = a.code;
            prop_assert!(xc <= xd + 1e-12 && xc + xd <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn inverse_and_composition(t in transform(), u in transform(), p in point()) {
        let (x, y) = t.inverse().apply(t.apply(p.0, p.1).0, t.apply(p.0, p.1).1);
        prop_assert!((x - p.0).abs() < 1e-8 && (y - p.1).abs() < 1e-8);
        let direct = u.apply(t.apply(p.0, p.1).0, t.apply(p.0, p.1).1);
        let composed = t.then(&u).apply(p.0, p.1);
        prop_assert!((direct.0 - composed.0).abs() < 1e-6 && (direct.1 - composed.1).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_exact_similarity(t in transform(), pts in prop::collection::vec(point(), 3..20)) {
        let to: Vec<_> = pts.iter().map(|&(x, y)| t.apply(x, y)).collect();
        prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).hypot(p.1 - pts[0].1) > 1.0));
        let f = SimilarityTransform::fit(&pts, &to).unwrap();
        prop_assert!((f.scale() / t.scale() - 1.0).abs() < 1e-9);
        for &(x, y) in &pts {
            let (a, b) = (f.apply(x, y), t.apply(x, y));
            prop_assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn sidecar_round_trip(t in transform()) {
        let back = SimilarityTransform::parse_sidecar(&t.to_sidecar()).unwrap();
        let (a, b) = (t.apply(3.0, 4.0), back.apply(3.0, 4.0));
        prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn integer_translation_resample_is_exact(dx in -5i32..5, dy in -5i32..5) {
        let g = Grid::from_fn(12, 9, |x, y| (x * 100 + y) as f64).unwrap();
        let canvas = Canvas::new(12, 9).unwrap();
        let obs = resample(&g, &SimilarityTransform::translation(dx as f64, dy as f64), canvas).unwrap();
        for y in 0..9i32 {
            for x in 0..12i32 {
                let p = (y * 12 + x) as usize;
                let (sx, sy) = (x - dx, y - dy);
                let inside = (0..12).contains(&sx) && (0..9).contains(&sy);
                prop_assert_eq!(obs.mask()[p], inside);
                if inside {
                    prop_assert_eq!(obs.values()[p], (sx * 100 + sy) as f64);
                }
            }
        }
    }
}

#[test]
fn solve_round_trip_rate() {
    let mut solved = 0;
    for trial in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(trial);
        let catalog = StarList::new(
            (0..150)
                .map(|_| Star {
                    x: r.random_range(0.0..800.0),
                    y: r.random_range(0.0..800.0),
                    flux: 10f64.powf(r.random_range(0.0..3.0)),
                })
                .collect(),
        )
        .unwrap();
        let scale = r.random_range(0.7..1.5);
        let t = SimilarityTransform::new(scale, r.random_range(0.0..2.0 * PI), 0.0, 0.0).unwrap();
        let side = 500.0 / scale;
        let (cx, cy) = t.apply(side / 2.0, side / 2.0);
        let t = t.then(&SimilarityTransform::translation(400.0 - cx, 400.0 - cy));
        let inv = t.inverse();
        let jitter = Normal::new(0.0, 0.2).unwrap();
        let detected: Vec<Star> = catalog
            .stars()
            .iter()
            .filter_map(|s| {
                let (u, v) = inv.apply(s.x, s.y);
                ((0.0..side).contains(&u) && (0.0..side).contains(&v)).then(|| Star {
                    x: u + jitter.sample(&mut r),
                    y: v + jitter.sample(&mut r),
                    flux: s.flux,
                })
            })
            .collect();
        let Ok(detected) = StarList::new(detected) else { continue };
        let index = build_index(&catalog, 30_000).unwrap();
        let params = SolveParams::for_image(side as usize, side as usize);
        if let Ok(Some(sol)) = solve(&detected, &index, &catalog, &params) {
            let (a, b) = (sol.transform.apply(side / 2.0, side / 2.0), t.apply(side / 2.0, side / 2.0));
            if (a.0 - b.0).hypot(a.1 - b.1) < 0.5 * scale {
                solved += 1;
            }
        }
    }
    assert!(solved >= 95, "{solved}/100");
}
