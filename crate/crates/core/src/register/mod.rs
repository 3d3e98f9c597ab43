//! Simplified plate solving onto the consensus canvas.
//!
//! Stars are detected with a MAD noise estimate and refined with a 3x3
//! quadratic fit, matched against a reference catalog through
//! similarity-invariant four-star hash codes, verified by predicting the
//! remaining catalog stars, and the image is finally resampled onto the
//! canvas with nearest-neighbour lookup. Geometry is restricted to
//! similarity transforms.

mod detect;
mod index;
mod quad;
mod resample;
mod solve;
mod transform;

pub use detect::{detect_stars, estimate_noise, DetectParams};
pub use index::{build_index, QuadIndex};
pub use quad::{quad_hash, quad_hash_with, QuadHash, DEFAULT_ACCEPT_RADIUS};
pub use resample::resample;
pub use solve::{solve, Solution, SolveParams};
pub use transform::SimilarityTransform;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Star {
    pub x: f64,
    pub y: f64,
    pub flux: f64,
}

/// Stars sorted by decreasing flux.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StarList(Vec<Star>);

impl StarList {
    /// Sorts by decreasing flux; rejects non-finite coordinates and
    /// non-positive flux.
    pub fn new(mut stars: Vec<Star>) -> Result<Self> {
        for (i, s) in stars.iter().enumerate() {
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::InvalidValue { index: i });
            }
            if !(s.flux.is_finite() && s.flux > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "star {i} has non-positive flux {}",
                    s.flux
                )));
            }
        }
        stars.sort_by(|a, b| b.flux.total_cmp(&a.flux));
        Ok(Self(stars))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn stars(&self) -> &[Star] {
        &self.0
    }

    pub fn positions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.0.iter().map(|s| (s.x, s.y))
    }

    /// Parses whitespace-separated `x y flux` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut stars = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("star list line {}: {e}", n + 1)))?;
            let [x, y, flux] = fields[..] else {
                return Err(Error::Config(format!(
                    "star list line {}: expected `x y flux`",
                    n + 1
                )));
            };
            stars.push(Star { x, y, flux });
        }
        Self::new(stars)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# x y flux\n");
        for s in &self.0 {
            out.push_str(&format!("{} {} {}\n", s.x, s.y, s.flux));
        }
        out
    }
}
