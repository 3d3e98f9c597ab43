use super::quad::{quad_hash, QuadHash};
use super::StarList;
use crate::error::{Error, Result};

/// Immutable collection of canonical quad codes with radius lookup.
///
/// Entries are kept sorted on the first code coordinate; a lookup scans the
/// slab `|code[0] - q[0]| <= r` and filters on full 4-D distance.
#[derive(Debug, Clone, Default)]
pub struct QuadIndex {
    entries: Vec<QuadHash>,
}

impl QuadIndex {
    pub fn from_quads(mut entries: Vec<QuadHash>) -> Self {
        entries.sort_by(|a, b| a.code[0].total_cmp(&b.code[0]));
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QuadHash] {
        &self.entries
    }

    /// All entries within Euclidean code distance `radius` of `code`.
    pub fn lookup(&self, code: &[f64; 4], radius: f64) -> impl Iterator<Item = &QuadHash> + '_ {
        let lo = self.entries.partition_point(|e| e.code[0] < code[0] - radius);
        let code = *code;
        self.entries[lo..]
            .iter()
            .take_while(move |e| e.code[0] <= code[0] + radius)
            .filter(move |e| e.distance(&code) <= radius)
    }
}

/// Calls `f` on 4-subsets of `0..n` in brightness order: every subset whose
/// faintest member is `d` comes before any subset reaching `d + 1`. Stops
/// when `f` returns false.
pub(crate) fn for_each_quad(n: usize, mut f: impl FnMut([usize; 4]) -> bool) {
    for d in 3..n {
        for c in 2..d {
            for b in 1..c {
                for a in 0..b {
                    if !f([a, b, c, d]) {
                        return;
                    }
                }
            }
        }
    }
}

/// Hashes catalog quads from the brightest stars outward until `max_quads`
/// codes are stored. Quads failing the acceptance test are skipped.
pub fn build_index(catalog: &StarList, max_quads: usize) -> Result<QuadIndex> {
    if catalog.len() < 4 {
        return Err(Error::TooFewStars(catalog.len()));
    }
    let stars = catalog.stars();
    let mut entries = Vec::new();
    for_each_quad(catalog.len(), |ids| {
        if entries.len() >= max_quads {
            return false;
        }
        let pts = ids.map(|i| (stars[i].x, stars[i].y));
        if let Ok(q) = quad_hash(pts, ids) {
            entries.push(q);
        }
        true
    });
    Ok(QuadIndex::from_quads(entries))
}
