//! Consensus rank state and the positional update that folds observations
//! into it.
//!
//! The state stores the consensus as a strict permutation of `1..=P` plus a
//! per-pixel vote vector. Pixel values only appear when the state is rendered
//! against a [`HistogramSource`], so any display histogram can be attached
//! after the fact.

mod persist;
mod update;

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use persist::{load_state, read_state, save_state, write_state, STATE_MAGIC, STATE_VERSION};

/// Fixed pixel grid. Pixel index is `row * width + column`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Canvas {
    width: usize,
    height: usize,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!(
                "canvas must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Total pixel count `P`.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, column: usize, row: usize) -> usize {
        row * self.width + column
    }

    pub(crate) fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{what} has {len} entries, canvas {}x{} has {}",
                self.width,
                self.height,
                self.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &Canvas) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!(
                "canvas {}x{} does not match {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// A registered observation on the canvas.
///
/// `values` outside the mask are ignored and may hold anything. Weights
/// default to 1 inside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedImage<T> {
    canvas: Canvas,
    values: Vec<T>,
    mask: Vec<bool>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> ObservedImage<T> {
    pub fn new(canvas: Canvas, values: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        canvas.check_len("values", values.len())?;
        canvas.check_len("mask", mask.len())?;
        Ok(Self {
            canvas,
            values,
            mask,
            weights: None,
        })
    }

    /// Observation covering the whole canvas.
    pub fn full(canvas: Canvas, values: Vec<T>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(canvas, values, mask)
    }

    /// Attaches per-pixel weights; they must be finite and positive inside
    /// the mask.
    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        self.canvas.check_len("weights", weights.len())?;
        for (index, (&w, &m)) in weights.iter().zip(&self.mask).enumerate() {
            if m && !(w.is_finite() && w > T::zero()) {
                return Err(Error::InvalidWeight { index });
            }
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, pixel: usize) -> T {
        self.weights.as_ref().map_or(T::one(), |w| w[pixel])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn masked_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn masked_values(&self) -> Vec<T> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter_map(|(&v, &m)| m.then_some(v))
            .collect()
    }

    /// True when every masked value is identical, i.e. the image carries no
    /// rank information.
    pub fn is_uninformative(&self) -> bool {
        let mut masked = self.values.iter().zip(&self.mask).filter(|(_, &m)| m);
        match masked.next() {
            None => true,
            Some((first, _)) => masked.all(|(v, _)| v.total_order(first) == Ordering::Equal),
        }
    }
}

/// Multiset of display values, kept sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSource<T>(Vec<T>);

impl<T: Scalar> HistogramSource<T> {
    /// Wraps values that are already non-decreasing.
    pub fn from_sorted(sorted: Vec<T>) -> Result<Self> {
        crate::rankcore::check_finite(&sorted)?;
        if sorted.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::DegenerateInput(
                "histogram source must be non-decreasing".into(),
            ));
        }
        Ok(Self(sorted))
    }

    /// Takes the value multiset of an arbitrary image.
    pub fn from_values(mut values: Vec<T>) -> Result<Self> {
        crate::rankcore::check_finite(&values)?;
        values.sort_unstable_by(|a, b| a.total_order(b));
        Ok(Self(values))
    }

    /// `0, 1, ..., len-1`: renders the raw 0-based ranks.
    pub fn uniform(len: usize) -> Self {
        Self((0..len).map(T::from_usize_lossy).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sorted_values(&self) -> &[T] {
        &self.0
    }
}

/// Consensus ranks and accumulated votes over one canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState<T> {
    canvas: Canvas,
    ranks: Vec<u64>,
    votes: Vec<T>,
}

impl<T: Scalar> ConsensusState<T> {
    /// Uniformly random permutation of `1..=P` with zero votes.
    pub fn init_random(canvas: Canvas, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ranks: Vec<u64> = (1..=canvas.len() as u64).collect();
        ranks.shuffle(&mut rng);
        Self {
            canvas,
            ranks,
            votes: vec![T::zero(); canvas.len()],
        }
    }

    /// Ranks follow the image values; equal values are ordered by a seeded
    /// random permutation.
    pub fn init_from_image(image: &ObservedImage<T>, seed: u64) -> Result<Self> {
        if image.mask.iter().any(|&m| !m) {
            return Err(Error::MaskNotFull);
        }
        crate::rankcore::check_finite(&image.values)?;
        let p = image.canvas.len();
        let mut tiebreak: Vec<usize> = (0..p).collect();
        tiebreak.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let values = &image.values;
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_unstable_by(|&i, &j| {
            values[i]
                .total_order(&values[j])
                .then(tiebreak[i].cmp(&tiebreak[j]))
        });
        let mut ranks = vec![0u64; p];
        for (pos, &i) in order.iter().enumerate() {
            ranks[i] = pos as u64 + 1;
        }
        Ok(Self {
            canvas: image.canvas,
            ranks,
            votes: vec![T::zero(); p],
        })
    }

    /// Validates the permutation and vote invariants.
    pub fn from_parts(canvas: Canvas, ranks: Vec<u64>, votes: Vec<T>) -> Result<Self> {
        canvas.check_len("ranks", ranks.len())?;
        canvas.check_len("votes", votes.len())?;
        check_permutation(&ranks)?;
        if let Some(i) = votes.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::Integrity(format!(
                "vote at pixel {i} is negative or non-finite"
            )));
        }
        Ok(Self {
            canvas,
            ranks,
            votes,
        })
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas
    }

    /// 1-based consensus rank per pixel.
    pub fn ranks(&self) -> &[u64] {
        &self.ranks
    }

    pub fn votes(&self) -> &[T] {
        &self.votes
    }

    /// True once every pixel holds at least `P` votes. From then on a
    /// unit-weight image can no longer reorder uniformly voted pixels.
    pub fn is_frozen(&self) -> bool {
        let p = T::from_usize_lossy(self.canvas.len());
        self.votes.iter().all(|&v| v >= p)
    }

    /// Histogram-matches the state: the pixel with rank `k` gets
    /// `source[k-1]`.
    pub fn render(&self, source: &HistogramSource<T>) -> Result<Vec<T>> {
        self.canvas.check_len("histogram source", source.len())?;
        Ok(self
            .ranks
            .iter()
            .map(|&r| source.0[(r - 1) as usize])
            .collect())
    }
}

pub(crate) fn check_permutation(ranks: &[u64]) -> Result<()> {
    let mut seen = vec![false; ranks.len()];
    for (i, &r) in ranks.iter().enumerate() {
        if r == 0 || r > ranks.len() as u64 {
            return Err(Error::Integrity(format!(
                "rank {r} at pixel {i} outside 1..={}",
                ranks.len()
            )));
        }
        if std::mem::replace(&mut seen[(r - 1) as usize], true) {
            return Err(Error::Integrity(format!("rank {r} appears twice")));
        }
    }
    Ok(())
}

/// Experimental per-pixel weights `1/h(d)^2`, where `h` is the fraction of
/// masked pixels sharing the exact value `d`. Rescaled to mean 1 over the
/// mask; zero outside it.
pub fn histogram_weights<T: Scalar>(image: &ObservedImage<T>) -> Result<Vec<T>> {
    let idx = image.masked_indices();
    let n = idx.len();
    if n < 2 {
        return Err(Error::DegenerateMask {
            masked: n,
            required: 2,
        });
    }
    let vals: Vec<T> = idx.iter().map(|&i| image.values[i]).collect();
    crate::rankcore::check_finite(&vals)?;
    let order = crate::rankcore::argsort_unchecked(&vals);

    let nf = T::from_usize_lossy(n);
    let mut raw = vec![T::zero(); n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[order[end]].total_order(&vals[order[start]]) == Ordering::Equal {
            end += 1;
        }
        let h = T::from_usize_lossy(end - start) / nf;
        let w = T::one() / (h * h);
        for &k in &order[start..end] {
            raw[k] = w;
        }
        start = end;
    }
    let mean = raw.iter().fold(T::zero(), |acc, &w| acc + w) / nf;

    let mut weights = vec![T::zero(); image.canvas.len()];
    for (k, &i) in idx.iter().enumerate() {
        weights[i] = raw[k] / mean;
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas(w: usize, h: usize) -> Canvas {
        Canvas::new(w, h).unwrap()
    }

    #[test]
    fn canvas_rejects_empty() {
        assert!(Canvas::new(0, 3).is_err());
        assert_eq!(canvas(3, 2).index(2, 1), 5);
    }

    #[test]
    fn init_random_is_permutation_and_deterministic() {
        let s = ConsensusState::<f64>::init_random(canvas(2, 2), 11);
        let mut r = s.ranks().to_vec();
        r.sort_unstable();
        assert_eq!(r, vec![1, 2, 3, 4]);
        assert_eq!(s.votes(), &[0.0; 4]);
        assert_eq!(s, ConsensusState::init_random(canvas(2, 2), 11));

        let one = ConsensusState::<f32>::init_random(canvas(1, 1), 5);
        assert_eq!(one.ranks(), &[1]);
        assert_eq!(one.votes(), &[0.0]);
    }

    #[test]
    fn init_from_image_orders_values() {
        let img = ObservedImage::full(canvas(4, 1), vec![10.0, 30.0, 20.0, 40.0]).unwrap();
        let s = ConsensusState::init_from_image(&img, 0).unwrap();
        assert_eq!(s.ranks(), &[1, 3, 2, 4]);
    }

    #[test]
    fn init_from_image_ties_follow_seed() {
        let img = ObservedImage::full(canvas(3, 1), vec![5.0, 5.0, 9.0]).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..32 {
            let s = ConsensusState::init_from_image(&img, seed).unwrap();
            assert_eq!(s.ranks()[2], 3);
            seen.insert(s.ranks().to_vec());
        }
        // both resolutions of the tie show up
        assert_eq!(
            seen.into_iter().collect::<Vec<_>>(),
            vec![vec![1, 2, 3], vec![2, 1, 3]]
        );
    }

    #[test]
    fn init_from_constant_image_is_seeded_permutation() {
        let img = ObservedImage::full(canvas(3, 3), vec![7.0; 9]).unwrap();
        let a = ConsensusState::init_from_image(&img, 1).unwrap();
        let b = ConsensusState::init_from_image(&img, 1).unwrap();
        assert_eq!(a, b);
        check_permutation(a.ranks()).unwrap();
    }

    #[test]
    fn init_from_partial_image_fails() {
        let img = ObservedImage::new(canvas(2, 1), vec![1.0, 2.0], vec![true, false]).unwrap();
        assert!(matches!(
            ConsensusState::init_from_image(&img, 0),
            Err(Error::MaskNotFull)
        ));
    }

    #[test]
    fn frozen_threshold() {
        let c = canvas(2, 2);
        let s = ConsensusState::from_parts(c, vec![1, 2, 3, 4], vec![4.0; 4]).unwrap();
        assert!(s.is_frozen());
        let s = ConsensusState::from_parts(c, vec![1, 2, 3, 4], vec![4.0, 4.0, 4.0, 3.0]).unwrap();
        assert!(!s.is_frozen());
    }

    #[test]
    fn render_examples() {
        let c = canvas(2, 2);
        let s = ConsensusState::from_parts(c, vec![2, 4, 1, 3], vec![0.0; 4]).unwrap();
        let src = HistogramSource::from_sorted(vec![0.0, 0.0, 5.0, 9.0]).unwrap();
        assert_eq!(s.render(&src).unwrap(), vec![0.0, 9.0, 0.0, 5.0]);
        assert_eq!(
            s.render(&HistogramSource::uniform(4)).unwrap(),
            vec![1.0, 3.0, 0.0, 2.0]
        );
        let flat = HistogramSource::from_sorted(vec![3.0; 4]).unwrap();
        assert_eq!(s.render(&flat).unwrap(), vec![3.0; 4]);
        assert!(matches!(
            s.render(&HistogramSource::uniform(3)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn histogram_source_validation() {
        assert!(HistogramSource::from_sorted(vec![1.0, 0.0]).is_err());
        let h = HistogramSource::from_values(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(h.sorted_values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn from_parts_rejects_bad_ranks() {
        let c = canvas(3, 1);
        assert!(matches!(
            ConsensusState::<f64>::from_parts(c, vec![1, 1, 3], vec![0.0; 3]),
            Err(Error::Integrity(_))
        ));
        assert!(matches!(
            ConsensusState::<f64>::from_parts(c, vec![0, 1, 2], vec![0.0; 3]),
            Err(Error::Integrity(_))
        ));
        assert!(matches!(
            ConsensusState::<f64>::from_parts(c, vec![1, 2, 3], vec![0.0, -1.0, 0.0]),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn histogram_weight_examples() {
        let c = canvas(4, 1);
        let distinct = ObservedImage::full(c, vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(histogram_weights(&distinct).unwrap(), vec![1.0; 4]);

        let img = ObservedImage::full(c, vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        let w: Vec<f64> = histogram_weights(&img).unwrap();
        for (got, want) in w.iter().zip([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }

        let constant = ObservedImage::new(c, vec![2.0, 2.0, 2.0, 9.0], vec![true, true, true, false])
            .unwrap();
        assert_eq!(histogram_weights(&constant).unwrap(), vec![1.0, 1.0, 1.0, 0.0]);

        let tiny = ObservedImage::new(c, vec![1.0; 4], vec![true, false, false, false]).unwrap();
        assert!(matches!(
            histogram_weights(&tiny),
            Err(Error::DegenerateMask { masked: 1, .. })
        ));
    }

    #[test]
    fn weights_must_be_positive_in_mask() {
        let c = canvas(2, 1);
        let img = ObservedImage::new(c, vec![1.0, 2.0], vec![true, false]).unwrap();
        assert!(img.clone().with_weights(vec![1.0, 0.0]).is_ok());
        assert!(matches!(
            img.with_weights(vec![0.0, 1.0]),
            Err(Error::InvalidWeight { index: 0 })
        ));
    }
}
