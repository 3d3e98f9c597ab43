use super::SimilarityTransform;
use crate::consensus::{Canvas, ObservedImage};
use crate::error::Result;
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Nearest-neighbour resampling of `image` onto `canvas`.
///
/// Each canvas pixel centre is mapped back through the inverse of
/// `transform` (image to canvas) and rounded to the nearest source pixel.
/// Pixels landing inside the source get its value and a true mask entry;
/// the rest are zero and unmasked.
pub fn resample<T: Scalar>(
    image: &Grid<T>,
    transform: &SimilarityTransform,
    canvas: Canvas,
) -> Result<ObservedImage<T>> {
    let inv = transform.inverse();
    let (w, h) = (image.width() as f64, image.height() as f64);
    let mut values = vec![T::zero(); canvas.len()];
    let mut mask = vec![false; canvas.len()];
    for row in 0..canvas.height() {
        for col in 0..canvas.width() {
            let (sx, sy) = inv.apply(col as f64, row as f64);
            let (ix, iy) = ((sx + 0.5).floor(), (sy + 0.5).floor());
            if ix >= 0.0 && iy >= 0.0 && ix < w && iy < h {
                let p = canvas.index(col, row);
                values[p] = image.get(ix as usize, iy as usize);
                mask[p] = true;
            }
        }
    }
    ObservedImage::new(canvas, values, mask)
}
