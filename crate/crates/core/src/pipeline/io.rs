//! Raster I/O for PNG and PGM/PPM (ASCII or binary).
//!
//! Sample values pass through unscaled: an 8-bit file yields `0..=255`, a
//! 16-bit file `0..=65535`. Only ranks matter downstream.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedImage {
    /// One grid for grayscale, three (R, G, B) for colour.
    pub channels: Vec<Grid<f64>>,
    pub bit_depth: u8,
}

impl DecodedImage {
    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    /// Rec. 601 luma for colour input; the single channel otherwise.
    pub fn luminance(&self) -> Grid<f64> {
        luminance(&self.channels)
    }
}

pub fn luminance(channels: &[Grid<f64>]) -> Grid<f64> {
    match channels {
        [r, g, b] => {
            let data = r
                .data()
                .iter()
                .zip(g.data())
                .zip(b.data())
                .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
                .collect();
            Grid::new(r.width(), r.height(), data).expect("channels share a shape")
        }
        [single, ..] => single.clone(),
        [] => panic!("luminance of an image without channels"),
    }
}

fn decode_err(path: &Path, reason: impl ToString) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn planes<P, S>(w: u32, h: u32, raw: &[S], n: usize) -> Vec<Grid<f64>>
where
    S: Copy + Into<f64>,
    P: Sized,
{
    (0..n)
        .map(|c| {
            let data = raw.iter().skip(c).step_by(n).map(|&v| v.into()).collect();
            Grid::new(w as usize, h as usize, data).expect("decoder returns full planes")
        })
        .collect()
}

pub fn decode_image(path: impl AsRef<Path>) -> Result<DecodedImage> {
    let path = path.as_ref();
    let img = ImageReader::open(path)
        .map_err(|e| decode_err(path, e))?
        .with_guessed_format()
        .map_err(|e| decode_err(path, e))?
        .decode()
        .map_err(|e| decode_err(path, e))?;
    let (w, h) = (img.width(), img.height());
    let (channels, bit_depth) = match img {
        DynamicImage::ImageLuma8(b) => (planes::<u8, u8>(w, h, b.as_raw(), 1), 8),
        DynamicImage::ImageLumaA8(b) => (planes::<u8, u8>(w, h, b.as_raw(), 2)[..1].to_vec(), 8),
        DynamicImage::ImageRgb8(b) => (planes::<u8, u8>(w, h, b.as_raw(), 3), 8),
        DynamicImage::ImageRgba8(b) => (planes::<u8, u8>(w, h, b.as_raw(), 4)[..3].to_vec(), 8),
        DynamicImage::ImageLuma16(b) => (planes::<u16, u16>(w, h, b.as_raw(), 1), 16),
        DynamicImage::ImageLumaA16(b) => {
            (planes::<u16, u16>(w, h, b.as_raw(), 2)[..1].to_vec(), 16)
        }
        DynamicImage::ImageRgb16(b) => (planes::<u16, u16>(w, h, b.as_raw(), 3), 16),
        DynamicImage::ImageRgba16(b) => {
            (planes::<u16, u16>(w, h, b.as_raw(), 4)[..3].to_vec(), 16)
        }
        other => {
            return Err(decode_err(
                path,
                format!("unsupported pixel layout {:?}", other.color()),
            ))
        }
    };
    Ok(DecodedImage {
        channels,
        bit_depth,
    })
}

/// Writes one (gray) or three (RGB) channels. Values are rounded and
/// clamped to the range of `bit_depth` (8 or 16). The format follows the
/// file extension.
pub fn write_image(path: impl AsRef<Path>, channels: &[Grid<f64>], bit_depth: u8) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (channels[0].width() as u32, channels[0].height() as u32);
    let interleaved: Vec<f64> = match channels {
        [g] => g.data().to_vec(),
        [r, g, b] => r
            .data()
            .iter()
            .zip(g.data())
            .zip(b.data())
            .flat_map(|((&r, &g), &b)| [r, g, b])
            .collect(),
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "cannot write {} channels",
                channels.len()
            )))
        }
    };
    let save_err = |e: image::ImageError| Error::Io(std::io::Error::other(e));
    match (channels.len(), bit_depth) {
        (1, 8) => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, to_u8(&interleaved))
            .expect("buffer size matches")
            .save(path)
            .map_err(save_err),
        (1, 16) => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, to_u16(&interleaved))
            .expect("buffer size matches")
            .save(path)
            .map_err(save_err),
        (3, 8) => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, to_u8(&interleaved))
            .expect("buffer size matches")
            .save(path)
            .map_err(save_err),
        (3, 16) => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, to_u16(&interleaved))
            .expect("buffer size matches")
            .save(path)
            .map_err(save_err),
        (_, d) => Err(Error::Config(format!("unsupported bit depth {d}"))),
    }
}

fn to_u8(v: &[f64]) -> Vec<u8> {
    v.iter().map(|x| x.round().clamp(0.0, 255.0) as u8).collect()
}

fn to_u16(v: &[f64]) -> Vec<u16> {
    v.iter().map(|x| x.round().clamp(0.0, 65535.0) as u16).collect()
}

/// Linear stretch of the joint value range onto `0..=65535`, for writing
/// float-valued renders losslessly enough to keep their ordering.
pub fn stretch_to_u16(channels: &[Grid<f64>]) -> Vec<Grid<f64>> {
    let (lo, hi) = channels
        .iter()
        .flat_map(|g| g.data())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    channels
        .iter()
        .map(|g| g.map(|v| (v - lo) / span * 65535.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        std::fs::write(&p, "P2\n2 2\n255\n0 128\n255 64\n").unwrap();
        let img = decode_image(&p).unwrap();
        assert_eq!(img.channels.len(), 1);
        assert_eq!(img.bit_depth, 8);
        assert_eq!(img.channels[0].data(), &[0.0, 128.0, 255.0, 64.0]);
    }

    #[test]
    fn binary_ppm_has_three_planes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        std::fs::write(&p, bytes).unwrap();
        let img = decode_image(&p).unwrap();
        assert_eq!(img.channels.len(), 3);
        assert_eq!(img.channels[0].data(), &[1.0, 4.0]);
        assert_eq!(img.channels[2].data(), &[3.0, 6.0]);
    }

    #[test]
    fn png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::from_fn(5, 3, |x, y| (x * 1000 + y * 7) as f64).unwrap();
        let p = dir.path().join("g16.png");
        write_image(&p, &[g.clone()], 16).unwrap();
        let back = decode_image(&p).unwrap();
        assert_eq!(back.bit_depth, 16);
        assert_eq!(back.channels[0], g);

        let rgb = [g.map(|v| v % 256.0), g.map(|v| (v + 1.0) % 256.0), g.map(|_| 9.0)];
        let p = dir.path().join("rgb.png");
        write_image(&p, &rgb, 8).unwrap();
        let back = decode_image(&p).unwrap();
        assert_eq!(back.channels, rgb.to_vec());
    }

    #[test]
    fn text_file_fails() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("notes.txt");
        std::fs::write(&p, "hello world").unwrap();
        assert!(matches!(decode_image(&p), Err(Error::Decode { .. })));
        assert!(matches!(
            decode_image(dir.path().join("missing.png")),
            Err(Error::Decode { .. })
        ));
    }

    #[test]
    fn luminance_weights() {
        let one = Grid::filled(1, 1, 100.0).unwrap();
        let zero = Grid::filled(1, 1, 0.0).unwrap();
        let l = luminance(&[one.clone(), zero.clone(), zero]);
        assert!((l.data()[0] - 29.9).abs() < 1e-12);
    }
}
