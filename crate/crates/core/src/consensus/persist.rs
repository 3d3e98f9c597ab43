//! Binary state file.
//!
//! Little-endian, no padding:
//!
//! | bytes   | field                         |
//! |---------|-------------------------------|
//! | 4       | magic `ENHC`                  |
//! | 4       | version `u32` (= 1)           |
//! | 4 + 4   | width, height `u32`           |
//! | 8 * P   | ranks `u64`, row-major        |
//! | 8 * P   | votes `f64`, row-major        |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Canvas, ConsensusState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const STATE_MAGIC: &[u8; 4] = b"ENHC";
pub const STATE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn write_state<T: Scalar, W: Write>(state: &ConsensusState<T>, mut out: W) -> Result<()> {
    let width = u32::try_from(state.canvas.width())
        .map_err(|_| Error::Format("canvas width exceeds u32".into()))?;
    let height = u32::try_from(state.canvas.height())
        .map_err(|_| Error::Format("canvas height exceeds u32".into()))?;
    out.write_all(STATE_MAGIC)?;
    out.write_all(&STATE_VERSION.to_le_bytes())?;
    out.write_all(&width.to_le_bytes())?;
    out.write_all(&height.to_le_bytes())?;
    for &r in &state.ranks {
        out.write_all(&r.to_le_bytes())?;
    }
    for &v in &state.votes {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_state<T: Scalar, R: Read>(mut input: R) -> Result<ConsensusState<T>> {
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Format("file shorter than the 16-byte header".into()))?;
    if &header[..4] != STATE_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != STATE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (width, height) = (word(8) as usize, word(12) as usize);
    let canvas = Canvas::new(width, height).map_err(|e| Error::Format(e.to_string()))?;
    let p = canvas.len();

    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 16 * p {
        return Err(Error::Format(format!(
            "expected {} payload bytes for {width}x{height}, found {}",
            16 * p,
            body.len()
        )));
    }
    let (rank_bytes, vote_bytes) = body.split_at(8 * p);
    let ranks = rank_bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let votes = vote_bytes
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ConsensusState::from_parts(canvas, ranks, votes)
}

pub fn save_state<T: Scalar>(state: &ConsensusState<T>, path: impl AsRef<Path>) -> Result<()> {
    write_state(state, BufWriter::new(File::create(path)?))
}

pub fn load_state<T: Scalar>(path: impl AsRef<Path>) -> Result<ConsensusState<T>> {
    read_state(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConsensusState<f64> {
        let c = Canvas::new(3, 2).unwrap();
        ConsensusState::from_parts(c, vec![6, 2, 4, 1, 3, 5], vec![0.0, 1.5, 2.0, 0.25, 7.0, 1e-300])
            .unwrap()
    }

    fn bytes(s: &ConsensusState<f64>) -> Vec<u8> {
        let mut out = Vec::new();
        write_state(s, &mut out).unwrap();
        out
    }

    #[test]
    fn layout_is_documented_one() {
        let b = bytes(&sample());
        assert_eq!(b.len(), 16 + 16 * 6);
        assert_eq!(&b[..4], b"ENHC");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &3u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(&b[16..24], &6u64.to_le_bytes());
        assert_eq!(&b[16 + 48..16 + 56], &0.0f64.to_le_bytes());
        assert_eq!(&b[16 + 56..16 + 64], &1.5f64.to_le_bytes());
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert_eq!(read_state::<f64, _>(&bytes(&s)[..]).unwrap(), s);
    }

    #[test]
    fn f32_votes_survive_round_trip() {
        let c = Canvas::new(2, 1).unwrap();
        let s = ConsensusState::<f32>::from_parts(c, vec![2, 1], vec![0.1, 3.7]).unwrap();
        let mut out = Vec::new();
        write_state(&s, &mut out).unwrap();
        assert_eq!(read_state::<f32, _>(&out[..]).unwrap(), s);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let good = bytes(&sample());

        let truncated = &good[..good.len() - 3];
        assert!(matches!(read_state::<f64, _>(truncated), Err(Error::Format(_))));
        assert!(matches!(read_state::<f64, _>(&good[..10]), Err(Error::Format(_))));

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_state::<f64, _>(&bad_magic[..]), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(read_state::<f64, _>(&bad_version[..]), Err(Error::Format(_))));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(read_state::<f64, _>(&trailing[..]), Err(Error::Format(_))));

        let mut dup = good.clone();
        dup[24..32].copy_from_slice(&6u64.to_le_bytes());
        assert!(matches!(read_state::<f64, _>(&dup[..]), Err(Error::Integrity(_))));

        let mut zero_width = good;
        zero_width[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_state::<f64, _>(&zero_width[..]), Err(Error::Format(_))));
    }
}
