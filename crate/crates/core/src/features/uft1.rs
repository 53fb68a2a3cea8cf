//! `UFT1` feature files: magic `UFT1`, little-endian `u32` rows, cols, fs and
//! hop, then `rows * cols` little-endian `f32` values in row-major order.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"UFT1";
const HEADER_LEN: usize = 4 + 4 * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Uft1 {
    pub frames: Array2<f64>,
    pub fs: u32,
    pub hop: u32,
}

impl Uft1 {
    pub fn new(frames: Array2<f64>, fs: u32, hop: u32) -> Self {
        Self { frames, fs, hop }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (rows, cols) = self.frames.dim();
        let rows = u32::try_from(rows).map_err(|_| Error::shape("too many rows for UFT1"))?;
        let cols = u32::try_from(cols).map_err(|_| Error::shape("too many columns for UFT1"))?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.frames.len() * 4);
        out.extend_from_slice(MAGIC);
        for v in [rows, cols, self.fs, self.hop] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.frames.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: origin.to_path_buf(),
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("missing UFT1 magic".into()));
        }
        let word = |i: usize| {
            let at = 4 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
        };
        let (rows, cols, fs, hop) = (word(0) as usize, word(1) as usize, word(2), word(3));
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| bad("dimensions overflow".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(bad(format!(
                "expected {expected} payload bytes for {rows}x{cols}, found {}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect();
        let frames = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| bad(e.to_string()))?;
        Ok(Self { frames, fs, hop })
    }
}

pub fn write_uft1(path: impl AsRef<Path>, feature: &Uft1) -> Result<()> {
    fs::write(path, feature.to_bytes()?)?;
    Ok(())
}

pub fn read_uft1(path: impl AsRef<Path>) -> Result<Uft1> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    Uft1::from_bytes(&bytes, path)
}
