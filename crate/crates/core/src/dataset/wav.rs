//! Mono RIFF/WAVE I/O for 16-bit PCM and 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::buffer::SampleBuffer;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32_768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

fn format_error(path: &Path, reason: impl ToString) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<SampleBuffer> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => Error::Io(io),
        other => format_error(path, other),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_error(
            path,
            format!("expected mono audio, found {} channels", spec.channels),
        ));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(format_error(
                path,
                format!("unsupported sample format {fmt:?} with {bits} bits"),
            ))
        }
    }
    .map_err(|e| format_error(path, e))?;
    SampleBuffer::new(spec.sample_rate, samples)
}

pub fn save_wav(path: impl AsRef<Path>, buf: &SampleBuffer, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.fs(),
        bits_per_sample: bits,
        sample_format,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => format_error(path, other),
    };
    let mut writer = WavWriter::create(path, spec).map_err(wrap)?;
    for &s in buf.samples() {
        match format {
            WavFormat::Pcm16 => {
                let q = (s * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64);
                writer.write_sample(q as i16).map_err(wrap)?;
            }
            WavFormat::Float32 => writer.write_sample(s as f32).map_err(wrap)?,
        }
    }
    writer.finalize().map_err(wrap)
}
