//! Uniformly sampled mono waveforms.

use crate::error::{Error, Result};

/// A mono waveform together with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    fs: u32,
    samples: Vec<f64>,
}

impl SampleBuffer {
    pub fn new(fs: u32, samples: Vec<f64>) -> Result<Self> {
        if fs == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(Self { fs, samples })
    }

    pub fn zeros(fs: u32, len: usize) -> Result<Self> {
        Self::new(fs, vec![0.0; len])
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Errors unless `other` shares this buffer's sample rate.
    pub fn require_same_rate(&self, other: &SampleBuffer) -> Result<()> {
        self.require_rate(other.fs)
    }

    pub fn require_rate(&self, fs: u32) -> Result<()> {
        if self.fs != fs {
            return Err(Error::SampleRateMismatch {
                expected: fs,
                actual: self.fs,
            });
        }
        Ok(())
    }

    /// Elementwise sum of two equal-rate, equal-length buffers.
    pub fn add(&self, other: &SampleBuffer) -> Result<SampleBuffer> {
        self.require_same_rate(other)?;
        if self.len() != other.len() {
            return Err(Error::shape(format!(
                "cannot add buffers of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Ok(SampleBuffer {
            fs: self.fs,
            samples,
        })
    }

    pub fn scaled(&self, gain: f64) -> SampleBuffer {
        SampleBuffer {
            fs: self.fs,
            samples: self.samples.iter().map(|s| s * gain).collect(),
        }
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rate_and_nan() {
        assert!(SampleBuffer::new(0, vec![]).is_err());
        assert!(SampleBuffer::new(48_000, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn add_requires_matching_rate() {
        let a = SampleBuffer::zeros(48_000, 4).unwrap();
        let b = SampleBuffer::zeros(16_000, 4).unwrap();
        assert!(matches!(
            a.add(&b),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn rms_of_constant() {
        let a = SampleBuffer::new(8, vec![0.5; 8]).unwrap();
        assert!((a.rms() - 0.5).abs() < 1e-15);
    }
}
