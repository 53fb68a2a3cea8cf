//! Short-time Fourier transform without center padding.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::window::WindowKind;
use crate::buffer::SampleBuffer;
use crate::error::{Error, Result};

/// Analysis parameters of an STFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftParams {
    pub n_fft: usize,
    pub win_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl StftParams {
    /// 4096-point FFT, 4080-sample Hann window, 240-sample hop (5 ms at 48 kHz).
    pub const ULTRASOUND: StftParams = StftParams {
        n_fft: 4096,
        win_len: 4080,
        hop: 240,
        window: WindowKind::Hann,
    };

    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 || self.win_len == 0 {
            return Err(Error::config("FFT and window length must be positive"));
        }
        if self.win_len > self.n_fft {
            return Err(Error::config(format!(
                "window length {} exceeds FFT size {}",
                self.win_len, self.n_fft
            )));
        }
        if self.hop == 0 {
            return Err(Error::config("hop must be at least 1"));
        }
        Ok(())
    }

    /// Number of frames for a signal of `len` samples, or `None` if shorter than one window.
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.win_len).then(|| (len - self.win_len) / self.hop + 1)
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

impl Default for StftParams {
    fn default() -> Self {
        Self::ULTRASOUND
    }
}

/// One-sided complex STFT, `T x (n_fft / 2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub frames: Array2<Complex64>,
    pub params: StftParams,
    pub fs: u32,
}

impl ComplexSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }

    /// Bin spacing `fs / n_fft` in Hz.
    pub fn bin_hz(&self) -> f64 {
        bin_hz(self.fs, self.params.n_fft)
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm())
    }

    pub fn power(&self) -> Array2<f64> {
        self.frames.mapv(|c| c.norm_sqr())
    }
}

pub fn bin_hz(fs: u32, n_fft: usize) -> f64 {
    fs as f64 / n_fft as f64
}

/// Frame `t` covers samples `[t * hop, t * hop + win_len)`; each frame is
/// windowed and zero-padded to `n_fft` before the transform.
pub fn stft(x: &SampleBuffer, params: &StftParams) -> Result<ComplexSpectrogram> {
    params.validate()?;
    let n_frames = params.frame_count(x.len()).ok_or(Error::TooShort {
        needed: params.win_len,
        actual: x.len(),
    })?;
    let window = params.window.coefficients(params.win_len);
    let n_bins = params.n_bins();
    let fft = FftPlanner::new().plan_fft_forward(params.n_fft);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); params.n_fft];
    let mut frames = Array2::zeros((n_frames, n_bins));
    let samples = x.samples();
    for (t, mut row) in frames.rows_mut().into_iter().enumerate() {
        let start = t * params.hop;
        let seg = &samples[start..start + params.win_len];
        for (b, (s, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex64::new(s * w, 0.0);
        }
        buf[params.win_len..].fill(Complex64::default());
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (dst, src) in row.iter_mut().zip(&buf[..n_bins]) {
            *dst = *src;
        }
    }
    Ok(ComplexSpectrogram {
        frames,
        params: *params,
        fs: x.fs(),
    })
}
