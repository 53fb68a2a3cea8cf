//! HTK-scale triangular Mel filterbank and log-Mel spectrograms.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::stft::{stft, StftParams};
use super::window::WindowKind;
use crate::buffer::SampleBuffer;
use crate::error::{Error, Result};

pub const MEL_BANDS: usize = 128;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub fs: u32,
    pub n_fft: usize,
    pub win_len: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MelConfig {
    /// 16 kHz audio, 25 ms window, 5 ms hop, 0 to 8 kHz.
    fn default() -> Self {
        Self {
            fs: 16_000,
            n_fft: 1024,
            win_len: 400,
            hop: 80,
            window: WindowKind::Hann,
            fmin: 0.0,
            fmax: 8_000.0,
        }
    }
}

impl MelConfig {
    pub fn stft_params(&self) -> StftParams {
        StftParams {
            n_fft: self.n_fft,
            win_len: self.win_len,
            hop: self.hop,
            window: self.window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft_params().validate()?;
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= self.fs as f64 / 2.0) {
            return Err(Error::config(format!(
                "need 0 <= fmin < fmax <= Nyquist, got {}..{}",
                self.fmin, self.fmax
            )));
        }
        Ok(())
    }
}

/// Triangular filterbank over the one-sided FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x (n_fft / 2 + 1)` weights; each triangle peaks at 1.
    pub weights: Array2<f64>,
    /// `n_mels + 2` edge/centre frequencies in Hz.
    pub points_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, fs: u32, fmin: f64, fmax: f64) -> Self {
        let lo = hz_to_mel(fmin);
        let hi = hz_to_mel(fmax);
        let points_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = fs as f64 / n_fft as f64;
        let weights = Array2::from_shape_fn((n_mels, n_bins), |(m, k)| {
            triangle(k as f64 * bin_hz, points_hz[m], points_hz[m + 1], points_hz[m + 2])
        });
        Self { weights, points_hz }
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    /// Centre frequency of band `m` in Hz.
    pub fn centre(&self, m: usize) -> f64 {
        self.points_hz[m + 1]
    }
}

pub(crate) fn triangle(f: f64, lower: f64, centre: f64, upper: f64) -> f64 {
    let rising = (f - lower) / (centre - lower);
    let falling = (upper - f) / (upper - centre);
    rising.min(falling).max(0.0)
}

/// `T x 128` natural-log Mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFeature {
    pub frames: Array2<f64>,
    pub fs: u32,
    pub hop: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
}

impl MelFeature {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    /// Frame period in seconds.
    pub fn frame_period(&self) -> f64 {
        self.hop as f64 / self.fs as f64
    }
}

/// Power STFT, 128-band HTK filterbank, natural log with a `1e-10` floor.
pub fn mel_spectrogram(x: &SampleBuffer, cfg: &MelConfig) -> Result<MelFeature> {
    cfg.validate()?;
    x.require_rate(cfg.fs)?;
    let spec = stft(x, &cfg.stft_params())?;
    let bank = MelFilterbank::new(MEL_BANDS, cfg.n_fft, cfg.fs, cfg.fmin, cfg.fmax);
    let power = spec.power();
    let energies = power.dot(&bank.weights.t());
    let frames = energies.mapv(|e| e.max(LOG_FLOOR).ln());
    debug_assert_eq!(frames.len_of(Axis(1)), MEL_BANDS);
    Ok(MelFeature {
        frames,
        fs: cfg.fs,
        hop: cfg.hop,
        mel_fmin: cfg.fmin,
        mel_fmax: cfg.fmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_roundtrip() {
        for hz in [0.0, 700.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        // 1000 Hz is about 1000 mel on the HTK scale
        assert!((hz_to_mel(1000.0) - 999.985).abs() < 1e-2);
    }

    #[test]
    fn filters_are_nonnegative_and_unimodal() {
        let bank = MelFilterbank::new(MEL_BANDS, 1024, 16_000, 0.0, 8_000.0);
        for row in bank.weights.rows() {
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!(row.iter().take(peak + 1).collect::<Vec<_>>().windows(2).all(|w| w[0] <= w[1]));
            assert!(row.iter().skip(peak).collect::<Vec<_>>().windows(2).all(|w| w[0] >= w[1]));
            assert!(row.sum() > 0.0);
        }
    }

    #[test]
    fn adjacent_triangles_share_edges() {
        let bank = MelFilterbank::new(MEL_BANDS, 1024, 16_000, 0.0, 8_000.0);
        let p = &bank.points_hz;
        for m in 0..MEL_BANDS - 1 {
            // band m falls to zero where band m + 1 peaks, and band m + 1 rises from band m's peak
            assert_eq!(triangle(p[m + 2], p[m], p[m + 1], p[m + 2]), 0.0);
            assert_eq!(triangle(p[m + 1], p[m + 1], p[m + 2], p[m + 3]), 0.0);
            assert_eq!(triangle(p[m + 2], p[m + 1], p[m + 2], p[m + 3]), 1.0);
            // inside the overlap the two filters sum to one
            let f = 0.5 * (p[m + 1] + p[m + 2]);
            let sum = triangle(f, p[m], p[m + 1], p[m + 2]) + triangle(f, p[m + 1], p[m + 2], p[m + 3]);
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert_eq!(p[0], 0.0);
        assert!((p[MEL_BANDS + 1] - 8_000.0).abs() < 1e-9);
    }

    #[test]
    fn silence_sits_at_floor() {
        let x = SampleBuffer::zeros(16_000, 4000).unwrap();
        let mel = mel_spectrogram(&x, &MelConfig::default()).unwrap();
        assert_eq!(mel.frames.ncols(), 128);
        assert_eq!(mel.n_frames(), (4000 - 400) / 80 + 1);
        assert!(mel.frames.iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn wrong_rate() {
        let x = SampleBuffer::zeros(48_000, 4000).unwrap();
        assert!(mel_spectrogram(&x, &MelConfig::default()).is_err());
    }
}
