//! Model-facing tensors: the `T x 14` ultrasound Doppler feature, the
//! frame-locked `T x 128` Mel feature, and the temporal difference operator.
//!
//! Both features tick at 5 ms. The ultrasound STFT uses an 85 ms window while
//! the Mel analysis uses 25 ms, so [`FeaturePipeline::mel`] drops the Mel
//! frames whose centres fall outside the ultrasound frame grid; frame `t` of
//! either feature is then centred on the same instant.

mod uft1;

pub use uft1::{read_uft1, write_uft1, Uft1};

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::buffer::SampleBuffer;
use crate::dsp::{
    design_elliptic, mel_spectrogram, resample_3to1, stft, ComplexSpectrogram, EllipticSpec,
    MelConfig, MelFeature, StftParams,
};
use crate::error::{Error, Result};
use crate::sensing::ToneConfig;

/// Retained bin offsets around each carrier, in channel order.
pub const OFFSETS: [i32; 14] = [-8, -7, -6, -5, -4, -3, -2, 2, 3, 4, 5, 6, 7, 8];
pub const N_CHANNELS: usize = OFFSETS.len();
pub const DB_FLOOR: f64 = -120.0;
/// Largest frame-count gap [`align`] will crop away.
pub const MAX_FRAME_GAP: usize = 2;

/// `T x 14` Doppler-band log-magnitudes (dB), averaged over tones.
#[derive(Debug, Clone, PartialEq)]
pub struct UltrasoundFeature {
    pub frames: Array2<f64>,
    pub tone_plan: ToneConfig,
    pub offsets: [i32; 14],
    pub fs: u32,
    pub hop: usize,
}

impl UltrasoundFeature {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn frame_period(&self) -> f64 {
        self.hop as f64 / self.fs as f64
    }

    /// Channel index of a bin offset, if retained.
    pub fn channel_of(offset: i32) -> Option<usize> {
        OFFSETS.iter().position(|&o| o == offset)
    }
}

/// Integer carrier bins of every tone, or an error if a tone falls between bins.
pub fn carrier_bins(cfg: &ToneConfig, n_fft: usize) -> Result<Vec<usize>> {
    cfg.tones()
        .map(|f| {
            let exact = f * n_fft as f64 / cfg.fs as f64;
            let bin = exact.round();
            if (exact - bin).abs() > 1e-9 {
                Err(Error::config(format!(
                    "tone {f} Hz maps to fractional bin {exact} with n_fft {n_fft}"
                )))
            } else {
                Ok(bin as usize)
            }
        })
        .collect()
}

/// Per-tone `T x n_tones x 14` dB magnitudes before averaging.
pub fn ultrasound_per_tone(spec: &ComplexSpectrogram, cfg: &ToneConfig) -> Result<Array3<f64>> {
    cfg.validate()?;
    if spec.fs != cfg.fs {
        return Err(Error::SampleRateMismatch {
            expected: cfg.fs,
            actual: spec.fs,
        });
    }
    let bins = carrier_bins(cfg, spec.params.n_fft)?;
    let n_bins = spec.n_bins();
    for &b in &bins {
        if b < 8 || b + 8 >= n_bins {
            return Err(Error::config(format!(
                "carrier bin {b} leaves no room for +/-8 offsets in {n_bins} bins"
            )));
        }
    }
    let mut out = Array3::zeros((spec.n_frames(), bins.len(), N_CHANNELS));
    for (t, row) in spec.frames.rows().into_iter().enumerate() {
        for (i, &b) in bins.iter().enumerate() {
            for (c, &off) in OFFSETS.iter().enumerate() {
                let mag = row[(b as i64 + off as i64) as usize].norm();
                out[[t, i, c]] = to_db(mag);
            }
        }
    }
    Ok(out)
}

/// Drops the carrier and its two neighbours, keeps offsets `+/-2..8` per
/// tone in dB (floored at -120 dB), and averages them across tones.
pub fn extract_ultrasound_feature(
    spec: &ComplexSpectrogram,
    cfg: &ToneConfig,
) -> Result<UltrasoundFeature> {
    let per_tone = ultrasound_per_tone(spec, cfg)?;
    let frames = per_tone
        .mean_axis(Axis(1))
        .unwrap_or_else(|| Array2::zeros((0, N_CHANNELS)));
    Ok(UltrasoundFeature {
        frames,
        tone_plan: cfg.clone(),
        offsets: OFFSETS,
        fs: spec.fs,
        hop: spec.params.hop,
    })
}

fn to_db(mag: f64) -> f64 {
    if mag > 0.0 {
        (20.0 * mag.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Capture-to-feature configuration shared by both branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub tones: ToneConfig,
    pub speech_lowpass: EllipticSpec,
    pub ultrasound_highpass: EllipticSpec,
    pub ultrasound_stft: StftParams,
    pub mel: MelConfig,
    /// Crop Mel frames onto the ultrasound frame centres.
    pub lock_mel_to_ultrasound: bool,
}

impl Default for FeaturePipeline {
    fn default() -> Self {
        Self {
            tones: ToneConfig::default(),
            speech_lowpass: EllipticSpec::lowpass(8_000.0),
            ultrasound_highpass: EllipticSpec::highpass(16_000.0),
            ultrasound_stft: StftParams::ULTRASOUND,
            mel: MelConfig::default(),
            lock_mel_to_ultrasound: true,
        }
    }
}

impl FeaturePipeline {
    pub fn validate(&self) -> Result<()> {
        self.tones.validate()?;
        self.ultrasound_stft.validate()?;
        self.mel.validate()?;
        carrier_bins(&self.tones, self.ultrasound_stft.n_fft)?;
        if self.tones.fs != 3 * self.mel.fs {
            return Err(Error::config(format!(
                "capture rate {} Hz must be three times the Mel rate {} Hz",
                self.tones.fs, self.mel.fs
            )));
        }
        Ok(())
    }

    /// Highpass, STFT and Doppler-band extraction of a raw capture.
    pub fn ultrasound(&self, capture: &SampleBuffer) -> Result<UltrasoundFeature> {
        capture.require_rate(self.tones.fs)?;
        let hp = design_elliptic(&self.ultrasound_highpass, capture.fs())?;
        let filtered = hp.apply(capture)?;
        let spec = stft(&filtered, &self.ultrasound_stft)?;
        extract_ultrasound_feature(&spec, &self.tones)
    }

    /// Lowpass, 3:1 decimation and log-Mel analysis of a raw capture.
    pub fn mel(&self, capture: &SampleBuffer) -> Result<MelFeature> {
        capture.require_rate(self.tones.fs)?;
        let lp = design_elliptic(&self.speech_lowpass, capture.fs())?;
        let speech = resample_3to1(&lp.apply(capture)?)?;
        let mut mel = mel_spectrogram(&speech, &self.mel)?;
        if self.lock_mel_to_ultrasound {
            let lead = self.mel_lead_frames();
            let keep = self
                .ultrasound_stft
                .frame_count(capture.len())
                .unwrap_or(0);
            let start = lead.min(mel.n_frames());
            let end = (start + keep).min(mel.n_frames());
            mel.frames = mel.frames.slice(ndarray::s![start..end, ..]).to_owned();
        }
        Ok(mel)
    }

    /// Mel frames preceding the centre of the first ultrasound frame.
    pub fn mel_lead_frames(&self) -> usize {
        let fs_u = self.tones.fs as f64;
        let fs_m = self.mel.fs as f64;
        let centre_gap = (self.ultrasound_stft.win_len as f64 / fs_u
            - self.mel.win_len as f64 / fs_m)
            / 2.0;
        (centre_gap / (self.mel.hop as f64 / fs_m)).round().max(0.0) as usize
    }
}

/// [`FeaturePipeline::mel`] with the default configuration.
pub fn extract_mel_feature(capture: &SampleBuffer) -> Result<MelFeature> {
    FeaturePipeline::default().mel(capture)
}

/// Frame-aligned `(mel, ultrasound)` training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub mel: MelFeature,
    pub ultra: UltrasoundFeature,
}

impl AlignedPair {
    pub fn n_frames(&self) -> usize {
        self.mel.n_frames()
    }
}

/// Crops both features to the shorter frame count.
pub fn align(mut mel: MelFeature, mut ultra: UltrasoundFeature) -> Result<AlignedPair> {
    let (pm, pu) = (mel.frame_period(), ultra.frame_period());
    if (pm - pu).abs() > 1e-12 {
        return Err(Error::config(format!(
            "frame periods differ: mel {pm} s, ultrasound {pu} s"
        )));
    }
    let (tm, tu) = (mel.n_frames(), ultra.n_frames());
    if tm.abs_diff(tu) > MAX_FRAME_GAP {
        return Err(Error::shape(format!(
            "frame counts {tm} (mel) and {tu} (ultrasound) differ by more than {MAX_FRAME_GAP}"
        )));
    }
    let t = tm.min(tu);
    mel.frames = mel.frames.slice(ndarray::s![..t, ..]).to_owned();
    ultra.frames = ultra.frames.slice(ndarray::s![..t, ..]).to_owned();
    Ok(AlignedPair { mel, ultra })
}

/// Forward first difference along time: row `t` is `m[t + 1] - m[t]`.
pub fn temporal_diff(m: &Array2<f64>) -> Result<Array2<f64>> {
    let t = m.nrows();
    if t < 2 {
        return Err(Error::shape(format!(
            "temporal difference needs at least 2 frames, got {t}"
        )));
    }
    let later = m.slice(ndarray::s![1.., ..]);
    let earlier = m.slice(ndarray::s![..t - 1, ..]);
    Ok(&later - &earlier)
}
