//! Objective evaluation: STOI, log-spectral distance, SSIM and SNR.

mod ssim;
mod stoi;

pub use ssim::{ssim, ssim_raw, SSIM_WINDOW};
pub use stoi::{stoi, MIN_INPUT_LEN as STOI_MIN_INPUT_LEN};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::buffer::SampleBuffer;
use crate::dsp::{stft, MelFilterbank, StftParams, WindowKind, MEL_BANDS};
use crate::error::{Error, Result};

pub const LSD_EPS: f64 = 1e-10;

/// Log-spectral distance in dB between two magnitude spectrograms.
///
/// Per frame the RMS over bins of `20 log10(max(est, eps) / max(ref, eps))`,
/// averaged over frames.
pub fn lsd(reference: &Array2<f64>, estimate: &Array2<f64>) -> Result<f64> {
    if reference.dim() != estimate.dim() {
        return Err(Error::shape(format!(
            "reference {:?} and estimate {:?} differ in shape",
            reference.dim(),
            estimate.dim()
        )));
    }
    let (t, f) = reference.dim();
    if t == 0 || f == 0 {
        return Err(Error::shape("log-spectral distance of an empty spectrogram"));
    }
    if reference.iter().chain(estimate.iter()).any(|&v| !(v >= 0.0)) {
        return Err(Error::domain("magnitudes must be non-negative"));
    }
    let total: f64 = reference
        .rows()
        .into_iter()
        .zip(estimate.rows())
        .map(|(r, e)| {
            let mean_sq = r
                .iter()
                .zip(e.iter())
                // a difference of logs keeps lsd(a, b) == lsd(b, a) bit for bit
                .map(|(&r, &e)| (20.0 * (e.max(LSD_EPS).log10() - r.max(LSD_EPS).log10())).powi(2))
                .sum::<f64>()
                / f as f64;
            mean_sq.sqrt()
        })
        .sum();
    Ok(total / t as f64)
}

/// SNR of `noisy` relative to `clean`; identical signals yield [`SnrMeasurement::Clean`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrMeasurement {
    Db(f64),
    Clean(CleanMarker),
}

/// Serialized as the string `"clean"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleanMarker {
    Clean,
}

impl SnrMeasurement {
    pub fn db(self) -> Option<f64> {
        match self {
            SnrMeasurement::Db(v) => Some(v),
            SnrMeasurement::Clean(_) => None,
        }
    }

    pub fn is_clean(self) -> bool {
        matches!(self, SnrMeasurement::Clean(_))
    }
}

/// `10 log10(sum clean^2 / sum (noisy - clean)^2)`.
pub fn measure_snr(clean: &SampleBuffer, noisy: &SampleBuffer) -> Result<SnrMeasurement> {
    clean.require_same_rate(noisy)?;
    if clean.len() != noisy.len() {
        return Err(Error::shape(format!(
            "clean has {} samples, noisy has {}",
            clean.len(),
            noisy.len()
        )));
    }
    let signal: f64 = clean.samples().iter().map(|v| v * v).sum();
    let noise: f64 = clean
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(c, n)| (n - c).powi(2))
        .sum();
    if noise == 0.0 {
        return Ok(SnrMeasurement::Clean(CleanMarker::Clean));
    }
    if signal == 0.0 {
        return Err(Error::domain("clean signal is silent; SNR undefined"));
    }
    Ok(SnrMeasurement::Db(10.0 * (signal / noise).log10()))
}

/// Frequency axis used for spectrogram-domain metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralDomain {
    #[default]
    Linear,
    Mel,
}

/// Spectrogram settings for LSD and SSIM on 16 kHz speech.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub stft: StftParams,
    pub domain: SpectralDomain,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            stft: StftParams {
                n_fft: 512,
                win_len: 512,
                hop: 128,
                window: WindowKind::Hann,
            },
            domain: SpectralDomain::Linear,
        }
    }
}

/// Magnitude spectrogram on the configured frequency axis.
pub fn magnitude_spectrogram(x: &SampleBuffer, cfg: &EvalConfig) -> Result<Array2<f64>> {
    let spec = stft(x, &cfg.stft)?;
    match cfg.domain {
        SpectralDomain::Linear => Ok(spec.magnitude()),
        SpectralDomain::Mel => {
            let bank = MelFilterbank::new(
                MEL_BANDS,
                cfg.stft.n_fft,
                x.fs(),
                0.0,
                x.fs() as f64 / 2.0,
            );
            Ok(spec.power().dot(&bank.weights.t()).mapv(f64::sqrt))
        }
    }
}

/// One evaluated pair, fields in fixed output order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub id: String,
    pub stoi: f64,
    pub lsd: f64,
    pub ssim: f64,
    pub snr_db: SnrMeasurement,
    /// Externally computed PESQ, merged in when supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq: Option<f64>,
}

/// STOI, LSD, SSIM (on dB spectrograms) and SNR of `processed` against `clean`.
pub fn evaluate_pair(
    id: impl Into<String>,
    clean: &SampleBuffer,
    processed: &SampleBuffer,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    let stoi = stoi(clean, processed)?;
    let s_ref = magnitude_spectrogram(clean, cfg)?;
    let s_est = magnitude_spectrogram(processed, cfg)?;
    let lsd = lsd(&s_ref, &s_est)?;
    let to_db = |m: &Array2<f64>| m.mapv(|v| 20.0 * v.max(LSD_EPS).log10());
    let ssim = ssim(&to_db(&s_ref), &to_db(&s_est))?;
    let snr_db = measure_snr(clean, processed)?;
    Ok(MetricReport {
        id: id.into(),
        stoi,
        lsd,
        ssim,
        snr_db,
        pesq: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lsd_examples() {
        let s = array![[1.0, 2.0, 0.5], [0.1, 3.0, 4.0]];
        assert_eq!(lsd(&s, &s).unwrap(), 0.0);
        assert!((lsd(&s, &(&s * 10.0)).unwrap() - 20.0).abs() < 1e-9);
        let r = array![[1.0, 1.0]];
        let e = array![[10.0, 1.0]];
        assert!((lsd(&r, &e).unwrap() - 200f64.sqrt()).abs() < 1e-9);
        assert!((lsd(&r, &e).unwrap() - 14.142).abs() < 1e-3);
    }

    #[test]
    fn lsd_errors() {
        let a = Array2::ones((2, 3));
        assert!(lsd(&a, &Array2::ones((3, 2))).is_err());
        assert!(lsd(&a, &(-&a)).is_err());
    }

    #[test]
    fn snr_examples() {
        let c = SampleBuffer::new(16_000, vec![0.1, -0.3, 0.2, 0.05]).unwrap();
        assert!(measure_snr(&c, &c).unwrap().is_clean());
        let doubled = c.add(&c).unwrap();
        assert!(measure_snr(&c, &doubled).unwrap().db().unwrap().abs() < 1e-12);
        let other = SampleBuffer::new(8_000, vec![0.0; 4]).unwrap();
        assert!(measure_snr(&c, &other).is_err());
    }

    #[test]
    fn report_field_order() {
        let r = MetricReport {
            id: "a".into(),
            stoi: 0.9,
            lsd: 1.5,
            ssim: 0.8,
            snr_db: SnrMeasurement::Db(5.0),
            pesq: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":"a","stoi":0.9,"lsd":1.5,"ssim":0.8,"snr_db":5.0}"#
        );
        let clean = MetricReport {
            snr_db: SnrMeasurement::Clean(CleanMarker::Clean),
            ..r
        };
        assert!(serde_json::to_string(&clean).unwrap().contains(r#""snr_db":"clean""#));
    }
}
