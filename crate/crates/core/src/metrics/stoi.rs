//! Short-time objective intelligibility.
//!
//! Internal rate 10 kHz, 256-sample Hann frames with 50% overlap, 512-point
//! FFT, 15 one-third-octave bands from 150 Hz, 30-frame (384 ms) segments,
//! -15 dB clipping bound and 40 dB silent-frame removal.

use ndarray::{s, Array2, ArrayView1};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::buffer::SampleBuffer;
use crate::dsp::Resampler;
use crate::error::{Error, Result};

pub const STOI_FS: u32 = 10_000;
pub const INPUT_FS: u32 = 16_000;
const FRAME_LEN: usize = 256;
const HOP: usize = FRAME_LEN / 2;
const NFFT: usize = 512;
const N_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per short-time segment.
pub const SEGMENT_FRAMES: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Shortest accepted input: one 384 ms segment at 16 kHz.
pub const MIN_INPUT_LEN: usize = (SEGMENT_FRAMES * HOP) * INPUT_FS as usize / STOI_FS as usize;

/// Hann window without its zero endpoints.
fn window() -> Vec<f64> {
    let n = FRAME_LEN + 2;
    (1..=FRAME_LEN)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Frame starts `0, HOP, ...` strictly before `len - FRAME_LEN`.
fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME_LEN)).step_by(HOP)
}

/// Drops frames more than 40 dB below the loudest clean frame and
/// overlap-adds the survivors of both signals.
fn remove_silent_frames(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let frame = |sig: &[f64], start: usize| -> Vec<f64> {
        sig[start..start + FRAME_LEN]
            .iter()
            .zip(w)
            .map(|(s, w)| s * w)
            .collect()
    };
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&i| {
            let f = frame(x, i);
            20.0 * (f.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10()
        })
        .collect();
    let peak = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| peak - DYN_RANGE_DB - e < 0.0)
        .map(|(&i, _)| i)
        .collect();
    let out_len = if kept.is_empty() {
        0
    } else {
        (kept.len() - 1) * HOP + FRAME_LEN
    };
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (j, &i) in kept.iter().enumerate() {
        for (dst, v) in xs[j * HOP..j * HOP + FRAME_LEN].iter_mut().zip(frame(x, i)) {
            *dst += v;
        }
        for (dst, v) in ys[j * HOP..j * HOP + FRAME_LEN].iter_mut().zip(frame(y, i)) {
            *dst += v;
        }
    }
    (xs, ys)
}

/// One-third-octave band envelopes, `bands x frames`.
fn band_envelopes(x: &[f64], w: &[f64], obm: &Array2<f64>) -> Array2<f64> {
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let n_bins = NFFT / 2 + 1;
    let mut power = Array2::zeros((n_bins, starts.len()));
    let mut buf = vec![Complex64::default(); NFFT];
    for (t, &i) in starts.iter().enumerate() {
        buf.fill(Complex64::default());
        for (b, (s, w)) in buf.iter_mut().zip(x[i..i + FRAME_LEN].iter().zip(w)) {
            b.re = s * w;
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            power[[k, t]] = buf[k].norm_sqr();
        }
    }
    obm.dot(&power).mapv(f64::sqrt)
}

/// Binary band-membership matrix over the one-sided FFT bins.
fn third_octave_matrix() -> Array2<f64> {
    let n_bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * STOI_FS as f64 / NFFT as f64)
        .collect();
    let nearest = |target: f64| {
        freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).powi(2).total_cmp(&(b.1 - target).powi(2)))
            .map(|(i, _)| i)
            .expect("non-empty frequency grid")
    };
    let mut obm = Array2::zeros((N_BANDS, n_bins));
    for band in 0..N_BANDS {
        let k = band as f64;
        let lo = nearest(MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0));
        let hi = nearest(MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0));
        obm.slice_mut(s![band, lo..hi]).fill(1.0);
    }
    obm
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// STOI of `processed` against `clean`, both 16 kHz and of equal length.
pub fn stoi(clean: &SampleBuffer, processed: &SampleBuffer) -> Result<f64> {
    clean.require_rate(INPUT_FS)?;
    processed.require_rate(INPUT_FS)?;
    if clean.len() != processed.len() {
        return Err(Error::shape(format!(
            "clean has {} samples, processed has {}",
            clean.len(),
            processed.len()
        )));
    }
    if clean.len() < MIN_INPUT_LEN {
        return Err(Error::TooShort {
            needed: MIN_INPUT_LEN,
            actual: clean.len(),
        });
    }
    let resampler = Resampler::new(5, 8)?;
    let x = resampler.process(clean.samples());
    let y = resampler.process(processed.samples());

    let w = window();
    let (x, y) = remove_silent_frames(&x, &y, &w);
    let obm = third_octave_matrix();
    let x_env = band_envelopes(&x, &w, &obm);
    let y_env = band_envelopes(&y, &w, &obm);
    let n_frames = x_env.ncols();
    if n_frames < SEGMENT_FRAMES {
        return Err(Error::TooShort {
            needed: SEGMENT_FRAMES,
            actual: n_frames,
        });
    }

    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut y_prime = vec![0.0; SEGMENT_FRAMES];
    let mut x_centred = vec![0.0; SEGMENT_FRAMES];
    for m in SEGMENT_FRAMES..=n_frames {
        for band in 0..N_BANDS {
            let xs = x_env.slice(s![band, m - SEGMENT_FRAMES..m]);
            let ys = y_env.slice(s![band, m - SEGMENT_FRAMES..m]);
            let scale = norm(xs) / (norm(ys) + EPS);
            for ((yp, &xv), &yv) in y_prime.iter_mut().zip(xs).zip(ys) {
                *yp = (yv * scale).min(xv * clip);
            }
            x_centred.iter_mut().zip(xs).for_each(|(d, &v)| *d = v);
            centre_and_normalize(&mut y_prime);
            centre_and_normalize(&mut x_centred);
            total += y_prime.iter().zip(&x_centred).map(|(a, b)| a * b).sum::<f64>();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn centre_and_normalize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt() + EPS;
    v.iter_mut().for_each(|x| *x /= n);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_layout() {
        let obm = third_octave_matrix();
        assert_eq!(obm.dim(), (15, 257));
        // first band spans 133.6-168.4 Hz, nearest bins 7 and 9 at 19.53 Hz spacing
        let first: Vec<usize> = (0..257).filter(|&k| obm[[0, k]] > 0.0).collect();
        assert_eq!(first, vec![7, 8]);
        for row in obm.rows() {
            assert!(row.sum() >= 1.0);
        }
    }

    #[test]
    fn min_length_is_384_ms() {
        assert_eq!(MIN_INPUT_LEN, 6144);
        assert_eq!(MIN_INPUT_LEN as f64 / INPUT_FS as f64, 0.384);
    }

    #[test]
    fn rejects_wrong_rate_and_length() {
        let a = SampleBuffer::zeros(16_000, 8000).unwrap();
        let b = SampleBuffer::zeros(16_000, 7999).unwrap();
        assert!(stoi(&a, &b).is_err());
        let c = SampleBuffer::zeros(48_000, 8000).unwrap();
        assert!(matches!(stoi(&c, &c), Err(Error::SampleRateMismatch { .. })));
        let short = SampleBuffer::zeros(16_000, 4800).unwrap();
        assert!(matches!(stoi(&short, &short), Err(Error::TooShort { .. })));
    }
}
