//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc lowpass.

use std::f64::consts::PI;

use super::window::kaiser;
use crate::buffer::SampleBuffer;
use crate::error::{Error, Result};

/// Anti-aliasing filter design knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplerDesign {
    /// Passband edge as a fraction of the lower of the two Nyquist rates.
    pub passband: f64,
    /// Stopband edge as a fraction of the lower Nyquist rate.
    pub stopband: f64,
    pub atten_db: f64,
}

impl Default for ResamplerDesign {
    fn default() -> Self {
        Self {
            passband: 0.8,
            stopband: 1.0,
            atten_db: 80.0,
        }
    }
}

/// Resampler changing the rate by `up / down`.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(up: usize, down: usize) -> Result<Self> {
        Self::with_design(up, down, ResamplerDesign::default())
    }

    pub fn with_design(up: usize, down: usize, design: ResamplerDesign) -> Result<Self> {
        if up == 0 || down == 0 {
            return Err(Error::config("resampling factors must be positive"));
        }
        if !(0.0 < design.passband && design.passband < design.stopband && design.stopband <= 1.0)
        {
            return Err(Error::config("need 0 < passband < stopband <= 1"));
        }
        let g = gcd(up, down);
        let (up, down) = (up / g, down / g);

        // Frequencies normalized to the upsampled rate, in cycles/sample.
        let nyq = 0.5 / up.max(down) as f64;
        let f_pass = design.passband * nyq;
        let f_stop = design.stopband * nyq;
        let cutoff = 0.5 * (f_pass + f_stop);
        let transition = 2.0 * PI * (f_stop - f_pass);

        let a = design.atten_db;
        let beta = if a > 50.0 {
            0.1102 * (a - 8.7)
        } else if a >= 21.0 {
            0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
        } else {
            0.0
        };
        let mut len = ((a - 7.95) / (2.285 * transition)).ceil() as usize + 1;
        if len % 2 == 0 {
            len += 1;
        }
        let centre = (len - 1) as f64 / 2.0;
        let taps = kaiser(len, beta)
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let t = i as f64 - centre;
                let sinc = if t == 0.0 {
                    2.0 * cutoff
                } else {
                    (2.0 * PI * cutoff * t).sin() / (PI * t)
                };
                // interpolation gain of `up` restores the amplitude lost to zero stuffing
                up as f64 * sinc * w
            })
            .collect();
        Ok(Self { up, down, taps })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    /// Resamples `x` with the filter's group delay removed, so output sample
    /// `m` lines up with input time `m * down / up`.
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let up = self.up as isize;
        let delay = ((self.taps.len() - 1) / 2) as isize;
        let n_in = x.len() as isize;
        (0..self.output_len(x.len()))
            .map(|m| {
                let pos = (m * self.down) as isize + delay;
                // taps index k with (pos - k) a multiple of `up`
                let mut k = pos.rem_euclid(up);
                let mut acc = 0.0;
                while (k as usize) < self.taps.len() {
                    let idx = (pos - k) / up;
                    if idx < 0 {
                        break;
                    }
                    if idx < n_in {
                        acc += self.taps[k as usize] * x[idx as usize];
                    }
                    k += up;
                }
                acc
            })
            .collect()
    }

    pub fn process_buffer(&self, x: &SampleBuffer) -> Result<SampleBuffer> {
        let fs = x.fs() as usize * self.up;
        if fs % self.down != 0 {
            return Err(Error::config(format!(
                "{} Hz cannot be resampled by {}/{} to an integer rate",
                x.fs(),
                self.up,
                self.down
            )));
        }
        SampleBuffer::new((fs / self.down) as u32, self.process(x.samples()))
    }
}

/// Anti-aliased decimation from 48 kHz to 16 kHz; output length `ceil(len / 3)`.
pub fn resample_3to1(x: &SampleBuffer) -> Result<SampleBuffer> {
    x.require_rate(48_000)?;
    Resampler::new(1, 3)?.process_buffer(x)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        let x = SampleBuffer::zeros(48_000, 48_000).unwrap();
        assert_eq!(resample_3to1(&x).unwrap().len(), 16_000);
        let x = SampleBuffer::zeros(48_000, 10).unwrap();
        let y = resample_3to1(&x).unwrap();
        assert_eq!(y.len(), 4);
        assert_eq!(y.fs(), 16_000);
    }

    #[test]
    fn wrong_rate() {
        let x = SampleBuffer::zeros(44_100, 10).unwrap();
        assert!(matches!(
            resample_3to1(&x),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn ratio_is_reduced() {
        assert_eq!(Resampler::new(10, 16).unwrap().ratio(), (5, 8));
        assert!(Resampler::new(0, 3).is_err());
    }

    #[test]
    fn dc_gain_is_unity() {
        for (up, down) in [(1, 3), (5, 8), (2, 1)] {
            let r = Resampler::new(up, down).unwrap();
            let y = r.process(&vec![1.0; 4000]);
            let mid = y.len() / 2;
            assert!((y[mid] - 1.0).abs() < 1e-3, "{up}/{down}: {}", y[mid]);
        }
    }
}
