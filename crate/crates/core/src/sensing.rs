//! Multi-tone continuous-wave transmitter, Doppler reflection simulator and
//! SNR-controlled noise mixing.
//!
//! The transmitter emits `n_tones` cosines spaced `delta_f` apart starting at
//! `f0`. A moving reflector at one-way range `d(t)` returns each tone with the
//! round-trip delay `2 d(t) / c`, so a constant closing speed `v` shifts tone
//! `f` by `2 f v / c`. [`doppler_shift`] instead takes an already-folded
//! bi-directional velocity and returns `f v / c`.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::buffer::{rms, SampleBuffer};
use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 340.0;

/// Tone plan of the multi-tone transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneConfig {
    /// Carrier of the lowest tone in Hz.
    pub f0: f64,
    /// Spacing between adjacent tones in Hz.
    pub delta_f: f64,
    pub n_tones: usize,
    pub fs: u32,
    /// Per-tone scale applied to the transmit sum.
    pub amplitude_norm: f64,
}

impl Default for ToneConfig {
    fn default() -> Self {
        Self::new(17_250.0, 750.0, 8, 48_000)
    }
}

impl ToneConfig {
    /// Tone plan with the `1 / n_tones` amplitude normalization.
    pub fn new(f0: f64, delta_f: f64, n_tones: usize, fs: u32) -> Self {
        Self {
            f0,
            delta_f,
            n_tones,
            fs,
            amplitude_norm: 1.0 / n_tones.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::config(format!("f0 must be positive, got {}", self.f0)));
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            return Err(Error::config(format!(
                "tone spacing must be positive, got {}",
                self.delta_f
            )));
        }
        if self.n_tones == 0 {
            return Err(Error::config("at least one tone is required"));
        }
        if self.fs == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if !self.amplitude_norm.is_finite() {
            return Err(Error::config("amplitude normalization must be finite"));
        }
        let top = self.tone(self.n_tones - 1);
        let nyquist = self.fs as f64 / 2.0;
        if top >= nyquist {
            return Err(Error::config(format!(
                "highest tone {top} Hz is not below Nyquist ({nyquist} Hz)"
            )));
        }
        Ok(())
    }

    /// Frequency of tone `i` in Hz.
    pub fn tone(&self, i: usize) -> f64 {
        self.f0 + i as f64 * self.delta_f
    }

    pub fn tones(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_tones).map(|i| self.tone(i))
    }
}

/// One-way range of a reflector as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Static { range_m: f64 },
    /// Constant radial speed; positive `closing_speed` moves toward the device.
    Linear { start_m: f64, closing_speed: f64 },
    Oscillating {
        mean_m: f64,
        amplitude_m: f64,
        freq_hz: f64,
        phase: f64,
    },
}

impl Trajectory {
    pub fn range_at(&self, t: f64) -> f64 {
        match *self {
            Trajectory::Static { range_m } => range_m,
            Trajectory::Linear {
                start_m,
                closing_speed,
            } => start_m - closing_speed * t,
            Trajectory::Oscillating {
                mean_m,
                amplitude_m,
                freq_hz,
                phase,
            } => mean_m + amplitude_m * (TAU * freq_hz * t + phase).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub trajectory: Trajectory,
    pub reflectivity: f64,
}

impl Reflector {
    pub fn new(trajectory: Trajectory, reflectivity: f64) -> Self {
        Self {
            trajectory,
            reflectivity,
        }
    }
}

/// Discrete reflectors seen by the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub reflectors: Vec<Reflector>,
    /// Speed of sound in m/s.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl MotionProfile {
    pub fn new(reflectors: Vec<Reflector>) -> Self {
        Self {
            reflectors,
            c: DEFAULT_SPEED_OF_SOUND,
        }
    }

    pub fn single(trajectory: Trajectory, reflectivity: f64) -> Self {
        Self::new(vec![Reflector::new(trajectory, reflectivity)])
    }

    pub fn with_speed_of_sound(mut self, c: f64) -> Self {
        self.c = c;
        self
    }
}

/// Synthesizes the transmit waveform `amplitude_norm * sum_i cos(2 pi f_i k / fs + phi_i)`.
///
/// `phases` defaults to all zero and must otherwise hold one entry per tone.
pub fn synth_multitone(
    cfg: &ToneConfig,
    duration_s: f64,
    phases: Option<&[f64]>,
) -> Result<SampleBuffer> {
    cfg.validate()?;
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::domain(format!(
            "duration must be non-negative, got {duration_s}"
        )));
    }
    let len = (duration_s * cfg.fs as f64).round() as usize;
    synth_multitone_len(cfg, len, phases)
}

/// Same as [`synth_multitone`] with an explicit sample count.
pub fn synth_multitone_len(
    cfg: &ToneConfig,
    len: usize,
    phases: Option<&[f64]>,
) -> Result<SampleBuffer> {
    cfg.validate()?;
    let phases = resolve_phases(cfg, phases)?;
    let fs = cfg.fs as f64;
    let mut out = vec![0.0; len];
    for (i, phi) in phases.iter().enumerate() {
        let f = cfg.tone(i);
        for (k, y) in out.iter_mut().enumerate() {
            // reduce the cycle count before scaling by 2 pi
            let cycles = (f * k as f64 / fs).fract();
            *y += (TAU * cycles + phi).cos();
        }
    }
    for y in &mut out {
        *y *= cfg.amplitude_norm;
    }
    SampleBuffer::new(cfg.fs, out)
}

/// Received echo of `tx` under the quasi-static narrowband model.
///
/// Per reflector and tone `i` the output accumulates
/// `reflectivity * amplitude_norm * cos(2 pi f_i (t - 2 d(t) / c) + phi_i)`.
pub fn simulate_reflection(
    tx: &SampleBuffer,
    profile: &MotionProfile,
    cfg: &ToneConfig,
) -> Result<SampleBuffer> {
    simulate_reflection_with_phases(tx, profile, cfg, None)
}

pub fn simulate_reflection_with_phases(
    tx: &SampleBuffer,
    profile: &MotionProfile,
    cfg: &ToneConfig,
    phases: Option<&[f64]>,
) -> Result<SampleBuffer> {
    cfg.validate()?;
    tx.require_rate(cfg.fs)?;
    if !(profile.c > 0.0 && profile.c.is_finite()) {
        return Err(Error::domain(format!(
            "speed of sound must be positive, got {}",
            profile.c
        )));
    }
    let phases = resolve_phases(cfg, phases)?;
    let fs = cfg.fs as f64;
    let mut out = vec![0.0; tx.len()];
    for reflector in &profile.reflectors {
        let gain = reflector.reflectivity * cfg.amplitude_norm;
        let delays: Vec<f64> = (0..tx.len())
            .map(|k| {
                let d = reflector.trajectory.range_at(k as f64 / fs);
                if d > 0.0 {
                    Ok(2.0 * d / profile.c)
                } else {
                    Err(Error::domain(format!(
                        "reflector range must stay positive, got {d} m at t = {} s",
                        k as f64 / fs
                    )))
                }
            })
            .collect::<Result<_>>()?;
        for (i, phi) in phases.iter().enumerate() {
            let f = cfg.tone(i);
            for (k, (y, tau)) in out.iter_mut().zip(&delays).enumerate() {
                let cycles = (f * k as f64 / fs).fract() - (f * tau).fract();
                *y += gain * (TAU * cycles + phi).cos();
            }
        }
    }
    SampleBuffer::new(cfg.fs, out)
}

/// Doppler shift `f_c * delta_v / c` in Hz for a bi-directional velocity `delta_v`.
pub fn doppler_shift(delta_v: f64, f_c: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("speed of sound must be positive, got {c}")));
    }
    Ok(f_c * delta_v / c)
}

/// Shift seen by the simulator for a reflector closing at `radial_v`: the
/// round trip doubles it, so this is `doppler_shift(2 * radial_v, ..)`.
pub fn radial_doppler_shift(radial_v: f64, f_c: f64, c: f64) -> Result<f64> {
    doppler_shift(2.0 * radial_v, f_c, c)
}

/// Noise gain that places `noise` `snr_db` below `clean`.
pub fn snr_gain(clean_rms: f64, noise_rms: f64, snr_db: f64) -> f64 {
    clean_rms / noise_rms * 10f64.powf(-snr_db / 20.0)
}

/// `clean + g * noise` with `g` chosen so the component SNR equals `snr_db`.
///
/// Noise shorter than `clean` is tiled cyclically, longer noise is truncated.
pub fn mix_at_snr(clean: &SampleBuffer, noise: &SampleBuffer, snr_db: f64) -> Result<SampleBuffer> {
    mix_at_snr_with_offset(clean, noise, snr_db, 0)
}

/// [`mix_at_snr`] reading noise from `offset` onward (wrapping around).
pub fn mix_at_snr_with_offset(
    clean: &SampleBuffer,
    noise: &SampleBuffer,
    snr_db: f64,
    offset: usize,
) -> Result<SampleBuffer> {
    clean.require_same_rate(noise)?;
    if !snr_db.is_finite() {
        return Err(Error::domain("target SNR must be finite"));
    }
    let fitted = fit_noise(noise.samples(), clean.len(), offset)?;
    let clean_rms = clean.rms();
    let noise_rms = rms(&fitted);
    if clean_rms == 0.0 {
        return Err(Error::domain("clean signal is silent; SNR undefined"));
    }
    if noise_rms == 0.0 {
        return Err(Error::domain("noise signal is silent; SNR undefined"));
    }
    let g = snr_gain(clean_rms, noise_rms, snr_db);
    let mixed = clean
        .samples()
        .iter()
        .zip(&fitted)
        .map(|(c, n)| c + g * n)
        .collect();
    SampleBuffer::new(clean.fs(), mixed)
}

/// Cyclic read of `len` noise samples starting at `offset`.
pub fn fit_noise(noise: &[f64], len: usize, offset: usize) -> Result<Vec<f64>> {
    if noise.is_empty() {
        return Err(Error::domain("noise signal is empty"));
    }
    let n = noise.len();
    Ok((0..len).map(|k| noise[(offset + k) % n]).collect())
}

/// Seeded Gaussian white noise with the given RMS.
pub fn white_noise(fs: u32, len: usize, rms_level: f64, seed: u64) -> Result<SampleBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * rms_level
        })
        .collect();
    SampleBuffer::new(fs, samples)
}

fn resolve_phases(cfg: &ToneConfig, phases: Option<&[f64]>) -> Result<Vec<f64>> {
    match phases {
        None => Ok(vec![0.0; cfg.n_tones]),
        Some(p) if p.len() == cfg.n_tones => Ok(p.to_vec()),
        Some(p) => Err(Error::config(format!(
            "expected {} phases, got {}",
            cfg.n_tones,
            p.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan() {
        let cfg = ToneConfig::default();
        assert_eq!(cfg.n_tones, 8);
        assert_eq!(cfg.fs, 48_000);
        let tones: Vec<f64> = cfg.tones().collect();
        assert_eq!(tones.first(), Some(&17_250.0));
        assert_eq!(tones.last(), Some(&22_500.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn tone_above_nyquist_rejected() {
        let cfg = ToneConfig::new(20_000.0, 750.0, 8, 48_000);
        assert!(matches!(
            synth_multitone(&cfg, 0.1, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_duration_is_empty() {
        let tx = synth_multitone(&ToneConfig::default(), 0.0, None).unwrap();
        assert!(tx.is_empty());
        assert_eq!(tx.fs(), 48_000);
    }

    #[test]
    fn one_second_length() {
        let tx = synth_multitone(&ToneConfig::default(), 1.0, None).unwrap();
        assert_eq!(tx.len(), 48_000);
        assert!((tx.samples()[0] - 1.0).abs() < 1e-12);
        assert!(tx.samples().iter().all(|s| s.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn wrong_phase_count() {
        let cfg = ToneConfig::default();
        assert!(synth_multitone(&cfg, 0.01, Some(&[0.0; 3])).is_err());
    }

    #[test]
    fn doppler_examples() {
        assert!((doppler_shift(1.60, 20_000.0, 340.0).unwrap() - 94.117_647).abs() < 1e-5);
        assert_eq!(doppler_shift(0.0, 17_250.0, 340.0).unwrap(), 0.0);
        assert!((doppler_shift(0.80, 17_250.0, 340.0).unwrap() - 40.588_235).abs() < 1e-5);
        assert!(doppler_shift(1.0, 1.0, 0.0).is_err());
        assert!(doppler_shift(1.0, 1.0, -340.0).is_err());
    }

    #[test]
    fn gain_examples() {
        assert!((snr_gain(0.1, 0.2, 0.0) - 0.5).abs() < 1e-15);
        assert!((snr_gain(0.3, 0.3, 20.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn silent_inputs_rejected() {
        let clean = SampleBuffer::new(16_000, vec![0.1, -0.1, 0.2]).unwrap();
        let silent = SampleBuffer::zeros(16_000, 3).unwrap();
        assert!(mix_at_snr(&clean, &silent, 0.0).is_err());
        assert!(mix_at_snr(&silent, &clean, 0.0).is_err());
    }

    #[test]
    fn short_noise_is_tiled() {
        assert_eq!(
            fit_noise(&[1.0, 2.0, 3.0], 7, 0).unwrap(),
            vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0]
        );
        assert_eq!(fit_noise(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn nonpositive_range_rejected() {
        let cfg = ToneConfig::default();
        let tx = synth_multitone(&cfg, 0.1, None).unwrap();
        let profile = MotionProfile::single(
            Trajectory::Linear {
                start_m: 0.01,
                closing_speed: 1.0,
            },
            1.0,
        );
        assert!(simulate_reflection(&tx, &profile, &cfg).is_err());
    }

    #[test]
    fn static_reflector_preserves_carriers() {
        // A static echo is the transmit signal with a constant phase lag per tone.
        let cfg = ToneConfig::new(18_000.0, 750.0, 1, 48_000);
        let tx = synth_multitone(&cfg, 0.01, None).unwrap();
        let profile = MotionProfile::single(Trajectory::Static { range_m: 0.5 }, 1.0);
        let rx = simulate_reflection(&tx, &profile, &cfg).unwrap();
        let lag = TAU * 18_000.0 * 2.0 * 0.5 / 340.0;
        for (k, y) in rx.samples().iter().enumerate() {
            let expected = (TAU * 18_000.0 * k as f64 / 48_000.0 - lag).cos();
            assert!((y - expected).abs() < 1e-9);
        }
    }
}
