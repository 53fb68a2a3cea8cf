#![allow(dead_code)]

use std::f64::consts::TAU;

use articulate::sensing::{
    simulate_reflection, synth_multitone, white_noise, MotionProfile, ToneConfig, Trajectory,
};
use articulate::SampleBuffer;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Voiced, syllable-modulated harmonic signal standing in for speech.
pub fn speech_like(fs: u32, len: usize, seed: u64) -> SampleBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.random_range(95.0..220.0);
    let glide = rng.random_range(-20.0..20.0);
    let rate = rng.random_range(3.0..5.5);
    let env_phase = rng.random_range(0.0..TAU);
    let formants: Vec<f64> = vec![
        rng.random_range(400.0..900.0),
        rng.random_range(1000.0..2200.0),
        rng.random_range(2300.0..3200.0),
    ];
    let fs_f = fs as f64;
    let mut phase = 0.0;
    let samples = (0..len)
        .map(|k| {
            let t = k as f64 / fs_f;
            let f = f0 + glide * (TAU * 0.3 * t).sin();
            phase += TAU * f / fs_f;
            let env = (0.5 - 0.5 * (TAU * rate * t + env_phase).cos()).powi(2);
            let mut y = 0.0;
            let mut h = 1;
            while (h as f64) * f < fs_f / 2.2 {
                let fh = h as f64 * f;
                let gain: f64 = formants
                    .iter()
                    .map(|&fm| 1.0 / (1.0 + ((fh - fm) / 150.0).powi(2)))
                    .sum();
                y += gain * (h as f64 * phase).sin() / h as f64;
                h += 1;
            }
            0.1 * env * y
        })
        .collect();
    SampleBuffer::new(fs, samples).unwrap()
}

/// Direct-path transmit signal plus one reflector, with receiver noise.
pub fn capture(
    cfg: &ToneConfig,
    duration_s: f64,
    trajectory: Trajectory,
    reflectivity: f64,
    noise_rms: f64,
    seed: u64,
) -> SampleBuffer {
    let tx = synth_multitone(cfg, duration_s, None).unwrap();
    let echo = simulate_reflection(&tx, &MotionProfile::single(trajectory, reflectivity), cfg).unwrap();
    let noise = white_noise(cfg.fs, tx.len(), noise_rms, seed).unwrap();
    tx.add(&echo).unwrap().add(&noise).unwrap()
}

/// Mean over frames of the summed linear power in all 14 channels, in dB.
pub fn feature_energy_db(frames: &ndarray::Array2<f64>) -> f64 {
    let per_frame: f64 = frames
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|db| 10f64.powf(db / 10.0)).sum::<f64>())
        .sum::<f64>()
        / frames.nrows() as f64;
    10.0 * per_frame.log10()
}
