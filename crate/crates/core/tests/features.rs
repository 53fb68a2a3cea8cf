use articulate::dsp::{stft, MelFeature, StftParams};
use articulate::features::{
    align, carrier_bins, extract_mel_feature, extract_ultrasound_feature, read_uft1,
    temporal_diff, ultrasound_per_tone, write_uft1, FeaturePipeline, Uft1, UltrasoundFeature,
    DB_FLOOR, N_CHANNELS, OFFSETS,
};
use articulate::sensing::{
    simulate_reflection, synth_multitone, white_noise, MotionProfile, ToneConfig, Trajectory,
};
use articulate::SampleBuffer;
use ndarray::{array, Array2, Axis};
use num_complex::Complex64;
use proptest::prelude::*;

const C: f64 = 340.0;
const RES: f64 = 48_000.0 / 4096.0;

fn echo(cfg: &ToneConfig, secs: f64, traj: Trajectory, r: f64) -> SampleBuffer {
    let tx = synth_multitone(cfg, secs, None).unwrap();
    simulate_reflection(&tx, &MotionProfile::single(traj, r), cfg).unwrap()
}

fn ultra(frames: usize) -> UltrasoundFeature {
    UltrasoundFeature {
        frames: Array2::zeros((frames, N_CHANNELS)),
        tone_plan: ToneConfig::default(),
        offsets: OFFSETS,
        fs: 48_000,
        hop: 240,
    }
}

fn mel(frames: usize) -> MelFeature {
    MelFeature {
        frames: Array2::zeros((frames, 128)),
        fs: 16_000,
        hop: 80,
        mel_fmin: 0.0,
        mel_fmax: 8_000.0,
    }
}

#[test]
fn carriers_and_retained_bins() {
    let bins = carrier_bins(&ToneConfig::default(), 4096).unwrap();
    assert_eq!(bins, (0..8).map(|i| 1472 + 64 * i).collect::<Vec<_>>());
    let kept: Vec<usize> = bins
        .iter()
        .flat_map(|&b| OFFSETS.iter().map(move |&o| (b as i64 + o as i64) as usize))
        .collect();
    let mut sorted = kept.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 8 * 14);
    for &b in &bins {
        for k in [b - 1, b, b + 1] {
            assert!(!kept.contains(&k));
        }
    }
}

#[test]
fn shifted_echo_peaks_in_plus_four() {
    let cfg = ToneConfig::default();
    let plus4 = UltrasoundFeature::channel_of(4).unwrap();
    for i in 0..8 {
        // closing speed that moves tone i by exactly four bins
        let v = 4.0 * RES * C / (2.0 * cfg.tone(i));
        let rx = echo(&cfg, 0.3, Trajectory::Linear { start_m: 1.0, closing_speed: v }, 1.0);
        let per_tone = ultrasound_per_tone(&stft(&rx, &StftParams::ULTRASOUND).unwrap(), &cfg).unwrap();
        let means = per_tone.index_axis(Axis(1), i).mean_axis(Axis(0)).unwrap();
        let best = (0..N_CHANNELS).max_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap();
        assert_eq!(best, plus4, "tone {i}: {means}");
    }
}

#[test]
fn static_echo_stays_out_of_the_doppler_bands() {
    let cfg = ToneConfig::default();
    let rx = echo(&cfg, 0.3, Trajectory::Static { range_m: 0.4 }, 0.5);
    let spec = stft(&rx, &StftParams::ULTRASOUND).unwrap();
    let carrier_db = 20.0 * spec.frames[[0, 1472]].norm().log10();
    let feat = extract_ultrasound_feature(&spec, &cfg).unwrap();
    let loudest = feat.frames.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Hann-4080 sidelobes inside a 4096 FFT put the +/-2 bins near -58 dBc
    assert!(loudest < carrier_db - 50.0, "carrier {carrier_db} dB, band max {loudest} dB");
    assert!(feat.frames.iter().all(|&v| v >= DB_FLOOR));
}

#[test]
fn silence_sits_on_the_floor() {
    let cfg = ToneConfig::default();
    let spec = stft(&SampleBuffer::zeros(48_000, 8_000).unwrap(), &StftParams::ULTRASOUND).unwrap();
    let feat = extract_ultrasound_feature(&spec, &cfg).unwrap();
    assert_eq!(feat.frames.dim(), (17, 14));
    assert!(feat.frames.iter().all(|&v| v == DB_FLOOR));
}

#[test]
fn temporal_diff_examples() {
    let c = Array2::from_elem((5, 3), 2.5);
    assert!(temporal_diff(&c).unwrap().iter().all(|&v| v == 0.0));
    let ramp = Array2::from_shape_fn((6, 2), |(t, _)| t as f64);
    assert!(temporal_diff(&ramp).unwrap().iter().all(|&v| v == 1.0));
    let m = array![[1.0, -2.0, 0.5], [4.0, 0.0, 0.5], [3.5, 1.0, -1.0], [0.0, 1.0, 2.0], [2.0, -3.0, 2.0]];
    let want = array![[3.0, 2.0, 0.0], [-0.5, 1.0, -1.5], [-3.5, 0.0, 3.0], [2.0, -4.0, 0.0]];
    assert_eq!(temporal_diff(&m).unwrap(), want);
    assert!(temporal_diff(&Array2::zeros((1, 4))).is_err());
}

#[test]
fn align_examples() {
    assert_eq!(align(mel(100), ultra(100)).unwrap().n_frames(), 100);
    let p = align(mel(101), ultra(100)).unwrap();
    assert_eq!((p.mel.n_frames(), p.ultra.n_frames()), (100, 100));
    assert!(align(mel(200), ultra(100)).is_err());
    let mut slow = mel(100);
    slow.hop = 160;
    assert!(align(slow, ultra(100)).is_err());
}

#[test]
fn mel_of_silence_is_the_log_floor() {
    let m = extract_mel_feature(&SampleBuffer::zeros(48_000, 24_000).unwrap()).unwrap();
    assert_eq!(m.frames.ncols(), 128);
    let floor = 1e-10f64.ln();
    assert!(m.frames.iter().all(|&v| (v - floor).abs() < 1e-12));
}

#[test]
fn uft1_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.uft");
    std::fs::write(&path, b"UFT0\0\0\0\0").unwrap();
    assert!(read_uft1(&path).is_err());
    let good = Uft1::new(Array2::ones((3, 2)), 48_000, 240).to_bytes().unwrap();
    std::fs::write(&path, &good[..good.len() - 1]).unwrap();
    assert!(read_uft1(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn excluded_bins_do_not_matter(seed in 0u64..1000, extra in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 8)) {
        let cfg = ToneConfig::default();
        let x = white_noise(48_000, 6_000, 0.1, seed).unwrap();
        let spec = stft(&x, &StftParams::ULTRASOUND).unwrap();
        let base = extract_ultrasound_feature(&spec, &cfg).unwrap();
        let mut touched = spec.clone();
        let bins = carrier_bins(&cfg, 4096).unwrap();
        for (t, mut row) in touched.frames.rows_mut().into_iter().enumerate() {
            for (i, &b) in bins.iter().enumerate() {
                let (re, im) = extra[(i + t) % 8];
                for k in [b - 1, b, b + 1, b + 9, b - 9] {
                    row[k] += Complex64::new(re, im);
                }
            }
            for k in 0..1400 {
                row[k] = Complex64::new(extra[k % 8].0, 0.0);
            }
        }
        prop_assert_eq!(extract_ultrasound_feature(&touched, &cfg).unwrap().frames, base.frames);
    }

    #[test]
    fn cumulative_sum_undoes_the_difference(rows in 2usize..12, cols in 1usize..6, seed in 0u64..1000) {
        let noise = white_noise(1_000, rows * cols, 3.0, seed).unwrap();
        let m = Array2::from_shape_vec((rows, cols), noise.samples().to_vec()).unwrap();
        let d = temporal_diff(&m).unwrap();
        prop_assert_eq!(d.dim(), (rows - 1, cols));
        let mut acc = m.row(0).to_owned();
        for t in 1..rows {
            acc += &d.row(t - 1);
            for (a, b) in acc.iter().zip(m.row(t)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uft1_round_trips_at_f32_precision(
        rows in 0usize..20,
        cols in 1usize..20,
        fs in 1u32..200_000,
        hop in 1u32..5_000,
        seed in 0u64..1000,
    ) {
        let noise = white_noise(1_000, rows * cols, 40.0, seed).unwrap();
        let frames = Array2::from_shape_vec((rows, cols), noise.samples().to_vec()).unwrap();
        let f = Uft1::new(frames, fs, hop);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.uft");
        write_uft1(&path, &f).unwrap();
        let back = read_uft1(&path).unwrap();
        prop_assert_eq!((back.fs, back.hop), (fs, hop));
        prop_assert_eq!(back.frames.dim(), (rows, cols));
        for (a, b) in back.frames.iter().zip(f.frames.iter()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn mel_and_ultrasound_frame_counts_match(len in 6_000usize..40_000) {
        let pipeline = FeaturePipeline::default();
        let x = white_noise(48_000, len, 0.05, len as u64).unwrap();
        let u = pipeline.ultrasound(&x).unwrap();
        let m = pipeline.mel(&x).unwrap();
        prop_assert_eq!(m.n_frames(), u.n_frames());
        prop_assert_eq!(m.frames.ncols(), 128);
    }
}
