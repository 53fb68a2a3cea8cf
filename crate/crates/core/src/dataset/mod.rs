//! Dataset construction: per-speaker temporal splits and seeded noise mixing.

mod manifest;
mod wav;

pub use manifest::{resolve, EntryKind, Manifest, ManifestEntry, MixRecord};
pub use wav::{load_wav, save_wav, WavFormat};

use std::collections::HashMap;
use std::path::Path;

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::mix_at_snr_with_offset;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_SNR_GRID: [f64; 6] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
pub const DEFAULT_NOISES_PER_CLEAN: usize = 20;

/// Number of a speaker's `k` recordings that go to the test split.
pub fn test_count(k: usize, test_fraction: f64) -> usize {
    // guard against 0.2 * 15 = 3.0000000000000004 rounding up
    (((test_fraction * k as f64) - 1e-9).ceil() as usize).max(1)
}

/// Per speaker, the earliest `ceil(test_fraction * k)` entries form the test split.
pub fn temporal_split(manifest: &Manifest, test_fraction: f64) -> Result<(Manifest, Manifest)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::domain(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut per_speaker: HashMap<&str, usize> = HashMap::new();
    for e in &manifest.entries {
        *per_speaker.entry(e.speaker_id.as_str()).or_default() += 1;
    }
    let mut quota = HashMap::new();
    for (speaker, &k) in &per_speaker {
        let n_test = test_count(k, test_fraction);
        if k < 2 || n_test >= k {
            return Err(Error::Dataset(format!(
                "speaker {speaker:?} has {k} recording(s); cannot split"
            )));
        }
        quota.insert(*speaker, n_test);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for e in &manifest.entries {
        let left = quota.get_mut(e.speaker_id.as_str()).expect("speaker counted");
        if *left > 0 {
            *left -= 1;
            test.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok((Manifest { entries: train }, Manifest { entries: test }))
}

/// Mixing protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub snr_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            snr_grid: DEFAULT_SNR_GRID.to_vec(),
            seed: 0,
        }
    }
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid.is_empty() {
            return Err(Error::config("SNR grid must not be empty"));
        }
        if self.snr_grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("SNR grid values must be finite"));
        }
        Ok(())
    }
}

/// Noises and SNRs drawn for one clean entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub clean_id: String,
    pub noise_ids: Vec<String>,
    pub snrs_db: Vec<f64>,
    pub seed: u64,
}

/// Draws `noises_per_clean` distinct noises and one SNR per mixture for every
/// clean entry, sequentially from a single generator seeded by `spec.seed`.
pub fn plan_mixtures(
    clean: &Manifest,
    noise: &Manifest,
    spec: &MixSpec,
    noises_per_clean: usize,
) -> Result<Vec<MixPlan>> {
    spec.validate()?;
    if noises_per_clean == 0 {
        return Err(Error::config("at least one noise per clean entry is required"));
    }
    if noise.len() < noises_per_clean {
        return Err(Error::Dataset(format!(
            "noise pool has {} entries, {noises_per_clean} needed per clean entry",
            noise.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(clean
        .entries
        .iter()
        .map(|c| {
            let picks = index::sample(&mut rng, noise.len(), noises_per_clean);
            let noise_ids = picks.iter().map(|i| noise.entries[i].id.clone()).collect();
            let snrs_db = (0..noises_per_clean)
                .map(|_| spec.snr_grid[rng.random_range(0..spec.snr_grid.len())])
                .collect();
            MixPlan {
                clean_id: c.id.clone(),
                noise_ids,
                snrs_db,
                seed: spec.seed,
            }
        })
        .collect())
}

/// Stable file stem of one mixture.
pub fn mixture_id(clean_id: &str, noise_id: &str, snr_db: f64) -> String {
    format!("{clean_id}__{noise_id}__{snr_db:+}dB")
}

/// Renders one plan into `out_dir` as float WAVs and returns their entries.
///
/// Paths in `clean` and `noise` are resolved against `clean_base` and `noise_base`.
pub fn render_plan(
    plan: &MixPlan,
    clean: &Manifest,
    clean_base: &Path,
    noise: &Manifest,
    noise_base: &Path,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let lookup = |m: &Manifest, id: &str| {
        m.get(id)
            .cloned()
            .ok_or_else(|| Error::Dataset(format!("unknown id {id:?}")))
    };
    let c = lookup(clean, &plan.clean_id)?;
    let clean_buf = load_wav(resolve(clean_base, &c.path))?;
    plan.noise_ids
        .iter()
        .zip(&plan.snrs_db)
        .map(|(noise_id, &snr)| {
            let n = lookup(noise, noise_id)?;
            let noise_buf = load_wav(resolve(noise_base, &n.path))?;
            let mixed = mix_at_snr_with_offset(&clean_buf, &noise_buf, snr, 0)?;
            let id = mixture_id(&c.id, noise_id, snr);
            let file = format!("{id}.wav");
            save_wav(out_dir.join(&file), &mixed, WavFormat::Float32)?;
            Ok(ManifestEntry {
                id,
                speaker_id: c.speaker_id.clone(),
                path: file.into(),
                duration_s: mixed.duration_s(),
                kind: EntryKind::Noisy,
                mix: Some(MixRecord {
                    clean_id: c.id.clone(),
                    noise_id: noise_id.clone(),
                    snr_db: snr,
                    noise_offset: 0,
                    seed: plan.seed,
                }),
            })
        })
        .collect()
}

/// Plans and renders every mixture, returning the noisy-set manifest.
pub fn build_mixtures(
    clean: &Manifest,
    clean_base: &Path,
    noise: &Manifest,
    noise_base: &Path,
    spec: &MixSpec,
    noises_per_clean: usize,
    out_dir: &Path,
) -> Result<Manifest> {
    let plans = plan_mixtures(clean, noise, spec, noises_per_clean)?;
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(plans.len() * noises_per_clean);
    for plan in &plans {
        entries.extend(render_plan(plan, clean, clean_base, noise, noise_base, out_dir)?);
    }
    Manifest::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speaker_manifest(counts: &[(&str, usize)]) -> Manifest {
        let entries = counts
            .iter()
            .flat_map(|&(s, k)| {
                (0..k).map(move |i| {
                    ManifestEntry::new(format!("{s}-{i:03}"), s, format!("{s}/{i}.wav"), 1.0, EntryKind::Clean)
                })
            })
            .collect();
        Manifest::new(entries).unwrap()
    }

    #[test]
    fn split_examples() {
        let (train, test) = temporal_split(&speaker_manifest(&[("a", 10)]), 0.2).unwrap();
        let ids = |m: &Manifest| m.entries.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&test), vec!["a-000", "a-001"]);
        assert_eq!(train.len(), 8);
        assert_eq!(train.entries[0].id, "a-002");

        let (train, test) = temporal_split(&speaker_manifest(&[("b", 5)]), 0.2).unwrap();
        assert_eq!((train.len(), test.len()), (4, 1));
        assert_eq!(test.entries[0].id, "b-000");

        assert!(temporal_split(&speaker_manifest(&[("c", 1)]), 0.2).is_err());
        assert!(temporal_split(&speaker_manifest(&[("a", 4)]), 0.0).is_err());
    }

    #[test]
    fn rounding_is_ceil_with_float_guard() {
        assert_eq!(test_count(15, 0.2), 3);
        assert_eq!(test_count(11, 0.2), 3);
        assert_eq!(test_count(2, 0.2), 1);
    }

    #[test]
    fn plan_is_seeded_and_distinct() {
        let clean = speaker_manifest(&[("s", 3)]);
        let noise = Manifest::new(
            (0..25)
                .map(|i| ManifestEntry::new(format!("n{i}"), "noise", format!("n{i}.wav"), 2.0, EntryKind::Noise))
                .collect(),
        )
        .unwrap();
        let spec = MixSpec { seed: 7, ..MixSpec::default() };
        let a = plan_mixtures(&clean, &noise, &spec, 20).unwrap();
        let b = plan_mixtures(&clean, &noise, &spec, 20).unwrap();
        assert_eq!(a, b);
        for p in &a {
            let mut ids = p.noise_ids.clone();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 20);
            assert!(p.snrs_db.iter().all(|s| DEFAULT_SNR_GRID.contains(s)));
        }
        let other = plan_mixtures(&clean, &noise, &MixSpec { seed: 8, ..MixSpec::default() }, 20).unwrap();
        assert_ne!(a, other);
        assert!(plan_mixtures(&clean, &noise, &spec, 26).is_err());
        let empty_grid = MixSpec { snr_grid: vec![], seed: 0 };
        assert!(plan_mixtures(&clean, &noise, &empty_grid, 1).is_err());
    }

    #[test]
    fn mixture_ids() {
        assert_eq!(mixture_id("c1", "n4", -5.0), "c1__n4__-5dB");
        assert_eq!(mixture_id("c1", "n4", 10.0), "c1__n4__+10dB");
    }
}
