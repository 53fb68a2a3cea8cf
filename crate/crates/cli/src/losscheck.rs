//! Random-instance gradient verification.

use articulate::losses::{
    grad_check, ContrastiveObjective, DualMseObjective, Objective, SemanticObjective,
    TemporalObjective,
};
use clap::ValueEnum;
use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::LossConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    DualMse,
    Temporal,
    Semantic,
    Contrastive,
}

const FRAMES: usize = 5;
const DIM: usize = 8;
const BATCH: usize = 4;

fn gaussian(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

fn unit_rows(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    let mut m = gaussian(rng, shape);
    for mut row in m.rows_mut() {
        let n = row.dot(&row).sqrt();
        row /= n;
    }
    m
}

fn batch(rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
    (0..BATCH)
        .map(|_| {
            let t = rng.random_range(3..=FRAMES + 2);
            unit_rows(rng, (t, DIM))
        })
        .collect()
}

pub fn random_instance(kind: LossKind, cfg: &LossConfig, rng: &mut ChaCha8Rng) -> Box<dyn Objective> {
    match kind {
        LossKind::DualMse => Box::new(DualMseObjective {
            syn: gaussian(rng, (6, 4)),
            gt: gaussian(rng, (6, 4)),
            alpha: cfg.alpha,
        }),
        LossKind::Temporal => Box::new(TemporalObjective {
            audio: unit_rows(rng, (FRAMES, DIM)),
            video: unit_rows(rng, (FRAMES, DIM)),
            tau: cfg.tau,
        }),
        LossKind::Semantic => {
            let audio = batch(rng);
            let video = audio.iter().map(|a| unit_rows(rng, a.dim())).collect();
            Box::new(SemanticObjective {
                audio,
                video,
                tau: cfg.tau,
            })
        }
        LossKind::Contrastive => {
            let batch_audio = batch(rng);
            let batch_video = batch_audio.iter().map(|a| unit_rows(rng, a.dim())).collect();
            Box::new(ContrastiveObjective {
                audio: unit_rows(rng, (FRAMES, DIM)),
                video: unit_rows(rng, (FRAMES, DIM)),
                batch_audio,
                batch_video,
                tau: cfg.tau,
                lambda: cfg.lambda,
            })
        }
    }
}

/// Worst relative error over `trials` seeded instances.
pub fn run(kind: LossKind, trials: usize, cfg: &LossConfig, seed: u64) -> articulate::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let objective = random_instance(kind, cfg, &mut rng);
        worst = worst.max(grad_check(objective.as_ref(), cfg.grad_eps)?);
    }
    Ok(worst)
}
