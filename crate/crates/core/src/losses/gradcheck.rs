//! Central-difference verification of analytic gradients.

use ndarray::Array2;

use super::{
    contrastive_loss, dual_mse, semantic_infonce, temporal_infonce, EmbeddingSequence,
};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// A scalar loss over a flat parameter vector.
pub trait Objective {
    /// Current parameter values.
    fn params(&self) -> Vec<f64>;

    /// Loss and analytic gradient at `params`.
    fn evaluate(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Max over coordinates of `|analytic - numeric| / max(1e-12, |analytic| + |numeric|)`.
pub fn grad_check(objective: &dyn Objective, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {eps}")));
    }
    let x0 = objective.params();
    let (f0, analytic) = objective.evaluate(&x0)?;
    if !f0.is_finite() {
        return Err(Error::Numerical(format!("loss is {f0} at the probe point")));
    }
    if analytic.len() != x0.len() {
        return Err(Error::shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            x0.len()
        )));
    }
    let mut x = x0.clone();
    let mut worst = 0.0f64;
    for i in 0..x0.len() {
        x[i] = x0[i] + eps;
        let (plus, _) = objective.evaluate(&x)?;
        x[i] = x0[i] - eps;
        let (minus, _) = objective.evaluate(&x)?;
        x[i] = x0[i];
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::Numerical(format!(
                "loss is not finite near coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}

fn take_matrix(params: &[f64], at: &mut usize, shape: (usize, usize)) -> Array2<f64> {
    let n = shape.0 * shape.1;
    let m = Array2::from_shape_vec(shape, params[*at..*at + n].to_vec())
        .expect("slice length matches shape");
    *at += n;
    m
}

fn flatten<'a>(mats: impl IntoIterator<Item = &'a Array2<f64>>) -> Vec<f64> {
    mats.into_iter().flat_map(|m| m.iter().copied()).collect()
}

/// Dual-MSE as a function of the synthesized spectrogram.
pub struct DualMseObjective {
    pub syn: Array2<f64>,
    pub gt: Array2<f64>,
    pub alpha: f64,
}

impl Objective for DualMseObjective {
    fn params(&self) -> Vec<f64> {
        flatten([&self.syn])
    }

    fn evaluate(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let syn = take_matrix(params, &mut 0, self.syn.dim());
        let l = dual_mse(&syn, &self.gt, self.alpha)?;
        Ok((l.value, flatten([&l.grad])))
    }
}

/// Temporal InfoNCE as a function of both embedding sequences.
pub struct TemporalObjective {
    pub audio: Array2<f64>,
    pub video: Array2<f64>,
    pub tau: f64,
}

impl Objective for TemporalObjective {
    fn params(&self) -> Vec<f64> {
        flatten([&self.audio, &self.video])
    }

    fn evaluate(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut at = 0;
        let a = EmbeddingSequence::new(take_matrix(params, &mut at, self.audio.dim()))?;
        let v = EmbeddingSequence::new(take_matrix(params, &mut at, self.video.dim()))?;
        let l = temporal_infonce(&a, &v, self.tau)?;
        Ok((l.value, flatten([&l.grad.audio, &l.grad.video])))
    }
}

/// Semantic InfoNCE as a function of every sequence in the batch.
pub struct SemanticObjective {
    pub audio: Vec<Array2<f64>>,
    pub video: Vec<Array2<f64>>,
    pub tau: f64,
}

fn take_batch(params: &[f64], at: &mut usize, like: &[Array2<f64>]) -> Result<Vec<EmbeddingSequence>> {
    like.iter()
        .map(|m| EmbeddingSequence::new(take_matrix(params, at, m.dim())))
        .collect()
}

impl Objective for SemanticObjective {
    fn params(&self) -> Vec<f64> {
        flatten(self.audio.iter().chain(&self.video))
    }

    fn evaluate(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut at = 0;
        let a = take_batch(params, &mut at, &self.audio)?;
        let v = take_batch(params, &mut at, &self.video)?;
        let l = semantic_infonce(&a, &v, self.tau)?;
        Ok((l.value, flatten(l.grad.audio.iter().chain(&l.grad.video))))
    }
}

/// Combined contrastive loss over a temporal pair and a semantic batch.
pub struct ContrastiveObjective {
    pub audio: Array2<f64>,
    pub video: Array2<f64>,
    pub batch_audio: Vec<Array2<f64>>,
    pub batch_video: Vec<Array2<f64>>,
    pub tau: f64,
    pub lambda: f64,
}

impl Objective for ContrastiveObjective {
    fn params(&self) -> Vec<f64> {
        flatten(
            [&self.audio, &self.video]
                .into_iter()
                .chain(&self.batch_audio)
                .chain(&self.batch_video),
        )
    }

    fn evaluate(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut at = 0;
        let a = EmbeddingSequence::new(take_matrix(params, &mut at, self.audio.dim()))?;
        let v = EmbeddingSequence::new(take_matrix(params, &mut at, self.video.dim()))?;
        let ba = take_batch(params, &mut at, &self.batch_audio)?;
        let bv = take_batch(params, &mut at, &self.batch_video)?;
        let l = contrastive_loss(&a, &v, &ba, &bv, self.tau, self.lambda)?;
        let g = l.grad;
        Ok((
            l.value,
            flatten(
                [&g.temporal.audio, &g.temporal.video]
                    .into_iter()
                    .chain(&g.semantic.audio)
                    .chain(&g.semantic.video),
            ),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    struct Quadratic;

    impl Objective for Quadratic {
        fn params(&self) -> Vec<f64> {
            vec![1.0, -2.0]
        }

        fn evaluate(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((p[0] * p[0] + 3.0 * p[1] * p[1], vec![2.0 * p[0], 6.0 * p[1]]))
        }
    }

    struct WrongGradient;

    impl Objective for WrongGradient {
        fn params(&self) -> Vec<f64> {
            vec![1.0]
        }

        fn evaluate(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((p[0] * p[0], vec![p[0]]))
        }
    }

    struct Blowup;

    impl Objective for Blowup {
        fn params(&self) -> Vec<f64> {
            vec![0.0]
        }

        fn evaluate(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((1.0 / p[0], vec![0.0]))
        }
    }

    #[test]
    fn accepts_correct_and_flags_wrong_gradients() {
        assert!(grad_check(&Quadratic, DEFAULT_EPS).unwrap() < 1e-9);
        // analytic 1 vs numeric 2
        assert!((grad_check(&WrongGradient, DEFAULT_EPS).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite_probe_and_bad_step() {
        assert!(matches!(
            grad_check(&Blowup, DEFAULT_EPS),
            Err(Error::Numerical(_))
        ));
        assert!(grad_check(&Quadratic, 0.0).is_err());
    }

    #[test]
    fn dual_mse_at_minimum_is_stationary() {
        let gt = array![[0.5, 1.0], [0.2, 0.1], [0.9, -0.3]];
        let obj = DualMseObjective {
            syn: gt.clone(),
            gt,
            alpha: 0.5,
        };
        let (value, grad) = obj.evaluate(&obj.params()).unwrap();
        assert_eq!(value, 0.0);
        assert!(grad.iter().all(|g| g.abs() < 1e-10));
    }
}
