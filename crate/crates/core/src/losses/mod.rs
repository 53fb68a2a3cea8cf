//! Training objectives with analytic gradients.
//!
//! The contrastive losses share one symmetric InfoNCE kernel: for `n` audio
//! and `n` video embeddings with cosine-similarity logits `S = sim / tau`,
//! each matched pair `(i, i)` contributes half an audio-anchored and half a
//! video-anchored cross-entropy, and the loss is the mean over pairs.
//! All arithmetic is in `f64`; softmaxes subtract the running maximum.

mod gradcheck;

pub use gradcheck::{
    grad_check, ContrastiveObjective, DualMseObjective, Objective, SemanticObjective,
    TemporalObjective, DEFAULT_EPS,
};

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::features::temporal_diff;

pub const DEFAULT_TAU: f64 = 0.07;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.5;

/// `n x D` embeddings, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence(Array2<f64>);

impl EmbeddingSequence {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        let (n, d) = rows.dim();
        if n == 0 || d == 0 {
            return Err(Error::shape(format!("embeddings must be non-empty, got {n}x{d}")));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("embedding contains NaN or Inf".into()));
        }
        Ok(Self(rows))
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    /// Time-mean of the rows.
    pub fn pooled(&self) -> Array1<f64> {
        self.0.mean_axis(Axis(0)).expect("non-empty by construction")
    }
}

/// Loss value with gradients shaped like the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<G> {
    pub value: f64,
    pub grad: G,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub audio: Array2<f64>,
    pub video: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGrad {
    pub audio: Vec<Array2<f64>>,
    pub video: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGrad {
    pub temporal: PairGrad,
    pub semantic: BatchGrad,
}

pub fn cosine_sim(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine similarity of a zero vector"));
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("temperature must be positive, got {tau}")))
    }
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {w}")))
    }
}

/// Rows scaled to unit norm, plus the original norms.
fn normalize_rows(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms = m.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::domain(format!("row {i} is a zero vector")));
    }
    let unit = m / &norms.view().insert_axis(Axis(1));
    Ok((unit, norms))
}

/// Pulls a gradient w.r.t. unit rows back through the normalization.
fn unnormalize_grad(unit: &Array2<f64>, norms: &Array1<f64>, g: Array2<f64>) -> Array2<f64> {
    let radial = (&g * unit).sum_axis(Axis(1));
    (g - unit * &radial.insert_axis(Axis(1))) / &norms.view().insert_axis(Axis(1))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `-ln softmax(xs)[target]`, via `ln_1p` when the target is the largest logit.
fn neg_log_softmax(xs: ArrayView1<f64>, target: usize) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs[target] == m {
        let rest: f64 = xs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != target)
            .map(|(_, &x)| (x - m).exp())
            .sum();
        rest.ln_1p()
    } else {
        (m - xs[target]) + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
    }
}

/// Symmetric InfoNCE over matched rows of `audio` and `video`.
fn symmetric_infonce(
    audio: &Array2<f64>,
    video: &Array2<f64>,
    tau: f64,
) -> Result<LossValue<PairGrad>> {
    check_tau(tau)?;
    if audio.dim() != video.dim() {
        return Err(Error::shape(format!(
            "audio {:?} and video {:?} embeddings differ in shape",
            audio.dim(),
            video.dim()
        )));
    }
    let n = audio.nrows();
    let (ua, na) = normalize_rows(audio)?;
    let (uv, nv) = normalize_rows(video)?;
    let logits = ua.dot(&uv.t()) / tau;

    let row_lse: Vec<f64> = logits.rows().into_iter().map(|r| log_sum_exp(r.iter().copied())).collect();
    let col_lse: Vec<f64> = logits
        .columns()
        .into_iter()
        .map(|c| log_sum_exp(c.iter().copied()))
        .collect();

    let value = (0..n)
        .map(|i| {
            0.5 * neg_log_softmax(logits.row(i), i) + 0.5 * neg_log_softmax(logits.column(i), i)
        })
        .sum::<f64>()
        / n as f64;

    let scale = 0.5 / n as f64;
    let mut g_logits = Array2::from_shape_fn((n, n), |(i, j)| {
        let s = logits[[i, j]];
        scale * ((s - row_lse[i]).exp() + (s - col_lse[j]).exp())
    });
    for i in 0..n {
        g_logits[[i, i]] -= 2.0 * scale;
    }
    let g_ua = g_logits.dot(&uv) / tau;
    let g_uv = g_logits.t().dot(&ua) / tau;
    Ok(LossValue {
        value,
        grad: PairGrad {
            audio: unnormalize_grad(&ua, &na, g_ua),
            video: unnormalize_grad(&uv, &nv, g_uv),
        },
    })
}

/// Frame-level InfoNCE: negatives for frame `i` are the other frames of the same sequence.
pub fn temporal_infonce(
    audio: &EmbeddingSequence,
    video: &EmbeddingSequence,
    tau: f64,
) -> Result<LossValue<PairGrad>> {
    if audio.len() != video.len() {
        return Err(Error::shape(format!(
            "temporal loss needs equal frame counts, got {} and {}",
            audio.len(),
            video.len()
        )));
    }
    symmetric_infonce(audio.rows(), video.rows(), tau)
}

/// Sequence-level InfoNCE over time-mean pooled embeddings of a batch.
pub fn semantic_infonce(
    audio: &[EmbeddingSequence],
    video: &[EmbeddingSequence],
    tau: f64,
) -> Result<LossValue<BatchGrad>> {
    if audio.is_empty() || audio.len() != video.len() {
        return Err(Error::shape(format!(
            "semantic loss needs equal non-empty batches, got {} and {}",
            audio.len(),
            video.len()
        )));
    }
    let pool = |batch: &[EmbeddingSequence]| -> Result<Array2<f64>> {
        let d = batch[0].dim();
        if batch.iter().any(|s| s.dim() != d) {
            return Err(Error::shape("embedding width differs within batch"));
        }
        let mut out = Array2::zeros((batch.len(), d));
        for (mut row, seq) in out.rows_mut().into_iter().zip(batch) {
            row.assign(&seq.pooled());
        }
        Ok(out)
    };
    let inner = symmetric_infonce(&pool(audio)?, &pool(video)?, tau)?;
    // the mean spreads each pooled gradient evenly over its frames
    let spread = |batch: &[EmbeddingSequence], g: &Array2<f64>| -> Vec<Array2<f64>> {
        batch
            .iter()
            .zip(g.rows())
            .map(|(seq, gb)| {
                let row = &gb / seq.len() as f64;
                row.broadcast((seq.len(), seq.dim()))
                    .expect("row broadcasts over frames")
                    .to_owned()
            })
            .collect()
    };
    Ok(LossValue {
        value: inner.value,
        grad: BatchGrad {
            audio: spread(audio, &inner.grad.audio),
            video: spread(video, &inner.grad.video),
        },
    })
}

/// `lambda * temporal + (1 - lambda) * semantic`.
pub fn contrastive_loss(
    audio: &EmbeddingSequence,
    video: &EmbeddingSequence,
    batch_audio: &[EmbeddingSequence],
    batch_video: &[EmbeddingSequence],
    tau: f64,
    lambda: f64,
) -> Result<LossValue<ContrastiveGrad>> {
    check_weight("lambda", lambda)?;
    let t = temporal_infonce(audio, video, tau)?;
    let s = semantic_infonce(batch_audio, batch_video, tau)?;
    let mu = 1.0 - lambda;
    Ok(LossValue {
        value: lambda * t.value + mu * s.value,
        grad: ContrastiveGrad {
            temporal: PairGrad {
                audio: t.grad.audio * lambda,
                video: t.grad.video * lambda,
            },
            semantic: BatchGrad {
                audio: s.grad.audio.into_iter().map(|g| g * mu).collect(),
                video: s.grad.video.into_iter().map(|g| g * mu).collect(),
            },
        },
    })
}

/// `alpha * MSE(syn, gt) + (1 - alpha) * MSE(diff(syn), diff(gt))`, with the
/// gradient taken w.r.t. `syn`.
pub fn dual_mse(syn: &Array2<f64>, gt: &Array2<f64>, alpha: f64) -> Result<LossValue<Array2<f64>>> {
    check_weight("alpha", alpha)?;
    if syn.dim() != gt.dim() {
        return Err(Error::shape(format!(
            "synthesized {:?} and target {:?} differ in shape",
            syn.dim(),
            gt.dim()
        )));
    }
    let residual = syn - gt;
    let n = residual.len() as f64;
    let d_residual = temporal_diff(syn)? - temporal_diff(gt)?;
    let m = d_residual.len() as f64;

    let value = alpha * residual.mapv(|r| r * r).sum() / n
        + (1.0 - alpha) * d_residual.mapv(|r| r * r).sum() / m;

    let mut grad = residual * (2.0 * alpha / n);
    let w = 2.0 * (1.0 - alpha) / m;
    let t = syn.nrows();
    // adjoint of the forward difference
    for (k, dr) in d_residual.rows().into_iter().enumerate() {
        let mut earlier = grad.row_mut(k);
        earlier.scaled_add(-w, &dr);
        debug_assert!(k + 1 < t);
        let mut later = grad.row_mut(k + 1);
        later.scaled_add(w, &dr);
    }
    Ok(LossValue { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn seq(m: Array2<f64>) -> EmbeddingSequence {
        EmbeddingSequence::new(m).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let v = array![0.3, -1.0, 2.0];
        assert!((cosine_sim(v.view(), v.view()).unwrap() - 1.0).abs() < 1e-15);
        let (e1, e2) = (array![1.0, 0.0], array![0.0, 1.0]);
        assert_eq!(cosine_sim(e1.view(), e2.view()).unwrap(), 0.0);
        let (a, b) = (array![1.0, 2.0, 3.0], array![3.0, 2.0, 1.0]);
        assert!((cosine_sim(a.view(), b.view()).unwrap() - 10.0 / 14.0).abs() < 1e-15);
        let z = array![0.0, 0.0, 0.0];
        assert!(cosine_sim(a.view(), z.view()).is_err());
    }

    #[test]
    fn identical_rows_give_log_n() {
        let e = seq(Array2::from_elem((4, 3), 0.7));
        let l = temporal_infonce(&e, &e, DEFAULT_TAU).unwrap();
        assert!((l.value - 4f64.ln()).abs() < 1e-12);
        assert!((l.value - 1.386_294).abs() < 1e-6);
    }

    #[test]
    fn basis_vectors_closed_form() {
        let e = seq(Array2::eye(4));
        let l = temporal_infonce(&e, &e, 0.07).unwrap();
        let expected = (3.0 * (-1.0f64 / 0.07).exp()).ln_1p();
        assert!((l.value - expected).abs() < 1e-18 + 1e-12 * expected);
        assert!((l.value - 1.87e-6).abs() < 0.01e-6);
    }

    #[test]
    fn single_frame_is_zero() {
        let e = seq(array![[0.2, 0.9, -0.4]]);
        let v = seq(array![[1.0, 0.0, 0.5]]);
        let l = temporal_infonce(&e, &v, 0.07).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.audio.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn temporal_errors() {
        let a = seq(Array2::eye(3));
        let b = seq(Array2::eye(2));
        assert!(temporal_infonce(&a, &b, 0.07).is_err());
        assert!(temporal_infonce(&a, &a, 0.0).is_err());
        assert!(temporal_infonce(&a, &a, -1.0).is_err());
        let zero = seq(array![[0.0, 0.0], [1.0, 0.0]]);
        let other = seq(array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(temporal_infonce(&zero, &other, 0.07).is_err());
        assert!(EmbeddingSequence::new(array![[f64::NAN]]).is_err());
        assert!(EmbeddingSequence::new(Array2::zeros((0, 3))).is_err());
    }

    #[test]
    fn semantic_two_basis_vectors() {
        let a = vec![seq(array![[1.0, 0.0]]), seq(array![[0.0, 1.0]])];
        let l = semantic_infonce(&a, &a, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((l.value - -(e / (e + 1.0)).ln()).abs() < 1e-14);
        assert!((l.value - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn semantic_single_item_is_zero() {
        let a = vec![seq(array![[1.0, 2.0], [3.0, 1.0]])];
        let v = vec![seq(array![[0.5, -2.0], [1.0, 1.0], [0.0, 1.0]])];
        assert_eq!(semantic_infonce(&a, &v, 0.07).unwrap().value, 0.0);
    }

    #[test]
    fn semantic_constant_sequences_match_temporal() {
        let rows_a = array![[1.0, 0.2, -0.3], [0.1, 0.9, 0.4], [-0.5, 0.3, 1.0]];
        let rows_v = array![[0.8, 0.1, -0.1], [0.3, 1.1, 0.0], [-0.2, 0.2, 0.9]];
        let batch = |rows: &Array2<f64>| -> Vec<EmbeddingSequence> {
            rows.rows()
                .into_iter()
                .map(|r| seq(r.broadcast((5, 3)).unwrap().to_owned()))
                .collect()
        };
        let s = semantic_infonce(&batch(&rows_a), &batch(&rows_v), 0.07).unwrap();
        let t = temporal_infonce(&seq(rows_a), &seq(rows_v), 0.07).unwrap();
        assert!((s.value - t.value).abs() < 1e-12);
    }

    #[test]
    fn contrastive_mixes_linearly() {
        let a = seq(array![[1.0, 0.2], [0.1, 0.9], [0.4, 0.4]]);
        let v = seq(array![[0.9, 0.1], [0.3, 1.0], [0.5, 0.2]]);
        let ba = vec![seq(array![[1.0, 0.0], [0.8, 0.3]]), seq(array![[0.1, 1.0]])];
        let bv = vec![seq(array![[0.7, 0.2]]), seq(array![[0.0, 1.0], [0.2, 0.9]])];
        let t = temporal_infonce(&a, &v, 0.07).unwrap().value;
        let s = semantic_infonce(&ba, &bv, 0.07).unwrap().value;
        let one = contrastive_loss(&a, &v, &ba, &bv, 0.07, 1.0).unwrap();
        let zero = contrastive_loss(&a, &v, &ba, &bv, 0.07, 0.0).unwrap();
        let half = contrastive_loss(&a, &v, &ba, &bv, 0.07, 0.5).unwrap();
        assert_eq!(one.value, t);
        assert_eq!(zero.value, s);
        assert!((half.value - 0.5 * (t + s)).abs() < 1e-15);
        assert!(contrastive_loss(&a, &v, &ba, &bv, 0.07, 1.5).is_err());
        assert!(contrastive_loss(&a, &v, &ba, &bv, 0.07, -0.1).is_err());
    }

    #[test]
    fn contrastive_weighting_example() {
        // lambda = 0.5 between L_t = 1.0 and L_s = 0.4
        assert!((0.5 * 1.0 + (1.0 - 0.5) * 0.4 - 0.7f64).abs() < 1e-15);
    }

    #[test]
    fn dual_mse_examples() {
        let gt = array![[0.1, 0.5], [0.3, -0.2], [1.0, 0.0]];
        let same = dual_mse(&gt, &gt, 0.5).unwrap();
        assert_eq!(same.value, 0.0);
        assert!(same.grad.iter().all(|&g| g.abs() < 1e-10));

        let shifted = &gt + 1.0;
        assert!((dual_mse(&shifted, &gt, 0.5).unwrap().value - 0.5).abs() < 1e-12);

        let syn = array![[0.0, 0.4], [0.5, 0.1], [0.2, 0.3]];
        let plain = (&syn - &gt).mapv(|r| r * r).mean().unwrap();
        assert!((dual_mse(&syn, &gt, 1.0).unwrap().value - plain).abs() < 1e-15);
    }

    #[test]
    fn dual_mse_errors() {
        let a = Array2::zeros((3, 2));
        assert!(dual_mse(&a, &Array2::zeros((3, 3)), 0.5).is_err());
        assert!(dual_mse(&Array2::zeros((1, 2)), &Array2::zeros((1, 2)), 0.5).is_err());
        assert!(dual_mse(&a, &a, 1.1).is_err());
    }
}
