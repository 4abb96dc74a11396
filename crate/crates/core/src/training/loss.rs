//! Similarity-weighted multimodal contrastive loss.
//!
//! For batch sample `i` with weight `w_i` and ordered modality pair
//! `(p, q)`, `p != q`, the loss contributes
//!
//! ```text
//! -w_i * log( exp(z_i^p . z_i^q / t) / sum_{j != i} exp(z_i^p . z_j^q / t) )
//! ```
//!
//! With dummy masking on (the default), a `(i, p, q)` term exists only when
//! both modalities are genuinely present in sample `i`, and the negatives
//! `j` range over samples where modality `q` is present; with masking off,
//! dummies participate as ordinary data. Terms with no eligible negative
//! are skipped. The value is linear in the weights and finite whenever the
//! embeddings are.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::Array2;

pub struct LossBatch<'a, T> {
    /// Per-modality unit embeddings, each `[B x F]`.
    pub embeddings: &'a [Array2<T>],
    /// Per-sample weights in [0, 1].
    pub weights: &'a [T],
    /// `[B x M]` presence mask.
    pub mask: &'a Array2<bool>,
    pub temperature: T,
    /// Mask out terms touching dummy (absent) modalities.
    pub mask_dummy_pairs: bool,
}

impl<'a, T: Scalar> LossBatch<'a, T> {
    fn validate(&self) -> Result<(usize, usize)> {
        let m = self.embeddings.len();
        if m == 0 {
            return Err(Error::EmptyInput("contrastive embeddings".into()));
        }
        let b = self.embeddings[0].nrows();
        if b < 2 {
            return Err(Error::validation(
                "batch",
                format!("contrastive loss needs >= 2 samples, got {b}"),
            ));
        }
        if self.temperature <= T::zero() {
            return Err(Error::validation("temperature", "must be > 0"));
        }
        for (k, z) in self.embeddings.iter().enumerate() {
            if z.nrows() != b {
                return Err(Error::ShapeMismatch {
                    context: format!("embeddings[{k}]"),
                    expected: vec![b],
                    actual: vec![z.nrows()],
                });
            }
        }
        if self.weights.len() != b {
            return Err(Error::ShapeMismatch {
                context: "weights".into(),
                expected: vec![b],
                actual: vec![self.weights.len()],
            });
        }
        if self.mask.nrows() != b || self.mask.ncols() != m {
            return Err(Error::ShapeMismatch {
                context: "mask".into(),
                expected: vec![b, m],
                actual: vec![self.mask.nrows(), self.mask.ncols()],
            });
        }
        Ok((b, m))
    }

    fn present(&self, i: usize, modality: usize) -> bool {
        !self.mask_dummy_pairs || self.mask[(i, modality)]
    }
}

/// Loss value only.
pub fn weighted_contrastive_loss<T: Scalar>(batch: &LossBatch<'_, T>) -> Result<T> {
    compute(batch, false).map(|(loss, _)| loss)
}

/// Loss value plus dL/dz for every modality's embedding matrix.
pub fn weighted_contrastive_loss_with_grad<T: Scalar>(
    batch: &LossBatch<'_, T>,
) -> Result<(T, Vec<Array2<T>>)> {
    compute(batch, true).map(|(loss, grads)| (loss, grads.unwrap()))
}

fn compute<T: Scalar>(
    batch: &LossBatch<'_, T>,
    with_grad: bool,
) -> Result<(T, Option<Vec<Array2<T>>>)> {
    let (b, m) = batch.validate()?;
    let inv_tau = T::one() / batch.temperature;
    let mut loss = T::zero();
    let mut grads = with_grad
        .then(|| batch.embeddings.iter().map(|z| Array2::zeros(z.raw_dim())).collect::<Vec<_>>());

    for p in 0..m {
        for q in 0..m {
            if p == q {
                continue;
            }
            let zp = &batch.embeddings[p];
            let zq = &batch.embeddings[q];
            // scores[i][j] = z_i^p . z_j^q / t
            let scores = zp.dot(&zq.t()) * inv_tau;
            // dL/dscores, filled per anchor row.
            let mut ds = with_grad.then(|| Array2::<T>::zeros((b, b)));

            for i in 0..b {
                if batch.weights[i] == T::zero()
                    || !batch.present(i, p)
                    || !batch.present(i, q)
                {
                    continue;
                }
                let negatives: Vec<usize> =
                    (0..b).filter(|&j| j != i && batch.present(j, q)).collect();
                if negatives.is_empty() {
                    continue;
                }
                let w = batch.weights[i];
                let max = negatives
                    .iter()
                    .map(|&j| scores[(i, j)])
                    .fold(T::neg_infinity(), T::max);
                let sum_exp: T = negatives.iter().map(|&j| (scores[(i, j)] - max).exp()).sum();
                let lse = max + sum_exp.ln();
                loss += -w * (scores[(i, i)] - lse);

                if let Some(ds) = ds.as_mut() {
                    ds[(i, i)] -= w;
                    for &j in &negatives {
                        let softmax = (scores[(i, j)] - max).exp() / sum_exp;
                        ds[(i, j)] += w * softmax;
                    }
                }
            }

            if let (Some(ds), Some(grads)) = (ds, grads.as_mut()) {
                // scores = (Zp Zq^T) / t  =>  dZp += (dS Zq)/t, dZq += (dS^T Zp)/t
                grads[p] += &(ds.dot(zq) * inv_tau);
                grads[q] += &(ds.t().dot(zp) * inv_tau);
            }
        }
    }
    Ok((loss, grads))
}
