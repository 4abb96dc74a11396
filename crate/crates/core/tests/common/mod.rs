//! Independent oracle implementations used to check the library. These
//! deliberately avoid the library's own code paths: plain nested loops over
//! scalars, no shared helpers.

#![allow(dead_code)]

use ndarray::Array2;

/// One expected match from the exhaustive matcher.
#[derive(Debug, PartialEq, Eq, Clone, Copy)]
pub struct OracleMatch {
    pub anchor_is_row: bool,
    pub anchor: usize,
    pub matched: usize,
}

/// Brute-force argmax matcher: scan every entry, keep the best per row and
/// per column, first index wins ties.
pub fn brute_force_argmax(values: &Array2<f64>) -> Vec<OracleMatch> {
    let (rows, cols) = (values.nrows(), values.ncols());
    let mut out = Vec::new();
    for j in 0..rows {
        let mut best = 0usize;
        for k in 0..cols {
            if values[(j, k)] > values[(j, best)] {
                best = k;
            }
        }
        out.push(OracleMatch {
            anchor_is_row: true,
            anchor: j,
            matched: best,
        });
    }
    for k in 0..cols {
        let mut best = 0usize;
        for j in 0..rows {
            if values[(j, k)] > values[(best, k)] {
                best = j;
            }
        }
        out.push(OracleMatch {
            anchor_is_row: false,
            anchor: k,
            matched: best,
        });
    }
    out
}

/// Scalar brute-force evaluation of the weighted contrastive loss,
/// enumerating every (i, p, q, j) term directly.
pub fn scalar_loss_oracle(
    z: &[Vec<Vec<f64>>], // [modality][sample][feature]
    weights: &[f64],
    mask: &[Vec<bool>], // [sample][modality]
    tau: f64,
    mask_dummy_pairs: bool,
) -> f64 {
    let m = z.len();
    let b = weights.len();
    let present = |i: usize, k: usize| !mask_dummy_pairs || mask[i][k];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = 0.0;
    for i in 0..b {
        for p in 0..m {
            for q in 0..m {
                if p == q || !present(i, p) || !present(i, q) {
                    continue;
                }
                let mut denom = 0.0;
                let mut any = false;
                for j in 0..b {
                    if j != i && present(j, q) {
                        denom += (dot(&z[p][i], &z[q][j]) / tau).exp();
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                let pos = (dot(&z[q][i], &z[p][i]) / tau).exp();
                loss += -weights[i] * (pos / denom).ln();
            }
        }
    }
    loss
}

/// Standard symmetric two-view InfoNCE (log-ratio form, negatives exclude
/// the anchor), written directly.
pub fn symmetric_infonce_reference(za: &[Vec<f64>], zb: &[Vec<f64>], tau: f64) -> f64 {
    let b = za.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = 0.0;
    for i in 0..b {
        let pos = (dot(&za[i], &zb[i]) / tau).exp();
        let mut denom_ab = 0.0;
        let mut denom_ba = 0.0;
        for j in 0..b {
            if j != i {
                denom_ab += (dot(&za[i], &zb[j]) / tau).exp();
                denom_ba += (dot(&zb[i], &za[j]) / tau).exp();
            }
        }
        loss += -(pos / denom_ab).ln() - (pos / denom_ba).ln();
    }
    loss
}

/// Relative error with an absolute floor sized above central-difference
/// cancellation noise (~1e-9 at these loss magnitudes), so true-zero
/// gradients compare cleanly.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-3)
}

/// Unit-norm random rows.
pub fn unit_rows(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Array2<f64> {
    let mut z: Array2<f64> = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    for mut row in z.rows_mut() {
        let n = row.dot(&row).sqrt().max(1e-9);
        row.mapv_inplace(|v| v / n);
    }
    z
}

pub fn to_nested(z: &Array2<f64>) -> Vec<Vec<f64>> {
    z.rows().into_iter().map(|r| r.to_vec()).collect()
}
