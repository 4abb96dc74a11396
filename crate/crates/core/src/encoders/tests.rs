use super::*;
use crate::rng::seeded;
use approx::assert_abs_diff_eq;
use ndarray::Array2;
use rand::Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

#[test]
fn constant_dataset_reconstructs_to_near_zero_error() {
    // All samples identical: the autoencoder only has to learn one point.
    let v = [0.3f64, -0.7, 1.1, 0.2];
    let data = Array2::from_shape_fn((50, 4), |(_, j)| v[j]);
    let mut spec = EncoderSpec::new("m", vec![6], 2);
    spec.epochs = 300;
    spec.learning_rate = 0.05;
    let ae = train_autoencoder(&data, &spec, 0).unwrap();
    let last = *ae.loss_curve.last().unwrap();
    assert!(last < 1e-3, "constant data should be learnable, loss {last}");
    // Latent collapses to (nearly) a single point.
    let z = encode(&ae.encoder, &data).unwrap();
    let first = z.row(0).to_owned();
    for row in z.rows() {
        for (a, b) in row.iter().zip(first.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }
}

#[test]
fn identity_capacity_linear_autoencoder_reaches_least_squares_floor() {
    // latent == input with a linear net: least squares says 0 is attainable.
    let data = random_matrix(100, 6, 11);
    let mut spec = EncoderSpec::new("m", vec![], 6);
    spec.activation = Activation::Identity;
    spec.epochs = 400;
    spec.learning_rate = 0.05;
    spec.batch_size = 100;
    let ae = train_autoencoder(&data, &spec, 3).unwrap();
    let last = *ae.loss_curve.last().unwrap();
    assert!(last <= 1e-3, "linear identity-capacity MSE should reach ~0, got {last}");
}

#[test]
fn separated_clusters_stay_separable_in_latent_space() {
    // Two Gaussian clusters 8 apart; nearest-centroid on latents >= 95%.
    let mut rng = seeded(5);
    let n = 120;
    let mut data = Array2::zeros((n, 8));
    let mut labels = vec![0u32; n];
    for i in 0..n {
        let c = i % 2;
        labels[i] = c as u32;
        for j in 0..8 {
            let center = if c == 0 { -4.0 } else { 4.0 };
            data[(i, j)] = center + rng.random_range(-1.0..1.0);
        }
    }
    let mut spec = EncoderSpec::new("m", vec![8], 3);
    spec.epochs = 200;
    spec.learning_rate = 0.002;
    let ae = train_autoencoder(&data, &spec, 1).unwrap();
    let z = encode(&ae.encoder, &data).unwrap();

    let mut centroids = [vec![0.0; 3], vec![0.0; 3]];
    let mut counts = [0usize; 2];
    for i in 0..n / 2 {
        let c = labels[i] as usize;
        counts[c] += 1;
        for j in 0..3 {
            centroids[c][j] += z[(i, j)];
        }
    }
    for c in 0..2 {
        for v in &mut centroids[c] {
            *v /= counts[c] as f64;
        }
    }
    let mut correct = 0;
    for i in n / 2..n {
        let d = |c: usize| -> f64 {
            (0..3).map(|j| (z[(i, j)] - centroids[c][j]).powi(2)).sum()
        };
        let pred = if d(0) < d(1) { 0 } else { 1 };
        if pred as u32 == labels[i] {
            correct += 1;
        }
    }
    let acc = correct as f64 / (n / 2) as f64;
    assert!(acc >= 0.95, "latent nearest-centroid accuracy {acc}");
}

#[test]
fn autoencoder_loss_is_monotone_within_tolerance() {
    let data = random_matrix(80, 10, 21);
    let mut spec = EncoderSpec::new("m", vec![8], 4);
    spec.epochs = 60;
    spec.learning_rate = 0.01;
    let ae = train_autoencoder(&data, &spec, 2).unwrap();
    // Running mean of the epoch losses is non-increasing within 1e-3.
    let window = 5;
    let means: Vec<f64> = ae
        .loss_curve
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    for pair in means.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-3,
            "running-mean loss increased: {} -> {}",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn empty_training_data_is_an_error() {
    let data = Array2::<f64>::zeros((0, 4));
    let spec = EncoderSpec::new("m", vec![], 2);
    assert!(matches!(
        train_autoencoder(&data, &spec, 0),
        Err(Error::EmptyInput(_))
    ));
}

#[test]
fn oversized_latent_is_rejected() {
    let data = random_matrix(10, 4, 0);
    let spec = EncoderSpec::new("m", vec![], 5);
    assert!(matches!(
        train_autoencoder(&data, &spec, 0),
        Err(Error::Validation { .. })
    ));
}

#[test]
fn encode_empty_batch_keeps_latent_dim() {
    let data = random_matrix(20, 5, 1);
    let mut spec = EncoderSpec::new("m", vec![], 3);
    spec.epochs = 1;
    let ae = train_autoencoder(&data, &spec, 0).unwrap();
    let z = encode(&ae.encoder, &Array2::<f64>::zeros((0, 5))).unwrap();
    assert_eq!(z.shape(), &[0, 3]);
}

#[test]
fn encode_is_batch_invariant() {
    let data = random_matrix(20, 5, 2);
    let mut spec = EncoderSpec::new("m", vec![4], 3);
    spec.epochs = 5;
    let ae = train_autoencoder(&data, &spec, 0).unwrap();
    let all = encode(&ae.encoder, &data).unwrap();
    for i in [0usize, 7, 19] {
        let single = encode(&ae.encoder, &gather_rows(&data, &[i])).unwrap();
        for j in 0..3 {
            assert_eq!(all[(i, j)], single[(0, j)], "row {i} col {j}");
        }
    }
    // Duplicate samples produce identical rows.
    let dup = encode(&ae.encoder, &gather_rows(&data, &[3, 3])).unwrap();
    assert_eq!(dup.row(0), dup.row(1));
}

#[test]
fn encode_shape_mismatch_is_an_error() {
    let data = random_matrix(10, 5, 3);
    let mut spec = EncoderSpec::new("m", vec![], 2);
    spec.epochs = 1;
    let ae = train_autoencoder(&data, &spec, 0).unwrap();
    assert!(matches!(
        encode(&ae.encoder, &Array2::<f64>::zeros((2, 4))),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn normalized_projections_have_unit_norm() {
    let head = Mlp::<f64>::seeded(&[6, 8, 4], Activation::Relu, 9);
    let feats = random_matrix(200, 6, 4);
    let z = project_and_normalize(&feats, &head).unwrap();
    for row in z.rows() {
        let n = row.dot(&row).sqrt();
        assert!((n - 1.0).abs() < 1e-6, "norm {n}");
    }
}

#[test]
fn normalization_absorbs_input_scale_for_linear_biasless_head() {
    let mut head = Mlp::<f64>::seeded(&[4, 3], Activation::Identity, 10);
    head.layers_mut()[0].bias.fill(0.0);
    let feats = random_matrix(10, 4, 5);
    let doubled = feats.mapv(|v| v * 2.0);
    let a = project_and_normalize(&feats, &head).unwrap();
    let b = project_and_normalize(&doubled, &head).unwrap();
    // Identical up to the normalization epsilon.
    for (x, y) in a.iter().zip(b.iter()) {
        assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
    }
}

#[test]
fn zero_rows_normalize_to_zero_without_nan() {
    let x = Array2::<f64>::zeros((3, 4));
    let (z, _) = normalize_rows(&x);
    assert!(z.iter().all(|v| v.is_finite()));
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn normalize_backward_matches_finite_differences() {
    let raw = random_matrix(4, 5, 12);
    let grad_z = random_matrix(4, 5, 13);
    let (_, norms) = normalize_rows(&raw);
    let analytic = normalize_rows_backward(&grad_z, &raw, &norms);
    let h = 1e-6;
    let loss = |m: &Array2<f64>| -> f64 {
        let (z, _) = normalize_rows(m);
        (z * &grad_z).sum()
    };
    for i in 0..4 {
        for j in 0..5 {
            let mut plus = raw.clone();
            plus[(i, j)] += h;
            let mut minus = raw.clone();
            minus[(i, j)] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (fd - analytic[(i, j)]).abs() / (fd.abs() + analytic[(i, j)].abs()).max(1e-8);
            assert!(rel < 1e-5, "({i},{j}) fd {fd} vs {}", analytic[(i, j)]);
        }
    }
}

#[test]
fn encoder_checkpoint_roundtrip_by_modality() {
    let data = random_matrix(30, 6, 8);
    let mut spec = EncoderSpec::new("skel", vec![5], 3);
    spec.epochs = 3;
    let ae = train_autoencoder(&data, &spec, 4).unwrap();
    let dir = tempfile::TempDir::new().unwrap();
    save_encoder(&ae.encoder, &spec, 4, dir.path()).unwrap();
    let loaded = load_encoder::<f64>(dir.path(), &"skel".into()).unwrap();
    let a = encode(&ae.encoder, &data).unwrap();
    let b = encode(&loaded, &data).unwrap();
    // f32 storage costs precision; round trip agrees to f32 resolution.
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = random_matrix(40, 6, 30);
    let mut spec = EncoderSpec::new("m", vec![5], 3);
    spec.epochs = 10;
    let a = train_autoencoder(&data, &spec, 9).unwrap();
    let b = train_autoencoder(&data, &spec, 9).unwrap();
    assert_eq!(a.encoder.net.flatten(), b.encoder.net.flatten());
    let c = train_autoencoder(&data, &spec, 10).unwrap();
    assert_ne!(a.encoder.net.flatten(), c.encoder.net.flatten());
}
