use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reefhc::mlp::{softmax_in_place, Optimizer};
use reefhc::{init_mlp, train_mlp, Mlp, TrainConfig};

fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> (Array2<f64>, Vec<usize>) {
    let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
    let y = (0..n).map(|_| rng.gen_range(0..k)).collect();
    (x, y)
}

/// Central finite differences of the loss, one parameter at a time.
fn numeric_gradient(m: &Mlp, x: ArrayView2<f64>, y: &[usize], l2: f64, w: Option<&[f64]>, idx: &[usize]) -> Vec<f64> {
    let h = 1e-5;
    let base = m.params();
    let mut probe = m.clone();
    idx.iter()
        .map(|&i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params(&p).unwrap();
            let up = probe.loss_and_gradient(x, y, l2, w).unwrap().0;
            p[i] = base[i] - h;
            probe.set_params(&p).unwrap();
            let down = probe.loss_and_gradient(x, y, l2, w).unwrap().0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gradients_match_finite_differences_on_small_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for config in 0..20 {
        let d = rng.gen_range(1..6);
        let h1 = rng.gen_range(1..7);
        let h2 = rng.gen_range(1..6);
        let k = rng.gen_range(2..5);
        let n = rng.gen_range(1..9);
        let l2 = if config % 2 == 0 { 0.0 } else { 0.05 };
        let mut m = Mlp::new(&[d, h1, h2, k], config).unwrap();
        // non-zero biases so the ReLU kinks are not hit at exactly zero
        let mut p = m.params();
        p.iter_mut().for_each(|v| *v += rng.gen_range(-0.05..0.05));
        m.set_params(&p).unwrap();
        let (x, y) = random_batch(&mut rng, n, d, k);
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
        let w = (config % 3 == 0).then_some(weights.as_slice());
        let (_, g) = m.loss_and_gradient(x.view(), &y, l2, w).unwrap();
        let analytic = g.flatten();
        let all: Vec<usize> = (0..analytic.len()).collect();
        let numeric = numeric_gradient(&m, x.view(), &y, l2, w, &all);
        for (i, (a, b)) in analytic.iter().zip(&numeric).enumerate() {
            assert!(rel_err(*a, *b) < 1e-4, "config {config} param {i}: {a} vs {b}");
        }
    }
}

#[test]
fn gradients_match_finite_differences_on_default_architecture() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = init_mlp(16, 5, 3).unwrap();
    let (x, y) = random_batch(&mut rng, 6, 16, 5);
    let (_, g) = m.loss_and_gradient(x.view(), &y, 1e-4, None).unwrap();
    let analytic = g.flatten();
    let idx: Vec<usize> = (0..300).map(|_| rng.gen_range(0..analytic.len())).collect();
    let numeric = numeric_gradient(&m, x.view(), &y, 1e-4, None, &idx);
    for (&i, b) in idx.iter().zip(&numeric) {
        assert!(rel_err(analytic[i], *b) < 1e-4, "param {i}: {} vs {b}", analytic[i]);
    }
}

/// Softmax without max subtraction, evaluated per component as
/// `1 / sum_j exp(z_j - z_i)`.
fn pairwise_softmax(z: &[f64]) -> Vec<f64> {
    z.iter()
        .map(|zi| 1.0 / z.iter().map(|zj| (zj - zi).exp()).sum::<f64>())
        .collect()
}

#[test]
fn softmax_is_stable_for_huge_logits() {
    let cases: [&[f64]; 5] = [
        &[1e4, 0.0, -1e4],
        &[1e4, 1e4 - 1.0, 1e4 - 2.0],
        &[-1e4, -1e4, -1e4 + 0.5],
        &[1e4, 1e4],
        &[0.3, -0.7, 2.0, 1e-3],
    ];
    for z in cases {
        let mut p = z.to_vec();
        softmax_in_place(&mut p);
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(pairwise_softmax(z)) {
            assert!((a - b).abs() < 1e-12, "{z:?}");
        }
    }
    // e^-1 / (1 + e^-1 + e^-2), e^-2 / (...)
    let mut p = vec![1e4, 1e4 - 1.0, 1e4 - 2.0];
    softmax_in_place(&mut p);
    let denom = 1.0 + (-1f64).exp() + (-2f64).exp();
    assert!((p[0] - 1.0 / denom).abs() < 1e-15);
}

#[test]
fn network_output_survives_huge_logits() {
    let mut m = Mlp::zeros(&[2, 3, 3]).unwrap();
    m.biases_mut()[1][0] = 1e4;
    m.biases_mut()[1][2] = -1e4;
    let p = m.predict_proba(&[0.5, 0.5]).unwrap();
    assert!(p.iter().all(|v| v.is_finite()));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(p[0], 1.0);
}

#[test]
fn predict_proba_sums_to_one_and_is_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = init_mlp(10, 7, 4).unwrap();
    let mut shifted = m.clone();
    let last = shifted.biases_mut().len() - 1;
    shifted.biases_mut()[last].mapv_inplace(|b| b + 123.456);
    for _ in 0..50 {
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = m.predict_proba(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(shifted.predict_proba(&x).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

fn separable_toy() -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut x = Array2::zeros((20, 2));
    let mut y = Vec::new();
    for i in 0..20 {
        let class = i % 2;
        let offset = if class == 0 { -1.5 } else { 1.5 };
        x[[i, 0]] = offset + rng.gen_range(-0.5..0.5);
        x[[i, 1]] = rng.gen_range(-1.0..1.0);
        y.push(class);
    }
    (x, y)
}

#[test]
fn separable_toy_reaches_full_accuracy() {
    let (x, y) = separable_toy();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 8,
        learning_rate: 1e-2,
        seed: 3,
        ..TrainConfig::default()
    };
    let (m, hist) = train_mlp(init_mlp(2, 2, 3).unwrap(), x.view(), &y, &cfg).unwrap();
    assert_eq!(hist.len(), 200);
    assert!(m.all_finite());
    let p = m.predict_proba_batch(x.view()).unwrap();
    let correct = p
        .rows()
        .into_iter()
        .zip(&y)
        .filter(|(r, &c)| reefhc::mlp::argmax(r.as_slice().unwrap()) == c)
        .count();
    assert_eq!(correct, 20);
    let (again, hist2) = train_mlp(init_mlp(2, 2, 3).unwrap(), x.view(), &y, &cfg).unwrap();
    assert_eq!(again, m);
    assert_eq!(hist2, hist);
}

#[test]
fn full_batch_descent_loss_is_non_increasing() {
    let (x, y) = separable_toy();
    let cfg = TrainConfig {
        epochs: 100,
        batch_size: 20,
        learning_rate: 1e-4,
        optimizer: Optimizer::Sgd,
        seed: 1,
        ..TrainConfig::default()
    };
    let (_, hist) = train_mlp(Mlp::new(&[2, 16, 8, 2], 5).unwrap(), x.view(), &y, &cfg).unwrap();
    for w in hist.windows(2) {
        assert!(w[1] <= w[0] + 1e-8, "{} -> {}", w[0], w[1]);
    }
    assert!(hist.last().unwrap() < hist.first().unwrap());
}
