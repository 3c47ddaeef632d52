mod common;

use masa_core::nn::{softmax, Activation, Adam, AdamConfig, DenseNet, LayerShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        let net = common::random_net(&mut rng, 3, 12);
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = common::gradient_error(&net, &x, &g, 1e-5);
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn two_layer_tanh_matches_scalar_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = DenseNet::new(&[4, 6, 3], Activation::Tanh, Activation::Tanh, &mut rng).unwrap();
    for p in net.params_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    let x = [0.3, -0.7, 0.1, 0.9];
    let mut h = vec![0.0; 6];
    let w0 = net.layer_weights(0).to_vec();
    let b0 = net.layer_bias(0).to_vec();
    for o in 0..6 {
        let mut s = b0[o];
        for i in 0..4 {
            s += w0[o * 4 + i] * x[i];
        }
        h[o] = s.tanh();
    }
    let w1 = net.layer_weights(1).to_vec();
    let b1 = net.layer_bias(1).to_vec();
    let out = net.predict(&x).unwrap();
    for o in 0..3 {
        let mut s = b1[o];
        for i in 0..6 {
            s += w1[o * 6 + i] * h[i];
        }
        assert!((out[o] - s.tanh()).abs() < 1e-12);
    }
}

#[test]
fn input_gradient_agrees_with_backward() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = common::random_net(&mut rng, 3, 10);
    let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, tape) = net.forward(&x).unwrap();
    let full = net.backward(&tape, &g).unwrap();
    assert_eq!(net.input_gradient(&tape, &g).unwrap(), full.input);
}

#[test]
fn softmax_matches_naive_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.random_range(1..10);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = softmax(&z).unwrap();
        let total: f64 = z.iter().map(|v| v.exp()).sum();
        for (a, v) in s.as_slice().iter().zip(&z) {
            assert!((a - v.exp() / total).abs() < 1e-12);
        }
        assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut adam = Adam::new(
        1,
        AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        },
    );
    let mut p = [0.0];
    adam.step(&mut p, &[1.0]).unwrap();
    assert!((p[0] + 0.1).abs() < 1e-6);
}

#[test]
fn single_linear_layer_gradients() {
    let net = DenseNet::from_parts(
        vec![LayerShape {
            inputs: 1,
            outputs: 1,
            activation: Activation::Linear,
        }],
        vec![2.0, 1.0],
    )
    .unwrap();
    let (out, tape) = net.forward(&[3.0]).unwrap();
    assert_eq!(out, vec![7.0]);
    let g = net.backward(&tape, &[1.0]).unwrap();
    assert_eq!(g.params, vec![3.0, 1.0]);
    assert_eq!(g.input, vec![2.0]);
}
