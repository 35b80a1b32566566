//! Analytic gradients against central finite differences, for every
//! activation kind and through every layer kind.

mod common;

use common::{activation_fd, rel_err, test_spec};
use lprelu::activations::{ActivationKind, ActivationSpec};
use lprelu::layers::{ActivationLayer, Conv2d, Layer, Linear, MaxPool2d};
use lprelu::network::{softmax_cross_entropy, Network};
use lprelu::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn activation_slopes_and_parameter_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in ActivationKind::ALL {
        let spec = test_spec(kind);
        let (worst, n) = activation_fd(&spec, 1000, 10.0, &mut rng);
        assert!(n >= 1000);
        assert!(worst < 1e-4, "{kind}: worst relative error {worst:e}");
    }
}

#[test]
fn default_lp_parameters_also_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for kind in [ActivationKind::LpRelu1, ActivationKind::LpRelu2] {
        let spec = ActivationSpec::init(kind);
        let (worst, _) = activation_fd(&spec, 1000, 12.0, &mut rng);
        assert!(worst < 1e-4, "{kind}: {worst:e}");
    }
}

fn small_net(act: ActivationSpec, rng: &mut ChaCha8Rng) -> Network {
    let a = || Layer::Activation(ActivationLayer::new(act));
    let layers = vec![
        Layer::Conv2d(Conv2d::new(rng, 2, 3, 3, 1, 1)),
        a(),
        Layer::MaxPool2d(MaxPool2d { size: 2, stride: 2 }),
        Layer::Conv2d(Conv2d::new(rng, 3, 4, 3, 2, 0)),
        a(),
        Layer::Flatten,
        Layer::Linear(Linear::new(rng, 4, 5)),
        a(),
        Layer::Linear(Linear::new(rng, 5, 3)),
    ];
    let mut net = Network::new(layers, [2, 6, 6]).unwrap();
    // Nonzero biases so no unit sits exactly at a breakpoint.
    net.visit_params(&mut |p| {
        if p.name.ends_with("bias") {
            for (i, v) in p.value.iter_mut().enumerate() {
                *v = 0.05 * (i as f64 + 1.0);
            }
        }
    });
    net
}

fn loss_of(net: &Network, x: &Tensor, labels: &[usize]) -> f64 {
    softmax_cross_entropy(&net.infer(x).unwrap(), labels).unwrap().value
}

/// Every weight, bias and learnable activation parameter of a conv, pool,
/// flatten and linear stack against central differences of the loss.
fn check_network(act: ActivationSpec, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = small_net(act, &mut rng);
    let x = Tensor::new([3, 2, 6, 6], (0..216).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let labels = [0, 2, 1];
    net.clear_grads();
    let logits = net.forward(&x).unwrap();
    net.backward(&softmax_cross_entropy(&logits, &labels).unwrap()).unwrap();

    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    net.visit_params(&mut |p| analytic.push((p.name.clone(), p.grad.expect("gradient").to_vec())));
    assert!(analytic.iter().any(|(n, _)| n.contains("conv2d")));
    assert!(analytic.iter().any(|(n, _)| n.contains("linear")));

    let h = 1e-6;
    let mut checked = 0;
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        for (k, &g) in grad.iter().enumerate() {
            let probe = |delta: f64| {
                let mut n2 = net.clone();
                let mut idx = 0;
                n2.visit_params(&mut |p| {
                    if idx == pi {
                        p.value[k] += delta;
                    }
                    idx += 1;
                });
                loss_of(&n2, &x, &labels)
            };
            let num = (probe(h) - probe(-h)) / (2.0 * h);
            let err = rel_err(g, num);
            assert!(err < 1e-4, "{} {name}[{k}]: analytic {g:e} numeric {num:e}", act.kind);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn network_gradients_relu() {
    check_network(ActivationSpec::init(ActivationKind::Relu), 1);
}

#[test]
fn network_gradients_learnable_lp_relu2() {
    let spec = ActivationSpec::init(ActivationKind::LpRelu2)
        .with_overrides("A=0.4,B=1.2,alpha=0.3,beta=0.1,learn=all")
        .unwrap();
    check_network(spec, 2);
}

#[test]
fn network_gradients_learnable_lp_relu1() {
    let spec = ActivationSpec::init(ActivationKind::LpRelu1)
        .with_overrides("A=0.5,alpha=0.2,learn=all")
        .unwrap();
    check_network(spec, 3);
}

#[test]
fn network_gradients_smooth_kinds() {
    for (kind, seed) in [(ActivationKind::Tanh, 4), (ActivationKind::Swish, 5)] {
        let spec = ActivationSpec::init(kind).with_overrides("learn=all").unwrap();
        check_network(spec, seed);
    }
}

#[test]
fn parameter_gradients_accumulate_over_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = small_net(ActivationSpec::init(ActivationKind::Relu), &mut rng);
    let x = Tensor::new([2, 2, 6, 6], (0..144).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let once = {
        net.clear_grads();
        let y = net.forward(&x).unwrap();
        net.backward(&softmax_cross_entropy(&y, &[0, 1]).unwrap()).unwrap();
        let mut g = Vec::new();
        net.visit_params(&mut |p| g.extend_from_slice(p.grad.unwrap()));
        g
    };
    for _ in 0..2 {
        let y = net.forward(&x).unwrap();
        net.backward(&softmax_cross_entropy(&y, &[0, 1]).unwrap()).unwrap();
    }
    let mut twice = Vec::new();
    net.visit_params(&mut |p| twice.extend_from_slice(p.grad.unwrap()));
    for (a, b) in once.iter().zip(&twice) {
        assert!((3.0 * a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}
