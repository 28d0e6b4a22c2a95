use proptest::prelude::*;

use super::*;
use crate::rng::stream;

fn single_layer(rate: f64) -> Network {
    let layer = DenseLayer::from_rows(2, 1, Activation::Identity, &[1.0, 1.0], vec![0.0]).unwrap();
    Network::from_layers(
        HeadKind::QValues,
        vec![layer],
        vec![],
        vec![],
        Some(DropoutSpec {
            rate,
            placement: vec![0],
        }),
    )
    .unwrap()
}

fn all_masks(width: usize) -> Vec<Vec<bool>> {
    (0..1u32 << width)
        .map(|bits| (0..width).map(|i| bits >> i & 1 == 1).collect())
        .collect()
}

fn set_param(net: &mut Network, mut idx: usize, value: f64) {
    for s in net.param_slices_mut() {
        if idx < s.len() {
            s[idx] = value;
            return;
        }
        idx -= s.len();
    }
    panic!("index out of range");
}

fn get_param(net: &Network, idx: usize) -> f64 {
    net.param_slices().flatten().nth(idx).copied().unwrap()
}

/// Central differences of `loss` with respect to every parameter.
fn numeric_grad(net: &Network, loss: impl Fn(&Network) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut probe = net.clone();
    (0..net.param_count())
        .map(|i| {
            let p = get_param(net, i);
            set_param(&mut probe, i, p + h);
            let up = loss(&probe);
            set_param(&mut probe, i, p - h);
            let down = loss(&probe);
            set_param(&mut probe, i, p);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (x.abs() + y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[test]
fn zero_rate_dropout_is_identity() {
    let mut rng = stream(1, "t");
    let net = Network::mlp(HeadKind::ActionLogits, 4, &[5, 5], 3, Some(0.0), &mut rng).unwrap();
    let x = [0.3, -1.0, 0.0, 2.0];
    let det = net.forward(&x, DropoutMode::Deterministic).unwrap();
    let sto = net.forward(&x, DropoutMode::Stochastic(&mut rng)).unwrap();
    assert_eq!(det, sto);
}

#[test]
fn deterministic_mode_scales_by_keep_probability() {
    let net = single_layer(0.5);
    assert_eq!(net.forward(&[1.0, 1.0], DropoutMode::Deterministic).unwrap(), vec![1.0]);
}

#[test]
fn enumerated_masks_average_to_deterministic_output() {
    let net = single_layer(0.5);
    let outs: Vec<f64> = all_masks(2)
        .into_iter()
        .map(|m| {
            let masks = DropoutMasks(vec![Some(m)]);
            net.forward(&[1.0, 1.0], DropoutMode::Pinned(&masks)).unwrap()[0]
        })
        .collect();
    let mut sorted = outs.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted, vec![0.0, 1.0, 1.0, 2.0]);
    assert_eq!(outs.iter().sum::<f64>() / 4.0, 1.0);
}

#[test]
fn mask_mean_matches_deterministic_on_hidden_layer() {
    // Identity hidden layer so the output is linear in the mask.
    let l0 = DenseLayer::from_rows(2, 3, Activation::Identity, &[0.5, -1.0, 2.0, 0.25, 1.5, 1.0], vec![0.1, 0.2, -0.3]).unwrap();
    let l1 = DenseLayer::from_rows(3, 2, Activation::Identity, &[1.0, -2.0, 0.5, 0.75, 1.25, -1.0], vec![0.0, 0.5]).unwrap();
    let rate = 0.25;
    let net = Network::from_layers(
        HeadKind::QValues,
        vec![l0, l1],
        vec![],
        vec![],
        Some(DropoutSpec { rate, placement: vec![1] }),
    )
    .unwrap();
    let x = [0.7, -0.4];
    let det = net.forward(&x, DropoutMode::Deterministic).unwrap();
    let mut mean = [0.0; 2];
    for m in all_masks(3) {
        let kept = m.iter().filter(|&&k| k).count() as i32;
        let p = (1.0 - rate).powi(kept) * rate.powi(3 - kept);
        let masks = DropoutMasks(vec![None, Some(m)]);
        let out = net.forward(&x, DropoutMode::Pinned(&masks)).unwrap();
        mean[0] += p * out[0];
        mean[1] += p * out[1];
    }
    assert!((mean[0] - det[0]).abs() < 1e-12);
    assert!((mean[1] - det[1]).abs() < 1e-12);
}

#[test]
fn stochastic_mode_needs_dropout_spec() {
    let mut rng = stream(1, "t");
    let net = Network::mlp(HeadKind::QValues, 2, &[3], 2, None, &mut rng).unwrap();
    assert!(net.forward(&[0.0, 1.0], DropoutMode::Stochastic(&mut rng)).is_err());
    assert!(net.forward(&[0.0, 1.0, 2.0], DropoutMode::Deterministic).is_err());
}

#[test]
fn dueling_head_aggregates_with_mean_advantage() {
    let value = vec![DenseLayer::from_rows(2, 1, Activation::Identity, &[1.0, 0.0], vec![0.5]).unwrap()];
    let adv = vec![DenseLayer::from_rows(2, 3, Activation::Identity, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], vec![0.0; 3]).unwrap()];
    let net = Network::from_layers(HeadKind::DuelingQValues, vec![], value, adv, None).unwrap();
    // V = 2.5, A = [2, 3, 5], mean 10/3
    let q = net.forward(&[2.0, 3.0], DropoutMode::Deterministic).unwrap();
    let expect = [2.5 + 2.0 - 10.0 / 3.0, 2.5 + 3.0 - 10.0 / 3.0, 2.5 + 5.0 - 10.0 / 3.0];
    for (a, b) in q.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn uniform_logits_give_log_of_action_count() {
    let layer = DenseLayer::from_rows(2, 4, Activation::Identity, &[0.0; 8], vec![0.0; 4]).unwrap();
    let net = Network::from_layers(HeadKind::ActionLogits, vec![layer], vec![], vec![], None).unwrap();
    let x = [1.0, 2.0];
    let (loss, _) = net
        .nll_loss_and_grad(&[(&x, 0), (&x, 3)], DropoutMode::Deterministic)
        .unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
}

#[test]
fn confident_correct_logit_drives_loss_to_zero() {
    let mut last = f64::INFINITY;
    for margin in [1.0, 10.0, 100.0] {
        let layer = DenseLayer::from_rows(1, 3, Activation::Identity, &[0.0; 3], vec![margin, 0.0, 0.0]).unwrap();
        let net = Network::from_layers(HeadKind::ActionLogits, vec![layer], vec![], vec![], None).unwrap();
        let (loss, _) = net.nll_loss_and_grad(&[(&[1.0], 0)], DropoutMode::Deterministic).unwrap();
        assert!(loss < last);
        last = loss;
    }
    assert!(last < 1e-40);
}

#[test]
fn nll_rejects_out_of_range_action() {
    let mut rng = stream(1, "t");
    let net = Network::mlp(HeadKind::ActionLogits, 2, &[3], 2, None, &mut rng).unwrap();
    assert!(net.nll_loss_and_grad(&[(&[0.0, 1.0], 2)], DropoutMode::Deterministic).is_err());
    assert!(net.nll_loss_and_grad(&[], DropoutMode::Deterministic).is_err());
}

#[test]
fn nll_gradient_matches_finite_differences_under_pinned_mask() {
    let mut rng = stream(11, "fd");
    let net = Network::mlp(HeadKind::ActionLogits, 4, &[6, 5], 3, Some(0.3), &mut rng).unwrap();
    let masks = net.sample_masks(&mut rng);
    let xs = [[0.5, -1.0, 0.25, 2.0], [1.0, 0.0, 0.0, -0.5], [-0.3, 0.8, 1.2, 0.1]];
    let batch: Vec<(&[f64], usize)> = vec![(&xs[0], 0), (&xs[1], 2), (&xs[2], 1)];
    let (_, grads) = net.nll_loss_and_grad(&batch, DropoutMode::Pinned(&masks)).unwrap();
    let numeric = numeric_grad(&net, |n| {
        n.nll_loss_and_grad(&batch, DropoutMode::Pinned(&masks)).unwrap().0
    });
    assert!(max_rel_err(&grads.flat(), &numeric) < 1e-4);
}

#[test]
fn td_loss_examples() {
    let layer = DenseLayer::from_rows(1, 2, Activation::Identity, &[1.0, 2.0], vec![0.0, 0.0]).unwrap();
    let net = Network::from_layers(HeadKind::QValues, vec![layer], vec![], vec![], None).unwrap();
    let (loss, _) = net.td_loss_and_grad(&[(&[1.0], 0, 3.0)]).unwrap();
    assert_eq!(loss, 4.0);
    let (loss, grads) = net.td_loss_and_grad(&[(&[1.0], 0, 1.0), (&[0.5], 1, 1.0)]).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grads.max_abs(), 0.0);
}

#[test]
fn td_gradient_matches_finite_differences_on_dueling_net() {
    let mut rng = stream(5, "fd");
    let net = Network::dueling(5, &[6], 4, 3, &mut rng).unwrap();
    let xs = [[0.2, -0.7, 1.0, 0.0, 0.3], [1.0, 1.0, -1.0, 0.5, 0.0]];
    let batch: Vec<(&[f64], usize, f64)> = vec![(&xs[0], 2, 0.7), (&xs[1], 0, -0.4)];
    let (_, grads) = net.td_loss_and_grad(&batch).unwrap();
    let numeric = numeric_grad(&net, |n| n.td_loss_and_grad(&batch).unwrap().0);
    assert!(max_rel_err(&grads.flat(), &numeric) < 1e-4);
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let mut rng = stream(2, "opt");
    let mut net = Network::mlp(HeadKind::QValues, 3, &[4], 2, None, &mut rng).unwrap();
    let before = net.clone();
    let mut opt = OptimizerState::new(AdamConfig::with_learning_rate(0.01), &net);
    let zero = GradientSet::zeros_like(&net);
    opt.apply(&mut net, &zero).unwrap();
    assert_eq!(net, before);
    assert_eq!(opt.step(), 1);
}

fn scalar_net(w: f64) -> Network {
    let layer = DenseLayer::from_rows(1, 1, Activation::Identity, &[w], vec![0.0]).unwrap();
    Network::from_layers(HeadKind::QValues, vec![layer], vec![], vec![], None).unwrap()
}

fn quadratic_grad(net: &Network) -> GradientSet {
    // f(w) = (w - 2)², bias held at its optimum by a zero gradient.
    let w = get_param(net, 0);
    let mut g = GradientSet::zeros_like(net);
    g.layers[0].weights[0] = 2.0 * (w - 2.0);
    g
}

#[test]
fn adam_minimizes_a_one_parameter_quadratic() {
    let mut net = scalar_net(0.0);
    let mut opt = OptimizerState::new(AdamConfig::with_learning_rate(0.1), &net);
    for _ in 0..500 {
        let g = quadratic_grad(&net);
        opt.apply(&mut net, &g).unwrap();
    }
    assert!((get_param(&net, 0) - 2.0).abs() < 1e-3);
}

#[test]
fn adam_drives_quadratic_gradient_norm_below_tolerance() {
    let mut net = scalar_net(-3.0);
    let mut opt = OptimizerState::new(AdamConfig::with_learning_rate(0.05), &net);
    let mut norm = f64::INFINITY;
    for _ in 0..20_000 {
        let g = quadratic_grad(&net);
        norm = g.max_abs();
        if norm < 1e-6 {
            break;
        }
        opt.apply(&mut net, &g).unwrap();
    }
    assert!(norm < 1e-6, "final gradient {norm}");
}

#[test]
fn non_finite_gradient_aborts() {
    let mut net = scalar_net(1.0);
    let mut opt = OptimizerState::new(AdamConfig::with_learning_rate(0.1), &net);
    let mut g = GradientSet::zeros_like(&net);
    g.layers[0].bias[0] = f64::NAN;
    assert!(matches!(opt.apply(&mut net, &g), Err(crate::Error::Numerical(_))));
    assert_eq!(opt.step(), 0);
}

#[test]
fn training_is_bit_reproducible() {
    let run = || {
        let mut rng = stream(9, "init");
        let mut net = Network::mlp(HeadKind::ActionLogits, 3, &[8], 2, Some(0.2), &mut rng).unwrap();
        let mut opt = OptimizerState::new(AdamConfig::with_learning_rate(0.01), &net);
        let xs = [[1.0, 0.0, 0.5], [0.0, 1.0, -0.5]];
        for _ in 0..50 {
            let batch: Vec<(&[f64], usize)> = vec![(&xs[0], 0), (&xs[1], 1)];
            let (_, g) = net.nll_loss_and_grad(&batch, DropoutMode::Stochastic(&mut rng)).unwrap();
            opt.apply(&mut net, &g).unwrap();
        }
        network_to_string(&net)
    };
    assert_eq!(run(), run());
}

#[test]
fn forward_many_matches_individual_pinned_passes() {
    let mut rng = stream(4, "many");
    let net = Network::mlp(HeadKind::ActionLogits, 5, &[7, 6], 3, Some(0.4), &mut rng).unwrap();
    let x = [0.1, 0.0, 1.0, -0.2, 0.6];
    let masks: Vec<DropoutMasks> = (0..5).map(|_| net.sample_masks(&mut rng)).collect();
    let many = net.forward_many(&x, &masks).unwrap();
    for (m, out) in masks.iter().zip(&many) {
        assert_eq!(&net.forward(&x, DropoutMode::Pinned(m)).unwrap(), out);
    }
}

#[test]
fn argmax_breaks_ties_low() {
    assert_eq!(argmax(&[1.0, 3.0, 3.0, 0.0]), 1);
    assert_eq!(argmax(&[0.3, 0.3, 0.1]), 0);
}

proptest! {
    #[test]
    fn softmax_is_a_probability_vector(logits in prop::collection::vec(-50.0f64..50.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn forward_is_pure(seed in 0u64..1000, xs in prop::collection::vec(-2.0f64..2.0, 4)) {
        let mut rng = stream(seed, "init");
        let net = Network::dueling(4, &[5], 3, 3, &mut rng).unwrap();
        let a = net.forward(&xs, DropoutMode::Deterministic).unwrap();
        let b = net.forward(&xs, DropoutMode::Deterministic).unwrap();
        prop_assert_eq!(a.len(), 3);
        prop_assert_eq!(a, b);
    }
}
