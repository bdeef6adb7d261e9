use asnn_core::bptt::{
    backward, backward_sample, batch_loss_and_grads, finite_diff_check, finite_diff_param,
    scalar_oracle_backward,
    Gradients,
};
use asnn_core::ndcore::{Matrix, Rng};
use asnn_core::snn::{
    cross_entropy, network_forward, Dropout, ForwardOptions, LifParams, Network, Readout, RecurrenceMode,
    SpikeFn, Topology,
};

fn tiny_net(mode: RecurrenceMode, hidden: &[usize], seed: u64) -> Network {
    let topo = Topology::uniform(3, hidden, 3, mode, LifParams::new(0.6, 1.0));
    let mut rng = Rng::new(seed);
    let mut net = Network::init(&topo, &mut rng).unwrap();
    for layer in &mut net.layers {
        layer.w1.scale(2.5);
        if let Some(k) = layer.kernel.as_mut() {
            k.w.iter_mut().for_each(|w| *w = rng.uniform_range(-0.5, 0.5));
            k.tau = 0.8;
        }
    }
    net.readout_w.scale(3.0);
    net
}

// Moderate weights keep most neurons inside the surrogate's support so
// no gradient entry is small enough to drown in finite-difference noise.
fn smooth_net(mode: RecurrenceMode, seed: u64) -> (Network, Vec<Matrix>, Vec<usize>) {
    let topo = Topology::uniform(3, &[4], 3, mode, LifParams::new(0.5, 1.0));
    let mut rng = Rng::new(seed);
    let mut net = Network::init(&topo, &mut rng).unwrap();
    for layer in &mut net.layers {
        layer.w1.scale(2.0);
        layer.w2.scale(0.5);
        if let Some(k) = layer.kernel.as_mut() {
            k.w.iter_mut().for_each(|w| *w = rng.uniform_range(-0.5, 0.5));
        }
    }
    net.readout_w.scale(3.0);
    let xs = (0..6)
        .map(|_| {
            let data = (0..20 * 3).map(|_| 1.5 * rng.uniform()).collect();
            Matrix::from_vec(20, 3, data).unwrap()
        })
        .collect();
    (net, xs, (0..6).map(|i| i % 3).collect())
}

fn batch(n: usize, steps: usize, seed: u64) -> (Vec<Matrix>, Vec<usize>) {
    let mut rng = Rng::new(seed);
    let xs = (0..n)
        .map(|_| {
            let data = (0..steps * 3).map(|_| rng.uniform()).collect();
            Matrix::from_vec(steps, 3, data).unwrap()
        })
        .collect();
    let ys = (0..n).map(|i| i % 3).collect();
    (xs, ys)
}

fn modes() -> [RecurrenceMode; 3] {
    [
        RecurrenceMode::Vanilla,
        RecurrenceMode::Src { lambda: 3 },
        RecurrenceMode::Asrc { t_lambda: 5 },
    ]
}

#[test]
fn backward_matches_scalar_oracle_on_random_tiny_nets() {
    for trial in 0..20u64 {
        let mode = modes()[trial as usize % 3];
        let hidden: &[usize] = if trial % 2 == 0 { &[4] } else { &[5, 4] };
        let mut net = tiny_net(mode, hidden, 100 + trial);
        if trial % 4 == 3 {
            net.readout = Readout::FinalStep;
        }
        let (xs, ys) = batch(2, 12 + (trial as usize % 9), 200 + trial);
        let refs: Vec<&Matrix> = xs.iter().collect();

        let ours = batch_loss_and_grads(&net, &refs, &ys, ForwardOptions::train(), None).unwrap();
        let (loss, oracle) = scalar_oracle_backward(&net, &refs, &ys, SpikeFn::Heaviside).unwrap();
        assert!((ours.loss - loss).abs() < 1e-12);
        let err = ours.grads.max_rel_diff(&oracle, 1e-12);
        assert!(err < 1e-10, "trial {trial} {mode:?}: rel err {err}");
        assert!(ours.grads.global_norm() > 0.0);
    }
}

#[test]
fn finite_differences_on_smoothed_forward() {
    for mode in modes() {
        let (net, xs, ys) = smooth_net(mode, 1);
        let refs: Vec<&Matrix> = xs.iter().collect();
        let report = finite_diff_check(&net, &refs, &ys, 1e-5, None).unwrap();
        assert!(report.max_rel_error < 1e-6, "{mode:?}: {report:?}");
        if mode.is_adaptive() {
            assert!(report.checked > net.param_count() - 1);
        }
    }
}

#[test]
fn finite_differences_with_final_step_readout() {
    let (mut net, xs, ys) = smooth_net(RecurrenceMode::Asrc { t_lambda: 5 }, 1);
    net.readout = Readout::FinalStep;
    let refs: Vec<&Matrix> = xs.iter().collect();
    let report = finite_diff_check(&net, &refs, &ys, 1e-5, None).unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}

#[test]
fn finite_differences_with_replayed_dropout() {
    let (net, xs, ys) = smooth_net(RecurrenceMode::Src { lambda: 2 }, 1);
    let refs: Vec<&Matrix> = xs.iter().collect();
    let dropout = Dropout::new(0.3, 99).unwrap();
    let report = finite_diff_check(&net, &refs, &ys, 1e-5, Some(&dropout)).unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}

#[test]
fn central_difference_error_is_second_order() {
    let (net, xs, ys) = smooth_net(RecurrenceMode::Asrc { t_lambda: 4 }, 1);
    let refs: Vec<&Matrix> = xs.iter().collect();
    let analytic = batch_loss_and_grads(&net, &refs, &ys, ForwardOptions::smooth(), None)
        .unwrap()
        .grads;
    // Entry with the largest gradient, so truncation dominates rounding.
    let (mut tensor, mut index, mut best) = (0, 0, 0.0);
    for (t, slice) in analytic.slices().iter().enumerate() {
        for (i, g) in slice.iter().enumerate() {
            if g.abs() > best {
                (tensor, index, best) = (t, i, g.abs());
            }
        }
    }
    let exact = analytic.slices()[tensor][index];
    let err = |eps: f64| (finite_diff_param(&net, &refs, &ys, tensor, index, eps).unwrap() - exact).abs();
    let ratio = err(2e-4) / err(1e-4);
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let net = tiny_net(RecurrenceMode::Asrc { t_lambda: 5 }, &[5, 4], 1);
    let (xs, _) = batch(3, 15, 2);
    let refs: Vec<&Matrix> = xs.iter().collect();
    let (_, cache) = network_forward(&net, &refs, ForwardOptions::train(), None).unwrap();
    let zeros = vec![vec![0.0; 3]; 3];
    let grads = backward(&net, &cache.unwrap(), &zeros).unwrap();
    assert_eq!(grads, Gradients::zeros_like(&net));
}

#[test]
fn src_one_and_vanilla_gradients_are_bit_identical() {
    let (xs, ys) = batch(4, 40, 5);
    let refs: Vec<&Matrix> = xs.iter().collect();
    let a = batch_loss_and_grads(&tiny_net(RecurrenceMode::Vanilla, &[6, 5], 9), &refs, &ys, ForwardOptions::train(), None).unwrap();
    let b = batch_loss_and_grads(&tiny_net(RecurrenceMode::Src { lambda: 1 }, &[6, 5], 9), &refs, &ys, ForwardOptions::train(), None).unwrap();
    assert_eq!(a.loss.to_bits(), b.loss.to_bits());
    let bits = |g: &Gradients| g.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.grads), bits(&b.grads));
}

#[test]
fn kernel_gradient_depends_on_spike_history() {
    let net = tiny_net(RecurrenceMode::Asrc { t_lambda: 5 }, &[6], 21);
    let (xs, ys) = batch(2, 16, 22);
    let refs: Vec<&Matrix> = xs.iter().collect();
    let g = batch_loss_and_grads(&net, &refs, &ys, ForwardOptions::train(), None).unwrap();
    let dk = g.grads.layers[0].d_kernel_w.as_ref().unwrap();
    assert!(dk.iter().any(|v| v.abs() > 0.0));

    let silent = vec![Matrix::zeros(16, 3), Matrix::zeros(16, 3)];
    let refs: Vec<&Matrix> = silent.iter().collect();
    let g = batch_loss_and_grads(&net, &refs, &ys, ForwardOptions::train(), None).unwrap();
    let dk = g.grads.layers[0].d_kernel_w.as_ref().unwrap();
    assert!(dk.iter().all(|&v| v == 0.0));
}

#[test]
fn src_recurrent_gradient_only_pairs_lag_lambda() {
    let lambda = 4;
    let net = tiny_net(RecurrenceMode::Src { lambda }, &[6], 31);
    let (xs, ys) = batch(1, 20, 32);
    let (logits, trace) = net.run_sample(&xs[0], ForwardOptions::train(), None, true).unwrap();
    let trace = trace.unwrap();
    let (_, dl) = cross_entropy(&logits, ys[0]);
    let mut grads = Gradients::zeros_like(&net);
    let mut probe = Vec::new();
    backward_sample(&net, &trace, &dl, &mut grads, Some(&mut probe)).unwrap();

    let g_u = &probe[0];
    let s = &trace.layers[0].s;
    let mut expected = Matrix::zeros(6, 6);
    for t in lambda..20 {
        expected.add_outer(g_u.row(t), s.row(t - lambda)).unwrap();
    }
    assert!(grads.layers[0].d_w2.max_abs_diff(&expected) < 1e-14);
}

#[test]
fn oracle_refuses_large_problems() {
    let net = tiny_net(RecurrenceMode::Vanilla, &[40], 1);
    let (xs, ys) = batch(1, 10, 1);
    let refs: Vec<&Matrix> = xs.iter().collect();
    assert!(scalar_oracle_backward(&net, &refs, &ys, SpikeFn::Heaviside).is_err());

    let net = tiny_net(RecurrenceMode::Vanilla, &[4], 1);
    let (xs, ys) = batch(1, 51, 1);
    let refs: Vec<&Matrix> = xs.iter().collect();
    assert!(scalar_oracle_backward(&net, &refs, &ys, SpikeFn::Heaviside).is_err());
}

#[test]
fn cache_mismatch_is_rejected() {
    let net = tiny_net(RecurrenceMode::Vanilla, &[4], 1);
    let other = tiny_net(RecurrenceMode::Vanilla, &[5], 1);
    let (xs, _) = batch(1, 10, 1);
    let (_, cache) = network_forward(&other, &[&xs[0]], ForwardOptions::train(), None).unwrap();
    assert!(backward(&net, &cache.unwrap(), &[vec![0.0; 3]]).is_err());
}
