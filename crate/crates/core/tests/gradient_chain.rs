//! Backward passes against a hand-unrolled chain and against finite
//! differences of a forward pass where the quantizer is replaced by the
//! antiderivative of its rectangular surrogate.

use gxnor::discrete::{surrogate, DiscreteSpace, SurrogateSpec};
use gxnor::net::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2d_backward, maxpool2d_forward,
    quantact_backward, svm_hinge_loss, BatchNorm, ConvGeometry, Layer, LayerSpec, PoolGeometry,
};
use gxnor::{Model, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn set_weights(model: &mut Model, layer: usize, values: &[f64]) {
    let (w, _) = model.layers_mut()[layer].grid_weights_mut().unwrap();
    w.data_mut().copy_from_slice(values);
}

#[test]
fn two_layer_net_matches_hand_unrolled_chain() {
    let space = DiscreteSpace::ternary();
    let spec = SurrogateSpec::rectangular(0.5, 0.5);
    let specs = vec![
        LayerSpec::Dense { inputs: 2, outputs: 2, weights: space },
        LayerSpec::QuantAct { space, surrogate: spec },
        LayerSpec::Dense { inputs: 2, outputs: 2, weights: space },
        LayerSpec::SvmHead { classes: 2 },
    ];
    let mut model = Model::new(specs, &[2]).unwrap();
    let w1 = [1.0, -1.0, 0.0, 1.0];
    let w2 = [1.0, 1.0, -1.0, 1.0];
    set_weights(&mut model, 0, &w1);
    set_weights(&mut model, 2, &w2);
    let input = [[0.3, -0.4], [0.9, 0.2], [-0.2, -0.75]];
    let labels = [0usize, 1, 1];
    let batch = input.len() as f64;

    let x = Tensor::new(vec![3, 2], input.iter().flatten().copied().collect()).unwrap();
    let scores = model.forward_train(&x, &mut Default::default()).unwrap();
    let lg = svm_hinge_loss(&scores, &labels).unwrap();
    model.backward(&lg.dscores).unwrap();
    let g1 = model.layers()[0].weight_grad().unwrap().data().to_vec();
    let g2 = model.layers()[2].weight_grad().unwrap().data().to_vec();

    // dE/dW_ij = Y_j^(l-1) · φ'(x_i) · e_i, with e propagated back through W
    let mut d1 = [0.0; 4];
    let mut d2 = [0.0; 4];
    for (inp, &label) in input.iter().zip(&labels) {
        let pre: Vec<f64> = (0..2).map(|i| w1[2 * i] * inp[0] + w1[2 * i + 1] * inp[1]).collect();
        let y: Vec<f64> = pre.iter().map(|&v| if v > 0.5 { 1.0 } else if v < -0.5 { -1.0 } else { 0.0 }).collect();
        let s: Vec<f64> = (0..2).map(|k| w2[2 * k] * y[0] + w2[2 * k + 1] * y[1]).collect();
        let e_out: Vec<f64> = (0..2)
            .map(|k| {
                let t = if k == label { 1.0 } else { -1.0 };
                -2.0 * t * (1.0 - t * s[k]).max(0.0) / batch
            })
            .collect();
        for k in 0..2 {
            for j in 0..2 {
                d2[2 * k + j] += y[j] * e_out[k];
            }
        }
        for i in 0..2 {
            let back: f64 = (0..2).map(|k| w2[2 * k + i] * e_out[k]).sum();
            let e_hidden = surrogate(pre[i], &spec) * back;
            for j in 0..2 {
                d1[2 * i + j] += inp[j] * e_hidden;
            }
        }
    }
    for (a, b) in g1.iter().zip(&d1).chain(g2.iter().zip(&d2)) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
    assert!(d1.iter().any(|&v| v != 0.0), "chain should carry gradient to the first layer");
}

/// Antiderivative of the rectangular surrogate, and the index of the linear
/// piece `x` falls on.
fn relaxed(x: f64, spec: &SurrogateSpec) -> (f64, u8) {
    let lo = (spec.r - spec.a).max(0.0);
    let hi = spec.r + spec.a;
    let ax = x.abs();
    let piece = if ax < lo { 0 } else if ax <= hi { 1 } else { 2 };
    (x.signum() * (ax.clamp(lo, hi) - lo) / (2.0 * spec.a), piece)
}

fn relaxed_tensor(x: &Tensor, spec: &SurrogateSpec, sig: &mut Vec<u8>) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let (y, p) = relaxed(v, spec);
            sig.push(p);
            y
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data).unwrap()
}

fn hinge_signature(scores: &Tensor, labels: &[usize], sig: &mut Vec<u8>) {
    let c = scores.row_len();
    for (b, &l) in labels.iter().enumerate() {
        for k in 0..c {
            let t = if k == l { 1.0 } else { -1.0 };
            sig.push((1.0 - t * scores.row(b)[k] > 0.0) as u8);
        }
    }
}

fn close(a: f64, fd: f64) -> bool {
    (a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()) + 1e-7
}

/// Central differences of `loss` over every entry of `params`, skipping
/// entries whose perturbation moves any piecewise element onto another piece.
fn check_fd(params: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> (f64, Vec<u8>), what: &str) -> usize {
    let h = 1e-6;
    let mut checked = 0;
    for i in 0..params.len() {
        let mut p = params.to_vec();
        p[i] += h;
        let (lp, sp) = loss(&p);
        p[i] -= 2.0 * h;
        let (lm, sm) = loss(&p);
        if sp != sm {
            continue;
        }
        let fd = (lp - lm) / (2.0 * h);
        assert!(close(analytic[i], fd), "{what}[{i}]: analytic {} vs fd {fd}", analytic[i]);
        checked += 1;
    }
    checked
}

fn random(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn ternary(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1i32..=1) as f64).collect()
}

#[test]
fn dense_chain_matches_relaxed_finite_differences() {
    let spec = SurrogateSpec::rectangular(0.5, 0.5);
    let (b, d_in, d_hid, classes) = (4, 5, 4, 3);
    let mut total = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = random(&mut rng, b * d_in, 1.0);
        let w1 = ternary(&mut rng, d_hid * d_in);
        let w2 = ternary(&mut rng, classes * d_hid);
        let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..classes)).collect();
        let mut bn1 = BatchNorm::new(d_hid, 1e-5, 0.1);
        bn1.gamma = random(&mut rng, d_hid, 1.0).iter().map(|g| 1.0 + 0.5 * g).collect();
        bn1.beta = random(&mut rng, d_hid, 0.3);
        let bn2 = BatchNorm::new(classes, 1e-5, 0.1);

        // forward with caches, then the library's backward passes
        let forward = |x: &[f64], w1: &[f64], gamma: &[f64], keep: bool| {
            let mut sig = Vec::new();
            let xt = Tensor::new(vec![b, d_in], x.to_vec()).unwrap();
            let w1t = Tensor::new(vec![d_hid, d_in], w1.to_vec()).unwrap();
            let w2t = Tensor::new(vec![classes, d_hid], w2.clone()).unwrap();
            let mut bn1 = bn1.clone();
            bn1.gamma = gamma.to_vec();
            let mut bn2 = bn2.clone();
            let z1 = dense_forward(&xt, &w1t).unwrap();
            let (n1, c1) = bn1.forward_train(&z1).unwrap();
            let y1 = relaxed_tensor(&n1, &spec, &mut sig);
            let z2 = dense_forward(&y1, &w2t).unwrap();
            let (s, c2) = bn2.forward_train(&z2).unwrap();
            hinge_signature(&s, &labels, &mut sig);
            let lg = svm_hinge_loss(&s, &labels).unwrap();
            if !keep {
                return (lg.loss, sig, None);
            }
            let (g_z2, _, _) = bn2.backward(&c2, &lg.dscores).unwrap();
            let (g_y1, _) = dense_backward(&y1, &w2t, &g_z2).unwrap();
            let g_n1 = quantact_backward(&g_y1, &n1, &DiscreteSpace::ternary(), &spec).unwrap();
            let (g_z1, g_gamma, _) = bn1.backward(&c1, &g_n1).unwrap();
            let (g_x, g_w1) = dense_backward(&xt, &w1t, &g_z1).unwrap();
            (lg.loss, sig, Some((g_x.into_data(), g_w1.into_data(), g_gamma)))
        };
        let (_, _, grads) = forward(&x0, &w1, &bn1.gamma, true);
        let (gx, gw1, ggamma) = grads.unwrap();
        let gamma = bn1.gamma.clone();
        total += check_fd(&x0, &gx, |p| { let (l, s, _) = forward(p, &w1, &gamma, false); (l, s) }, "input");
        total += check_fd(&w1, &gw1, |p| { let (l, s, _) = forward(&x0, p, &gamma, false); (l, s) }, "w1");
        total += check_fd(&gamma, &ggamma, |p| { let (l, s, _) = forward(&x0, &w1, p, false); (l, s) }, "gamma");
    }
    assert!(total > 300, "only {total} coordinates were checkable");
}

#[test]
fn conv_chain_matches_relaxed_finite_differences() {
    let spec = SurrogateSpec::rectangular(0.5, 0.5);
    let g = ConvGeometry { in_channels: 1, out_channels: 2, kernel: 3, stride: 1, padding: 1 };
    let pool = PoolGeometry { window: 2, stride: 2 };
    let (b, hw, classes) = (3, 4, 3);
    let flat = 2 * 2 * 2;
    let mut total = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x0 = random(&mut rng, b * hw * hw, 1.0);
        let k0 = ternary(&mut rng, 2 * 9);
        let w2 = ternary(&mut rng, classes * flat);
        let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..classes)).collect();
        let bn = BatchNorm::new(2, 1e-5, 0.1);

        let forward = |x: &[f64], k: &[f64], keep: bool| {
            let mut sig = Vec::new();
            let xt = Tensor::new(vec![b, 1, hw, hw], x.to_vec()).unwrap();
            let kt = Tensor::new(vec![2, 1, 3, 3], k.to_vec()).unwrap();
            let w2t = Tensor::new(vec![classes, flat], w2.clone()).unwrap();
            let mut bn = bn.clone();
            let c = conv2d_forward(&xt, &kt, &g).unwrap();
            let (p, arg) = maxpool2d_forward(&c, &pool).unwrap();
            sig.extend(arg.iter().map(|&a| a as u8));
            let (n, cache) = bn.forward_train(&p).unwrap();
            let y = relaxed_tensor(&n, &spec, &mut sig);
            let s = dense_forward(&y, &w2t).unwrap();
            hinge_signature(&s, &labels, &mut sig);
            let lg = svm_hinge_loss(&s, &labels).unwrap();
            if !keep {
                return (lg.loss, sig, None);
            }
            let (g_y, _) = dense_backward(&y, &w2t, &lg.dscores).unwrap();
            let g_n = quantact_backward(&g_y, &n, &DiscreteSpace::ternary(), &spec).unwrap();
            let (g_p, _, _) = bn.backward(&cache, &g_n).unwrap();
            let g_c = maxpool2d_backward(c.shape(), &arg, &g_p).unwrap();
            let (g_x, g_k) = conv2d_backward(&xt, &kt, &g, &g_c).unwrap();
            (lg.loss, sig, Some((g_x.into_data(), g_k.into_data())))
        };
        let (_, _, grads) = forward(&x0, &k0, true);
        let (gx, gk) = grads.unwrap();
        total += check_fd(&x0, &gx, |p| { let (l, s, _) = forward(p, &k0, false); (l, s) }, "input");
        total += check_fd(&k0, &gk, |p| { let (l, s, _) = forward(&x0, p, false); (l, s) }, "kernels");
    }
    assert!(total > 200, "only {total} coordinates were checkable");
}

#[test]
fn model_backward_fills_every_gradient() {
    let mut model = Model::mlp(
        6,
        &[5, 4],
        3,
        DiscreteSpace::ternary(),
        DiscreteSpace::ternary(),
        SurrogateSpec::rectangular(0.5, 0.5),
        (1e-5, 0.1),
    )
    .unwrap();
    model.init_weights(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::new(vec![4, 6], random(&mut rng, 24, 1.0)).unwrap();
    let scores = model.forward_train(&x, &mut Default::default()).unwrap();
    let lg = svm_hinge_loss(&scores, &[0, 1, 2, 0]).unwrap();
    let gin = model.backward(&lg.dscores).unwrap();
    assert_eq!(gin.shape(), x.shape());
    for layer in model.layers() {
        match layer {
            Layer::Dense { weights, grad, .. } => assert_eq!(grad.as_ref().unwrap().shape(), weights.shape()),
            Layer::BatchNorm { grad, .. } => assert!(grad.is_some()),
            _ => {}
        }
    }
}
