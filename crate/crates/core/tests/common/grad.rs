//! Central finite-difference checks of every hand-written backward pass. Each
//! check draws one random instance from `seed` and returns the worst relative
//! error over all of its inputs and parameters.

use botnet_ids::gradcheck::{grad_check, grad_check_coords, numeric_partial};
use botnet_ids::model::{build_model, model_backward, model_forward, Dropouts, ModelConfig, ModelParams};
use botnet_ids::recurrent::*;
use botnet_ids::tensor::*;
use botnet_ids::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, w: &Tensor) -> f64 {
    a.data().iter().zip(w.data()).map(|(x, y)| x * y).sum()
}

fn with(t: &Tensor, v: &[f64]) -> Tensor {
    Tensor::new(t.shape().to_vec(), v.to_vec()).unwrap()
}

fn worst(x: &Tensor, analytic: &Tensor, f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(x.shape(), analytic.shape());
    grad_check(f, x.data(), analytic.data(), EPS)
}

fn max(errs: &[f64]) -> f64 {
    errs.iter().cloned().fold(0.0, f64::max)
}

pub type Check = fn(u64) -> f64;

/// Every primitive with its check.
pub const PRIMITIVES: [(&str, Check); 10] = [
    ("conv1d", conv1d),
    ("maxpool", maxpool),
    ("batchnorm (train)", batchnorm),
    ("activations", activations),
    ("dense", dense_layer),
    ("softmax + cross-entropy", softmax_ce),
    ("lstm_cell", lstm_cell_step),
    ("bilstm", bilstm),
    ("attention", attention),
    ("bilstm -> attention", bilstm_attention),
];

pub fn conv1d(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (cin, cout, k) = (r.gen_range(1..4), r.gen_range(1..5), r.gen_range(1..6));
    let len = r.gen_range(k.max(4)..12);
    let stride = r.gen_range(1..3);
    let padding = if r.gen() { Padding::Same } else { Padding::Valid };
    let b = r.gen_range(1..3);
    let x = uniform(&[b, cin, len], &mut r);
    let p = ConvParams::new(uniform(&[cout, cin, k], &mut r), uniform(&[cout], &mut r), stride, padding).unwrap();
    let (y, ctx) = conv1d_forward(&x, &p).unwrap();
    let w = uniform(y.shape(), &mut r);
    let g = conv1d_backward(&ctx, &p, &w).unwrap();
    let loss = |x: &Tensor, p: &ConvParams| dot(&conv1d_forward(x, p).unwrap().0, &w);
    max(&[
        worst(&x, &g.dx, |v| loss(&with(&x, v), &p)),
        worst(&p.kernels, &g.dkernels, |v| {
            loss(&x, &ConvParams::new(with(&p.kernels, v), p.bias.clone(), stride, padding).unwrap())
        }),
        worst(&p.bias, &g.dbias, |v| {
            loss(&x, &ConvParams::new(p.kernels.clone(), with(&p.bias, v), stride, padding).unwrap())
        }),
    ])
}

pub fn maxpool(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (pool, stride) = [(2, 2), (3, 2), (2, 1), (3, 3), (2, 3)][seed as usize % 5];
    let x = uniform(&[r.gen_range(1..3), r.gen_range(1..4), r.gen_range(5..14)], &mut r);
    let (y, ctx) = maxpool1d(&x, pool, stride).unwrap();
    let w = uniform(y.shape(), &mut r);
    let dx = maxpool1d_backward(&ctx, &w).unwrap();
    worst(&x, &dx, |v| dot(&maxpool1d(&with(&x, v), pool, stride).unwrap().0, &w))
}

pub fn batchnorm(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, c, l) = (r.gen_range(1..4), r.gen_range(1..4), r.gen_range(2..7));
    let x = uniform(&[b, c, l], &mut r);
    let mut p = BatchNormParams::new(c);
    p.gamma = uniform(&[c], &mut r);
    p.beta = uniform(&[c], &mut r);
    let (y, ctx) = batchnorm1d(&x, &p, Mode::Train).unwrap();
    let w = uniform(y.shape(), &mut r);
    let g = batchnorm1d_backward(&ctx, &p, &w).unwrap();
    let loss = |x: &Tensor, p: &BatchNormParams| dot(&batchnorm1d(x, p, Mode::Train).unwrap().0, &w);
    max(&[
        worst(&x, &g.dx, |v| loss(&with(&x, v), &p)),
        worst(&p.gamma, &g.dgamma, |v| loss(&x, &BatchNormParams { gamma: with(&p.gamma, v), ..p.clone() })),
        worst(&p.beta, &g.dbeta, |v| loss(&x, &BatchNormParams { beta: with(&p.beta, v), ..p.clone() })),
    ])
}

/// ReLU, tanh and sigmoid on one random tensor.
pub fn activations(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    // keep relu inputs away from the kink
    let x = uniform(&[3, 7], &mut r).map(|v| if v.abs() < 1e-3 { v + 0.1 } else { v });
    let w = uniform(&[3, 7], &mut r);
    let errs: Vec<f64> = [Activation::Relu, Activation::Tanh, Activation::Sigmoid]
        .into_iter()
        .map(|kind| {
            let dx = activation_backward(kind, &x, &w).unwrap();
            worst(&x, &dx, |v| dot(&activation(kind, &with(&x, v)), &w))
        })
        .collect();
    max(&errs)
}

pub fn dense_layer(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, n_in, n_out) = (r.gen_range(1..4), r.gen_range(1..6), r.gen_range(1..6));
    let x = uniform(&[b, n_in], &mut r);
    let p = DenseParams { weight: uniform(&[n_in, n_out], &mut r), bias: uniform(&[n_out], &mut r) };
    let w = uniform(&[b, n_out], &mut r);
    let g = dense_backward(&x, &p, &w).unwrap();
    let loss = |x: &Tensor, p: &DenseParams| dot(&dense(x, p).unwrap(), &w);
    max(&[
        worst(&x, &g.dx, |v| loss(&with(&x, v), &p)),
        worst(&p.weight, &g.dweight, |v| loss(&x, &DenseParams { weight: with(&p.weight, v), ..p.clone() })),
        worst(&p.bias, &g.dbias, |v| loss(&x, &DenseParams { bias: with(&p.bias, v), ..p.clone() })),
    ])
}

pub fn softmax_ce(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, c) = (r.gen_range(1..5), r.gen_range(2..11));
    let logits = uniform(&[b, c], &mut r).map(|v| 3.0 * v);
    let labels: Vec<usize> = (0..b).map(|_| r.gen_range(0..c)).collect();
    let (_, dlogits) = sparse_ce_loss(&logits, &labels).unwrap();
    let w = uniform(&[b, c], &mut r);
    let dx = softmax_backward(&softmax(&logits), &w).unwrap();
    max(&[
        worst(&logits, &dlogits, |v| sparse_ce_loss(&with(&logits, v), &labels).unwrap().0),
        worst(&logits, &dx, |v| dot(&softmax(&with(&logits, v)), &w)),
    ])
}

pub fn random_direction(d: usize, h: usize, r: &mut ChaCha8Rng) -> LstmDirection {
    LstmDirection { w_x: uniform(&[4 * h, d], r), w_h: uniform(&[4 * h, h], r), b: uniform(&[4 * h], r) }
}

pub fn lstm_cell_step(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (d, h) = (r.gen_range(1..5), r.gen_range(1..5));
    let p = random_direction(d, h, &mut r);
    let x = uniform(&[d], &mut r);
    let h0 = uniform(&[h], &mut r);
    let c0 = uniform(&[h], &mut r);
    let (wh, wc) = (uniform(&[h], &mut r), uniform(&[h], &mut r));
    let loss = |x: &Tensor, h0: &Tensor, c0: &Tensor, p: &LstmDirection| {
        let (h1, c1) = lstm_cell(x, h0, c0, p).unwrap();
        dot(&h1, &wh) + dot(&c1, &wc)
    };
    let (_, _, ctx) = lstm_cell_forward(&x, &h0, &c0, &p).unwrap();
    let g = lstm_cell_backward(&ctx, &p, &wh, &wc).unwrap();
    max(&[
        worst(&x, &g.dx, |v| loss(&with(&x, v), &h0, &c0, &p)),
        worst(&h0, &g.dh_prev, |v| loss(&x, &with(&h0, v), &c0, &p)),
        worst(&c0, &g.dc_prev, |v| loss(&x, &h0, &with(&c0, v), &p)),
        worst(&p.w_x, &g.params.w_x, |v| loss(&x, &h0, &c0, &LstmDirection { w_x: with(&p.w_x, v), ..p.clone() })),
        worst(&p.w_h, &g.params.w_h, |v| loss(&x, &h0, &c0, &LstmDirection { w_h: with(&p.w_h, v), ..p.clone() })),
        worst(&p.b, &g.params.b, |v| loss(&x, &h0, &c0, &LstmDirection { b: with(&p.b, v), ..p.clone() })),
    ])
}

type Setter = Box<dyn Fn(&LstmParams, Tensor) -> LstmParams>;

/// Each tensor of a BiLSTM parameter set, its gradient, and a setter.
fn lstm_slots(p: &LstmParams, g: &LstmGrads) -> Vec<(Tensor, Tensor, Setter)> {
    fn set(f: fn(&mut LstmParams) -> &mut Tensor) -> Setter {
        Box::new(move |p: &LstmParams, t| {
            let mut q = p.clone();
            *f(&mut q) = t;
            q
        })
    }
    vec![
        (p.forward.w_x.clone(), g.forward.w_x.clone(), set(|q| &mut q.forward.w_x)),
        (p.forward.w_h.clone(), g.forward.w_h.clone(), set(|q| &mut q.forward.w_h)),
        (p.forward.b.clone(), g.forward.b.clone(), set(|q| &mut q.forward.b)),
        (p.backward.w_x.clone(), g.backward.w_x.clone(), set(|q| &mut q.backward.w_x)),
        (p.backward.w_h.clone(), g.backward.w_h.clone(), set(|q| &mut q.backward.w_h)),
        (p.backward.b.clone(), g.backward.b.clone(), set(|q| &mut q.backward.b)),
    ]
}

pub fn bilstm(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (t, d, h) = (r.gen_range(1..8), r.gen_range(1..5), r.gen_range(1..5));
    let shape: Vec<usize> = if seed.is_multiple_of(2) { vec![t, d] } else { vec![2, t, d] };
    let x = uniform(&shape, &mut r);
    let p = LstmParams { forward: random_direction(d, h, &mut r), backward: random_direction(d, h, &mut r) };
    let out = bilstm_forward(&x, &p).unwrap();
    let w = uniform(out.h_seq.shape(), &mut r);
    let (dx, g) = bilstm_backward(&out.ctx, &p, &w).unwrap();
    let loss = |x: &Tensor, p: &LstmParams| dot(&bilstm_forward(x, p).unwrap().h_seq, &w);
    let mut errs = vec![worst(&x, &dx, |v| loss(&with(&x, v), &p))];
    for (value, grad, set) in lstm_slots(&p, &g) {
        errs.push(worst(&value, &grad, |v| loss(&x, &set(&p, with(&value, v)))));
    }
    max(&errs)
}

pub fn attention(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (t, dv, dk) = (r.gen_range(1..7), r.gen_range(1..7), r.gen_range(1..9));
    let shape: Vec<usize> = if seed.is_multiple_of(2) { vec![t, dv] } else { vec![3, t, dv] };
    let v = uniform(&shape, &mut r);
    let p = AttentionParams { w_a: uniform(&[dv, dk], &mut r), q: uniform(&[dk], &mut r) };
    let out = attention_forward(&v, &p).unwrap();
    let w = uniform(out.context.shape(), &mut r);
    let g = attention_backward(&out.ctx, &p, &w).unwrap();
    let loss = |v: &Tensor, p: &AttentionParams| dot(&attention_forward(v, p).unwrap().context, &w);
    max(&[
        worst(&v, &g.dv, |x| loss(&with(&v, x), &p)),
        worst(&p.w_a, &g.dw_a, |x| loss(&v, &AttentionParams { w_a: with(&p.w_a, x), ..p.clone() })),
        worst(&p.q, &g.dq, |x| loss(&v, &AttentionParams { q: with(&p.q, x), ..p.clone() })),
    ])
}

/// BiLSTM feeding attention feeding a fixed linear head.
pub fn bilstm_attention(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (t, d, h) = (r.gen_range(1..9), r.gen_range(1..4), r.gen_range(1..5));
    let x = uniform(&[t, d], &mut r);
    let lp = LstmParams { forward: random_direction(d, h, &mut r), backward: random_direction(d, h, &mut r) };
    let ap = AttentionParams { w_a: uniform(&[2 * h, 2 * h], &mut r), q: uniform(&[2 * h], &mut r) };
    let head = uniform(&[2 * h], &mut r);
    let loss = |x: &Tensor, lp: &LstmParams, ap: &AttentionParams| {
        let hs = bilstm_forward(x, lp).unwrap().h_seq;
        dot(&attention_forward(&hs, ap).unwrap().context, &head)
    };
    let lo = bilstm_forward(&x, &lp).unwrap();
    let ao = attention_forward(&lo.h_seq, &ap).unwrap();
    let ag = attention_backward(&ao.ctx, &ap, &head).unwrap();
    let (dx, lg) = bilstm_backward(&lo.ctx, &lp, &ag.dv).unwrap();
    let mut errs = vec![
        worst(&x, &dx, |v| loss(&with(&x, v), &lp, &ap)),
        worst(&ap.w_a, &ag.dw_a, |v| loss(&x, &lp, &AttentionParams { w_a: with(&ap.w_a, v), ..ap.clone() })),
    ];
    for (value, grad, set) in lstm_slots(&lp, &lg) {
        errs.push(worst(&value, &grad, |v| loss(&x, &set(&lp, with(&value, v)), &ap)));
    }
    max(&errs)
}

pub struct WholeModel {
    pub parameters: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinates whose gradient is identically zero, checked in absolute
    /// terms instead.
    pub structural_zeros: usize,
}

/// Whole network on a B = 2 batch over `n_coords` random trainable
/// coordinates. Dropout masks are replayed by rebuilding the streams from the
/// same seed for every evaluation.
pub fn whole_model(cfg: &ModelConfig, n_coords: usize, seed: u64) -> WholeModel {
    let params = build_model(cfg, seed).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::new(
        vec![2, 1, cfg.input_len],
        (0..2 * cfg.input_len).map(|_| r.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let labels = vec![r.gen_range(0..cfg.n_classes), r.gen_range(0..cfg.n_classes)];
    let loss_of = |p: &ModelParams| {
        let mut drops = Dropouts::new(cfg, seed).unwrap();
        let cache = model_forward(p, &x, Mode::Train, Some(&mut drops)).unwrap();
        model_backward(p, &cache, &labels).unwrap()
    };
    let (_, grads) = loss_of(&params);

    // flat view over all trainable scalars
    let names: Vec<String> = params.named().into_iter().filter(|n| n.trainable).map(|n| n.name).collect();
    let sizes: Vec<usize> = names.iter().map(|n| params.get(n).unwrap().len()).collect();
    let flat: Vec<f64> = names.iter().flat_map(|n| params.get(n).unwrap().data().to_vec()).collect();
    let analytic: Vec<f64> = names.iter().flat_map(|n| grads.get(n).unwrap().data().to_vec()).collect();
    let total: usize = sizes.iter().sum();
    let coords: Vec<usize> = (0..n_coords).map(|_| r.gen_range(0..total)).collect();

    // a conv bias feeding batch norm directly has an identically zero gradient
    let mut zero = vec![false; total];
    if cfg.bn_before_activation {
        let mut off = 0;
        for (name, &n) in names.iter().zip(&sizes) {
            if name.starts_with("conv") && name.ends_with(".bias") {
                zero[off..off + n].iter_mut().for_each(|z| *z = true);
            }
            off += n;
        }
    }
    let (zero_coords, coords): (Vec<usize>, Vec<usize>) = coords.into_iter().partition(|&i| zero[i]);

    let mut f = |v: &[f64]| {
        let mut p = params.clone();
        let mut off = 0;
        for slot in p.named_mut().into_iter().filter(|s| s.trainable) {
            let n = slot.tensor.len();
            slot.tensor.data_mut().copy_from_slice(&v[off..off + n]);
            off += n;
        }
        loss_of(&p).0
    };
    let mut max_rel_error = grad_check_coords(&mut f, &flat, &analytic, &coords, EPS);
    for &i in &zero_coords {
        let numeric = numeric_partial(&mut f, &flat, i, EPS);
        if analytic[i].abs() >= 1e-12 || numeric.abs() >= 1e-9 {
            max_rel_error = f64::INFINITY;
        }
    }
    WholeModel { parameters: total, checked: coords.len(), max_rel_error, structural_zeros: zero_coords.len() }
}
