//! Direct loop implementations of the forward equations. Each check builds one
//! random instance from `seed` and returns the largest deviation of the
//! optimized forward from the loop version, relative to `max(|want|, 1)`.

use botnet_ids::recurrent::*;
use botnet_ids::tensor::*;
use botnet_ids::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grad::{random_direction, uniform};

pub const TOL: f64 = 1e-12;

pub type Check = fn(u64) -> f64;

pub const FORWARDS: [(&str, Check); 6] = [
    ("conv1d", conv1d),
    ("maxpool", maxpool),
    ("lstm_cell", lstm_cell_step),
    ("bilstm", bilstm),
    ("attention", attention),
    ("dense", dense_layer),
];

fn deviation(got: &[f64], want: &[f64]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter().zip(want).map(|(g, w)| (g - w).abs() / w.abs().max(1.0)).fold(0.0, f64::max)
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn conv1d(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, cin, cout, k) = (r.gen_range(1..4), r.gen_range(1..4), r.gen_range(1..6), r.gen_range(1..7));
    let len = r.gen_range(k..20);
    let stride = r.gen_range(1..4);
    let padding = if seed.is_multiple_of(2) { Padding::Same } else { Padding::Valid };
    let x = uniform(&[b, cin, len], &mut r);
    let p = ConvParams::new(uniform(&[cout, cin, k], &mut r), uniform(&[cout], &mut r), stride, padding).unwrap();
    let (y, _) = conv1d_forward(&x, &p).unwrap();

    let (out_len, pad) = match padding {
        Padding::Valid => ((len - k) / stride + 1, 0),
        Padding::Same => {
            let out = len.div_ceil(stride);
            (out, ((out - 1) * stride + k).saturating_sub(len) / 2)
        }
    };
    if y.shape() != [b, cout, out_len] {
        return f64::INFINITY;
    }
    let mut want = Vec::new();
    for n in 0..b {
        for o in 0..cout {
            for t in 0..out_len {
                let mut acc = p.bias.get(&[o]);
                for c in 0..cin {
                    for j in 0..k {
                        let pos = (t * stride + j) as isize - pad as isize;
                        if pos >= 0 && (pos as usize) < len {
                            acc += x.get(&[n, c, pos as usize]) * p.kernels.get(&[o, c, j]);
                        }
                    }
                }
                want.push(acc);
            }
        }
    }
    deviation(y.data(), &want)
}

pub fn maxpool(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (pool, stride) = (r.gen_range(1..5), r.gen_range(1..4));
    let (b, c, len) = (r.gen_range(1..3), r.gen_range(1..4), r.gen_range(pool..25));
    let x = uniform(&[b, c, len], &mut r);
    let (y, _) = maxpool1d(&x, pool, stride).unwrap();
    let mut want = Vec::new();
    for n in 0..b {
        for ch in 0..c {
            let mut start = 0;
            loop {
                let window = (start..(start + pool).min(len)).map(|i| x.get(&[n, ch, i]));
                want.push(window.fold(f64::NEG_INFINITY, f64::max));
                let covered_end = start + pool >= len;
                start += stride;
                if covered_end || start >= len {
                    break;
                }
            }
        }
    }
    deviation(y.data(), &want)
}

/// One LSTM direction over `xs` from zero state, gate blocks i, f, g, o.
fn naive_direction(xs: &[Vec<f64>], p: &LstmDirection) -> Vec<Vec<f64>> {
    let h_dim = p.w_h.shape()[1];
    let d = p.w_x.shape()[1];
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut out = Vec::new();
    for x in xs {
        let pre = |gate: usize, j: usize| {
            let row = gate * h_dim + j;
            let mut s = p.b.get(&[row]);
            for k in 0..d {
                s += p.w_x.get(&[row, k]) * x[k];
            }
            for k in 0..h_dim {
                s += p.w_h.get(&[row, k]) * h[k];
            }
            s
        };
        let mut h_next = vec![0.0; h_dim];
        for j in 0..h_dim {
            let i = sigmoid(pre(0, j));
            let f = sigmoid(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sigmoid(pre(3, j));
            c[j] = f * c[j] + i * g;
            h_next[j] = o * c[j].tanh();
        }
        h = h_next;
        out.push(h.clone());
    }
    out
}

fn naive_bilstm(x: &[Vec<f64>], p: &LstmParams) -> Vec<f64> {
    let fwd = naive_direction(x, &p.forward);
    let rev: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
    let mut bwd = naive_direction(&rev, &p.backward);
    bwd.reverse();
    fwd.iter().zip(&bwd).flat_map(|(a, b)| a.iter().chain(b).copied().collect::<Vec<_>>()).collect()
}

pub fn lstm_cell_step(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (d, h) = (r.gen_range(1..6), r.gen_range(1..6));
    let p = random_direction(d, h, &mut r);
    let x = uniform(&[d], &mut r);
    let (h1, _) = lstm_cell(&x, &Tensor::zeros(&[h]), &Tensor::zeros(&[h]), &p).unwrap();
    deviation(h1.data(), &naive_direction(&[x.data().to_vec()], &p)[0])
}

/// Batched `[B, T, D]` input, plus the unbatched `[T, D]` form of its first
/// sequence.
pub fn bilstm(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, t, d, h) = (r.gen_range(1..4), r.gen_range(1..12), r.gen_range(1..6), r.gen_range(1..6));
    let p = LstmParams { forward: random_direction(d, h, &mut r), backward: random_direction(d, h, &mut r) };
    let x = uniform(&[b, t, d], &mut r);
    let out = bilstm_forward(&x, &p).unwrap();
    if out.h_seq.shape() != [b, t, 2 * h] {
        return f64::INFINITY;
    }
    let mut want = Vec::new();
    for n in 0..b {
        let seq: Vec<Vec<f64>> = (0..t).map(|s| (0..d).map(|k| x.get(&[n, s, k])).collect()).collect();
        want.extend(naive_bilstm(&seq, &p));
    }
    let single = Tensor::new(vec![t, d], x.data()[..t * d].to_vec()).unwrap();
    let unbatched = bilstm_forward(&single, &p).unwrap();
    deviation(out.h_seq.data(), &want).max(deviation(unbatched.h_seq.data(), &want[..t * 2 * h]))
}

pub fn attention(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, t, dv, dk) = (r.gen_range(1..4), r.gen_range(1..12), r.gen_range(1..9), r.gen_range(1..9));
    let v = uniform(&[b, t, dv], &mut r);
    let p = AttentionParams { w_a: uniform(&[dv, dk], &mut r), q: uniform(&[dk], &mut r) };
    let out = attention_forward(&v, &p).unwrap();
    let mut want_ctx = Vec::new();
    let mut want_w = Vec::new();
    for n in 0..b {
        let scores: Vec<f64> = (0..t)
            .map(|s| {
                (0..dk)
                    .map(|j| {
                        let key = (0..dv).map(|k| v.get(&[n, s, k]) * p.w_a.get(&[k, j])).sum::<f64>().tanh();
                        key * p.q.get(&[j])
                    })
                    .sum()
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
        let w: Vec<f64> = scores.iter().map(|s| (s - m).exp() / z).collect();
        for k in 0..dv {
            want_ctx.push((0..t).map(|s| w[s] * v.get(&[n, s, k])).sum());
        }
        want_w.extend(w);
    }
    deviation(out.context.data(), &want_ctx).max(deviation(out.weights.data(), &want_w))
}

/// Dense layer, plus the row sums of its softmax.
pub fn dense_layer(seed: u64) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (b, n_in, n_out) = (r.gen_range(1..5), r.gen_range(1..9), r.gen_range(1..9));
    let x = uniform(&[b, n_in], &mut r);
    let p = DenseParams { weight: uniform(&[n_in, n_out], &mut r), bias: uniform(&[n_out], &mut r) };
    let y = dense(&x, &p).unwrap();
    let mut want = Vec::new();
    for i in 0..b {
        for j in 0..n_out {
            want.push(p.bias.get(&[j]) + (0..n_in).map(|k| x.get(&[i, k]) * p.weight.get(&[k, j])).sum::<f64>());
        }
    }
    let sums: Vec<f64> = softmax(&y).data().chunks_exact(n_out).map(|row| row.iter().sum()).collect();
    deviation(y.data(), &want).max(deviation(&sums, &vec![1.0; b]))
}
