//! Analytic backward passes against central finite differences in f64.

use hep2_core::nn::*;
use hep2_core::Tensor4;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{central_diff, dot, random_tensor, random_vec, rel_err, rng};

const EPS: f64 = 1e-4;
const LAYER_TOL: f64 = 1e-4;
const CASES: u64 = 100;
/// A first-layer weight feeds thousands of ReLU and max-pool decisions; a
/// smaller step keeps the perturbation from crossing any of their kinks.
const NET_EPS: f64 = 1e-6;

fn check(what: &str, analytic: f64, numeric: f64, tol: f64) {
    let e = rel_err(analytic, numeric);
    assert!(e <= tol, "{what}: analytic {analytic:e}, numeric {numeric:e}, rel err {e:e}");
}

pub fn conv_backward_matches_finite_differences() {
    for seed in 0..CASES {
        let mut r = rng(seed);
        let (n, c, oc) = (r.random_range(1..=2), r.random_range(1..=3), r.random_range(1..=3));
        let (h, w) = (r.random_range(3..=6), r.random_range(3..=6));
        let k = r.random_range(1..=3);
        let pad = r.random_range(0..=1);
        let stride = if (h + 2 * pad - k) % 2 == 0 && (w + 2 * pad - k) % 2 == 0 { r.random_range(1..=2) } else { 1 };
        let x = random_tensor(&mut r, [n, c, h, w]);
        let wt = random_tensor(&mut r, [oc, c, k, k]);
        let b = random_vec(&mut r, oc);
        let out = conv_forward(&x, &wt, &b, stride, pad).unwrap();
        let up = random_tensor(&mut r, out.dims());
        let g = conv_backward(&x, &wt, &up, stride, pad).unwrap();

        let loss = |x: &Tensor4<f64>, wt: &Tensor4<f64>, b: &[f64]| {
            dot(conv_forward(x, wt, b, stride, pad).unwrap().as_slice(), up.as_slice())
        };
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let num = central_diff(&mut xs, i, EPS, |v| loss(&Tensor4::from_vec(x.dims(), v.to_vec()).unwrap(), &wt, &b));
            check("conv input", g.input.as_slice()[i], num, LAYER_TOL);
        }
        let mut ws = wt.as_slice().to_vec();
        for i in 0..ws.len() {
            let num = central_diff(&mut ws, i, EPS, |v| loss(&x, &Tensor4::from_vec(wt.dims(), v.to_vec()).unwrap(), &b));
            check("conv weight", g.weights.as_slice()[i], num, LAYER_TOL);
        }
        let mut bs = b.clone();
        for i in 0..bs.len() {
            let num = central_diff(&mut bs, i, EPS, |v| loss(&x, &wt, v));
            check("conv bias", g.bias[i], num, LAYER_TOL);
        }
    }
}

pub fn documented_conv_case() {
    let mut r = rng(77);
    let x = random_tensor(&mut r, [2, 2, 5, 5]);
    let wt = random_tensor(&mut r, [3, 2, 3, 3]);
    let b = random_vec(&mut r, 3);
    let up = random_tensor(&mut r, [2, 3, 3, 3]);
    let g = conv_backward(&x, &wt, &up, 1, 0).unwrap();
    let mut ws = wt.as_slice().to_vec();
    for i in 0..ws.len() {
        let num = central_diff(&mut ws, i, EPS, |v| {
            let wt = Tensor4::from_vec(wt.dims(), v.to_vec()).unwrap();
            dot(conv_forward(&x, &wt, &b, 1, 0).unwrap().as_slice(), up.as_slice())
        });
        check("conv weight", g.weights.as_slice()[i], num, LAYER_TOL);
    }
}

pub fn relu_backward_matches_finite_differences_away_from_zero() {
    for seed in 0..CASES {
        let mut r = rng(1000 + seed);
        let dims = [r.random_range(1..=2), r.random_range(1..=3), r.random_range(1..=5), r.random_range(1..=5)];
        let x = Tensor4::from_fn(dims, |_| {
            let v: f64 = r.random_range(0.01..1.0);
            if r.random_bool(0.5) { v } else { -v }
        });
        let up = random_tensor(&mut r, dims);
        let g = relu_backward(&x, &up);
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let num = central_diff(&mut xs, i, EPS, |v| {
                dot(relu_forward(&Tensor4::from_vec(dims, v.to_vec()).unwrap()).as_slice(), up.as_slice())
            });
            check("relu", g.as_slice()[i], num, LAYER_TOL);
        }
    }
}

/// Distinct values spaced well beyond `EPS` so no perturbation changes an argmax.
fn tie_free(r: &mut impl Rng, dims: [usize; 4]) -> Tensor4<f64> {
    let len: usize = dims.iter().product();
    let mut ranks: Vec<usize> = (0..len).collect();
    ranks.shuffle(r);
    Tensor4::from_vec(dims, ranks.into_iter().map(|k| k as f64 * 0.01 - 1.0).collect()).unwrap()
}

pub fn maxpool_backward_matches_finite_differences() {
    for seed in 0..CASES {
        let mut r = rng(2000 + seed);
        let window = r.random_range(1..=3);
        let stride = r.random_range(1..=window);
        let outs = (r.random_range(1..=3), r.random_range(1..=3));
        let dims = [r.random_range(1..=2), r.random_range(1..=2), (outs.0 - 1) * stride + window, (outs.1 - 1) * stride + window];
        let x = tie_free(&mut r, dims);
        let (y, idx) = maxpool_forward(&x, window, stride).unwrap();
        let up = random_tensor(&mut r, y.dims());
        let g = maxpool_backward(&idx, &up);
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let num = central_diff(&mut xs, i, EPS, |v| {
                let t = Tensor4::from_vec(dims, v.to_vec()).unwrap();
                dot(maxpool_forward(&t, window, stride).unwrap().0.as_slice(), up.as_slice())
            });
            check("maxpool", g.as_slice()[i], num, LAYER_TOL);
        }
    }
}

pub fn avgpool_backward_matches_finite_differences() {
    for seed in 0..CASES {
        let mut r = rng(3000 + seed);
        let window = r.random_range(1..=3);
        let stride = r.random_range(1..=window);
        let outs = (r.random_range(1..=3), r.random_range(1..=3));
        let dims = [r.random_range(1..=2), r.random_range(1..=2), (outs.0 - 1) * stride + window, (outs.1 - 1) * stride + window];
        let x = random_tensor(&mut r, dims);
        let y = avgpool_forward(&x, window, stride).unwrap();
        let up = random_tensor(&mut r, y.dims());
        let g = avgpool_backward(dims, &up, window, stride);
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let num = central_diff(&mut xs, i, EPS, |v| {
                let t = Tensor4::from_vec(dims, v.to_vec()).unwrap();
                dot(avgpool_forward(&t, window, stride).unwrap().as_slice(), up.as_slice())
            });
            check("avgpool", g.as_slice()[i], num, LAYER_TOL);
        }
    }
}

pub fn dense_backward_matches_finite_differences() {
    for seed in 0..CASES {
        let mut r = rng(4000 + seed);
        let n = r.random_range(1..=3);
        let dims = [n, r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3)];
        let fan_in = dims[1] * dims[2] * dims[3];
        let out = r.random_range(1..=4);
        let x = random_tensor(&mut r, dims);
        let wt = random_tensor(&mut r, [out, fan_in, 1, 1]);
        let b = random_vec(&mut r, out);
        let up = random_tensor(&mut r, [n, out, 1, 1]);
        let g = dense_backward(&x, &wt, &up).unwrap();
        let loss = |x: &Tensor4<f64>, wt: &Tensor4<f64>, b: &[f64]| dot(dense_forward(x, wt, b).unwrap().as_slice(), up.as_slice());
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let num = central_diff(&mut xs, i, EPS, |v| loss(&Tensor4::from_vec(dims, v.to_vec()).unwrap(), &wt, &b));
            check("dense input", g.input.as_slice()[i], num, LAYER_TOL);
        }
        let mut ws = wt.as_slice().to_vec();
        for i in 0..ws.len() {
            let num = central_diff(&mut ws, i, EPS, |v| loss(&x, &Tensor4::from_vec(wt.dims(), v.to_vec()).unwrap(), &b));
            check("dense weight", g.weights.as_slice()[i], num, LAYER_TOL);
        }
        let mut bs = b.clone();
        for i in 0..bs.len() {
            let num = central_diff(&mut bs, i, EPS, |v| loss(&x, &wt, v));
            check("dense bias", g.bias[i], num, LAYER_TOL);
        }
    }
}

pub fn softmax_xent_backward_matches_finite_differences() {
    for seed in 0..CASES {
        let mut r = rng(5000 + seed);
        let (n, k) = if seed == 0 { (4, 6) } else { (r.random_range(1..=5), r.random_range(2..=7)) };
        let logits = Tensor4::from_fn([n, k, 1, 1], |_| r.random_range(-3.0..3.0));
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let (_, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        let g = softmax_xent_backward(&probs, &labels).unwrap();
        let mut ls = logits.as_slice().to_vec();
        for i in 0..ls.len() {
            let num = central_diff(&mut ls, i, EPS, |v| {
                softmax_xent_forward(&Tensor4::from_vec([n, k, 1, 1], v.to_vec()).unwrap(), &labels).unwrap().0
            });
            check("softmax xent", g.as_slice()[i], num, 1e-5);
        }
    }
}

pub fn whole_default_network_matches_finite_differences() {
    let cfg = NetworkConfig::hep2_default();
    assert_eq!(cfg.depth(), 10);
    // Weights of roughly unit-variance-preserving scale keep every gradient
    // well above the finite-difference noise floor.
    let mut params: Parameters<f64> = init_params_with_std(&cfg, 5, 0.1).unwrap();
    for layer in params.layers.iter_mut().flatten() {
        let mut r = rng(layer.bias.len() as u64);
        for b in &mut layer.bias {
            *b = r.random_range(-0.1..0.1);
        }
    }
    let mut r = rng(6);
    let batch = Tensor4::from_fn([2, 1, 60, 60], |_| r.random_range(0.0..1.0));
    let labels = [1, 4];
    let (_, cache) = network_forward(&cfg, &params, &batch).unwrap();
    let (_, grads) = network_backward(&cfg, &params, &cache, &labels).unwrap();

    let loss = |p: &Parameters<f64>| {
        let (_, cache) = network_forward(&cfg, p, &batch).unwrap();
        network_backward(&cfg, p, &cache, &labels).unwrap().0
    };
    // Sample 50 (slice, index) pairs spread across every parameter tensor.
    let sizes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    let mut picks = Vec::new();
    for s in 0..sizes.len() {
        picks.push((s, r.random_range(0..sizes[s])));
    }
    while picks.len() < 50 {
        let s = r.random_range(0..sizes.len());
        picks.push((s, r.random_range(0..sizes[s])));
    }
    for &(s, i) in &picks {
        let analytic = grads.slices()[s][i];
        let saved = params.slices()[s][i];
        params.slices_mut()[s][i] = saved + NET_EPS;
        let plus = loss(&params);
        params.slices_mut()[s][i] = saved - NET_EPS;
        let minus = loss(&params);
        params.slices_mut()[s][i] = saved;
        check(&format!("network slice {s} index {i}"), analytic, (plus - minus) / (2.0 * NET_EPS), 1e-3);
    }
}
