//! Reference implementations and numeric helpers shared by the integration tests.
#![allow(dead_code)]

pub mod conv_check;
pub mod gradcheck;

use hep2_core::Tensor4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor4<f64> {
    Tensor4::from_fn(dims, |_| rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Direct cross-correlation with zero padding, one output element at a time.
pub fn naive_conv(input: &Tensor4<f64>, weights: &Tensor4<f64>, bias: &[f64], stride: usize, pad: usize) -> Tensor4<f64> {
    let [n, c, h, w] = input.dims();
    let [oc, _, kh, kw] = weights.dims();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = Tensor4::zeros([n, oc, oh, ow]);
    for b in 0..n {
        for o in 0..oc {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias[o];
                    for ci in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let r = (y * stride + i) as isize - pad as isize;
                                let s = (x * stride + j) as isize - pad as isize;
                                if r >= 0 && s >= 0 && (r as usize) < h && (s as usize) < w {
                                    acc += weights[[o, ci, i, j]] * input[[b, ci, r as usize, s as usize]];
                                }
                            }
                        }
                    }
                    out[[b, o, y, x]] = acc;
                }
            }
        }
    }
    out
}

pub fn naive_maxpool(input: &Tensor4<f64>, window: usize, stride: usize) -> Tensor4<f64> {
    let [n, c, h, w] = input.dims();
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    Tensor4::from_fn([n, c, oh, ow], |[b, ch, y, x]| {
        let mut m = f64::NEG_INFINITY;
        for i in 0..window {
            for j in 0..window {
                m = m.max(input[[b, ch, y * stride + i, x * stride + j]]);
            }
        }
        m
    })
}

/// Relative error with a small floor so that two near-zero values compare equal.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `f` with respect to `x[i]`.
pub fn central_diff(x: &mut [f64], i: usize, eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let saved = x[i];
    x[i] = saved + eps;
    let plus = f(x);
    x[i] = saved - eps;
    let minus = f(x);
    x[i] = saved;
    (plus - minus) / (2.0 * eps)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
