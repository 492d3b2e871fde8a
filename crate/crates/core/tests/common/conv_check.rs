use hep2_core::nn::conv_forward;
use rand::Rng;

use super::{naive_conv, random_tensor, random_vec, rng};

pub fn conv_matches_naive_loops_on_random_shapes() {
    let mut pointwise = 0;
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let n = r.random_range(1..=3);
        let c = r.random_range(1..=4);
        let h = r.random_range(1..=9);
        let w = r.random_range(1..=9);
        let kernel = if seed % 4 == 0 { 1 } else { r.random_range(1..=h.min(w).min(5)) };
        let pad = r.random_range(0..=kernel / 2 + 1);
        let stride = r.random_range(1..=2);
        let span = |s: usize| s + 2 * pad - kernel;
        // only strides that tile the padded input exactly are valid
        let stride = if span(h) % stride == 0 && span(w) % stride == 0 { stride } else { 1 };
        let oc = r.random_range(1..=4);
        pointwise += usize::from(kernel == 1);
        let input = random_tensor(&mut r, [n, c, h, w]);
        let weights = random_tensor(&mut r, [oc, c, kernel, kernel]);
        let bias = random_vec(&mut r, oc);
        let fast = conv_forward(&input, &weights, &bias, stride, pad).unwrap();
        let slow = naive_conv(&input, &weights, &bias, stride, pad);
        assert_eq!(fast.dims(), slow.dims(), "seed {seed}");
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((a - b).abs() <= 1e-10, "seed {seed}: {a} vs {b}");
        }
    }
    assert!(pointwise >= 25);
}

pub fn documented_random_case() {
    let mut r = rng(2024);
    let input = random_tensor(&mut r, [2, 3, 8, 8]);
    let weights = random_tensor(&mut r, [4, 3, 3, 3]);
    let bias = random_vec(&mut r, 4);
    let fast = conv_forward(&input, &weights, &bias, 1, 1).unwrap();
    let slow = naive_conv(&input, &weights, &bias, 1, 1);
    assert_eq!(fast.dims(), [2, 4, 8, 8]);
    for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
        assert!((a - b).abs() <= 1e-10);
    }
}
