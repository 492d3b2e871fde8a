//! Fully connected layer over flattened batch items.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub struct DenseGrads<T> {
    pub input: Tensor4<T>,
    pub weights: Tensor4<T>,
    pub bias: Vec<T>,
}

/// `y = x W^T + b` where `weights` has dims `(out, in, 1, 1)`; output dims `(n, out, 1, 1)`.
pub fn dense_forward<T: Scalar>(input: &Tensor4<T>, weights: &Tensor4<T>, bias: &[T]) -> Result<Tensor4<T>> {
    let (n, fan_in) = (input.batch(), input.item_len());
    let out = weights.batch();
    if weights.item_len() != fan_in || bias.len() != out {
        return Err(Error::config(format!(
            "dense layer expects {} inputs / {out} biases, got {fan_in} / {}",
            weights.item_len(),
            bias.len()
        )));
    }
    let mut y = Tensor4::zeros([n, out, 1, 1]);
    for row in y.as_mut_slice().chunks_exact_mut(out) {
        row.copy_from_slice(bias);
    }
    T::gemm(
        n,
        fan_in,
        out,
        T::one(),
        input.as_slice(),
        fan_in,
        1,
        weights.as_slice(),
        1,
        fan_in,
        T::one(),
        y.as_mut_slice(),
        out,
        1,
    );
    Ok(y)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &Tensor4<T>,
    grad_out: &Tensor4<T>,
) -> Result<DenseGrads<T>> {
    let (n, fan_in) = (input.batch(), input.item_len());
    let out = weights.batch();
    if grad_out.dims() != [n, out, 1, 1] {
        return Err(Error::config(format!(
            "dense upstream gradient has dims {:?}, expected {:?}",
            grad_out.dims(),
            [n, out, 1, 1]
        )));
    }
    let mut grad_input = Tensor4::zeros(input.dims());
    let mut grad_weights = Tensor4::zeros(weights.dims());
    // dX = dY W
    T::gemm(
        n,
        out,
        fan_in,
        T::one(),
        grad_out.as_slice(),
        out,
        1,
        weights.as_slice(),
        fan_in,
        1,
        T::zero(),
        grad_input.as_mut_slice(),
        fan_in,
        1,
    );
    // dW = dY^T X
    T::gemm(
        out,
        n,
        fan_in,
        T::one(),
        grad_out.as_slice(),
        1,
        out,
        input.as_slice(),
        fan_in,
        1,
        T::zero(),
        grad_weights.as_mut_slice(),
        fan_in,
        1,
    );
    let mut grad_bias = vec![T::zero(); out];
    for row in grad_out.as_slice().chunks_exact(out) {
        for (b, &g) in grad_bias.iter_mut().zip(row) {
            *b = *b + g;
        }
    }
    Ok(DenseGrads {
        input: grad_input,
        weights: grad_weights,
        bias: grad_bias,
    })
}
