use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub fn relu_forward<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes the gradient where the input is strictly positive; the derivative at 0 is 0.
pub fn relu_backward<T: Scalar>(input: &Tensor4<T>, grad_out: &Tensor4<T>) -> Tensor4<T> {
    debug_assert_eq!(input.dims(), grad_out.dims());
    let data = input
        .as_slice()
        .iter()
        .zip(grad_out.as_slice())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor4::from_vec(input.dims(), data).expect("same dims")
}
