//! Max and average pooling over square windows.

use crate::error::Result;
use crate::nn::conv::output_extent;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Argmax bookkeeping from [`maxpool_forward`]: one flat input offset per output value.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolIndices {
    pub input_dims: [usize; 4],
    pub argmax: Vec<usize>,
}

fn pooled_dims(dims: [usize; 4], window: usize, stride: usize) -> Result<[usize; 4]> {
    let [n, c, h, w] = dims;
    Ok([
        n,
        c,
        output_extent(h, window, stride, 0)?,
        output_extent(w, window, stride, 0)?,
    ])
}

/// Per-window maximum. Ties go to the first position in row-major order.
pub fn maxpool_forward<T: Scalar>(
    input: &Tensor4<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor4<T>, PoolIndices)> {
    let dims = pooled_dims(input.dims(), window, stride)?;
    let [n, c, oh, ow] = dims;
    let mut out = Tensor4::zeros(dims);
    let mut argmax = Vec::with_capacity(out.len());
    let src = input.as_slice();
    let mut k = 0;
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = input.offset([b, ch, oy * stride, ox * stride]);
                    for i in 0..window {
                        for j in 0..window {
                            let o = input.offset([b, ch, oy * stride + i, ox * stride + j]);
                            if src[o] > src[best] {
                                best = o;
                            }
                        }
                    }
                    out.as_mut_slice()[k] = src[best];
                    argmax.push(best);
                    k += 1;
                }
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            input_dims: input.dims(),
            argmax,
        },
    ))
}

/// Route each upstream gradient to the input position that won its window.
pub fn maxpool_backward<T: Scalar>(indices: &PoolIndices, grad_out: &Tensor4<T>) -> Tensor4<T> {
    debug_assert_eq!(indices.argmax.len(), grad_out.len());
    let mut grad = Tensor4::zeros(indices.input_dims);
    let dst = grad.as_mut_slice();
    for (&i, &g) in indices.argmax.iter().zip(grad_out.as_slice()) {
        dst[i] = dst[i] + g;
    }
    grad
}

pub fn avgpool_forward<T: Scalar>(input: &Tensor4<T>, window: usize, stride: usize) -> Result<Tensor4<T>> {
    let dims = pooled_dims(input.dims(), window, stride)?;
    let scale = T::one() / T::from_usize(window * window).unwrap();
    Ok(Tensor4::from_fn(dims, |[b, ch, oy, ox]| {
        let mut acc = T::zero();
        for i in 0..window {
            for j in 0..window {
                acc = acc + input[[b, ch, oy * stride + i, ox * stride + j]];
            }
        }
        acc * scale
    }))
}

pub fn avgpool_backward<T: Scalar>(
    input_dims: [usize; 4],
    grad_out: &Tensor4<T>,
    window: usize,
    stride: usize,
) -> Tensor4<T> {
    let [n, c, oh, ow] = grad_out.dims();
    let scale = T::one() / T::from_usize(window * window).unwrap();
    let mut grad = Tensor4::zeros(input_dims);
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = grad_out[[b, ch, oy, ox]] * scale;
                    for i in 0..window {
                        for j in 0..window {
                            let idx = [b, ch, oy * stride + i, ox * stride + j];
                            grad[idx] = grad[idx] + g;
                        }
                    }
                }
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_of_two_by_two() {
        let x = Tensor4::<f64>::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(y.as_slice(), &[4.0]);
        let g = maxpool_backward(&idx, &Tensor4::from_vec([1, 1, 1, 1], vec![7.0]).unwrap());
        assert_eq!(g.as_slice(), &[0.0, 0.0, 0.0, 7.0]);
    }

    #[test]
    fn ties_go_to_first_maximum() {
        let x = Tensor4::<f32>::filled([1, 1, 2, 2], 1.0);
        let (_, idx) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(idx.argmax, vec![0]);
    }

    #[test]
    fn window_larger_than_input_rejected() {
        let x = Tensor4::<f32>::zeros([1, 1, 2, 2]);
        assert!(maxpool_forward(&x, 3, 1).is_err());
        assert!(maxpool_forward(&Tensor4::<f32>::zeros([1, 1, 5, 5]), 2, 2).is_err());
    }

    #[test]
    fn average_and_its_adjoint() {
        let x = Tensor4::<f64>::from_vec([1, 1, 2, 4], vec![1.0, 3.0, 5.0, 7.0, 1.0, 3.0, 5.0, 7.0]).unwrap();
        let y = avgpool_forward(&x, 2, 2).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 6.0]);
        let g = avgpool_backward(x.dims(), &Tensor4::filled([1, 1, 1, 2], 4.0), 2, 2);
        assert!(g.as_slice().iter().all(|&v| v == 1.0));
    }
}
