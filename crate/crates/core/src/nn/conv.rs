//! 2-D cross-correlation via im2col and GEMM.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Gradients of [`conv_forward`] with respect to each of its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor4<T>,
    pub weights: Tensor4<T>,
    pub bias: Vec<T>,
}

/// Output extent of a strided window sweep over `size + 2 * padding` samples.
///
/// Fails unless the sweep covers the padded input exactly.
pub fn output_extent(size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::config("kernel and stride must be positive"));
    }
    let padded = size + 2 * padding;
    if kernel > padded {
        return Err(Error::config(format!(
            "window {kernel} exceeds padded extent {padded}"
        )));
    }
    let span = padded - kernel;
    if span % stride != 0 {
        return Err(Error::config(format!(
            "non-integral output size: ({size} + 2*{padding} - {kernel}) / {stride}"
        )));
    }
    Ok(span / stride + 1)
}

struct Geometry {
    in_c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn new<T>(input: &Tensor4<T>, weights: &Tensor4<T>, stride: usize, padding: usize) -> Result<Self> {
        let [_, in_c, h, w] = input.dims();
        let [_, w_in_c, kh, kw] = weights.dims();
        if w_in_c != in_c {
            return Err(Error::config(format!(
                "weights expect {w_in_c} input channels, input has {in_c}"
            )));
        }
        let oh = output_extent(h, kh, stride, padding)?;
        let ow = output_extent(w, kw, stride, padding)?;
        Ok(Geometry {
            in_c,
            h,
            w,
            kh,
            kw,
            oh,
            ow,
            stride,
            padding,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// 1x1 kernels with unit stride and no padding need no patch matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }

    fn im2col<T: Scalar>(&self, image: &[T], cols: &mut [T]) {
        let p = self.positions();
        for c in 0..self.in_c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = (c * self.kh + i) * self.kw + j;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let y = (oy * self.stride + i) as isize - self.padding as isize;
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if y < 0 || y >= self.h as isize {
                            line.fill(T::zero());
                            continue;
                        }
                        let src = &image[(c * self.h + y as usize) * self.w..][..self.w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let x = (ox * self.stride + j) as isize - self.padding as isize;
                            *v = if x < 0 || x >= self.w as isize {
                                T::zero()
                            } else {
                                src[x as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], image: &mut [T]) {
        let p = self.positions();
        for c in 0..self.in_c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = (c * self.kh + i) * self.kw + j;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let y = (oy * self.stride + i) as isize - self.padding as isize;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let dst = &mut image[(c * self.h + y as usize) * self.w..][..self.w];
                        for ox in 0..self.ow {
                            let x = (ox * self.stride + j) as isize - self.padding as isize;
                            if x >= 0 && x < self.w as isize {
                                dst[x as usize] = dst[x as usize] + src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlate `input` `(n, c, h, w)` with `weights` `(out_c, c, kh, kw)`.
pub fn conv_forward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &Tensor4<T>,
    bias: &[T],
    stride: usize,
    padding: usize,
) -> Result<Tensor4<T>> {
    let g = Geometry::new(input, weights, stride, padding)?;
    let out_c = weights.batch();
    if bias.len() != out_c {
        return Err(Error::config(format!(
            "bias has {} entries for {out_c} output channels",
            bias.len()
        )));
    }
    let (k, p) = (g.patch_len(), g.positions());
    let mut out = Tensor4::zeros([input.batch(), out_c, g.oh, g.ow]);
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    for n in 0..input.batch() {
        let patches: &[T] = if g.is_pointwise() {
            input.item(n)
        } else {
            g.im2col(input.item(n), &mut cols);
            &cols
        };
        let dst = out.item_mut(n);
        for (oc, row) in dst.chunks_exact_mut(p).enumerate() {
            row.fill(bias[oc]);
        }
        T::gemm(
            out_c,
            k,
            p,
            T::one(),
            weights.as_slice(),
            k,
            1,
            patches,
            p,
            1,
            T::one(),
            dst,
            p,
            1,
        );
    }
    Ok(out)
}

/// Exact gradients of [`conv_forward`] given the upstream gradient `grad_out`.
pub fn conv_backward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(input, weights, stride, padding)?;
    let out_c = weights.batch();
    let expected = [input.batch(), out_c, g.oh, g.ow];
    if grad_out.dims() != expected {
        return Err(Error::config(format!(
            "upstream gradient has dims {:?}, expected {expected:?}",
            grad_out.dims()
        )));
    }
    let (k, p) = (g.patch_len(), g.positions());
    let mut grad_input = Tensor4::zeros(input.dims());
    let mut grad_weights = Tensor4::zeros(weights.dims());
    let mut grad_bias = vec![T::zero(); out_c];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    let mut grad_cols = vec![T::zero(); k * p];

    for n in 0..input.batch() {
        let gout = grad_out.item(n);
        for (oc, row) in gout.chunks_exact(p).enumerate() {
            grad_bias[oc] = row.iter().fold(grad_bias[oc], |acc, &v| acc + v);
        }
        let patches: &[T] = if g.is_pointwise() {
            input.item(n)
        } else {
            g.im2col(input.item(n), &mut cols);
            &cols
        };
        // dW += dY * patches^T
        T::gemm(
            out_c,
            p,
            k,
            T::one(),
            gout,
            p,
            1,
            patches,
            1,
            p,
            T::one(),
            grad_weights.as_mut_slice(),
            k,
            1,
        );
        // dpatches = W^T * dY
        if g.is_pointwise() {
            T::gemm(
                k,
                out_c,
                p,
                T::one(),
                weights.as_slice(),
                1,
                k,
                gout,
                p,
                1,
                T::zero(),
                grad_input.item_mut(n),
                p,
                1,
            );
        } else {
            T::gemm(
                k,
                out_c,
                p,
                T::one(),
                weights.as_slice(),
                1,
                k,
                gout,
                p,
                1,
                T::zero(),
                &mut grad_cols,
                p,
                1,
            );
            g.col2im(&grad_cols, grad_input.item_mut(n));
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        weights: grad_weights,
        bias: grad_bias,
    })
}
