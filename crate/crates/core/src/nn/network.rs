//! Whole-network forward and backward passes over a [`NetworkConfig`].

use crate::error::{Error, Result};
use crate::nn::activation::{relu_backward, relu_forward};
use crate::nn::config::{LayerSpec, NetworkConfig};
use crate::nn::conv::{conv_backward, conv_forward};
use crate::nn::dense::{dense_backward, dense_forward};
use crate::nn::params::{Gradients, LayerParams, Parameters};
use crate::nn::pool::{avgpool_backward, avgpool_forward, maxpool_backward, maxpool_forward, PoolIndices};
use crate::nn::softmax::{softmax, softmax_xent_backward, softmax_xent_forward};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Activations retained by [`network_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// Input seen by each layer, in order.
    inputs: Vec<Tensor4<T>>,
    pool_indices: Vec<Option<PoolIndices>>,
    probs: Tensor4<T>,
}

impl<T> ForwardCache<T> {
    pub fn probs(&self) -> &Tensor4<T> {
        &self.probs
    }
}

fn check_inputs<T: Scalar>(config: &NetworkConfig, params: &Parameters<T>, batch: &Tensor4<T>) -> Result<()> {
    config.validate()?;
    let [_, c, h, w] = batch.dims();
    if [c, h, w] != config.input_shape {
        return Err(Error::config(format!(
            "batch items are {:?}, network expects {:?}",
            [c, h, w],
            config.input_shape
        )));
    }
    if params.layers.len() != config.layers.len() {
        return Err(Error::config(format!(
            "parameters cover {} layers, config has {}",
            params.layers.len(),
            config.layers.len()
        )));
    }
    Ok(())
}

fn layer_params<'a, T>(params: &'a Parameters<T>, index: usize) -> Result<&'a LayerParams<T>> {
    params.layers[index]
        .as_ref()
        .ok_or_else(|| Error::layer(index, "missing parameters for layer"))
}

fn step_forward<T: Scalar>(
    layer: &LayerSpec,
    params: Option<&LayerParams<T>>,
    x: &Tensor4<T>,
) -> Result<(Tensor4<T>, Option<PoolIndices>)> {
    let missing = || Error::config("missing parameters for layer");
    Ok(match *layer {
        LayerSpec::Conv { stride, padding, .. } => {
            let p = params.ok_or_else(missing)?;
            (conv_forward(x, &p.weights, &p.bias, stride, padding)?, None)
        }
        LayerSpec::Relu => (relu_forward(x), None),
        LayerSpec::MaxPool { window, stride } => {
            let (y, idx) = maxpool_forward(x, window, stride)?;
            (y, Some(idx))
        }
        LayerSpec::AvgPool { window, stride } => (avgpool_forward(x, window, stride)?, None),
        LayerSpec::Flatten => {
            let dims = [x.batch(), x.item_len(), 1, 1];
            (x.clone().reshape(dims)?, None)
        }
        LayerSpec::FullyConnected { .. } => {
            let p = params.ok_or_else(missing)?;
            (dense_forward(x, &p.weights, &p.bias)?, None)
        }
        LayerSpec::SoftmaxOutput => {
            let logits = x.clone().reshape([x.batch(), x.item_len(), 1, 1])?;
            (softmax(&logits), None)
        }
    })
}

/// Class probabilities `(n, K, 1, 1)` and the activations needed for backprop.
pub fn network_forward<T: Scalar>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    batch: &Tensor4<T>,
) -> Result<(Tensor4<T>, ForwardCache<T>)> {
    check_inputs(config, params, batch)?;
    let mut inputs = Vec::with_capacity(config.layers.len());
    let mut pool_indices = Vec::with_capacity(config.layers.len());
    let mut x = batch.clone();
    for (i, layer) in config.layers.iter().enumerate() {
        let (y, idx) = step_forward(layer, params.layers[i].as_ref(), &x).map_err(|e| e.at_layer(i))?;
        inputs.push(std::mem::replace(&mut x, y));
        pool_indices.push(idx);
    }
    let cache = ForwardCache {
        inputs,
        pool_indices,
        probs: x.clone(),
    };
    Ok((x, cache))
}

/// Forward pass without retaining activations.
pub fn predict_proba<T: Scalar>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    batch: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    check_inputs(config, params, batch)?;
    let mut x = batch.clone();
    for (i, layer) in config.layers.iter().enumerate() {
        x = step_forward(layer, params.layers[i].as_ref(), &x)
            .map_err(|e| e.at_layer(i))?
            .0;
    }
    Ok(x)
}

/// Mean cross-entropy loss of the cached forward pass and its gradients.
pub fn network_backward<T: Scalar>(
    config: &NetworkConfig,
    params: &Parameters<T>,
    cache: &ForwardCache<T>,
    labels: &[usize],
) -> Result<(T, Gradients<T>)> {
    let last = config.layers.len() - 1;
    let logits_in = &cache.inputs[last];
    let logits = logits_in.clone().reshape([logits_in.batch(), logits_in.item_len(), 1, 1])?;
    let (loss, _) = softmax_xent_forward(&logits, labels)?;
    let mut grad = softmax_xent_backward(&cache.probs, labels)?.reshape(logits_in.dims())?;

    let mut grads = params.zeros_like();
    for i in (0..last).rev() {
        let x = &cache.inputs[i];
        grad = match config.layers[i] {
            LayerSpec::Conv { stride, padding, .. } => {
                let p = layer_params(params, i)?;
                let g = conv_backward(x, &p.weights, &grad, stride, padding).map_err(|e| e.at_layer(i))?;
                grads.layers[i] = Some(LayerParams {
                    weights: g.weights,
                    bias: g.bias,
                });
                g.input
            }
            LayerSpec::Relu => relu_backward(x, &grad),
            LayerSpec::MaxPool { .. } => {
                let idx = cache.pool_indices[i]
                    .as_ref()
                    .ok_or_else(|| Error::Internal(format!("no pooling indices cached for layer {i}")))?;
                maxpool_backward(idx, &grad)
            }
            LayerSpec::AvgPool { window, stride } => avgpool_backward(x.dims(), &grad, window, stride),
            LayerSpec::Flatten => grad.reshape(x.dims())?,
            LayerSpec::FullyConnected { .. } => {
                let p = layer_params(params, i)?;
                let g = dense_backward(x, &p.weights, &grad).map_err(|e| e.at_layer(i))?;
                grads.layers[i] = Some(LayerParams {
                    weights: g.weights,
                    bias: g.bias,
                });
                g.input.reshape(x.dims())?
            }
            LayerSpec::SoftmaxOutput => {
                return Err(Error::Internal("softmax output before the last layer".into()));
            }
        };
    }
    Ok((loss, grads))
}
