use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::config::NetworkConfig;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Standard deviation of freshly initialized weights.
pub const INIT_STD: f64 = 0.001;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Tensor4<T>,
    pub bias: Vec<T>,
}

/// Weights and biases keyed by layer index; `None` for parameter-free layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<T> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

/// Gradients share the layout of the parameters they differentiate.
pub type Gradients<T> = Parameters<T>;

impl<T: Scalar> Parameters<T> {
    /// All-zero parameters shaped for `config`.
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        let shapes = config.shapes()?;
        let layers = config
            .layers
            .iter()
            .zip(&shapes)
            .map(|(layer, &shape)| {
                layer.param_shape(shape).map(|(dims, bias)| LayerParams {
                    weights: Tensor4::zeros(dims),
                    bias: vec![T::zero(); bias],
                })
            })
            .collect();
        Ok(Parameters { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weights: Tensor4::zeros(p.weights.dims()),
                        bias: vec![T::zero(); p.bias.len()],
                    })
                })
                .collect(),
        }
    }

    /// Every weight and bias slice in declaration order (weights before bias).
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|p| [p.weights.as_slice(), p.bias.as_slice()])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flatten()
            .flat_map(|p| [p.weights.as_mut_slice(), p.bias.as_mut_slice()])
            .collect()
    }

    pub fn count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weights: p.weights.cast(),
                        bias: p.bias.iter().map(|&b| U::from_f64_lossy(b.to_f64_lossy())).collect(),
                    })
                })
                .collect(),
        }
    }

    /// True when every layer's tensors have the dims `config` requires.
    pub fn matches(&self, config: &NetworkConfig) -> bool {
        match Parameters::<T>::zeros(config) {
            Ok(reference) => same_layout(self, &reference),
            Err(_) => false,
        }
    }

    /// In-place `w <- w - lr * g`.
    pub fn apply_sgd(&mut self, grads: &Gradients<T>, lr: T) -> Result<()> {
        if !same_layout(self, grads) {
            return Err(Error::Internal("gradient layout differs from parameters".into()));
        }
        for (w, g) in self.slices_mut().into_iter().zip(grads.slices()) {
            for (w, &g) in w.iter_mut().zip(g) {
                *w = *w - lr * g;
            }
        }
        Ok(())
    }

    /// Element-wise sum, used to merge gradients.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if !same_layout(self, other) {
            return Err(Error::Internal("cannot add parameters of different layouts".into()));
        }
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (a, &b) in a.iter_mut().zip(b) {
                *a = *a + b;
            }
        }
        Ok(())
    }
}

fn same_layout<T, U>(a: &Parameters<T>, b: &Parameters<U>) -> bool {
    a.layers.len() == b.layers.len()
        && a.layers.iter().zip(&b.layers).all(|(x, y)| match (x, y) {
            (None, None) => true,
            (Some(x), Some(y)) => x.weights.dims() == y.weights.dims() && x.bias.len() == y.bias.len(),
            _ => false,
        })
}

/// Seeded initialization: weights i.i.d. uniform with standard deviation
/// [`INIT_STD`], biases zero.
pub fn init_params<T: Scalar>(config: &NetworkConfig, seed: u64) -> Result<Parameters<T>> {
    init_params_with_std(config, seed, INIT_STD)
}

/// As [`init_params`] with a caller-chosen weight standard deviation.
pub fn init_params_with_std<T: Scalar>(config: &NetworkConfig, seed: u64, std: f64) -> Result<Parameters<T>> {
    let mut params = Parameters::zeros(config)?;
    let half_width = std * 3f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in params.layers.iter_mut().flatten() {
        for w in layer.weights.as_mut_slice() {
            *w = T::from_f64_lossy(rng.random_range(-half_width..half_width));
        }
    }
    Ok(params)
}

/// Plain gradient descent step returning the updated parameters.
pub fn sgd_step<T: Scalar>(params: &Parameters<T>, grads: &Gradients<T>, lr: T) -> Result<Parameters<T>> {
    let mut next = params.clone();
    next.apply_sgd(grads, lr)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::config::LayerSpec;

    fn scalar_params(w: f32) -> Parameters<f32> {
        Parameters {
            layers: vec![Some(LayerParams {
                weights: Tensor4::from_vec([1, 1, 1, 1], vec![w]).unwrap(),
                bias: vec![0.0],
            })],
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = NetworkConfig::hep2_default();
        let a: Parameters<f32> = init_params(&cfg, 7).unwrap();
        let b: Parameters<f32> = init_params(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c: Parameters<f32> = init_params(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_std_and_zero_bias() {
        let cfg = NetworkConfig {
            input_shape: [1, 60, 60],
            layers: vec![LayerSpec::conv(4, 3, 1, 1), LayerSpec::fc(30), LayerSpec::SoftmaxOutput],
            num_classes: 30,
        };
        let p: Parameters<f64> = init_params(&cfg, 1).unwrap();
        let weights: Vec<f64> = p
            .layers
            .iter()
            .flatten()
            .flat_map(|l| l.weights.as_slice().iter().copied())
            .collect();
        assert!(weights.len() >= 100_000, "only {} weights", weights.len());
        let n = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let std = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.001).abs() < 0.05 * 0.001, "std {std}");
        assert!(weights.iter().all(|w| w.abs() <= 0.001 * 3f64.sqrt()));
        assert!(p.layers.iter().flatten().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn inconsistent_config_fails_init() {
        let cfg = NetworkConfig {
            input_shape: [1, 4, 4],
            layers: vec![LayerSpec::conv(2, 5, 1, 0), LayerSpec::fc(2), LayerSpec::SoftmaxOutput],
            num_classes: 2,
        };
        assert!(init_params::<f32>(&cfg, 0).is_err());
    }

    #[test]
    fn sgd_arithmetic() {
        let p = scalar_params(1.0);
        let g = scalar_params(2.0);
        let next = sgd_step(&p, &g, 0.002).unwrap();
        assert_eq!(next.layers[0].as_ref().unwrap().weights.as_slice(), &[0.996]);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let cfg = NetworkConfig::compact(6);
        let p: Parameters<f32> = init_params(&cfg, 3).unwrap();
        let next = sgd_step(&p, &p.zeros_like(), 0.002).unwrap();
        assert_eq!(next, p);
    }

    #[test]
    fn steps_are_path_dependent() {
        // f(w) = w^2 / 2, gradient w. Two steps of size lr from w0 land at
        // w0 (1 - lr)^2; one step with both gradients evaluated at w0 lands
        // at w0 (1 - 2 lr).
        let lr = 0.5_f32;
        let w0 = 1.0_f32;
        let p0 = scalar_params(w0);
        let p1 = sgd_step(&p0, &scalar_params(w0), lr).unwrap();
        let w1 = p1.layers[0].as_ref().unwrap().weights.as_slice()[0];
        let p2 = sgd_step(&p1, &scalar_params(w1), lr).unwrap();
        let two_steps = p2.layers[0].as_ref().unwrap().weights.as_slice()[0];
        let summed = sgd_step(&p0, &scalar_params(2.0 * w0), lr).unwrap();
        let one_step = summed.layers[0].as_ref().unwrap().weights.as_slice()[0];
        assert_eq!(two_steps, 0.25);
        assert_eq!(one_step, 0.0);
        assert_ne!(two_steps, one_step);
    }

    #[test]
    fn layout_mismatch_is_internal() {
        let p = scalar_params(1.0);
        let cfg = NetworkConfig::compact(2);
        let g: Parameters<f32> = Parameters::zeros(&cfg).unwrap();
        assert!(matches!(sgd_step(&p, &g, 0.1), Err(Error::Internal(_))));
    }
}
