//! Dense feed-forward network with hand-written reverse-mode gradients.
//!
//! Hidden layers are `tanh(x·W + b)`, the output layer is affine. Rows of a
//! batch are samples; `W` of layer `k` has shape `dims[k] × dims[k+1]`.

mod adam;
mod io;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPS};
pub use train::{train, EarlyStopping, MseObjective, Objective, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::rng;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Loss value and its terms; models trained with a plain objective report
/// the loss as `d` with `p = c = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub d: f64,
    pub p: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Layer inputs kept from a forward pass for the backward pass.
pub struct ForwardCache {
    /// `activations[0]` is the batch input, `activations[k]` the output of
    /// layer `k−1` (after tanh for hidden layers).
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("at least the input")
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::contract(format!("invalid layer dims {dims:?}")));
    }
    Ok(())
}

/// Glorot-uniform weights in `±√(6/(fan_in + fan_out))`, zero biases.
pub fn glorot_init(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    check_dims(layer_dims)?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (k, w) in layer_dims.windows(2).enumerate() {
        let (fi, fo) = (w[0], w[1]);
        let bound = (6.0 / (fi + fo) as f64).sqrt();
        let mut rng = rng::stream(seed, &[k as u64]);
        weights.push(Array2::from_shape_simple_fn((fi, fo), || rng.gen_range(-bound..=bound)));
        biases.push(Array1::zeros(fo));
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

impl MlpModel {
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("non-empty dims")
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "input width {} does not match model input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let last = self.n_layers() - 1;
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        activations.push(x.to_owned());
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[k].dot(w);
            z += b;
            if k < last {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.activations.pop().expect("output"))
    }

    /// Gradients of a loss whose derivative with respect to the network
    /// output is `grad_out`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> Result<Gradients> {
        if grad_out.dim() != cache.output().dim() {
            return Err(Error::contract("output gradient shape does not match the forward pass"));
        }
        let l = self.n_layers();
        let mut gw = vec![Array2::zeros((0, 0)); l];
        let mut gb = vec![Array1::zeros(0); l];
        let mut delta = grad_out.to_owned();
        for k in (0..l).rev() {
            gw[k] = cache.activations[k].t().dot(&delta);
            gb[k] = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.weights[k].t());
                // activations[k] = tanh(z), so d tanh = 1 − a²
                back.zip_mut_with(&cache.activations[k], |g, a| *g *= 1.0 - a * a);
                delta = back;
            }
        }
        Ok(Gradients { weights: gw, biases: gb })
    }

    /// Flat copy of all parameters, weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
    }
}

impl Gradients {
    /// Same order as [`MlpModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn glorot_bound_and_zero_bias() {
        let m = glorot_init(&[4, 4], 1).unwrap();
        let bound = (6.0f64 / 8.0).sqrt();
        assert!((bound - 0.866).abs() < 1e-3);
        assert!(m.weights[0].iter().all(|w| w.abs() <= bound));
        assert!(m.biases[0].iter().all(|b| *b == 0.0));
        assert_eq!(m, glorot_init(&[4, 4], 1).unwrap());
        assert_ne!(m, glorot_init(&[4, 4], 2).unwrap());
    }

    #[test]
    fn invalid_dims() {
        assert!(glorot_init(&[4], 0).is_err());
        assert!(glorot_init(&[4, 0, 4], 0).is_err());
    }

    #[test]
    fn zero_model_outputs_zero() {
        let mut m = glorot_init(&[3, 5, 2], 0).unwrap();
        m.set_params(&vec![0.0; m.n_params()]);
        let out = m.forward(array![[0.3, -0.7, 1.0], [1.0, 1.0, 1.0]].view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut m = glorot_init(&[3, 3], 0).unwrap();
        m.weights[0] = Array2::eye(3);
        let x = array![[0.3, -0.7, 1.0]];
        assert_eq!(m.forward(x.view()).unwrap(), x);
        assert!(m.forward(array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn params_round_trip() {
        let m = glorot_init(&[2, 3, 2], 5).unwrap();
        let mut n = glorot_init(&[2, 3, 2], 6).unwrap();
        n.set_params(&m.params());
        assert_eq!(m, n);
    }
}
