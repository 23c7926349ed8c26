//! Dense f64 tensors with the layer set and solver the regressor needs.
//!
//! Layers are exposed as pure forward/backward function pairs over plain
//! tensors; [`Parameter`] couples a value tensor with its gradient buffer
//! and Adam state. Everything runs in double precision. Forward and
//! backward passes are bit-deterministic for any thread count.

mod mm;
pub mod ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::DetRng;

/// Contiguous row-major n-dimensional array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::ShapeMismatch {
                op: "Tensor::from_vec",
                detail: format!("shape {shape:?} needs {expect} values, got {}", data.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    /// Flat view with a new shape of identical element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::from_vec(shape, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Trainable tensor: value, gradient buffer, and Adam moment state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    moment1: Tensor,
    moment2: Tensor,
    step: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(&shape),
            moment1: Tensor::zeros(&shape),
            moment2: Tensor::zeros(&shape),
            step: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Adam hyperparameters. Defaults follow the standard suggested values with
/// a fixed learning rate of 1e-5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            alpha: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam update with bias correction: decays the moment estimates toward
/// the current gradient, then applies `alpha * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(param: &mut Parameter, hp: &AdamParams) {
    param.step += 1;
    let t = param.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let m = param.moment1.data_mut();
    let v = param.moment2.data_mut();
    let g = param.grad.data();
    let theta = param.value.data_mut();
    for i in 0..theta.len() {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= hp.alpha * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}

/// Xavier (Glorot) uniform initialization in
/// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`.
///
/// Fans derive from the shape: `[out, in]` for fully connected weights,
/// `[c_out, c_in, kh, kw]` for convolution kernels.
pub fn xavier_init(shape: &[usize], rng: &mut DetRng) -> Result<Tensor> {
    let (fan_in, fan_out) = match shape.len() {
        2 => (shape[1], shape[0]),
        4 => (shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "xavier_init",
                detail: format!("no fan-in/fan-out rule for shape {shape:?}"),
            })
        }
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..shape.iter().product())
        .map(|_| rng.uniform_in(-bound, bound))
        .collect();
    Tensor::from_vec(shape, data)
}
