use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

/// ReLU keeps its input, sigmoid its output.
#[derive(Debug, Clone)]
pub struct ActivationCache<T> {
    kept: Tensor<T>,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn forward<T: Real>(self, x: &Tensor<T>) -> (Tensor<T>, ActivationCache<T>) {
        match self {
            Activation::Relu => (relu(x), ActivationCache { kept: x.clone() }),
            Activation::Sigmoid => {
                let y = sigmoid(x);
                (y.clone(), ActivationCache { kept: y })
            }
        }
    }

    pub fn backward<T: Real>(self, cache: &ActivationCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        if cache.kept.shape() != dy.shape() {
            return Err(Error::shape("activation backward", dy.shape(), cache.kept.shape()));
        }
        let mut dx = dy.clone();
        match self {
            Activation::Relu => {
                for (g, &x) in dx.data_mut().iter_mut().zip(cache.kept.data()) {
                    if x <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &y) in dx.data_mut().iter_mut().zip(cache.kept.data()) {
                    *g = *g * y * (T::one() - y);
                }
            }
        }
        Ok(dx)
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data_mut() {
        // NaN passes through
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    y
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = sigmoid_scalar(*v);
    }
    y
}

/// Only ever exponentiates a non-positive number.
fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
