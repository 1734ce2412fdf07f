//! Fully connected layer, `y = xᵀW + b` with `W` stored `[in_dim, out_dim]`.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T = f32> {
    weights: Tensor<T>,
    biases: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(weights: Tensor<T>, biases: Tensor<T>) -> Result<Self> {
        match (weights.shape(), biases.shape()) {
            ([_, out], [nb]) if out == nb => Ok(Self { weights, biases }),
            (w, b) => Err(Error::shape("dense parameters", w, b)),
        }
    }

    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        let weights = Tensor::glorot(in_dim, out_dim, &[in_dim, out_dim], rng)?;
        Self::new(weights, Tensor::zeros(&[out_dim])?)
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn biases(&self) -> &Tensor<T> {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weights, &mut self.biases]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        if x.shape() != [self.in_dim()] {
            return Err(Error::shape("dense input", x.shape(), &[self.in_dim()]));
        }
        let row = x.reshape(&[1, self.in_dim()])?;
        let mut y = row.matmul(&self.weights)?.reshape(&[self.out_dim()])?;
        y.add_assign(&self.biases)?;
        Ok((y, DenseCache { input: x.clone() }))
    }

    pub fn backward(&self, cache: &DenseCache<T>, dy: &Tensor<T>) -> Result<DenseGrads<T>> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        if dy.shape() != [n_out] {
            return Err(Error::shape("dense backward", dy.shape(), &[n_out]));
        }
        let w = self.weights.data();
        let g = dy.data();
        let dx = (0..n_in)
            .map(|i| {
                w[i * n_out..(i + 1) * n_out]
                    .iter()
                    .zip(g)
                    .fold(T::zero(), |s, (&wv, &gv)| s + wv * gv)
            })
            .collect();
        let dw = cache
            .input
            .data()
            .iter()
            .flat_map(|&xv| g.iter().map(move |&gv| xv * gv))
            .collect();
        Ok(DenseGrads {
            dx: Tensor::from_vec(&[n_in], dx)?,
            dw: Tensor::from_vec(&[n_in, n_out], dw)?,
            db: dy.clone(),
        })
    }

    pub fn cast<U: Real>(&self) -> Dense<U> {
        Dense {
            weights: self.weights.cast(),
            biases: self.biases.cast(),
        }
    }
}
