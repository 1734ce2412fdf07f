//! Valid (unpadded, stride-1) 2-D convolution.
//!
//! For filter `j`, `y[j][u][v] = b[j] + Σ_c Σ_a Σ_d k[j][c][a][d] · x[c][u+a][v+d]`,
//! i.e. cross-correlation summed over input channels. A `t×f` input and an
//! `m×r` filter give a `(t−m+1)×(f−r+1)` feature map.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2D<T = f32> {
    /// `[n, c_in, m, r]`
    kernels: Tensor<T>,
    /// `[n]`
    biases: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dk: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Real> Conv2D<T> {
    pub fn new(kernels: Tensor<T>, biases: Tensor<T>) -> Result<Self> {
        match (kernels.shape(), biases.shape()) {
            ([n, _, _, _], [nb]) if n == nb => {}
            (k, b) => return Err(Error::shape("conv2d parameters", k, b)),
        }
        Ok(Self { kernels, biases })
    }

    /// Glorot-initialized kernels (fan_in `c_in·m·r`, fan_out `n·m·r`) and zero biases.
    pub fn init(n: usize, c_in: usize, m: usize, r: usize, rng: &mut Rng) -> Result<Self> {
        let kernels = Tensor::glorot(c_in * m * r, n * m * r, &[n, c_in, m, r], rng)?;
        let biases = Tensor::zeros(&[n])?;
        Self::new(kernels, biases)
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    /// `(m, r)`
    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.shape()[2], self.kernels.shape()[3])
    }

    pub fn kernels(&self) -> &Tensor<T> {
        &self.kernels
    }

    pub fn biases(&self) -> &Tensor<T> {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.kernels, &mut self.biases]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let (m, r) = self.kernel_size();
        let [c, t, f] = match input {
            [c, t, f] => [*c, *t, *f],
            _ => return Err(Error::shape("conv2d input", input, &[self.in_channels(), m, r])),
        };
        if c != self.in_channels() {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels(),
                got: c,
            });
        }
        if t < m || f < r {
            return Err(Error::FilterTooLarge {
                filter: [m, r],
                input: [t, f],
            });
        }
        Ok([self.filters(), t - m + 1, f - r + 1])
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
        let [n, oh, ow] = self.output_shape(x.shape())?;
        let (c_in, t, f) = x.dims3("conv2d")?;
        let (m, r) = self.kernel_size();
        let xs = x.data();
        let ks = self.kernels.data();
        let mut y = vec![T::zero(); n * oh * ow];
        for (j, y_j) in y.chunks_exact_mut(oh * ow).enumerate() {
            y_j.fill(self.biases.data()[j]);
            for c in 0..c_in {
                for a in 0..m {
                    for d in 0..r {
                        let kv = ks[((j * c_in + c) * m + a) * r + d];
                        for u in 0..oh {
                            let start = (c * t + u + a) * f + d;
                            let x_row = &xs[start..start + ow];
                            let y_row = &mut y_j[u * ow..(u + 1) * ow];
                            for (yv, &xv) in y_row.iter_mut().zip(x_row) {
                                *yv = *yv + kv * xv;
                            }
                        }
                    }
                }
            }
        }
        let y = Tensor::from_vec(&[n, oh, ow], y)?;
        Ok((y, ConvCache { input: x.clone() }))
    }

    pub fn backward(&self, cache: &ConvCache<T>, dy: &Tensor<T>) -> Result<ConvGrads<T>> {
        let x = &cache.input;
        let out = self.output_shape(x.shape())?;
        if dy.shape() != out {
            return Err(Error::shape("conv2d backward", dy.shape(), &out));
        }
        let [n, oh, ow] = out;
        let (c_in, t, f) = x.dims3("conv2d")?;
        let (m, r) = self.kernel_size();
        let xs = x.data();
        let ks = self.kernels.data();
        let mut dx = vec![T::zero(); xs.len()];
        let mut dk = vec![T::zero(); ks.len()];
        let mut db = vec![T::zero(); n];
        for (j, dy_j) in dy.data().chunks_exact(oh * ow).enumerate() {
            db[j] = dy_j.iter().copied().sum();
            for c in 0..c_in {
                for a in 0..m {
                    for d in 0..r {
                        let kidx = ((j * c_in + c) * m + a) * r + d;
                        let kv = ks[kidx];
                        let mut acc = T::zero();
                        for u in 0..oh {
                            let start = (c * t + u + a) * f + d;
                            let dy_row = &dy_j[u * ow..(u + 1) * ow];
                            let x_row = &xs[start..start + ow];
                            let dot = dy_row
                                .iter()
                                .zip(x_row)
                                .fold(T::zero(), |s, (&g, &xv)| s + g * xv);
                            acc = acc + dot;
                            let dx_row = &mut dx[start..start + ow];
                            for (dxv, &g) in dx_row.iter_mut().zip(dy_row) {
                                *dxv = *dxv + kv * g;
                            }
                        }
                        dk[kidx] = acc;
                    }
                }
            }
        }
        Ok(ConvGrads {
            dx: Tensor::from_vec(x.shape(), dx)?,
            dk: Tensor::from_vec(self.kernels.shape(), dk)?,
            db: Tensor::from_vec(&[n], db)?,
        })
    }

    pub fn cast<U: Real>(&self) -> Conv2D<U> {
        Conv2D {
            kernels: self.kernels.cast(),
            biases: self.biases.cast(),
        }
    }
}
