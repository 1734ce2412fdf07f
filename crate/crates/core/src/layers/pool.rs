//! Non-overlapping max/average pooling and global average pooling.
//!
//! Stride equals the window. Trailing rows and columns that do not fill a whole
//! window are dropped and receive zero gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Max,
    Average,
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolMode::Max => "max",
            PoolMode::Average => "average",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub p: usize,
    pub q: usize,
    pub mode: PoolMode,
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: [usize; 3],
    /// Flat input index of the winning element per output cell (max mode only).
    winners: Vec<usize>,
}

impl PoolSpec {
    pub fn new(p: usize, q: usize, mode: PoolMode) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Config(format!("pool window {p}x{q} must be at least 1x1")));
        }
        Ok(Self { p, q, mode })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let [n, h, w] = match input {
            [n, h, w] => [*n, *h, *w],
            _ => return Err(Error::shape("pool input", input, &[0, self.p, self.q])),
        };
        if h < self.p || w < self.q {
            return Err(Error::WindowTooLarge {
                window: [self.p, self.q],
                input: [h, w],
            });
        }
        Ok([n, h / self.p, w / self.q])
    }

    pub fn forward<T: Real>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
        let [n, oh, ow] = self.output_shape(x.shape())?;
        let (_, h, w) = x.dims3("pool")?;
        let (p, q) = (self.p, self.q);
        let xs = x.data();
        let mut y = Vec::with_capacity(n * oh * ow);
        let mut winners = Vec::new();
        if self.mode == PoolMode::Max {
            winners.reserve(n * oh * ow);
        }
        let count = T::of((p * q) as f64);
        for map in 0..n {
            for u in 0..oh {
                for v in 0..ow {
                    let origin = (map * h + u * p) * w + v * q;
                    match self.mode {
                        PoolMode::Max => {
                            let mut best = origin;
                            for a in 0..p {
                                for d in 0..q {
                                    let idx = origin + a * w + d;
                                    if xs[idx] > xs[best] {
                                        best = idx;
                                    }
                                }
                            }
                            winners.push(best);
                            y.push(xs[best]);
                        }
                        PoolMode::Average => {
                            y.push(window_sum(xs, origin, w, p, q) / count);
                        }
                    }
                }
            }
        }
        let y = Tensor::from_vec(&[n, oh, ow], y)?;
        Ok((
            y,
            PoolCache {
                input_shape: [n, h, w],
                winners,
            },
        ))
    }

    pub fn backward<T: Real>(&self, cache: &PoolCache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.output_shape(&cache.input_shape)?;
        if dy.shape() != out {
            return Err(Error::shape("pool backward", dy.shape(), &out));
        }
        let [n, h, w] = cache.input_shape;
        let [_, oh, ow] = out;
        let mut dx = vec![T::zero(); n * h * w];
        match self.mode {
            PoolMode::Max => {
                for (&idx, &g) in cache.winners.iter().zip(dy.data()) {
                    dx[idx] = dx[idx] + g;
                }
            }
            PoolMode::Average => {
                let count = T::of((self.p * self.q) as f64);
                for map in 0..n {
                    for u in 0..oh {
                        for v in 0..ow {
                            let share = dy.data()[(map * oh + u) * ow + v] / count;
                            let origin = (map * h + u * self.p) * w + v * self.q;
                            for a in 0..self.p {
                                for d in 0..self.q {
                                    dx[origin + a * w + d] = share;
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::from_vec(&cache.input_shape, dx)
    }
}

/// Row-major sum of one `p×q` window starting at flat index `origin`.
fn window_sum<T: Real>(xs: &[T], origin: usize, row_stride: usize, p: usize, q: usize) -> T {
    let mut s = T::zero();
    for a in 0..p {
        for d in 0..q {
            s = s + xs[origin + a * row_stride + d];
        }
    }
    s
}

/// Reduces each `h×w` map to its mean: `[n, h, w] → [n]`.
pub fn global_avg_pool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w) = x.dims3("global_avg_pool")?;
    let count = T::of((h * w) as f64);
    let y = (0..n)
        .map(|map| window_sum(x.data(), map * h * w, w, h, w) / count)
        .collect();
    Tensor::from_vec(&[n], y)
}

pub fn global_avg_pool_backward<T: Real>(input_shape: &[usize], dy: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, w] = match input_shape {
        [n, h, w] => [*n, *h, *w],
        _ => return Err(Error::shape("global_avg_pool backward", input_shape, dy.shape())),
    };
    if dy.shape() != [n] {
        return Err(Error::shape("global_avg_pool backward", dy.shape(), &[n]));
    }
    let count = T::of((h * w) as f64);
    let dx = dy
        .data()
        .iter()
        .flat_map(|&g| std::iter::repeat_n(g / count, h * w))
        .collect();
    Tensor::from_vec(input_shape, dx)
}
