//! Dense row-major tensors.
//!
//! Three-dimensional tensors are laid out channel-major, `[c][h][w]`. Values are
//! `f32` in production; every operation is generic over [`Real`] so that the
//! same code runs in `f64` for finite-difference gradient checks.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::ElementCount {
                from: vec![data.len()],
                from_len: data.len(),
                to: shape.to_vec(),
                to_len: len,
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Zeros with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extents of a 3-D tensor as `(c, h, w)`.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(op, &self.shape, &[0, 0, 0])),
        }
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Self> {
        let len = check_shape(new_shape)?;
        if len != self.data.len() {
            return Err(Error::ElementCount {
                from: self.shape.clone(),
                from_len: self.data.len(),
                to: new_shape.to_vec(),
                to_len: len,
            });
        }
        Ok(Self {
            shape: new_shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// `self[m×k] · other[k×n]`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k, n) = match (&self.shape[..], &other.shape[..]) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
            _ => return Err(Error::shape("matmul", &self.shape, &other.shape)),
        };
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for u in 0..k {
                let a = self.data[i * k + u];
                let b_row = &other.data[u * n..(u + 1) * n];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Self::from_vec(&[m, n], out)
    }

    /// Glorot/Xavier uniform values on `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(fan_in: usize, fan_out: usize, shape: &[usize], rng: &mut Rng) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::Config("glorot fan_in and fan_out must be at least 1".into()));
        }
        let len = check_shape(shape)?;
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..len)
            .map(|_| T::of(s * (2.0 * rng.next_f64() - 1.0)))
            .collect();
        Self::from_vec(shape, data)
    }

    /// Lowest index attaining the maximum.
    pub fn argmax(&self) -> Result<usize> {
        argmax(&self.data)
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    /// `self += other` elementwise.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("add", &self.shape, &other.shape));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v = *v * factor;
        }
    }
}

pub fn argmax<T: Real>(values: &[T]) -> Result<usize> {
    let (first, rest) = values.split_first().ok_or(Error::Empty("argmax"))?;
    let mut best = (0, *first);
    for (i, &v) in rest.iter().enumerate() {
        if v > best.1 {
            best = (i + 1, v);
        }
    }
    Ok(best.0)
}
