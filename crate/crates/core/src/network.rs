//! Instantiated layer stacks built from a [`ModelConfig`].

use crate::config::{LayerSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::layers::{
    global_avg_pool, global_avg_pool_backward, Activation, ActivationCache, Conv2D, ConvCache,
    Dense, DenseCache, PoolCache, PoolSpec,
};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T = f32> {
    Conv(Conv2D<T>),
    Pool(PoolSpec),
    Activation(Activation),
    Flatten,
    Dense(Dense<T>),
    GlobalAvgPool,
    /// Linear classification layer; the softmax itself is applied by [`Network::forward`].
    SoftmaxOutput(Dense<T>),
}

#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Conv(ConvCache<T>),
    Pool(PoolCache),
    Activation(ActivationCache<T>),
    Reshape(Vec<usize>),
    Dense(DenseCache<T>),
}

impl<T: Real> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Pool(_) => "pool",
            Layer::Activation(a) => a.name(),
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
            Layer::GlobalAvgPool => "global_avg_pool",
            Layer::SoftmaxOutput(_) => "softmax_output",
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LayerCache<T>)> {
        Ok(match self {
            Layer::Conv(conv) => {
                let (y, c) = conv.forward(x)?;
                (y, LayerCache::Conv(c))
            }
            Layer::Pool(spec) => {
                let (y, c) = spec.forward(x)?;
                (y, LayerCache::Pool(c))
            }
            Layer::Activation(act) => {
                let (y, c) = act.forward(x);
                (y, LayerCache::Activation(c))
            }
            Layer::Flatten => (x.reshape(&[x.len()])?, LayerCache::Reshape(x.shape().to_vec())),
            Layer::GlobalAvgPool => (global_avg_pool(x)?, LayerCache::Reshape(x.shape().to_vec())),
            Layer::Dense(dense) | Layer::SoftmaxOutput(dense) => {
                let (y, c) = dense.forward(x)?;
                (y, LayerCache::Dense(c))
            }
        })
    }

    /// Returns the input gradient and this layer's parameter gradients, if any.
    pub fn backward(&self, cache: &LayerCache<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let mismatch = || Error::Config(format!("cache does not belong to a {} layer", self.name()));
        Ok(match (self, cache) {
            (Layer::Conv(conv), LayerCache::Conv(c)) => {
                let g = conv.backward(c, dy)?;
                (g.dx, vec![g.dk, g.db])
            }
            (Layer::Pool(spec), LayerCache::Pool(c)) => (spec.backward(c, dy)?, vec![]),
            (Layer::Activation(act), LayerCache::Activation(c)) => (act.backward(c, dy)?, vec![]),
            (Layer::Flatten, LayerCache::Reshape(shape)) => (dy.reshape(shape)?, vec![]),
            (Layer::GlobalAvgPool, LayerCache::Reshape(shape)) => {
                (global_avg_pool_backward(shape, dy)?, vec![])
            }
            (Layer::Dense(dense) | Layer::SoftmaxOutput(dense), LayerCache::Dense(c)) => {
                let g = dense.backward(c, dy)?;
                (g.dx, vec![g.dw, g.db])
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv(c) => vec![c.kernels(), c.biases()],
            Layer::Dense(d) | Layer::SoftmaxOutput(d) => vec![d.weights(), d.biases()],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv(c) => c.params_mut().into(),
            Layer::Dense(d) | Layer::SoftmaxOutput(d) => d.params_mut().into(),
            _ => vec![],
        }
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        match self {
            Layer::Conv(c) => Layer::Conv(c.cast()),
            Layer::Pool(p) => Layer::Pool(*p),
            Layer::Activation(a) => Layer::Activation(*a),
            Layer::Flatten => Layer::Flatten,
            Layer::Dense(d) => Layer::Dense(d.cast()),
            Layer::GlobalAvgPool => Layer::GlobalAvgPool,
            Layer::SoftmaxOutput(d) => Layer::SoftmaxOutput(d.cast()),
        }
    }
}

/// Number of learnable scalars across `layers`.
pub fn count_params<T: Real>(layers: &[Layer<T>]) -> usize {
    layers
        .iter()
        .flat_map(|l| l.params())
        .map(|p| p.len())
        .sum()
}

/// Everything `backward` needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    caches: Vec<LayerCache<T>>,
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
}

/// Per-parameter gradients, in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub Vec<Tensor<T>>);

impl<T: Real> Gradients<T> {
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for g in &mut self.0 {
            g.scale(factor);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    config: ModelConfig,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    /// Shape-checks `config` and Glorot-initializes every learnable layer in order.
    pub fn build(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let shapes = config.propagate()?;
        let mut layers = Vec::with_capacity(config.layers.len());
        for (spec, input) in config.layers.iter().zip(&shapes) {
            let layer = match *spec {
                LayerSpec::Conv {
                    filters,
                    kernel_height,
                    kernel_width,
                } => Layer::Conv(Conv2D::init(filters, input[0], kernel_height, kernel_width, rng)?),
                LayerSpec::Pool { height, width, mode } => Layer::Pool(PoolSpec::new(height, width, mode)?),
                LayerSpec::Activation { function } => Layer::Activation(function),
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Dense { units } => Layer::Dense(Dense::init(input[0], units, rng)?),
                LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool,
                LayerSpec::SoftmaxOutput { classes } => {
                    Layer::SoftmaxOutput(Dense::init(input[0], classes, rng)?)
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    /// Builds the stack for `config` and overwrites its parameters with `params`
    /// (in [`Network::params`] order).
    pub fn from_params(config: &ModelConfig, params: Vec<Tensor<T>>) -> Result<Self> {
        let mut net = Self::build(config, &mut Rng::new(0))?;
        let slots = net.params_mut();
        if slots.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                params.len()
            )));
        }
        for (slot, p) in slots.into_iter().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::shape("parameter", p.shape(), slot.shape()));
            }
            *slot = p;
        }
        Ok(net)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.config.input.dims()
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.layers)
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Trace<T>> {
        if x.shape() != self.input_shape() {
            return Err(Error::shape("network input", x.shape(), &self.input_shape()));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&act)?;
            caches.push(cache);
            act = y;
        }
        let probs = softmax(&act);
        Ok(Trace {
            caches,
            logits: act,
            probs,
        })
    }

    /// Class probabilities for one input.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x)?.probs)
    }

    /// Backpropagates `dlogits` through the stack.
    pub fn backward(&self, trace: &Trace<T>, dlogits: &Tensor<T>) -> Result<Gradients<T>> {
        Ok(self.backward_with_input(trace, dlogits)?.1)
    }

    /// Like [`Network::backward`], also returning the gradient w.r.t. the input.
    pub fn backward_with_input(&self, trace: &Trace<T>, dlogits: &Tensor<T>) -> Result<(Tensor<T>, Gradients<T>)> {
        let mut grads: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        let mut dy = dlogits.clone();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            let (dx, g) = layer.backward(cache, &dy)?;
            grads.push(g);
            dy = dx;
        }
        Ok((dy, Gradients(grads.into_iter().rev().flatten().collect())))
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients(self.params().iter().map(|p| p.zeros_like()).collect())
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let mut out = logits.clone();
    let mut total = T::zero();
    for v in out.data_mut() {
        *v = (*v - max).exp();
        total = total + *v;
    }
    out.scale(T::one() / total);
    out
}
