//! Finite-difference verification of every analytic gradient, in f64.
//!
//! Each layer is wrapped in the scalar loss `Σ wᵢ·yᵢ` with a fixed random
//! cotangent `w`, so its backward pass is checked against central
//! differences for the input and for every parameter. The end-to-end check
//! does the same for softmax cross-entropy over a small conv/relu/max-pool/
//! GAP network, at a point where no ReLU input and no max-pool runner-up lies
//! within reach of the probe step.

use std::fmt::Write as _;

use crate::config::{InputShape, LayerSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::layers::{Activation, Conv2D, Dense, PoolMode, PoolSpec};
use crate::network::{Layer, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::train::softmax_cross_entropy;

/// Deliberate gradient bugs, for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the analytic kernel gradient of every conv layer.
    ConvSignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub fault: Option<Fault>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            seed: 0,
            tolerance: 1e-4,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub name: &'static str,
    /// Largest norm-relative error over the input and parameter gradients.
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub options: GradCheckOptions,
    pub checks: Vec<LayerCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LayerCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let o = &self.options;
        let mut out = format!("gradcheck eps={:e} seed={} tolerance={:e}\n", o.eps, o.seed, o.tolerance);
        for c in &self.checks {
            let status = if c.passed { "ok" } else { "FAIL" };
            let _ = writeln!(out, "{:<22} {:>10.3e}  {status}", c.name, c.max_rel_error);
        }
        out
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn central_diff(x: &Tensor<f64>, eps: f64, mut f: impl FnMut(&Tensor<f64>) -> Result<f64>) -> Result<Tensor<f64>> {
    let mut grad = x.zeros_like();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.uniform(lo, hi)).collect()).expect("shape matches length")
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks `layer` at input `x` against the loss `Σ w·layer(x)`.
fn check_layer(layer: &Layer<f64>, x: &Tensor<f64>, opts: &GradCheckOptions, rng: &mut Rng) -> Result<f64> {
    let (y, cache) = layer.forward(x)?;
    let w = uniform(y.shape(), -1.0, 1.0, rng);
    let (dx, mut grads) = layer.backward(&cache, &w)?;
    if opts.fault == Some(Fault::ConvSignFlip) && matches!(layer, Layer::Conv(_)) {
        grads[0].scale(-1.0);
    }
    let loss = |l: &Layer<f64>, x: &Tensor<f64>| Ok(dot(&l.forward(x)?.0, &w));

    let mut worst = rel_error(dx.data(), central_diff(x, opts.eps, |x| loss(layer, x))?.data());
    for (i, g) in grads.iter().enumerate() {
        let numeric = central_diff(layer.params()[i], opts.eps, |p| {
            let mut probe = layer.clone();
            *probe.params_mut()[i] = p.clone();
            loss(&probe, x)
        })?;
        worst = worst.max(rel_error(g.data(), numeric.data()));
    }
    Ok(worst)
}

/// Values spread at least `gap` apart, in shuffled order: no max-pool ties.
fn spaced(shape: &[usize], gap: f64, rng: &mut Rng) -> Tensor<f64> {
    let len: usize = shape.iter().product();
    let mut values: Vec<f64> = (0..len).map(|i| (i as f64 - len as f64 / 2.0) * gap).collect();
    rng.shuffle(&mut values);
    Tensor::from_vec(shape, values).expect("shape matches length")
}

/// Values with magnitude in [0.1, 1]: away from the ReLU kink.
fn off_zero(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let mut t = uniform(shape, 0.1, 1.0, rng);
    for v in t.data_mut() {
        if rng.below(2) == 0 {
            *v = -*v;
        }
    }
    t
}

/// Distance from the nearest kink over a forward pass: the smallest |ReLU
/// input| and the smallest max-pool lead of a window's winner over its
/// runner-up. Windows of equal dead-ReLU zeros are locally constant and skipped.
fn kink_margin(net: &Network<f64>, x: &Tensor<f64>) -> Result<f64> {
    let mut margin = f64::INFINITY;
    let mut act = x.clone();
    for layer in net.layers() {
        match layer {
            Layer::Activation(Activation::Relu) => {
                margin = act.data().iter().fold(margin, |m, v| m.min(v.abs()));
            }
            Layer::Pool(spec) if spec.mode == PoolMode::Max => {
                let (n, h, w) = act.dims3("kink_margin")?;
                let d = act.data();
                for c in 0..n {
                    for oi in 0..h / spec.p {
                        for oj in 0..w / spec.q {
                            let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                            for i in oi * spec.p..(oi + 1) * spec.p {
                                for j in oj * spec.q..(oj + 1) * spec.q {
                                    let v = d[(c * h + i) * w + j];
                                    if v > top {
                                        second = top;
                                        top = v;
                                    } else if v > second {
                                        second = v;
                                    }
                                }
                            }
                            if !(top == 0.0 && second == 0.0) {
                                margin = margin.min(top - second);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        act = layer.forward(&act)?.0;
    }
    Ok(margin)
}

pub fn micro_config() -> ModelConfig {
    ModelConfig {
        input: InputShape {
            channels: 1,
            height: 12,
            width: 14,
        },
        layers: vec![
            LayerSpec::conv(2, 3, 3),
            LayerSpec::relu(),
            LayerSpec::pool(2, 2, PoolMode::Max),
            LayerSpec::GlobalAvgPool,
            LayerSpec::SoftmaxOutput { classes: 2 },
        ],
    }
}

const MAX_CANDIDATES: usize = 200;

fn check_end_to_end(opts: &GradCheckOptions, rng: &mut Rng) -> Result<f64> {
    let config = micro_config();
    // every probe moves a kink argument by at most eps·max(|k|, |x|, 1) ≤ eps
    let needed = 4.0 * opts.eps;
    for _ in 0..MAX_CANDIDATES {
        let mut net = Network::<f64>::build(&config, rng)?;
        for p in net.params_mut() {
            for v in p.data_mut() {
                *v = rng.uniform(-0.5, 0.5);
            }
        }
        let x = uniform(&net.input_shape(), -1.0, 1.0, rng);
        if kink_margin(&net, &x)? <= needed {
            continue;
        }
        let label = rng.below(2);
        let loss = |net: &Network<f64>, x: &Tensor<f64>| Ok(softmax_cross_entropy(&net.forward(x)?.logits, label)?.0);

        let trace = net.forward(&x)?;
        let (_, dlogits) = softmax_cross_entropy(&trace.logits, label)?;
        let (dx, grads) = net.backward_with_input(&trace, &dlogits)?;
        let mut grads = grads.0;
        if opts.fault == Some(Fault::ConvSignFlip) {
            let mut offset = 0;
            for layer in net.layers() {
                if matches!(layer, Layer::Conv(_)) {
                    grads[offset].scale(-1.0);
                }
                offset += layer.params().len();
            }
        }

        let mut worst = rel_error(dx.data(), central_diff(&x, opts.eps, |x| loss(&net, x))?.data());
        for (i, g) in grads.iter().enumerate() {
            let numeric = central_diff(net.params()[i], opts.eps, |p| {
                let mut probe = net.clone();
                *probe.params_mut()[i] = p.clone();
                loss(&probe, &x)
            })?;
            worst = worst.max(rel_error(g.data(), numeric.data()));
        }
        return Ok(worst);
    }
    Err(Error::Config(format!(
        "no kink-free point found in {MAX_CANDIDATES} candidates at eps {:e}",
        opts.eps
    )))
}

fn check_cross_entropy(opts: &GradCheckOptions, rng: &mut Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for label in 0..2 {
        let logits = uniform(&[2], -3.0, 3.0, rng);
        let (_, grad) = softmax_cross_entropy(&logits, label)?;
        let numeric = central_diff(&logits, opts.eps, |z| Ok(softmax_cross_entropy(z, label)?.0))?;
        worst = worst.max(rel_error(grad.data(), numeric.data()));
    }
    Ok(worst)
}

/// Runs every check. Deterministic in `opts`.
pub fn run(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(Error::Config(format!("eps must be positive, got {}", opts.eps)));
    }
    let root = Rng::new(opts.seed);
    let mut results: Vec<(&'static str, f64)> = Vec::new();
    let mut stream = 0u64;
    let mut next = || {
        stream += 1;
        root.fork(stream)
    };

    let mut rng = next();
    let conv = Layer::Conv(Conv2D::new(uniform(&[3, 2, 3, 4], -1.0, 1.0, &mut rng), uniform(&[3], -1.0, 1.0, &mut rng))?);
    let x = uniform(&[2, 7, 8], -1.0, 1.0, &mut rng);
    results.push(("conv", check_layer(&conv, &x, opts, &mut rng)?));

    let mut rng = next();
    let max_pool = Layer::Pool(PoolSpec::new(2, 3, PoolMode::Max)?);
    let x = spaced(&[2, 7, 8], 0.05, &mut rng);
    results.push(("max_pool", check_layer(&max_pool, &x, opts, &mut rng)?));

    let mut rng = next();
    let avg_pool = Layer::Pool(PoolSpec::new(2, 3, PoolMode::Average)?);
    let x = uniform(&[2, 7, 8], -1.0, 1.0, &mut rng);
    results.push(("avg_pool", check_layer(&avg_pool, &x, opts, &mut rng)?));

    let mut rng = next();
    let x = uniform(&[3, 5, 4], -1.0, 1.0, &mut rng);
    results.push(("global_avg_pool", check_layer(&Layer::GlobalAvgPool, &x, opts, &mut rng)?));

    let mut rng = next();
    let x = off_zero(&[2, 4, 5], &mut rng);
    results.push(("relu", check_layer(&Layer::Activation(Activation::Relu), &x, opts, &mut rng)?));

    let mut rng = next();
    let x = uniform(&[2, 4, 5], -3.0, 3.0, &mut rng);
    results.push(("sigmoid", check_layer(&Layer::Activation(Activation::Sigmoid), &x, opts, &mut rng)?));

    let mut rng = next();
    let dense = Layer::Dense(Dense::new(uniform(&[6, 4], -1.0, 1.0, &mut rng), uniform(&[4], -1.0, 1.0, &mut rng))?);
    let x = uniform(&[6], -1.0, 1.0, &mut rng);
    results.push(("dense", check_layer(&dense, &x, opts, &mut rng)?));

    let mut rng = next();
    results.push(("softmax_cross_entropy", check_cross_entropy(opts, &mut rng)?));

    let mut rng = next();
    results.push(("end_to_end", check_end_to_end(opts, &mut rng)?));

    Ok(GradCheckReport {
        options: *opts,
        checks: results
            .into_iter()
            .map(|(name, err)| LayerCheck {
                name,
                max_rel_error: err,
                passed: err < opts.tolerance,
            })
            .collect(),
    })
}
