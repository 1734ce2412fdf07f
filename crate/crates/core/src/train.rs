//! Softmax cross-entropy loss and minibatch SGD.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::network::{Gradients, Network};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// One training or test input with its class (1 = genuine, 0 = forged).
#[derive(Debug, Clone)]
pub struct Example<T = f32> {
    pub input: Tensor<T>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 128,
            epochs: 100,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch.
    pub losses: Vec<f64>,
    /// Percent of training samples classified correctly during each epoch.
    pub accuracies: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

/// Loss `−ln softmax(logits)[label]` and its gradient `softmax(logits) − onehot(label)`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    if label >= logits.len() {
        return Err(Error::Config(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.data().iter().copied().fold(T::neg_infinity(), T::max);
    let log_total = logits
        .data()
        .iter()
        .map(|&v| (v - max).exp())
        .sum::<T>()
        .ln();
    let loss = -(logits.data()[label] - max - log_total);
    let mut grad = logits.clone();
    for (i, g) in grad.data_mut().iter_mut().enumerate() {
        let p = (*g - max - log_total).exp();
        *g = if i == label { p - T::one() } else { p };
    }
    Ok((loss, grad))
}

/// `θ − lr·g`.
pub fn sgd_step<T: Real>(params: &Tensor<T>, grads: &Tensor<T>, lr: T) -> Result<Tensor<T>> {
    let mut out = params.clone();
    sgd_update(&mut out, grads, lr)?;
    Ok(out)
}

fn sgd_update<T: Real>(params: &mut Tensor<T>, grads: &Tensor<T>, lr: T) -> Result<()> {
    if params.shape() != grads.shape() {
        return Err(Error::shape("sgd_step", params.shape(), grads.shape()));
    }
    for (p, &g) in params.data_mut().iter_mut().zip(grads.data()) {
        *p = *p - lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SampleGrad<T> {
    pub loss: f64,
    pub predicted: usize,
    pub grads: Gradients<T>,
}

pub fn loss_and_grad<T: Real>(net: &Network<T>, example: &Example<T>) -> Result<SampleGrad<T>> {
    let trace = net.forward(&example.input)?;
    let (loss, dlogits) = softmax_cross_entropy(&trace.logits, example.label)?;
    let grads = net.backward(&trace, &dlogits)?;
    Ok(SampleGrad {
        loss: loss.as_f64(),
        predicted: trace.probs.argmax()?,
        grads,
    })
}

/// Applies `θ ← θ − lr·g` to every parameter of `net`.
pub fn apply_gradients<T: Real>(net: &mut Network<T>, grads: &Gradients<T>, lr: T) -> Result<()> {
    let params = net.params_mut();
    if params.len() != grads.0.len() {
        return Err(Error::Config("gradient count does not match parameters".into()));
    }
    for (p, g) in params.into_iter().zip(&grads.0) {
        sgd_update(p, g, lr)?;
    }
    Ok(())
}

/// Minibatch SGD.
///
/// Each epoch shuffles the sample order with stream `epoch` of the seed, splits
/// it into batches of `batch_size` (the short tail batch is kept), averages
/// per-sample gradients and steps. Per-sample work is spread over `exec`, but
/// gradient sums are formed in sample order, so results do not depend on the
/// thread count.
pub fn train<T: Real>(
    net: &mut Network<T>,
    data: &[Example<T>],
    cfg: &SgdConfig,
    exec: &Executor,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let input = net.input_shape();
    if let Some(bad) = data.iter().find(|e| e.input.shape() != input) {
        return Err(Error::shape("training sample", bad.input.shape(), &input));
    }
    let root = Rng::new(cfg.seed);
    let lr = T::of(cfg.learning_rate);
    // bound the number of live per-sample gradient sets
    let wave = (exec.threads() * 2).max(1);
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..data.len()).collect();
        root.fork(epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;

        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut sum = net.zero_gradients();
            let mut batch_loss = 0.0;
            for wave_ids in batch.chunks(wave) {
                let shared: &Network<T> = net;
                let results = exec.try_map(wave_ids, |&i| loss_and_grad(shared, &data[i]))?;
                for (r, &i) in results.iter().zip(wave_ids) {
                    sum.add_assign(&r.grads)?;
                    batch_loss += r.loss;
                    correct += usize::from(r.predicted == data[i].label);
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            loss_sum += batch_loss;
            sum.scale(T::one() / T::of(batch.len() as f64));
            apply_gradients(net, &sum, lr)?;
        }

        let n = data.len() as f64;
        report.losses.push(loss_sum / n);
        report.accuracies.push(100.0 * correct as f64 / n);
        report.epoch_seconds.push(started.elapsed().as_secs_f64());
        log::info!(
            "epoch {}/{}: loss {:.6}, train accuracy {:.2}%",
            epoch + 1,
            cfg.epochs,
            loss_sum / n,
            100.0 * correct as f64 / n
        );
    }
    Ok(report)
}
