pub use crate::gradcheck::rel_error;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const EPS: f64 = 1e-6;

pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

/// Central-difference gradient of `f` at `x`.
pub fn central_diff(x: &Tensor<f64>, f: impl Fn(&Tensor<f64>) -> f64) -> Tensor<f64> {
    let mut grad = x.zeros_like();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + EPS;
        let up = f(&probe);
        probe.data_mut()[i] = orig - EPS;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * EPS);
    }
    grad
}
