//! Decision-based evaluation: FAR, FRR and accuracy, plus tabular reports.
//!
//! A sample is accepted when the genuine class wins the argmax. All forgery
//! kinds pool into one FAR; per-kind FARs are kept as supplementary columns.

mod metrics;
mod report;

pub use self::metrics::{accuracy, far, frr, ConfusionCounts};
pub use self::report::{parse_csv, paper_reference_rows, render_csv, render_text, round_half_up, MetricsRow, CSV_HEADER};

use crate::data::{SampleKind, SignatureImage};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::network::Network;
use crate::tensor::Tensor;

pub trait Verifier: Sync {
    /// `true` accepts the sample as genuine.
    fn accepts(&self, pixels: &Tensor<f32>) -> Result<bool>;
}

impl Verifier for Network<f32> {
    fn accepts(&self, pixels: &Tensor<f32>) -> Result<bool> {
        Ok(self.predict(pixels)?.argmax()? == SampleKind::Genuine.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub kind: SampleKind,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    /// Tallies restricted to each kind, indexed like [`SampleKind::ALL`].
    pub by_kind: [ConfusionCounts; 4],
    pub decisions: Vec<Decision>,
}

impl Evaluation {
    pub fn from_decisions(decisions: Vec<Decision>) -> Self {
        let mut counts = ConfusionCounts::default();
        let mut by_kind = [ConfusionCounts::default(); 4];
        for d in &decisions {
            let genuine = d.kind == SampleKind::Genuine;
            counts.record(genuine, d.accepted);
            by_kind[kind_index(d.kind)].record(genuine, d.accepted);
        }
        Self {
            counts,
            by_kind,
            decisions,
        }
    }

    pub fn of_kind(&self, kind: SampleKind) -> &ConfusionCounts {
        &self.by_kind[kind_index(kind)]
    }

    /// FAR over one forgery kind; `None` when the test set has none of it.
    pub fn far_of(&self, kind: SampleKind) -> Option<f64> {
        far(self.of_kind(kind)).ok()
    }
}

fn kind_index(kind: SampleKind) -> usize {
    SampleKind::ALL.iter().position(|&k| k == kind).expect("kind listed in ALL")
}

pub fn evaluate<V: Verifier>(verifier: &V, samples: &[SignatureImage], exec: &Executor) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let decisions = exec.try_map(samples, |s| {
        Ok::<_, Error>(Decision {
            kind: s.kind,
            accepted: verifier.accepts(&s.pixels)?,
        })
    })?;
    Ok(Evaluation::from_decisions(decisions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::rng::Rng;

    struct Constant(bool);

    impl Verifier for Constant {
        fn accepts(&self, _: &Tensor<f32>) -> Result<bool> {
            Ok(self.0)
        }
    }

    fn sample(kind: SampleKind, h: usize, w: usize, fill: f32) -> SignatureImage {
        SignatureImage {
            pixels: Tensor::full(&[1, h, w], fill).unwrap(),
            person: "p".into(),
            kind,
            source: "mem".into(),
        }
    }

    fn five_and_five() -> Vec<SignatureImage> {
        let kinds = [SampleKind::Genuine; 5]
            .into_iter()
            .chain([SampleKind::Simple, SampleKind::Skilled, SampleKind::Opposite, SampleKind::Simple, SampleKind::Skilled]);
        kinds.map(|k| sample(k, 4, 4, 0.5)).collect()
    }

    #[test]
    fn constant_classifiers() {
        let set = five_and_five();
        let exec = Executor::sequential();
        let all_genuine = evaluate(&Constant(true), &set, &exec).unwrap();
        assert_eq!(all_genuine.counts, ConfusionCounts::new(5, 0, 5, 0));
        let all_forged = evaluate(&Constant(false), &set, &exec).unwrap();
        assert_eq!(all_forged.counts, ConfusionCounts::new(0, 5, 0, 5));
        assert_eq!(all_genuine.far_of(SampleKind::Simple), Some(100.0));
        assert!(evaluate(&Constant(true), &[], &exec).is_err());
    }

    #[test]
    fn network_evaluation_is_repeatable_and_shape_checked() {
        let config = ModelConfig::default_fcn().with_input(1, 20, 24);
        let net = Network::build(&config, &mut Rng::new(2)).unwrap();
        let mut rng = Rng::new(3);
        let set: Vec<_> = (0..12)
            .map(|i| sample(SampleKind::ALL[i % 4], 20, 24, rng.next_f64() as f32))
            .collect();
        let a = evaluate(&net, &set, &Executor::sequential()).unwrap();
        let b = evaluate(&net, &set, &Executor::with_threads(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.total(), 12);
        let wrong = [sample(SampleKind::Genuine, 10, 10, 0.0)];
        assert!(evaluate(&net, &wrong, &Executor::sequential()).is_err());
    }
}
