//! Image ingestion, dataset manifests, the train/test split and a synthetic
//! signature generator.

mod catalog;
mod image;
mod split;
mod synth;

use std::path::PathBuf;

pub use self::catalog::{DatasetCatalog, PersonSamples, SampleKind, SampleRef};
pub use self::image::{load_image, resize, write_pgm};
pub use self::split::{split_dataset, split_fingerprint, DatasetSplit, TRAIN_GENUINE, TRAIN_SIMPLE};
pub use self::synth::{render_sample, synth_generate, SynthConfig, MANIFEST_NAME};

use crate::config::InputShape;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::tensor::Tensor;
use crate::train::Example;

/// A decoded sample: grayscale pixels in [0, 1], shape `[1, H, W]`.
#[derive(Debug, Clone)]
pub struct SignatureImage {
    pub pixels: Tensor<f32>,
    pub person: String,
    pub kind: SampleKind,
    pub source: PathBuf,
}

impl SignatureImage {
    pub fn label(&self) -> usize {
        self.kind.label()
    }

    pub fn to_example(&self) -> Example<f32> {
        Example {
            input: self.pixels.clone(),
            label: self.label(),
        }
    }
}

/// Loads every sample and resizes it to the model input size.
pub fn load_samples(refs: &[SampleRef], input: InputShape, exec: &Executor) -> Result<Vec<SignatureImage>> {
    if input.channels != 1 {
        return Err(Error::Config(format!(
            "signature images are grayscale; model expects {} input channels",
            input.channels
        )));
    }
    exec.try_map(refs, |r| {
        let pixels = resize(&load_image(&r.path)?, input.height, input.width)?;
        Ok(SignatureImage {
            pixels,
            person: r.person.clone(),
            kind: r.kind,
            source: r.path.clone(),
        })
    })
}
