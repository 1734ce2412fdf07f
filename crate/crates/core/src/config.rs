//! Declarative model architecture.
//!
//! A config is a TOML document with an `input` table and an ordered
//! `[[layers]]` array, each entry tagged by `type`:
//!
//! ```toml
//! [input]
//! channels = 1
//! height = 270
//! width = 360
//!
//! [[layers]]
//! type = "conv"
//! filters = 8
//! kernel_height = 5
//! kernel_width = 5
//!
//! [[layers]]
//! type = "activation"
//! function = "relu"          # or "sigmoid"
//!
//! [[layers]]
//! type = "pool"
//! height = 2
//! width = 2
//! mode = "max"               # or "average"
//!
//! [[layers]]
//! type = "global_avg_pool"   # FCN head; a CNN head uses "flatten" + "dense" (units = N)
//!
//! [[layers]]
//! type = "softmax_output"
//! classes = 2
//! ```
//!
//! `softmax_output` is a learnable linear classification layer followed by a
//! softmax; it must appear exactly once, last.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layers::{Activation, PoolMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel_height: usize,
        kernel_width: usize,
    },
    Pool {
        height: usize,
        width: usize,
        mode: PoolMode,
    },
    Activation {
        function: Activation,
    },
    Flatten,
    Dense {
        units: usize,
    },
    GlobalAvgPool,
    SoftmaxOutput {
        classes: usize,
    },
}

impl LayerSpec {
    pub fn conv(filters: usize, kernel_height: usize, kernel_width: usize) -> Self {
        LayerSpec::Conv {
            filters,
            kernel_height,
            kernel_width,
        }
    }

    pub fn pool(height: usize, width: usize, mode: PoolMode) -> Self {
        LayerSpec::Pool { height, width, mode }
    }

    pub fn relu() -> Self {
        LayerSpec::Activation {
            function: Activation::Relu,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            LayerSpec::Conv {
                filters,
                kernel_height,
                kernel_width,
            } => format!("conv({filters},{kernel_height},{kernel_width})"),
            LayerSpec::Pool { height, width, mode } => format!("pool({height},{width},{})", mode.name()),
            LayerSpec::Activation { function } => function.name().to_string(),
            LayerSpec::Flatten => "flatten".into(),
            LayerSpec::Dense { units } => format!("dense({units})"),
            LayerSpec::GlobalAvgPool => "global_avg_pool".into(),
            LayerSpec::SoftmaxOutput { classes } => format!("softmax_output({classes})"),
        }
    }

    /// Output shape for `input`, or the reason the layer cannot accept it.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        let need3 = || match input {
            [c, h, w] => Ok([*c, *h, *w]),
            _ => Err(format!("needs a 3-D [channels, height, width] input, got {input:?}")),
        };
        let need1 = || match input {
            [n] => Ok(*n),
            _ => Err(format!("needs a 1-D input, got {input:?} (missing flatten or global_avg_pool?)")),
        };
        match *self {
            LayerSpec::Conv {
                filters,
                kernel_height: m,
                kernel_width: r,
            } => {
                let [_, t, f] = need3()?;
                if filters == 0 || m == 0 || r == 0 {
                    return Err("filter count and size must be at least 1".into());
                }
                if m > t || r > f {
                    return Err(format!("filter {m}x{r} larger than input {input:?}"));
                }
                Ok(vec![filters, t - m + 1, f - r + 1])
            }
            LayerSpec::Pool { height: p, width: q, .. } => {
                let [c, h, w] = need3()?;
                if p == 0 || q == 0 {
                    return Err("pool window must be at least 1x1".into());
                }
                if p > h || q > w {
                    return Err(format!("pool window {p}x{q} larger than input {input:?}"));
                }
                Ok(vec![c, h / p, w / q])
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Flatten => {
                let [c, h, w] = need3()?;
                Ok(vec![c * h * w])
            }
            LayerSpec::GlobalAvgPool => {
                let [c, _, _] = need3()?;
                Ok(vec![c])
            }
            LayerSpec::Dense { units: out } | LayerSpec::SoftmaxOutput { classes: out } => {
                need1()?;
                if out == 0 {
                    return Err("output dimension must be at least 1".into());
                }
                Ok(vec![out])
            }
        }
    }

    /// Learnable scalars for this layer given its input shape.
    pub fn param_count(&self, input: &[usize]) -> usize {
        match *self {
            LayerSpec::Conv {
                filters,
                kernel_height,
                kernel_width,
            } => filters * (input[0] * kernel_height * kernel_width + 1),
            LayerSpec::Dense { units: out } | LayerSpec::SoftmaxOutput { classes: out } => {
                input[0] * out + out
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Flatten + dense head.
    Cnn,
    /// Global average pooling head.
    Fcn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

/// Shared trunk of both presets.
fn default_trunk() -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv(8, 5, 5),
        LayerSpec::relu(),
        LayerSpec::pool(2, 2, PoolMode::Max),
        LayerSpec::conv(16, 5, 5),
        LayerSpec::relu(),
        LayerSpec::pool(2, 2, PoolMode::Max),
    ]
}

pub const DEFAULT_INPUT: InputShape = InputShape {
    channels: 1,
    height: 270,
    width: 360,
};

impl ModelConfig {
    /// Trunk → flatten → dense(128) → relu → softmax_output(2).
    pub fn default_cnn() -> Self {
        let mut layers = default_trunk();
        layers.extend([
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 128 },
            LayerSpec::relu(),
            LayerSpec::SoftmaxOutput { classes: 2 },
        ]);
        Self {
            input: DEFAULT_INPUT,
            layers,
        }
    }

    /// Trunk → global_avg_pool → softmax_output(2).
    pub fn default_fcn() -> Self {
        let mut layers = default_trunk();
        layers.extend([LayerSpec::GlobalAvgPool, LayerSpec::SoftmaxOutput { classes: 2 }]);
        Self {
            input: DEFAULT_INPUT,
            layers,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "cnn" => Some(Self::default_cnn()),
            "fcn" => Some(Self::default_fcn()),
            _ => None,
        }
    }

    pub fn with_input(mut self, channels: usize, height: usize, width: usize) -> Self {
        self.input = InputShape {
            channels,
            height,
            width,
        };
        self
    }

    /// Layers before the head (everything up to the first flatten / global pool).
    pub fn trunk(&self) -> &[LayerSpec] {
        let end = self
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Flatten | LayerSpec::GlobalAvgPool))
            .unwrap_or(self.layers.len());
        &self.layers[..end]
    }

    pub fn flavor(&self) -> Result<Flavor> {
        let has_gap = self.layers.contains(&LayerSpec::GlobalAvgPool);
        let flatten_at = self.layers.iter().position(|l| *l == LayerSpec::Flatten);
        match (has_gap, flatten_at) {
            (true, Some(_)) => Err(Error::Config(
                "config mixes global_avg_pool and flatten; use one head".into(),
            )),
            (true, None) => Ok(Flavor::Fcn),
            (false, Some(i)) => {
                if self.layers[i..]
                    .iter()
                    .any(|l| matches!(l, LayerSpec::Dense { .. }))
                {
                    Ok(Flavor::Cnn)
                } else {
                    Err(Error::Config("flatten head needs at least one dense layer".into()))
                }
            }
            (false, None) => Err(Error::Config(
                "config needs a global_avg_pool or flatten head".into(),
            )),
        }
    }

    /// Checks the whole config and returns the shape after every layer
    /// (index 0 is the input shape).
    pub fn propagate(&self) -> Result<Vec<Vec<usize>>> {
        let dims = self.input.dims();
        if dims.contains(&0) {
            return Err(Error::Config(format!("input shape {dims:?} has a zero extent")));
        }
        let mut shapes = vec![dims.to_vec()];
        for (index, layer) in self.layers.iter().enumerate() {
            let input = shapes.last().expect("non-empty");
            let out = layer.output_shape(input).map_err(|reason| Error::Build {
                index,
                layer: layer.describe(),
                reason,
            })?;
            shapes.push(out);
        }
        let softmax: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::SoftmaxOutput { .. }))
            .map(|(i, _)| i)
            .collect();
        if softmax != [self.layers.len().wrapping_sub(1)] {
            return Err(Error::Config(
                "exactly one softmax_output is required and it must be the last layer".into(),
            ));
        }
        self.flavor()?;
        Ok(shapes)
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::SoftmaxOutput { classes }) => *classes,
            _ => 0,
        }
    }

    /// Closed-form parameter count: conv `n·(c_in·m·r+1)`, dense `in·out+out`.
    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.propagate()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, s)| l.param_count(s))
            .sum())
    }

    pub fn to_canonical_text(&self) -> String {
        toml::to_string(self).expect("model config always serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.propagate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_canonical_text()).map_err(|e| Error::io(path, e))
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_text().as_bytes());
        hex::encode(&digest[..8])
    }
}
