//! GBNB checkpoints, little-endian:
//!
//! ```text
//! "GBNB" | u32 version (1) | u32 header length | UTF-8 JSON header | f32 parameters
//! ```
//!
//! Parameters follow the generator layers in order (weight then bias per
//! layer, weights row-major `out x in`), then the discriminator hidden
//! layers, then the discriminator's logit layer.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::FeatureSpec;
use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Matrix, Mlp};
use crate::ssgan::{Discriminator, GanModel, Generator, NoiseSpec, TrainConfig};

pub const GBNB_MAGIC: &[u8; 4] = b"GBNB";
pub const GBNB_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub labels: Vec<String>,
    pub generator_dims: Vec<usize>,
    pub discriminator_dims: Vec<usize>,
    pub noise: NoiseSpec,
    pub config: TrainConfig,
    pub seed: u64,
    pub encoder: Option<FeatureSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: GanModel,
}

impl Checkpoint {
    pub fn new(
        model: GanModel,
        config: &TrainConfig,
        labels: Vec<String>,
        encoder: Option<FeatureSpec>,
    ) -> Result<Self> {
        if labels.len() != model.num_classes() {
            return Err(Error::Checkpoint(format!(
                "{} label names for a {}-class model",
                labels.len(),
                model.num_classes()
            )));
        }
        let header = CheckpointHeader {
            feature_dim: model.feature_dim(),
            num_classes: model.num_classes(),
            labels,
            generator_dims: model.generator.mlp.dims(),
            discriminator_dims: model.discriminator.mlp.dims(),
            noise: model.noise.clone(),
            config: config.clone(),
            seed: config.seed,
            encoder,
        };
        Ok(Self { header, model })
    }

    /// Fails unless the model classifies into exactly `k` classes.
    pub fn ensure_classes(&self, k: usize) -> Result<()> {
        if self.header.num_classes != k {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} classes, dataset has {k}",
                self.header.num_classes
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header =
            serde_json::to_vec(&self.header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(GBNB_MAGIC);
        out.extend_from_slice(&GBNB_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for mlp in [&self.model.generator.mlp, &self.model.discriminator.mlp] {
            for p in mlp.param_slices() {
                for &v in p {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: String| Error::Checkpoint(m);
        if bytes.len() < 12 {
            return Err(err(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != GBNB_MAGIC {
            return Err(err(format!("bad magic {:?}", &bytes[..4])));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let version = word(4) as u32;
        if version != GBNB_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let header_len = word(8);
        let body = 12usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| err("header runs past end of file".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[12..body]).map_err(|e| err(format!("header: {e}")))?;

        let h = &header;
        let consistent = h.generator_dims.len() >= 2
            && h.discriminator_dims.len() >= 2
            && h.generator_dims[0] == h.noise.dim
            && h.generator_dims.last() == Some(&h.feature_dim)
            && h.discriminator_dims[0] == h.feature_dim
            && h.discriminator_dims.last() == Some(&(h.num_classes + 1))
            && h.labels.len() == h.num_classes;
        if !consistent {
            return Err(err(format!(
                "inconsistent shapes: d={} K={} labels={} G={:?} D={:?} noise={}",
                h.feature_dim,
                h.num_classes,
                h.labels.len(),
                h.generator_dims,
                h.discriminator_dims,
                h.noise.dim
            )));
        }

        let mut values = bytes[body..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let expected: usize = [&h.generator_dims, &h.discriminator_dims]
            .iter()
            .flat_map(|d| d.windows(2).map(|w| w[0] * w[1] + w[1]))
            .sum();
        if bytes.len() - body != 4 * expected {
            return Err(err(format!(
                "parameter payload is {} bytes, shapes need {}",
                bytes.len() - body,
                4 * expected
            )));
        }
        let mut build = |dims: &[usize]| -> Result<Mlp> {
            let layers = dims
                .windows(2)
                .map(|w| {
                    let weight: Vec<f64> = values.by_ref().take(w[0] * w[1]).collect();
                    let bias: Vec<f64> = values.by_ref().take(w[1]).collect();
                    if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
                        return Err(err("non-finite parameter".into()));
                    }
                    Ok(DenseLayer {
                        weight: Matrix::new(w[1], w[0], weight)?,
                        bias,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Mlp::from_layers(layers, h.config.dropout)
        };
        let generator = Generator {
            mlp: build(&h.generator_dims)?,
        };
        let discriminator = Discriminator {
            mlp: build(&h.discriminator_dims)?,
        };
        let model = GanModel {
            generator,
            discriminator,
            noise: h.noise.clone(),
        };
        Ok(Self { header, model })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
