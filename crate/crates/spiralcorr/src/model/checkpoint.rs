//! Checkpoint container: an ascii manifest followed by a little-endian
//! 64-bit-float payload.
//!
//! ```text
//! SPIRALCKPT1
//! kind=lstm-net
//! input_dim=544
//! seq_len=30
//! classes=6890
//! widths=16,150,200,250,256
//! dropout=0.3
//! augment=0
//! seed=42
//! epoch=17
//! val_score=0.1234
//! adam_t=1360
//! adam_lr=0.001
//! adam_beta1=0.9
//! adam_beta2=0.999
//! adam_epsilon=0.00000001
//! tensor param.fc_in.w 2 544 16 0
//! tensor adam_m.fc_in.w 2 544 16 8704
//! …
//! END
//! <f64 little-endian payload>
//! ```
//!
//! Tensor lines carry name, rank, dimensions, and the element offset into
//! the payload. Everything the loader needs to reproduce bit-identical
//! forward passes — parameters, Adam moments, normalization stats — lives
//! in the payload; nothing in the file depends on wall time, so identical
//! runs write identical bytes.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::nn::{AdamConfig, AdamState, ParamBlocks, Tensor};

use super::{Network, NetworkKind, NetworkSpec};

pub const CHECKPOINT_MAGIC: &str = "SPIRALCKPT1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub epoch: usize,
    pub val_score: f64,
}

/// Everything needed to resume or run a trained model.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network,
    pub augment: bool,
    /// per-dimension z-score (mean, std) of the base features, when the
    /// training run normalized
    pub normalization: Option<(Vec<f64>, Vec<f64>)>,
    pub adam: AdamState,
    pub meta: TrainMeta,
}

fn fmt_err(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Format(msg.into())
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), CheckpointError> {
    let network = &checkpoint.network;
    let spec = network.spec();
    let mut manifest = String::new();
    manifest.push_str(CHECKPOINT_MAGIC);
    manifest.push('\n');
    manifest.push_str(&format!("kind={}\n", spec.kind.as_str()));
    manifest.push_str(&format!("input_dim={}\n", spec.input_dim));
    manifest.push_str(&format!("seq_len={}\n", spec.seq_len));
    manifest.push_str(&format!("classes={}\n", spec.classes));
    let widths: Vec<String> = spec.widths.iter().map(|w| w.to_string()).collect();
    manifest.push_str(&format!("widths={}\n", widths.join(",")));
    manifest.push_str(&format!("dropout={}\n", spec.dropout));
    manifest.push_str(&format!("augment={}\n", u8::from(checkpoint.augment)));
    manifest.push_str(&format!("seed={}\n", checkpoint.meta.seed));
    manifest.push_str(&format!("epoch={}\n", checkpoint.meta.epoch));
    manifest.push_str(&format!("val_score={}\n", checkpoint.meta.val_score));
    manifest.push_str(&format!("adam_t={}\n", checkpoint.adam.t));
    manifest.push_str(&format!("adam_lr={}\n", checkpoint.adam.config.lr));
    manifest.push_str(&format!("adam_beta1={}\n", checkpoint.adam.config.beta1));
    manifest.push_str(&format!("adam_beta2={}\n", checkpoint.adam.config.beta2));
    manifest.push_str(&format!(
        "adam_epsilon={}\n",
        checkpoint.adam.config.epsilon
    ));

    let names = network.block_names();
    let mut tensors: Vec<(String, &Tensor)> = Vec::new();
    for (b, name) in names.iter().enumerate() {
        tensors.push((format!("param.{name}"), network.block(b)));
    }
    for (b, name) in names.iter().enumerate() {
        tensors.push((format!("adam_m.{name}"), &checkpoint.adam.m[b]));
    }
    for (b, name) in names.iter().enumerate() {
        tensors.push((format!("adam_v.{name}"), &checkpoint.adam.v[b]));
    }
    let norm_tensors; // keeps the (mean, std) tensors alive for the writer
    if let Some((mean, std)) = &checkpoint.normalization {
        norm_tensors = (
            Tensor::from_vec(&[mean.len()], mean.clone()),
            Tensor::from_vec(&[std.len()], std.clone()),
        );
        tensors.push(("norm.mean".to_string(), &norm_tensors.0));
        tensors.push(("norm.std".to_string(), &norm_tensors.1));
    }

    let mut offset = 0usize;
    for (name, tensor) in &tensors {
        let dims: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!(
            "tensor {} {} {} {}\n",
            name,
            tensor.shape().len(),
            dims.join(" "),
            offset
        ));
        offset += tensor.len();
    }
    manifest.push_str("END\n");

    let mut bytes = manifest.into_bytes();
    bytes.reserve(offset * 8);
    for (_, tensor) in &tensors {
        for v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
}

struct Manifest {
    fields: std::collections::HashMap<String, String>,
    tensors: Vec<(String, Vec<usize>, usize)>,
    payload_start: usize,
}

fn parse_manifest(bytes: &[u8]) -> Result<Manifest, CheckpointError> {
    let mut fields = std::collections::HashMap::new();
    let mut tensors = Vec::new();
    let mut pos = 0usize;
    let mut first = true;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .ok_or_else(|| fmt_err("truncated manifest"))?;
        let line =
            std::str::from_utf8(&bytes[pos..end]).map_err(|_| fmt_err("manifest is not utf-8"))?;
        pos = end + 1;
        if first {
            if line != CHECKPOINT_MAGIC {
                return Err(fmt_err(format!("bad magic '{line}'")));
            }
            first = false;
            continue;
        }
        if line == "END" {
            break;
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if tokens.len() < 3 {
                return Err(fmt_err(format!("bad tensor line '{line}'")));
            }
            let name = tokens[0].to_string();
            let rank: usize = tokens[1].parse().map_err(|_| fmt_err("bad rank"))?;
            if tokens.len() != 2 + rank + 1 {
                return Err(fmt_err(format!("tensor line arity mismatch '{line}'")));
            }
            let dims: Result<Vec<usize>, _> =
                tokens[2..2 + rank].iter().map(|t| t.parse()).collect();
            let dims = dims.map_err(|_| fmt_err("bad dimension"))?;
            let offset: usize = tokens[2 + rank]
                .parse()
                .map_err(|_| fmt_err("bad offset"))?;
            tensors.push((name, dims, offset));
        } else if let Some((key, value)) = line.split_once('=') {
            fields.insert(key.to_string(), value.to_string());
        } else {
            return Err(fmt_err(format!("unrecognized manifest line '{line}'")));
        }
    }
    Ok(Manifest {
        fields,
        tensors,
        payload_start: pos,
    })
}

fn field<T: std::str::FromStr>(m: &Manifest, key: &str) -> Result<T, CheckpointError> {
    m.fields
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fmt_err(format!("missing or bad field '{key}'")))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let manifest = parse_manifest(&bytes)?;

    let kind_token: String = field(&manifest, "kind")?;
    let kind = NetworkKind::parse(&kind_token)
        .ok_or_else(|| fmt_err(format!("unknown network kind '{kind_token}'")))?;
    let widths_field: String = field(&manifest, "widths")?;
    let widths_vec: Result<Vec<usize>, _> = widths_field.split(',').map(|t| t.parse()).collect();
    let widths_vec = widths_vec.map_err(|_| fmt_err("bad widths"))?;
    if widths_vec.len() != 5 {
        return Err(fmt_err("widths must list 5 layer sizes"));
    }
    let spec = NetworkSpec {
        kind,
        input_dim: field(&manifest, "input_dim")?,
        seq_len: field(&manifest, "seq_len")?,
        widths: [
            widths_vec[0],
            widths_vec[1],
            widths_vec[2],
            widths_vec[3],
            widths_vec[4],
        ],
        classes: field(&manifest, "classes")?,
        dropout: field(&manifest, "dropout")?,
    };
    let augment = field::<u8>(&manifest, "augment")? != 0;

    let payload = &bytes[manifest.payload_start..];
    let read_tensor = |name: &str| -> Result<Tensor, CheckpointError> {
        let (_, dims, offset) = manifest
            .tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| fmt_err(format!("missing tensor '{name}'")))?;
        let len: usize = dims.iter().product();
        let start = offset * 8;
        let end = start + len * 8;
        if end > payload.len() {
            return Err(fmt_err(format!("tensor '{name}' overruns payload")));
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor::from_vec(dims, data))
    };

    let mut network = Network::zeros(spec);
    let names = network.block_names();
    for (b, name) in names.iter().enumerate() {
        let tensor = read_tensor(&format!("param.{name}"))?;
        if tensor.shape() != network.block(b).shape() {
            return Err(fmt_err(format!(
                "tensor 'param.{name}' has the wrong shape"
            )));
        }
        *network.block_mut(b) = tensor;
    }
    let m: Result<Vec<Tensor>, _> = names
        .iter()
        .map(|name| read_tensor(&format!("adam_m.{name}")))
        .collect();
    let v: Result<Vec<Tensor>, _> = names
        .iter()
        .map(|name| read_tensor(&format!("adam_v.{name}")))
        .collect();
    let adam = AdamState {
        config: AdamConfig {
            lr: field(&manifest, "adam_lr")?,
            beta1: field(&manifest, "adam_beta1")?,
            beta2: field(&manifest, "adam_beta2")?,
            epsilon: field(&manifest, "adam_epsilon")?,
        },
        t: field(&manifest, "adam_t")?,
        m: m?,
        v: v?,
    };
    let normalization = if manifest.tensors.iter().any(|(n, _, _)| n == "norm.mean") {
        Some((
            read_tensor("norm.mean")?.into_data(),
            read_tensor("norm.std")?.into_data(),
        ))
    } else {
        None
    };
    Ok(Checkpoint {
        network,
        augment,
        normalization,
        adam,
        meta: TrainMeta {
            seed: field(&manifest, "seed")?,
            epoch: field(&manifest, "epoch")?,
            val_score: field(&manifest, "val_score")?,
        },
    })
}
