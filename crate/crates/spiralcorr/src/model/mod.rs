//! The two correspondence networks.
//!
//! Both cast correspondence as per-vertex classification over a template's
//! vertex set and share the layout `FC(w0) + three neighborhood layers +
//! FC(w4) + FC(classes)`, with ReLU after every layer except the last
//! (softmax) and dropout after the first and the penultimate layer.
//!
//! - `LSTM-NET` (default widths 16/150/200/250/256): the per-step FC feeds
//!   three stacked LSTM layers running over the spiral sequence; each layer
//!   consumes the previous layer's per-step hidden states and the last
//!   layer's final hidden state feeds the head.
//! - `FCS-NET` (default widths 16/100/150/200/256): each FCS layer
//!   concatenates the N per-step vectors of a fixed-length spiral into one
//!   input row per vertex; deeper FCS layers re-gather their predecessor's
//!   per-vertex outputs along the same spiral, the way stacked
//!   convolutions re-aggregate neighborhoods.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, TrainMeta};
pub use train::{accuracy_on, train, DatasetItem, EpochStats, TrainConfig, TrainResult};

use rand::Rng;
use thiserror::Error;

use crate::features::{serialize_batch, FeatureError, FeatureMatrix, SerializedBatch};
use crate::mesh::HalfEdgeMesh;
use crate::nn::lstm::{last_hidden, LstmGrads, LstmParams, LstmSequenceCache};
use crate::nn::ops::{
    dropout, dropout_backward, relu, relu_backward, softmax, Linear, LinearGrads, Mode,
};
use crate::nn::{AdamError, ParamBlocks, Tensor};
use crate::rng::derive_rng;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("feature dimension {got} does not match the model's base dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label map covers {got} vertices, mesh has {expected}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, mesh {mesh_index}")]
    NonFiniteLoss { epoch: usize, mesh_index: usize },
    #[error(transparent)]
    Adam(#[from] AdamError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    LstmNet,
    FcsNet,
}

impl NetworkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NetworkKind::LstmNet => "lstm-net",
            NetworkKind::FcsNet => "fcs-net",
        }
    }

    pub fn parse(token: &str) -> Option<NetworkKind> {
        match token {
            "lstm-net" | "lstm" => Some(NetworkKind::LstmNet),
            "fcs-net" | "fcs" => Some(NetworkKind::FcsNet),
            _ => None,
        }
    }
}

/// Architecture description: input dimension D' (after any metric
/// augmentation), sequence length, the five layer widths, class count, and
/// dropout probability.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub input_dim: usize,
    pub seq_len: usize,
    pub widths: [usize; 5],
    pub classes: usize,
    pub dropout: f64,
}

impl NetworkSpec {
    pub const LSTM_WIDTHS: [usize; 5] = [16, 150, 200, 250, 256];
    pub const FCS_WIDTHS: [usize; 5] = [16, 100, 150, 200, 256];

    pub fn lstm_net(input_dim: usize, seq_len: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            kind: NetworkKind::LstmNet,
            input_dim,
            seq_len,
            widths: Self::LSTM_WIDTHS,
            classes,
            dropout: 0.3,
        }
    }

    pub fn fcs_net(input_dim: usize, seq_len: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            kind: NetworkKind::FcsNet,
            input_dim,
            seq_len,
            widths: Self::FCS_WIDTHS,
            classes,
            dropout: 0.3,
        }
    }

    pub fn with_widths(mut self, widths: [usize; 5]) -> NetworkSpec {
        self.widths = widths;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> NetworkSpec {
        self.dropout = p;
        self
    }
}

/// Per-vertex classification output: argmax template vertex per source
/// vertex, with the full distribution kept on request.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub targets: Vec<usize>,
    pub probabilities: Option<Tensor>,
}

// ---------------------------------------------------------------------------
// LSTM-NET

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub spec: NetworkSpec,
    pub fc_in: Linear,
    pub lstm1: LstmParams,
    pub lstm2: LstmParams,
    pub lstm3: LstmParams,
    pub fc_mid: Linear,
    pub fc_out: Linear,
}

#[derive(Debug, Clone)]
pub struct LstmNetGrads {
    pub fc_in: LinearGrads,
    pub lstm1: LstmGrads,
    pub lstm2: LstmGrads,
    pub lstm3: LstmGrads,
    pub fc_mid: LinearGrads,
    pub fc_out: LinearGrads,
}

pub struct LstmNetCache {
    steps_x: Vec<Tensor>,
    h0_relu: Vec<Tensor>,
    h0_masks: Vec<Vec<f64>>,
    h0_out: Vec<Tensor>,
    lstm1_cache: LstmSequenceCache,
    r1: Vec<Tensor>,
    lstm2_cache: LstmSequenceCache,
    r2: Vec<Tensor>,
    lstm3_cache: LstmSequenceCache,
    last_relu: Tensor,
    mid_relu: Tensor,
    mid_mask: Vec<f64>,
    mid_out: Tensor,
    pub probs: Tensor,
}

impl LstmNet {
    pub fn new(spec: NetworkSpec, rng: &mut impl Rng) -> LstmNet {
        assert_eq!(spec.kind, NetworkKind::LstmNet);
        let [w0, w1, w2, w3, w4] = spec.widths;
        LstmNet {
            fc_in: Linear::new(spec.input_dim, w0, rng),
            lstm1: LstmParams::new(w0, w1, rng),
            lstm2: LstmParams::new(w1, w2, rng),
            lstm3: LstmParams::new(w2, w3, rng),
            fc_mid: Linear::new(w3, w4, rng),
            fc_out: Linear::new(w4, spec.classes, rng),
            spec,
        }
    }

    pub fn zeros(spec: NetworkSpec) -> LstmNet {
        assert_eq!(spec.kind, NetworkKind::LstmNet);
        let [w0, w1, w2, w3, w4] = spec.widths;
        LstmNet {
            fc_in: Linear::zeros(spec.input_dim, w0),
            lstm1: LstmParams::zeros(w0, w1),
            lstm2: LstmParams::zeros(w1, w2),
            lstm3: LstmParams::zeros(w2, w3),
            fc_mid: Linear::zeros(w3, w4),
            fc_out: Linear::zeros(w4, spec.classes),
            spec,
        }
    }

    pub fn forward(
        &self,
        batch: &SerializedBatch,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> (Tensor, LstmNetCache) {
        assert_eq!(
            batch.step_dim, self.spec.input_dim,
            "batch step dimension mismatch"
        );
        let v = batch.vertex_count;
        let n = batch.seq_len;
        let p = self.spec.dropout;

        let steps_x: Vec<Tensor> = (0..n)
            .map(|t| {
                let mut data = Vec::with_capacity(v * batch.step_dim);
                for row in 0..v {
                    data.extend_from_slice(batch.step(row, t));
                }
                Tensor::from_vec(&[v, batch.step_dim], data)
            })
            .collect();

        let mut h0_relu = Vec::with_capacity(n);
        let mut h0_masks = Vec::with_capacity(n);
        let mut h0_out = Vec::with_capacity(n);
        for x in &steps_x {
            let a = relu(&self.fc_in.forward(x));
            let (dropped, mask) = dropout(&a, p, mode, rng);
            h0_relu.push(a);
            h0_masks.push(mask);
            h0_out.push(dropped);
        }

        let (hidden1, lstm1_cache) = self.lstm1.forward_sequence(&h0_out, &batch.pad_mask);
        let r1: Vec<Tensor> = hidden1.iter().map(relu).collect();
        let (hidden2, lstm2_cache) = self.lstm2.forward_sequence(&r1, &batch.pad_mask);
        let r2: Vec<Tensor> = hidden2.iter().map(relu).collect();
        let (hidden3, lstm3_cache) = self.lstm3.forward_sequence(&r2, &batch.pad_mask);
        let last = last_hidden(&hidden3, &lstm3_cache.lengths);
        let last_relu = relu(&last);

        let mid_relu = relu(&self.fc_mid.forward(&last_relu));
        let (mid_out, mid_mask) = dropout(&mid_relu, p, mode, rng);
        let probs = softmax(&self.fc_out.forward(&mid_out));
        let cache = LstmNetCache {
            steps_x,
            h0_relu,
            h0_masks,
            h0_out,
            lstm1_cache,
            r1,
            lstm2_cache,
            r2,
            lstm3_cache,
            last_relu,
            mid_relu,
            mid_mask,
            mid_out,
            probs: probs.clone(),
        };
        (probs, cache)
    }

    pub fn zero_grads(&self) -> LstmNetGrads {
        LstmNetGrads {
            fc_in: self.fc_in.zero_grads(),
            lstm1: self.lstm1.zero_grads(),
            lstm2: self.lstm2.zero_grads(),
            lstm3: self.lstm3.zero_grads(),
            fc_mid: self.fc_mid.zero_grads(),
            fc_out: self.fc_out.zero_grads(),
        }
    }

    pub fn backward(
        &self,
        batch: &SerializedBatch,
        cache: &LstmNetCache,
        d_logits: &Tensor,
    ) -> LstmNetGrads {
        let mut grads = self.zero_grads();
        let n = batch.seq_len;
        let mask = &batch.pad_mask;

        let d_mid_out = self
            .fc_out
            .backward(&cache.mid_out, d_logits, &mut grads.fc_out);
        let d_mid_relu = dropout_backward(&d_mid_out, &cache.mid_mask);
        let d_mid = relu_backward(&cache.mid_relu, &d_mid_relu);
        let d_last_relu = self
            .fc_mid
            .backward(&cache.last_relu, &d_mid, &mut grads.fc_mid);
        let d_last = relu_backward(&cache.last_relu, &d_last_relu);

        // route the head gradient to each row's final real step
        let hd3 = self.lstm3.hidden_dim();
        let mut d_hidden3: Vec<Tensor> = (0..n)
            .map(|_| Tensor::zeros(&[batch.vertex_count, hd3]))
            .collect();
        for (row, &len) in cache.lstm3_cache.lengths.iter().enumerate() {
            d_hidden3[len - 1]
                .row_mut(row)
                .copy_from_slice(d_last.row(row));
        }
        let d_r2 = self.lstm3.backward_sequence(
            &cache.r2,
            mask,
            &cache.lstm3_cache,
            &d_hidden3,
            &mut grads.lstm3,
        );

        let d_hidden2: Vec<Tensor> = cache
            .r2
            .iter()
            .zip(&d_r2)
            .map(|(out, d)| relu_backward(out, d))
            .collect();
        let d_r1 = self.lstm2.backward_sequence(
            &cache.r1,
            mask,
            &cache.lstm2_cache,
            &d_hidden2,
            &mut grads.lstm2,
        );

        let d_hidden1: Vec<Tensor> = cache
            .r1
            .iter()
            .zip(&d_r1)
            .map(|(out, d)| relu_backward(out, d))
            .collect();
        let d_h0 = self.lstm1.backward_sequence(
            &cache.h0_out,
            mask,
            &cache.lstm1_cache,
            &d_hidden1,
            &mut grads.lstm1,
        );

        for t in 0..n {
            let d_drop = dropout_backward(&d_h0[t], &cache.h0_masks[t]);
            let d_fc = relu_backward(&cache.h0_relu[t], &d_drop);
            self.fc_in
                .backward(&cache.steps_x[t], &d_fc, &mut grads.fc_in);
        }
        grads
    }
}

// ---------------------------------------------------------------------------
// FCS-NET

#[derive(Debug, Clone, PartialEq)]
pub struct FcsNet {
    pub spec: NetworkSpec,
    pub fc_in: Linear,
    pub fcs1: Linear,
    pub fcs2: Linear,
    pub fcs3: Linear,
    pub fc_mid: Linear,
    pub fc_out: Linear,
}

#[derive(Debug, Clone)]
pub struct FcsNetGrads {
    pub fc_in: LinearGrads,
    pub fcs1: LinearGrads,
    pub fcs2: LinearGrads,
    pub fcs3: LinearGrads,
    pub fc_mid: LinearGrads,
    pub fc_out: LinearGrads,
}

pub struct FcsNetCache {
    x_flat: Tensor,
    h0_relu: Tensor,
    h0_mask: Vec<f64>,
    h0_final: Tensor,
    y1: Tensor,
    g1: Tensor,
    y2: Tensor,
    g2: Tensor,
    y3: Tensor,
    mid_relu: Tensor,
    mid_mask: Vec<f64>,
    mid_out: Tensor,
    pub probs: Tensor,
}

/// Gathers per-vertex rows along spiral indices into (V·N)×D; padding
/// indices produce zero rows.
fn gather_rows(src: &Tensor, indices: &[usize]) -> Tensor {
    let d = src.cols();
    let mut out = Tensor::zeros(&[indices.len(), d]);
    for (row, &idx) in indices.iter().enumerate() {
        if idx != usize::MAX {
            out.row_mut(row).copy_from_slice(src.row(idx));
        }
    }
    out
}

/// Transpose of [`gather_rows`]: accumulates (V·N)×D gradients back onto
/// the V×D source rows (batch order, deterministic).
fn scatter_rows(d_gathered: &Tensor, indices: &[usize], vertex_count: usize) -> Tensor {
    let d = d_gathered.cols();
    let mut out = Tensor::zeros(&[vertex_count, d]);
    for (row, &idx) in indices.iter().enumerate() {
        if idx != usize::MAX {
            let src = d_gathered.row(row);
            for (o, &g) in out.row_mut(idx).iter_mut().zip(src) {
                *o += g;
            }
        }
    }
    out
}

fn zero_pad_rows(x: &mut Tensor, mask: &[bool]) {
    assert_eq!(x.rows(), mask.len());
    for (row, &real) in mask.iter().enumerate() {
        if !real {
            x.row_mut(row).iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

impl FcsNet {
    pub fn new(spec: NetworkSpec, rng: &mut impl Rng) -> FcsNet {
        assert_eq!(spec.kind, NetworkKind::FcsNet);
        let [w0, w1, w2, w3, w4] = spec.widths;
        let n = spec.seq_len;
        FcsNet {
            fc_in: Linear::new(spec.input_dim, w0, rng),
            fcs1: Linear::new(n * w0, w1, rng),
            fcs2: Linear::new(n * w1, w2, rng),
            fcs3: Linear::new(n * w2, w3, rng),
            fc_mid: Linear::new(w3, w4, rng),
            fc_out: Linear::new(w4, spec.classes, rng),
            spec,
        }
    }

    pub fn zeros(spec: NetworkSpec) -> FcsNet {
        assert_eq!(spec.kind, NetworkKind::FcsNet);
        let [w0, w1, w2, w3, w4] = spec.widths;
        let n = spec.seq_len;
        FcsNet {
            fc_in: Linear::zeros(spec.input_dim, w0),
            fcs1: Linear::zeros(n * w0, w1),
            fcs2: Linear::zeros(n * w1, w2),
            fcs3: Linear::zeros(n * w2, w3),
            fc_mid: Linear::zeros(w3, w4),
            fc_out: Linear::zeros(w4, spec.classes),
            spec,
        }
    }

    pub fn forward(
        &self,
        batch: &SerializedBatch,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> (Tensor, FcsNetCache) {
        assert_eq!(
            batch.step_dim, self.spec.input_dim,
            "batch step dimension mismatch"
        );
        assert_eq!(batch.seq_len, self.spec.seq_len, "sequence length mismatch");
        let v = batch.vertex_count;
        let n = batch.seq_len;
        let p = self.spec.dropout;
        let [w0, w1, w2, _, _] = self.spec.widths;

        let x_flat = Tensor::from_vec(&[v * n, batch.step_dim], batch.inputs.clone());
        let h0_relu = relu(&self.fc_in.forward(&x_flat));
        let (mut h0_final, h0_mask) = dropout(&h0_relu, p, mode, rng);
        zero_pad_rows(&mut h0_final, &batch.pad_mask);

        let y1 = relu(&self.fcs1.forward(&h0_final.clone().reshape(&[v, n * w0])));
        let g1 = gather_rows(&y1, &batch.spiral_indices);
        let y2 = relu(&self.fcs2.forward(&g1.clone().reshape(&[v, n * w1])));
        let g2 = gather_rows(&y2, &batch.spiral_indices);
        let y3 = relu(&self.fcs3.forward(&g2.clone().reshape(&[v, n * w2])));

        let mid_relu = relu(&self.fc_mid.forward(&y3));
        let (mid_out, mid_mask) = dropout(&mid_relu, p, mode, rng);
        let probs = softmax(&self.fc_out.forward(&mid_out));
        let cache = FcsNetCache {
            x_flat,
            h0_relu,
            h0_mask,
            h0_final,
            y1,
            g1,
            y2,
            g2,
            y3,
            mid_relu,
            mid_mask,
            mid_out,
            probs: probs.clone(),
        };
        (probs, cache)
    }

    pub fn zero_grads(&self) -> FcsNetGrads {
        FcsNetGrads {
            fc_in: self.fc_in.zero_grads(),
            fcs1: self.fcs1.zero_grads(),
            fcs2: self.fcs2.zero_grads(),
            fcs3: self.fcs3.zero_grads(),
            fc_mid: self.fc_mid.zero_grads(),
            fc_out: self.fc_out.zero_grads(),
        }
    }

    pub fn backward(
        &self,
        batch: &SerializedBatch,
        cache: &FcsNetCache,
        d_logits: &Tensor,
    ) -> FcsNetGrads {
        let mut grads = self.zero_grads();
        let v = batch.vertex_count;
        let n = batch.seq_len;
        let [w0, w1, w2, _, _] = self.spec.widths;

        let d_mid_out = self
            .fc_out
            .backward(&cache.mid_out, d_logits, &mut grads.fc_out);
        let d_mid_relu = dropout_backward(&d_mid_out, &cache.mid_mask);
        let d_mid = relu_backward(&cache.mid_relu, &d_mid_relu);
        let d_y3_relu = self.fc_mid.backward(&cache.y3, &d_mid, &mut grads.fc_mid);
        let d_y3 = relu_backward(&cache.y3, &d_y3_relu);

        let d_g2_flat = self.fcs3.backward(
            &cache.g2.clone().reshape(&[v, n * w2]),
            &d_y3,
            &mut grads.fcs3,
        );
        let d_g2 = d_g2_flat.reshape(&[v * n, w2]);
        let d_y2_scattered = scatter_rows(&d_g2, &batch.spiral_indices, v);
        let d_y2 = relu_backward(&cache.y2, &d_y2_scattered);

        let d_g1_flat = self.fcs2.backward(
            &cache.g1.clone().reshape(&[v, n * w1]),
            &d_y2,
            &mut grads.fcs2,
        );
        let d_g1 = d_g1_flat.reshape(&[v * n, w1]);
        let d_y1_scattered = scatter_rows(&d_g1, &batch.spiral_indices, v);
        let d_y1 = relu_backward(&cache.y1, &d_y1_scattered);

        let d_h0_flat = self.fcs1.backward(
            &cache.h0_final.clone().reshape(&[v, n * w0]),
            &d_y1,
            &mut grads.fcs1,
        );
        let mut d_h0 = d_h0_flat.reshape(&[v * n, w0]);
        zero_pad_rows(&mut d_h0, &batch.pad_mask);
        let d_h0_drop = dropout_backward(&d_h0, &cache.h0_mask);
        let d_fc = relu_backward(&cache.h0_relu, &d_h0_drop);
        self.fc_in.backward(&cache.x_flat, &d_fc, &mut grads.fc_in);
        grads
    }
}

// ---------------------------------------------------------------------------
// Unified network handle

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Network {
    Lstm(LstmNet),
    Fcs(FcsNet),
}

pub enum NetworkCache {
    Lstm(LstmNetCache),
    Fcs(FcsNetCache),
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum NetworkGrads {
    Lstm(LstmNetGrads),
    Fcs(FcsNetGrads),
}

impl NetworkGrads {
    pub fn blocks(&self) -> Vec<&Tensor> {
        match self {
            NetworkGrads::Lstm(g) => {
                let mut blocks = g.fc_in.blocks();
                blocks.extend(g.lstm1.blocks());
                blocks.extend(g.lstm2.blocks());
                blocks.extend(g.lstm3.blocks());
                blocks.extend(g.fc_mid.blocks());
                blocks.extend(g.fc_out.blocks());
                blocks
            }
            NetworkGrads::Fcs(g) => {
                let mut blocks = g.fc_in.blocks();
                blocks.extend(g.fcs1.blocks());
                blocks.extend(g.fcs2.blocks());
                blocks.extend(g.fcs3.blocks());
                blocks.extend(g.fc_mid.blocks());
                blocks.extend(g.fc_out.blocks());
                blocks
            }
        }
    }
}

/// Builds a freshly initialized network from its spec.
pub fn build_network(spec: NetworkSpec, rng: &mut impl Rng) -> Network {
    match spec.kind {
        NetworkKind::LstmNet => Network::Lstm(LstmNet::new(spec, rng)),
        NetworkKind::FcsNet => Network::Fcs(FcsNet::new(spec, rng)),
    }
}

impl Network {
    pub fn zeros(spec: NetworkSpec) -> Network {
        match spec.kind {
            NetworkKind::LstmNet => Network::Lstm(LstmNet::zeros(spec)),
            NetworkKind::FcsNet => Network::Fcs(FcsNet::zeros(spec)),
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        match self {
            Network::Lstm(n) => &n.spec,
            Network::Fcs(n) => &n.spec,
        }
    }

    pub fn forward(
        &self,
        batch: &SerializedBatch,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> (Tensor, NetworkCache) {
        match self {
            Network::Lstm(n) => {
                let (p, c) = n.forward(batch, mode, rng);
                (p, NetworkCache::Lstm(c))
            }
            Network::Fcs(n) => {
                let (p, c) = n.forward(batch, mode, rng);
                (p, NetworkCache::Fcs(c))
            }
        }
    }

    pub fn backward(
        &self,
        batch: &SerializedBatch,
        cache: &NetworkCache,
        d_logits: &Tensor,
    ) -> NetworkGrads {
        match (self, cache) {
            (Network::Lstm(n), NetworkCache::Lstm(c)) => {
                NetworkGrads::Lstm(n.backward(batch, c, d_logits))
            }
            (Network::Fcs(n), NetworkCache::Fcs(c)) => {
                NetworkGrads::Fcs(n.backward(batch, c, d_logits))
            }
            _ => panic!("cache does not belong to this network"),
        }
    }

    fn linear_blocks(&self) -> Vec<(String, &Linear)> {
        match self {
            Network::Lstm(n) => vec![
                ("fc_in".into(), &n.fc_in),
                ("fc_mid".into(), &n.fc_mid),
                ("fc_out".into(), &n.fc_out),
            ],
            Network::Fcs(n) => vec![
                ("fc_in".into(), &n.fc_in),
                ("fcs1".into(), &n.fcs1),
                ("fcs2".into(), &n.fcs2),
                ("fcs3".into(), &n.fcs3),
                ("fc_mid".into(), &n.fc_mid),
                ("fc_out".into(), &n.fc_out),
            ],
        }
    }

    /// Per-layer parameter counts in architecture order.
    pub fn layer_param_counts(&self) -> Vec<(String, usize)> {
        match self {
            Network::Lstm(n) => vec![
                ("fc_in".into(), n.fc_in.param_count()),
                ("lstm1".into(), n.lstm1.param_count()),
                ("lstm2".into(), n.lstm2.param_count()),
                ("lstm3".into(), n.lstm3.param_count()),
                ("fc_mid".into(), n.fc_mid.param_count()),
                ("fc_out".into(), n.fc_out.param_count()),
            ],
            Network::Fcs(_) => self
                .linear_blocks()
                .iter()
                .map(|(name, l)| (name.clone(), l.param_count()))
                .collect(),
        }
    }
}

/// Exact number of scalar learnables.
pub fn count_params(network: &Network) -> usize {
    network.param_count()
}

impl ParamBlocks for Network {
    fn block_names(&self) -> Vec<String> {
        match self {
            Network::Lstm(n) => {
                let mut names: Vec<String> = vec!["fc_in.w".into(), "fc_in.b".into()];
                for (layer, params) in [
                    ("lstm1", &n.lstm1),
                    ("lstm2", &n.lstm2),
                    ("lstm3", &n.lstm3),
                ] {
                    for sub in params.block_names() {
                        names.push(format!("{layer}.{sub}"));
                    }
                }
                names.push("fc_mid.w".into());
                names.push("fc_mid.b".into());
                names.push("fc_out.w".into());
                names.push("fc_out.b".into());
                names
            }
            Network::Fcs(_) => {
                let mut names = Vec::new();
                for layer in ["fc_in", "fcs1", "fcs2", "fcs3", "fc_mid", "fc_out"] {
                    names.push(format!("{layer}.w"));
                    names.push(format!("{layer}.b"));
                }
                names
            }
        }
    }

    fn num_blocks(&self) -> usize {
        match self {
            Network::Lstm(_) => 2 + 3 * 8 + 2 + 2,
            Network::Fcs(_) => 12,
        }
    }

    fn block(&self, idx: usize) -> &Tensor {
        match self {
            Network::Lstm(n) => match idx {
                0 => &n.fc_in.w,
                1 => &n.fc_in.b,
                2..=9 => n.lstm1.block(idx - 2),
                10..=17 => n.lstm2.block(idx - 10),
                18..=25 => n.lstm3.block(idx - 18),
                26 => &n.fc_mid.w,
                27 => &n.fc_mid.b,
                28 => &n.fc_out.w,
                29 => &n.fc_out.b,
                _ => panic!("lstm-net has 30 blocks"),
            },
            Network::Fcs(n) => {
                let layers = [&n.fc_in, &n.fcs1, &n.fcs2, &n.fcs3, &n.fc_mid, &n.fc_out];
                let layer = layers[idx / 2];
                if idx.is_multiple_of(2) {
                    &layer.w
                } else {
                    &layer.b
                }
            }
        }
    }

    fn block_mut(&mut self, idx: usize) -> &mut Tensor {
        match self {
            Network::Lstm(n) => match idx {
                0 => &mut n.fc_in.w,
                1 => &mut n.fc_in.b,
                2..=9 => n.lstm1.block_mut(idx - 2),
                10..=17 => n.lstm2.block_mut(idx - 10),
                18..=25 => n.lstm3.block_mut(idx - 18),
                26 => &mut n.fc_mid.w,
                27 => &mut n.fc_mid.b,
                28 => &mut n.fc_out.w,
                29 => &mut n.fc_out.b,
                _ => panic!("lstm-net has 30 blocks"),
            },
            Network::Fcs(n) => {
                let layers = [
                    &mut n.fc_in,
                    &mut n.fcs1,
                    &mut n.fcs2,
                    &mut n.fcs3,
                    &mut n.fc_mid,
                    &mut n.fc_out,
                ];
                let layer = layers.into_iter().nth(idx / 2).unwrap();
                if idx.is_multiple_of(2) {
                    &mut layer.w
                } else {
                    &mut layer.b
                }
            }
        }
    }
}

/// Runs a checkpointed model on one mesh: dropout in eval mode, spiral
/// starts drawn from `seed` via the documented derivation.
pub fn infer(
    checkpoint: &Checkpoint,
    mesh: &HalfEdgeMesh,
    features: &FeatureMatrix,
    seed: u64,
    keep_probabilities: bool,
) -> Result<Prediction, ModelError> {
    let spec = checkpoint.network.spec();
    let base_dim = spec.input_dim - if checkpoint.augment { 2 } else { 0 };
    if features.dim() != base_dim {
        return Err(ModelError::DimensionMismatch {
            expected: base_dim,
            got: features.dim(),
        });
    }
    let normalized;
    let features = match &checkpoint.normalization {
        Some((mean, std)) => {
            normalized = features.normalized(mean, std);
            &normalized
        }
        None => features,
    };
    let batch = serialize_batch(mesh, features, spec.seq_len, seed, checkpoint.augment)?;
    let mut rng = derive_rng(seed, &[0xD20]); // unused in eval mode
    let (probs, _) = checkpoint.network.forward(&batch, Mode::Eval, &mut rng);
    Ok(prediction_from_probs(&probs, keep_probabilities))
}

pub fn prediction_from_probs(probs: &Tensor, keep_probabilities: bool) -> Prediction {
    let targets = (0..probs.rows())
        .map(|r| {
            let row = probs.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Prediction {
        targets,
        probabilities: keep_probabilities.then(|| probs.clone()),
    }
}
