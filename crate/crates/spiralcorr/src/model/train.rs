//! Training loop: one-mesh batches, fresh spiral starts every epoch, Adam
//! updates, validation tracking, best-checkpoint selection.

use crate::features::{serialize_batch, FeatureMatrix};
use crate::mesh::HalfEdgeMesh;
use crate::nn::ops::{cross_entropy, softmax_cross_entropy_backward, Mode};
use crate::nn::{AdamConfig, AdamState};
use crate::rng::{derive_rng, derive_seed};

use super::checkpoint::{Checkpoint, TrainMeta};
use super::{build_network, prediction_from_probs, ModelError, NetworkSpec};

// stream tags for the documented seed derivation
const TAG_INIT: u64 = 0x11;
const TAG_SHUFFLE: u64 = 0x22;
const TAG_BATCH: u64 = 0x33;
const TAG_DROPOUT: u64 = 0x44;
const TAG_VAL_BATCH: u64 = 0x55;

/// One training or validation mesh with its features and per-vertex
/// template labels.
pub struct DatasetItem {
    pub mesh: HalfEdgeMesh,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub augment: bool,
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            seed: 0,
            adam: AdamConfig::default(),
            augment: false,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    /// parameters at the best validation loss (lowest; ties to the
    /// earliest epoch)
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
}

fn check_item(item: &DatasetItem, spec: &NetworkSpec, base_dim: usize) -> Result<(), ModelError> {
    if item.features.dim() != base_dim {
        return Err(ModelError::DimensionMismatch {
            expected: base_dim,
            got: item.features.dim(),
        });
    }
    if item.labels.len() != item.mesh.vertex_count() {
        return Err(ModelError::LabelCountMismatch {
            expected: item.mesh.vertex_count(),
            got: item.labels.len(),
        });
    }
    if let Some(&bad) = item.labels.iter().find(|&&l| l >= spec.classes) {
        return Err(ModelError::LabelOutOfRange {
            label: bad,
            classes: spec.classes,
        });
    }
    Ok(())
}

/// Trains a freshly initialized network. Each epoch visits the training
/// meshes in a seeded shuffled order; every visit serializes a fresh batch
/// (new random spiral starts), runs forward/backward, and applies one Adam
/// step. Validation uses fixed serialization seeds so epochs stay
/// comparable.
pub fn train(
    spec: NetworkSpec,
    train_set: &[DatasetItem],
    val_set: &[DatasetItem],
    config: &TrainConfig,
) -> Result<TrainResult, ModelError> {
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    assert!(config.epochs >= 1, "at least one epoch required");
    let base_dim = spec.input_dim - if config.augment { 2 } else { 0 };
    for item in train_set.iter().chain(val_set) {
        check_item(item, &spec, base_dim)?;
    }

    // optional z-score stats from the training set only
    let normalization = if config.normalize {
        let dim = base_dim;
        let total_rows: usize = train_set.iter().map(|i| i.features.vertex_count()).sum();
        let mut pooled = Vec::with_capacity(total_rows * dim);
        for item in train_set {
            pooled.extend_from_slice(item.features.values());
        }
        let pooled = FeatureMatrix::new(total_rows, dim, pooled, "pooled")?;
        Some(pooled.column_stats())
    } else {
        None
    };
    let prepared: Vec<FeatureMatrix> = train_set
        .iter()
        .map(|i| match &normalization {
            Some((mean, std)) => i.features.normalized(mean, std),
            None => i.features.clone(),
        })
        .collect();
    let prepared_val: Vec<FeatureMatrix> = val_set
        .iter()
        .map(|i| match &normalization {
            Some((mean, std)) => i.features.normalized(mean, std),
            None => i.features.clone(),
        })
        .collect();

    let mut network = build_network(spec.clone(), &mut derive_rng(config.seed, &[TAG_INIT]));
    let mut adam = AdamState::new(&network, config.adam);

    let mut best: Option<Checkpoint> = None;
    let mut best_score = f64::INFINITY;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        // Fisher-Yates with the epoch's shuffle stream
        {
            use rand::Rng;
            let mut rng = derive_rng(config.seed, &[TAG_SHUFFLE, epoch as u64]);
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
        }

        let mut loss_sum = 0.0;
        for &mesh_index in &order {
            let item = &train_set[mesh_index];
            let batch_seed =
                derive_seed(config.seed, &[TAG_BATCH, epoch as u64, mesh_index as u64]);
            let batch = serialize_batch(
                &item.mesh,
                &prepared[mesh_index],
                spec.seq_len,
                batch_seed,
                config.augment,
            )?;
            let mut dropout_rng =
                derive_rng(config.seed, &[TAG_DROPOUT, epoch as u64, mesh_index as u64]);
            let (probs, cache) = network.forward(&batch, Mode::Train, &mut dropout_rng);
            let loss = cross_entropy(&probs, &item.labels);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, mesh_index });
            }
            loss_sum += loss;
            let d_logits = softmax_cross_entropy_backward(&probs, &item.labels);
            let grads = network.backward(&batch, &cache, &d_logits);
            adam.step(&mut network, &grads.blocks())?;
        }
        let train_loss = loss_sum / train_set.len() as f64;

        // validation (falls back to the training loss when no val meshes)
        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (train_loss, f64::NAN)
        } else {
            let mut ce = 0.0;
            let mut correct = 0usize;
            let mut total = 0usize;
            for (mesh_index, item) in val_set.iter().enumerate() {
                let batch_seed = derive_seed(config.seed, &[TAG_VAL_BATCH, mesh_index as u64]);
                let batch = serialize_batch(
                    &item.mesh,
                    &prepared_val[mesh_index],
                    spec.seq_len,
                    batch_seed,
                    config.augment,
                )?;
                let mut rng = derive_rng(config.seed, &[TAG_VAL_BATCH, 0xEE]);
                let (probs, _) = network.forward(&batch, Mode::Eval, &mut rng);
                ce += cross_entropy(&probs, &item.labels);
                let pred = prediction_from_probs(&probs, false);
                correct += pred
                    .targets
                    .iter()
                    .zip(&item.labels)
                    .filter(|(p, l)| p == l)
                    .count();
                total += item.labels.len();
            }
            (ce / val_set.len() as f64, correct as f64 / total as f64)
        };

        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });

        if val_loss < best_score {
            best_score = val_loss;
            best = Some(Checkpoint {
                network: network.clone(),
                augment: config.augment,
                normalization: normalization.clone(),
                adam: adam.clone(),
                meta: TrainMeta {
                    seed: config.seed,
                    epoch,
                    val_score: val_loss,
                },
            });
        }
    }

    Ok(TrainResult {
        checkpoint: best.expect("at least one epoch ran"),
        history,
    })
}

/// Training accuracy of a checkpoint on one dataset item, serialized with
/// the given seed.
pub fn accuracy_on(
    checkpoint: &Checkpoint,
    item: &DatasetItem,
    seed: u64,
) -> Result<f64, ModelError> {
    let pred = super::infer(checkpoint, &item.mesh, &item.features, seed, false)?;
    let correct = pred
        .targets
        .iter()
        .zip(&item.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / item.labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::raw_features;
    use crate::features::RawFeatureKind;
    use crate::mesh::primitives;
    use crate::model::NetworkKind;

    fn grid_item(labels: Option<Vec<usize>>) -> DatasetItem {
        let mesh = primitives::triangulated_grid(5, 2);
        let features = raw_features(&mesh, RawFeatureKind::Position).unwrap();
        let labels = labels.unwrap_or_else(|| (0..mesh.vertex_count()).collect());
        DatasetItem {
            mesh,
            features,
            labels,
        }
    }

    fn small_spec(kind: NetworkKind, classes: usize) -> NetworkSpec {
        let spec = match kind {
            NetworkKind::LstmNet => NetworkSpec::lstm_net(3, 5, classes),
            NetworkKind::FcsNet => NetworkSpec::fcs_net(3, 5, classes),
        };
        spec.with_widths([4, 6, 6, 6, 8]).with_dropout(0.0)
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let err = train(
            small_spec(NetworkKind::LstmNet, 10),
            &[],
            &[],
            &TrainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::EmptyDataset));
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        let item = grid_item(Some(vec![99; 10]));
        let err = train(
            small_spec(NetworkKind::LstmNet, 10),
            &[item],
            &[],
            &TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::LabelOutOfRange {
                label: 99,
                classes: 10
            }
        ));
    }

    #[test]
    fn loss_decreases_on_duplicated_mesh_with_permuted_labels() {
        let identity = grid_item(None);
        let mut reversed_labels: Vec<usize> = (0..10).collect();
        reversed_labels.reverse();
        let permuted = grid_item(Some(reversed_labels));
        let config = TrainConfig {
            epochs: 10,
            seed: 3,
            ..TrainConfig::default()
        };
        let result = train(
            small_spec(NetworkKind::LstmNet, 10),
            &[identity, permuted],
            &[],
            &config,
        )
        .unwrap();
        let first = result.history.first().unwrap().train_loss;
        let last = result.history.last().unwrap().train_loss;
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn validation_tracks_the_best_epoch() {
        let train_item = grid_item(None);
        let val_item = grid_item(None);
        let config = TrainConfig {
            epochs: 5,
            seed: 9,
            ..TrainConfig::default()
        };
        let result = train(
            small_spec(NetworkKind::FcsNet, 10),
            &[train_item],
            &[val_item],
            &config,
        )
        .unwrap();
        let best = result
            .history
            .iter()
            .map(|s| s.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.checkpoint.meta.val_score, best);
        assert_eq!(result.history.len(), 5);
    }

    #[test]
    fn normalization_stats_are_stored_in_the_checkpoint() {
        let item = grid_item(None);
        let config = TrainConfig {
            epochs: 1,
            seed: 4,
            normalize: true,
            ..TrainConfig::default()
        };
        let result = train(small_spec(NetworkKind::LstmNet, 10), &[item], &[], &config).unwrap();
        let (mean, std) = result.checkpoint.normalization.as_ref().unwrap();
        assert_eq!(mean.len(), 3);
        assert_eq!(std.len(), 3);
    }
}
