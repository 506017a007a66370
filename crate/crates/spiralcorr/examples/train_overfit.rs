//! Memorization smoke run: a reduced-width LSTM-NET learns the identity
//! correspondence of a 50-vertex grid from raw vertex positions, with
//! spiral starts re-randomized every epoch.
//!
//!     cargo run --release --example train_overfit -- [epochs] [lr] [seq_len] [seed]

use spiralcorr::features::{raw_features, RawFeatureKind};
use spiralcorr::mesh::primitives;
use spiralcorr::model::{accuracy_on, train, DatasetItem, NetworkSpec, TrainConfig};
use spiralcorr::nn::AdamConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let lr: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.02);
    let seq_len: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);

    let mesh = primitives::triangulated_grid(10, 5);
    let features = raw_features(&mesh, RawFeatureKind::Position).unwrap();
    let labels: Vec<usize> = (0..mesh.vertex_count()).collect();
    let item = DatasetItem {
        mesh,
        features,
        labels,
    };

    let spec = NetworkSpec::lstm_net(3, seq_len, 50)
        .with_widths([16, 32, 32, 32, 64])
        .with_dropout(0.0);
    let config = TrainConfig {
        epochs,
        seed,
        adam: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        augment: false,
        normalize: false,
    };

    let start = std::time::Instant::now();
    let result = train(spec, std::slice::from_ref(&item), &[], &config).unwrap();
    for stats in result.history.iter().step_by(50) {
        println!(
            "epoch {:3}  train_loss {:.5}",
            stats.epoch, stats.train_loss
        );
    }
    let last = result.history.last().unwrap();
    println!(
        "epoch {:3}  train_loss {:.5} (final)",
        last.epoch, last.train_loss
    );
    println!("best epoch: {}", result.checkpoint.meta.epoch);

    // accuracy under several unseen start-rotation seeds
    for seed in [999u64, 1234, 31337] {
        let acc = accuracy_on(&result.checkpoint, &item, seed).unwrap();
        println!("accuracy (seed {seed}): {acc:.4}");
    }
    println!("elapsed: {:.1?}", start.elapsed());
}
