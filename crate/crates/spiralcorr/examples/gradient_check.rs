//! Finite-difference verification of both architectures' hand-rolled
//! backward passes, at reduced widths on a 10-vertex mesh.
//!
//!     cargo run --release --example gradient_check

use spiralcorr::features::{random_features, serialize_batch};
use spiralcorr::mesh::primitives;
use spiralcorr::model::{build_network, NetworkSpec};
use spiralcorr::nn::ops::{cross_entropy, softmax_cross_entropy_backward, Mode};
use spiralcorr::nn::{grad_check, jitter_blocks};
use spiralcorr::rng::derive_rng;

fn main() {
    let mesh = primitives::triangulated_grid(5, 2);
    let classes = mesh.vertex_count();
    let mut rng = derive_rng(1, &[0]);
    let features = random_features(classes, 3, &mut rng, "demo");
    let batch = serialize_batch(&mesh, &features, 6, 3, false).unwrap();
    let targets: Vec<usize> = (0..classes).collect();

    for spec in [
        NetworkSpec::lstm_net(3, 6, classes).with_widths([4, 5, 6, 7, 8]),
        NetworkSpec::fcs_net(3, 6, classes).with_widths([4, 5, 6, 7, 8]),
    ] {
        let kind = spec.kind.as_str();
        let mut network = build_network(spec.with_dropout(0.0), &mut derive_rng(2, &[1]));
        jitter_blocks(&mut network, &mut derive_rng(2, &[2]), 0.3);

        let mut eval_rng = derive_rng(0, &[0]);
        let (probs, cache) = network.forward(&batch, Mode::Eval, &mut eval_rng);
        let d_logits = softmax_cross_entropy_backward(&probs, &targets);
        let grads = network.backward(&batch, &cache, &d_logits);

        let report = grad_check(
            &mut network,
            |net| {
                let mut rng = derive_rng(0, &[0]);
                let (p, _) = net.forward(&batch, Mode::Eval, &mut rng);
                cross_entropy(&p, &targets)
            },
            &grads.blocks(),
            1e-6,
            None,
        );
        println!("== {kind}");
        println!("{report}");
        println!("passes 1e-4: {}\n", report.passes(1e-4));
    }
}
