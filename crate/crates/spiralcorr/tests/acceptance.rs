//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `cargo test --test acceptance -- --nocapture` to
//! see them).
//!
//! 1. exact parameter counts of both architectures
//! 2. LSTM equation fidelity and BPTT gradients over 20 seeds
//! 3. spiral/ring correctness against a BFS oracle, exhaustively
//! 4. fixed-length truncation consistency for N in {15, 20, 30}
//! 5. end-to-end overfit sanity on a 50-vertex mesh
//! 6. evaluation protocol against an exhaustive distance oracle
//! 7. metric augmentation invariances
//! 8. training determinism and checkpoint round-trips

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;

use rand::Rng;

use spiralcorr::eval::{evaluate, geodesic_distances, RadiusGrid};
use spiralcorr::features::{metric_pairs, raw_features, RawFeatureKind};
use spiralcorr::mesh::{primitives, HalfEdgeMesh, VertexId};
use spiralcorr::model::{
    accuracy_on, build_network, count_params, infer, load_checkpoint, save_checkpoint, train,
    DatasetItem, NetworkSpec, TrainConfig,
};
use spiralcorr::nn::lstm::{last_hidden, LstmParams, LstmState};
use spiralcorr::nn::{grad_check, AdamConfig, Tensor};
use spiralcorr::rng::derive_rng;
use spiralcorr::spiral::{ring_decompose, spiral_by_ring, spiral_fixed};

fn pass(number: usize, name: &str) {
    println!("criterion {number} ({name}): PASS");
}

// --------------------------------------------------------------------------
// shared oracles (independent of the library's traversal code)

/// BFS layers built directly from the face list.
fn bfs_layers(mesh: &HalfEdgeMesh, v: usize, k: usize) -> Vec<BTreeSet<usize>> {
    let mut adjacency = vec![BTreeSet::new(); mesh.vertex_count()];
    for face in mesh.faces() {
        for c in 0..3 {
            adjacency[face[c]].insert(face[(c + 1) % 3]);
            adjacency[face[c]].insert(face[(c + 2) % 3]);
        }
    }
    let mut layers = vec![BTreeSet::from([v])];
    let mut seen = BTreeSet::from([v]);
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for &u in layers.last().unwrap() {
            for &w in &adjacency[u] {
                if seen.insert(w) {
                    next.insert(w);
                }
            }
        }
        layers.push(next);
    }
    layers
}

/// Floyd–Warshall all-pairs distances over the weighted edge graph.
fn all_pairs_oracle(mesh: &HalfEdgeMesh) -> Vec<Vec<f64>> {
    let n = mesh.vertex_count();
    let pos = |v: usize| mesh.position(VertexId(v));
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for v in 0..n {
        d[v][v] = 0.0;
        for w in mesh.neighbors(VertexId(v)) {
            let (a, b) = (pos(v), pos(w.0));
            d[v][w.0] =
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let alt = d[i][k] + d[k][j];
                if alt < d[i][j] {
                    d[i][j] = alt;
                }
            }
        }
    }
    d
}

// --------------------------------------------------------------------------

#[test]
fn criterion_1_parameter_counts_match_published_totals() {
    let lstm = build_network(
        NetworkSpec::lstm_net(544, 30, 6890),
        &mut derive_rng(0, &[1]),
    );
    assert_eq!(count_params(&lstm), 2_675_706);

    let fcs = build_network(
        NetworkSpec::fcs_net(544, 20, 6890),
        &mut derive_rng(0, &[2]),
    );
    assert_eq!(count_params(&fcs), 2_763_356);
    pass(1, "parameter counts");
}

#[test]
fn criterion_2_lstm_equation_fidelity_and_bptt_gradients() {
    // zero parameters: every gate is exactly 1/2, the state stays zero
    let params = LstmParams::zeros(3, 4);
    let x = Tensor::from_vec(&[2, 3], vec![4.0, -2.0, 0.5, 1.0, 3.0, -1.0]);
    let (state, cache) = params.step(&x, &LstmState::zeros(2, 4));
    assert!(cache.f.data().iter().all(|&v| v == 0.5));
    assert!(cache.i.data().iter().all(|&v| v == 0.5));
    assert!(cache.o.data().iter().all(|&v| v == 0.5));
    assert!(state.c.data().iter().all(|&v| v == 0.0));
    assert!(state.h.data().iter().all(|&v| v == 0.0));

    // backprop through time vs central differences, 20 random seeds
    for seed in 0..20u64 {
        let mut rng = derive_rng(9000 + seed, &[0]);
        let mut params = LstmParams::new(4, 5, &mut rng);
        let batch = 3;
        let xs: Vec<Tensor> = (0..5).map(|_| Tensor::glorot(batch, 4, &mut rng)).collect();
        let mask = vec![true; batch * 5];

        let (hidden, cache) = params.forward_sequence(&xs, &mask);
        let last = last_hidden(&hidden, &cache.lengths);
        let mut d_seq: Vec<Tensor> = xs.iter().map(|_| Tensor::zeros(&[batch, 5])).collect();
        for r in 0..batch {
            let len = cache.lengths[r];
            for (d, &h) in d_seq[len - 1].row_mut(r).iter_mut().zip(last.row(r)) {
                *d = 2.0 * h;
            }
        }
        let mut grads = params.zero_grads();
        params.backward_sequence(&xs, &mask, &cache, &d_seq, &mut grads);

        let report = grad_check(
            &mut params,
            |p| {
                let (h, c) = p.forward_sequence(&xs, &mask);
                last_hidden(&h, &c.lengths)
                    .data()
                    .iter()
                    .map(|v| v * v)
                    .sum()
            },
            &grads.blocks(),
            1e-5,
            None,
        );
        assert!(report.passes(1e-5), "seed {seed}: {report}");
    }
    pass(2, "lstm equations and bptt gradients");
}

#[test]
fn criterion_3_spiral_sets_order_and_rotation() {
    let fixtures: Vec<(&str, HalfEdgeMesh)> = vec![
        ("tetrahedron", primitives::tetrahedron()),
        ("icosahedron", primitives::icosahedron()),
        ("grid30", primitives::triangulated_grid(30, 30)),
        ("strip", primitives::strip(15)),
    ];
    for (name, mesh) in &fixtures {
        for v in 0..mesh.vertex_count() {
            let layers = bfs_layers(mesh, v, 3);
            let depth_of = |id: usize| layers.iter().position(|l| l.contains(&id)).unwrap();
            let neighbors = mesh.neighbors(VertexId(v));
            for k in 1..=3usize {
                let spiral = spiral_by_ring(mesh, VertexId(v), k, neighbors[0]).unwrap();
                // vertex set equals the BFS k-disk
                let got: BTreeSet<usize> = spiral.vertices.iter().map(|w| w.0).collect();
                let want: BTreeSet<usize> = layers[..=k].iter().flatten().copied().collect();
                assert_eq!(got, want, "{name} v={v} k={k}");
                // ring depth never decreases along the sequence
                let depths: Vec<usize> = spiral.vertices.iter().map(|w| depth_of(w.0)).collect();
                assert!(
                    depths.windows(2).all(|w| w[0] <= w[1]),
                    "{name} v={v} k={k} depths {depths:?}"
                );
            }
            // 1-ring rotation equivariance for every start
            let reference = mesh.ordered_one_ring(VertexId(v), neighbors[0]).unwrap();
            let m = reference.len();
            for (shift, &start) in neighbors.iter().enumerate() {
                let ring = mesh.ordered_one_ring(VertexId(v), start).unwrap();
                assert_eq!(ring.len(), m, "{name} v={v}");
                if !mesh.is_boundary_vertex(VertexId(v)) {
                    let rotated: Vec<VertexId> =
                        (0..m).map(|i| reference[(shift + i) % m]).collect();
                    assert_eq!(ring, rotated, "{name} v={v} start={start}");
                } else {
                    // open chains: same set, still starting at the start
                    assert_eq!(ring[0], start);
                    let got: BTreeSet<_> = ring.iter().collect();
                    let want: BTreeSet<_> = reference.iter().collect();
                    assert_eq!(got, want, "{name} v={v} start={start}");
                }
            }
        }
    }
    pass(3, "spiral correctness");
}

#[test]
fn criterion_4_fixed_length_truncation_consistency() {
    let mesh = primitives::triangulated_grid(30, 30);
    for v in 0..mesh.vertex_count() {
        let start = mesh.neighbors(VertexId(v))[0];
        for n in [15usize, 20, 30] {
            let fixed = spiral_fixed(&mesh, VertexId(v), n, start).unwrap();
            assert!(
                fixed.pad_mask.iter().all(|&m| m),
                "padding unexpected on v={v}"
            );
            // smallest k whose disk covers n
            let mut k = 1;
            let k_star = loop {
                let decomp = ring_decompose(&mesh, VertexId(v), k).unwrap();
                if decomp.disk_size() >= n {
                    break k;
                }
                k += 1;
            };
            let by_ring = spiral_by_ring(&mesh, VertexId(v), k_star, start).unwrap();
            assert_eq!(
                fixed.vertices[..],
                by_ring.vertices[..n],
                "v={v} n={n} k*={k_star}"
            );
        }
    }
    pass(4, "fixed-length truncation");
}

#[test]
fn criterion_5_overfit_sanity_end_to_end() {
    // 50-vertex synthetic mesh, raw positional features, identity labels
    let mesh = primitives::triangulated_grid(10, 5);
    assert_eq!(mesh.vertex_count(), 50);
    let features = raw_features(&mesh, RawFeatureKind::Position).unwrap();
    let labels: Vec<usize> = (0..50).collect();
    let item = DatasetItem {
        mesh: mesh.clone(),
        features: features.clone(),
        labels,
    };

    let spec = NetworkSpec::lstm_net(3, 5, 50)
        .with_widths([16, 32, 32, 32, 64])
        .with_dropout(0.0);
    let config = TrainConfig {
        epochs: 500,
        seed: 11,
        adam: AdamConfig {
            lr: 0.02,
            ..AdamConfig::default()
        },
        augment: false,
        normalize: false,
    };
    let result = train(spec, std::slice::from_ref(&item), &[], &config).unwrap();

    let accuracy = accuracy_on(&result.checkpoint, &item, 999).unwrap();
    assert!(accuracy >= 0.99, "training accuracy {accuracy}");

    // scoring its own predictions: fraction at radius zero
    let prediction = infer(&result.checkpoint, &item.mesh, &item.features, 999, false).unwrap();
    let radii = RadiusGrid::default().radii();
    let curve = evaluate(&prediction.targets, &item.labels, &item.mesh, &radii).unwrap();
    assert!(
        curve.fractions[0] >= 0.99,
        "fraction at radius 0: {}",
        curve.fractions[0]
    );
    pass(5, "end-to-end overfit");
}

#[test]
fn criterion_6_evaluation_protocol_against_oracle() {
    let mesh = primitives::icosahedron();
    let oracle = all_pairs_oracle(&mesh);
    let norm = mesh.surface_area().sqrt();
    let radii = RadiusGrid::default().radii();
    let gt: Vec<usize> = (0..12).collect();

    let mut rng = derive_rng(606, &[0]);
    for trial in 0..5 {
        let pred: Vec<usize> = (0..12).map(|_| rng.gen_range(0..12)).collect();
        let curve = evaluate(&pred, &gt, &mesh, &radii).unwrap();
        for (i, &r) in radii.iter().enumerate() {
            let frac = pred
                .iter()
                .zip(&gt)
                .filter(|(&p, &g)| oracle[g][p] / norm <= r)
                .count() as f64
                / 12.0;
            assert_eq!(curve.fractions[i], frac, "trial {trial} radius {r}");
        }
        assert!(curve.fractions.windows(2).all(|w| w[0] <= w[1]));

        // scale invariance at 0.5x and 2x
        for scale in [0.5, 2.0] {
            let scaled = HalfEdgeMesh::new(
                mesh.positions()
                    .iter()
                    .map(|p| [p[0] * scale, p[1] * scale, p[2] * scale])
                    .collect(),
                mesh.faces().to_vec(),
            )
            .unwrap();
            let scaled_curve = evaluate(&pred, &gt, &scaled, &radii).unwrap();
            assert_eq!(scaled_curve.fractions, curve.fractions, "scale {scale}");
        }
    }

    // the geodesic field itself matches the oracle exactly
    for v in 0..12 {
        let field = geodesic_distances(&mesh, VertexId(v));
        for w in 0..12 {
            assert_eq!(field.distances[w], oracle[v][w]);
        }
    }
    pass(6, "evaluation protocol");
}

#[test]
fn criterion_7_metric_augmentation_invariances() {
    // orthogonal unit vectors around the center give exactly (1, pi/2)
    let positions = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0],
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    let mesh = HalfEdgeMesh::new(positions, faces).unwrap();
    let spiral = spiral_by_ring(&mesh, VertexId(0), 1, VertexId(1)).unwrap();
    let pairs = metric_pairs(&mesh, &spiral).unwrap();
    for t in 1..4 {
        assert!((pairs[t].0 - 1.0).abs() < 1e-12);
        assert!((pairs[t].1 - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    // invariance under random rigid motions on both fixtures
    for (fixture, mesh) in [
        ("icosahedron", primitives::icosahedron()),
        ("grid", primitives::triangulated_grid(7, 5)),
    ] {
        let mut rng = derive_rng(707, &[0]);
        for trial in 0..10 {
            let q: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let (w, x, y, z) = (q[0] / qn, q[1] / qn, q[2] / qn, q[3] / qn);
            let rot = [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                ],
                [
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                ],
                [
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ];
            let t = [
                rng.gen::<f64>() * 10.0 - 5.0,
                rng.gen::<f64>() * 10.0 - 5.0,
                rng.gen::<f64>() * 10.0 - 5.0,
            ];
            let moved = HalfEdgeMesh::new(
                mesh.positions()
                    .iter()
                    .map(|p| {
                        [
                            rot[0][0] * p[0] + rot[0][1] * p[1] + rot[0][2] * p[2] + t[0],
                            rot[1][0] * p[0] + rot[1][1] * p[1] + rot[1][2] * p[2] + t[1],
                            rot[2][0] * p[0] + rot[2][1] * p[1] + rot[2][2] * p[2] + t[2],
                        ]
                    })
                    .collect(),
                mesh.faces().to_vec(),
            )
            .unwrap();
            for v in 0..mesh.vertex_count() {
                let start = mesh.neighbors(VertexId(v))[0];
                let spiral = spiral_fixed(&mesh, VertexId(v), 10, start).unwrap();
                let a = metric_pairs(&mesh, &spiral).unwrap();
                let b = metric_pairs(&moved, &spiral).unwrap();
                for (pa, pb) in a.iter().zip(&b) {
                    assert!(
                        (pa.0 - pb.0).abs() < 1e-9 && (pa.1 - pb.1).abs() < 1e-9,
                        "{fixture} trial {trial} v={v}: {pa:?} vs {pb:?}"
                    );
                }
            }
        }
    }
    pass(7, "metric augmentation");
}

#[test]
fn criterion_8_determinism_and_checkpoint_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = primitives::triangulated_grid(5, 4);
    let features = raw_features(&mesh, RawFeatureKind::Position).unwrap();
    let labels: Vec<usize> = (0..mesh.vertex_count()).collect();
    let spec = NetworkSpec::lstm_net(3, 6, labels.len())
        .with_widths([8, 10, 10, 10, 12])
        .with_dropout(0.3);
    let config = TrainConfig {
        epochs: 5,
        seed: 2024,
        ..TrainConfig::default()
    };

    // two single-threaded same-seed runs write byte-identical checkpoints
    let mut bytes = Vec::new();
    for run in 0..2 {
        let items = vec![DatasetItem {
            mesh: mesh.clone(),
            features: features.clone(),
            labels: labels.clone(),
        }];
        let result = train(spec.clone(), &items, &[], &config).unwrap();
        let path = dir.path().join(format!("run{run}.ckpt"));
        save_checkpoint(&path, &result.checkpoint).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "same-seed checkpoints differ");

    // save -> load -> infer is bit-identical to in-memory infer
    let items = vec![DatasetItem {
        mesh: mesh.clone(),
        features: features.clone(),
        labels,
    }];
    let result = train(spec, &items, &[], &config).unwrap();
    let path = dir.path().join("round.ckpt");
    save_checkpoint(&path, &result.checkpoint).unwrap();
    let reloaded = load_checkpoint(&path).unwrap();
    let a = infer(&result.checkpoint, &mesh, &features, 31, true).unwrap();
    let b = infer(&reloaded, &mesh, &features, 31, true).unwrap();
    assert_eq!(a.targets, b.targets);
    let pa = a.probabilities.unwrap();
    let pb = b.probabilities.unwrap();
    assert_eq!(pa.data(), pb.data(), "probabilities drifted after reload");
    pass(8, "determinism and checkpoint roundtrip");
}
