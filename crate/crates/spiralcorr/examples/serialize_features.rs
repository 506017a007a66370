//! Feature serialization along spirals, with and without metric
//! augmentation, plus a VFEAT1 round trip.
//!
//!     cargo run --example serialize_features

use spiralcorr::features::{
    metric_pairs, raw_features, read_vfeat, serialize_batch, write_vfeat, RawFeatureKind,
};
use spiralcorr::mesh::primitives;
use spiralcorr::spiral::spiral_fixed;
use spiralcorr::VertexId;

fn main() {
    let mesh = primitives::triangulated_grid(6, 5);
    let features = raw_features(&mesh, RawFeatureKind::Position).unwrap();
    println!(
        "mesh: {} vertices; features: {} x {} ({})",
        mesh.vertex_count(),
        features.vertex_count(),
        features.dim(),
        features.descriptor_name
    );

    let batch = serialize_batch(&mesh, &features, 8, 42, true).unwrap();
    println!(
        "serialized batch: {} x {} x {} (augmented: {})",
        batch.vertex_count, batch.seq_len, batch.step_dim, batch.augmented
    );

    let v = 2 * 6 + 2; // an interior vertex
    println!("\nsteps of vertex {v} (position + [dist, angle]):");
    for t in 0..batch.seq_len {
        let row = batch.step(v, t);
        let idx = batch.spiral_indices[v * batch.seq_len + t];
        println!(
            "  t={t} vertex {idx:3}  pos ({:4.1} {:4.1} {:4.1})  dist {:.3}  angle {:.3}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }

    // metric pairs directly from a spiral
    let start = mesh.neighbors(VertexId(v))[0];
    let spiral = spiral_fixed(&mesh, VertexId(v), 8, start).unwrap();
    let pairs = metric_pairs(&mesh, &spiral).unwrap();
    println!("\nmetric pairs along the same spiral: {pairs:?}");

    // descriptor container round trip
    let dir = std::env::temp_dir().join("spiralcorr_example.vfeat");
    write_vfeat(&dir, &features).unwrap();
    let back = read_vfeat(&dir).unwrap();
    assert_eq!(back, features);
    println!("\nVFEAT1 round trip at {} ok", dir.display());
    let _ = std::fs::remove_file(dir);
}
