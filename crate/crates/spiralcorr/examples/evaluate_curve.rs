//! Geodesic-error curves on the icosahedron: a perfect prediction, a
//! one-off prediction, and a random one.
//!
//!     cargo run --example evaluate_curve

use rand::Rng;

use spiralcorr::eval::{evaluate, geodesic_distances, RadiusGrid};
use spiralcorr::mesh::primitives;
use spiralcorr::rng::derive_rng;
use spiralcorr::VertexId;

fn main() {
    let mesh = primitives::icosahedron();
    let gt: Vec<usize> = (0..12).collect();
    let grid = RadiusGrid {
        start: 0.0,
        stop: 0.8,
        step: 0.1,
    };
    let radii = grid.radii();

    let field = geodesic_distances(&mesh, VertexId(0));
    println!(
        "normalized distances from vertex 0: {:?}",
        field
            .distances
            .iter()
            .map(|d| (d / field.norm_constant * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );

    let perfect = evaluate(&gt, &gt, &mesh, &radii).unwrap();
    println!("\nperfect prediction: auc={}", perfect.auc);

    let mut one_off = gt.clone();
    one_off[5] = mesh.neighbors(VertexId(5))[0].0;
    let curve = evaluate(&one_off, &gt, &mesh, &radii).unwrap();
    println!("\none wrong vertex:\n{}", curve.to_csv());

    let mut rng = derive_rng(9, &[0]);
    let random: Vec<usize> = (0..12).map(|_| rng.gen_range(0..12)).collect();
    let curve = evaluate(&random, &gt, &mesh, &radii).unwrap();
    println!("random prediction:\n{}", curve.to_csv());
}
