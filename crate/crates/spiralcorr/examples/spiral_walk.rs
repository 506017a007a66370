//! Ring decomposition and spiral enumeration on a hexagonal patch,
//! showing how the choice of start neighbor rotates the sequence.
//!
//!     cargo run --example spiral_walk

use spiralcorr::mesh::primitives;
use spiralcorr::rng::derive_rng;
use spiralcorr::spiral::{random_start, ring_decompose, spiral_by_ring, spiral_fixed};
use spiralcorr::VertexId;

fn ids(vs: &[VertexId]) -> String {
    vs.iter()
        .map(|v| v.0.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() {
    let mesh = primitives::hex_patch();
    let center = VertexId(0);

    let decomp = ring_decompose(&mesh, center, 2).unwrap();
    println!("ring sizes around {center}: {:?}", decomp.ring_sizes());
    for (k, ring) in decomp.rings.iter().enumerate() {
        println!("  ring {k}: [{}]", ids(ring));
    }

    println!("\nspirals from every start neighbor (k=2):");
    for start in mesh.neighbors(center) {
        let spiral = spiral_by_ring(&mesh, center, 2, start).unwrap();
        println!("  start {start}: [{}]", ids(&spiral.vertices));
    }

    println!("\nfixed-length spirals (N=10) keep the same prefix:");
    let spiral = spiral_fixed(&mesh, center, 10, VertexId(1)).unwrap();
    println!("  [{}]", ids(&spiral.vertices));

    println!("\nseeded random starts are reproducible:");
    for seed in [7u64, 7, 8] {
        let mut rng = derive_rng(seed, &[0]);
        let start = random_start(&mesh, center, &mut rng).unwrap();
        println!("  seed {seed} -> start {start}");
    }

    // a boundary vertex of the patch: the ring is an open chain
    let boundary = VertexId(7);
    assert!(mesh.is_boundary_vertex(boundary));
    let chain = mesh.neighbors(boundary);
    println!("\nboundary vertex {boundary} chain: [{}]", ids(&chain));
    for start in chain {
        let ring = mesh.ordered_one_ring(boundary, start).unwrap();
        println!("  from {start}: [{}]", ids(&ring));
    }
}
