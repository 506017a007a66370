//! Manifold validation on a clean mesh and two broken ones.
//!
//!     cargo run --example validate_mesh

use spiralcorr::mesh::{primitives, HalfEdgeMesh};

fn show(name: &str, mesh: &HalfEdgeMesh) {
    let report = mesh.validate();
    println!(
        "== {name}: V={} F={} E={} chi={}",
        mesh.vertex_count(),
        mesh.face_count(),
        mesh.edge_count(),
        mesh.euler_characteristic()
    );
    if report.is_clean() {
        println!("   clean");
    } else {
        for line in report.to_string().lines() {
            println!("   {line}");
        }
    }
}

fn main() {
    show("tetrahedron", &primitives::tetrahedron());
    show("icosahedron", &primitives::icosahedron());

    // two triangles sharing only one vertex
    let bowtie = HalfEdgeMesh::build_unchecked(
        vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, 0.5, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ],
        vec![[0, 1, 2], [2, 4, 3]],
    )
    .unwrap();
    show("bowtie", &bowtie);

    // tetrahedron with one face flipped
    let tet = primitives::tetrahedron();
    let mut faces = tet.faces().to_vec();
    faces[3] = [faces[3][0], faces[3][2], faces[3][1]];
    let flipped = HalfEdgeMesh::build_unchecked(tet.positions().to_vec(), faces).unwrap();
    show("flipped-face tetrahedron", &flipped);
}
