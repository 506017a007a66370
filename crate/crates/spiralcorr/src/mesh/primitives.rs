//! Small generated meshes used by tests, examples, and smoke runs.

use super::HalfEdgeMesh;

/// Regular tetrahedron, outward consistent winding. V=4, F=4, E=6.
pub fn tetrahedron() -> HalfEdgeMesh {
    let positions = vec![
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    HalfEdgeMesh::new(positions, faces).expect("tetrahedron is manifold")
}

/// One triangle; all three vertices are boundary.
pub fn single_triangle() -> HalfEdgeMesh {
    let positions = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    HalfEdgeMesh::new(positions, vec![[0, 1, 2]]).expect("triangle is manifold")
}

/// Regular icosahedron: 12 vertices, 20 faces, every vertex valence 5.
pub fn icosahedron() -> HalfEdgeMesh {
    let p = (1.0 + 5.0f64.sqrt()) / 2.0;
    let positions = vec![
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    HalfEdgeMesh::new(positions, faces).expect("icosahedron is manifold")
}

/// Planar grid of `nx × ny` vertices, unit spacing, squares split along
/// the (i,j)-(i+1,j+1) diagonal. Interior vertices have valence 6.
pub fn triangulated_grid(nx: usize, ny: usize) -> HalfEdgeMesh {
    assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 vertices");
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            positions.push([i as f64, j as f64, 0.0]);
        }
    }
    let at = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v00 = at(i, j);
            let v10 = at(i + 1, j);
            let v01 = at(i, j + 1);
            let v11 = at(i + 1, j + 1);
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    HalfEdgeMesh::new(positions, faces).expect("grid is manifold")
}

/// Thin strip: a 2-row grid where every vertex lies on the boundary.
pub fn strip(columns: usize) -> HalfEdgeMesh {
    triangulated_grid(columns, 2)
}

/// Closed triangulated torus (genus 1), `nx × ny` vertices.
pub fn torus_grid(nx: usize, ny: usize) -> HalfEdgeMesh {
    assert!(nx >= 3 && ny >= 3, "torus needs at least 3x3 vertices");
    let (major, minor) = (2.0, 0.5);
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / nx as f64;
            let phi = 2.0 * std::f64::consts::PI * j as f64 / ny as f64;
            let rad = major + minor * phi.cos();
            positions.push([rad * theta.cos(), rad * theta.sin(), minor * phi.sin()]);
        }
    }
    let at = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = at(i, j);
            let v10 = at(i + 1, j);
            let v01 = at(i, j + 1);
            let v11 = at(i + 1, j + 1);
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    HalfEdgeMesh::new(positions, faces).expect("torus is manifold")
}

/// Two-ring hexagonal disk: a valence-6 center (vertex 0), its six ring-1
/// neighbors (1..=6 at angles 0°,-60°,…,-300°), and twelve ring-2 vertices
/// (7..=18 at angles 0°,-30°,…). Windings are counter-clockwise seen from
/// +z, so the fixed traversal direction sweeps 1→2→…→6 around the center.
pub fn hex_patch() -> HalfEdgeMesh {
    let mut positions = vec![[0.0, 0.0, 0.0]];
    for i in 0..6 {
        let ang = -(i as f64) * std::f64::consts::PI / 3.0;
        positions.push([ang.cos(), ang.sin(), 0.0]);
    }
    for j in 0..12 {
        let ang = -(j as f64) * std::f64::consts::PI / 6.0;
        positions.push([2.0 * ang.cos(), 2.0 * ang.sin(), 0.0]);
    }
    let r1 = |i: usize| 1 + i % 6;
    let r2 = |j: usize| 7 + j % 12;
    let mut faces = Vec::new();
    for i in 0..6 {
        faces.push([0, r1(i + 1), r1(i)]);
    }
    for i in 0..6 {
        faces.push([r1(i), r2(2 * i + 1), r2(2 * i)]);
        faces.push([r1(i), r1(i + 1), r2(2 * i + 1)]);
        faces.push([r1(i), r2(2 * i), r2(2 * i + 11)]);
    }
    HalfEdgeMesh::new(positions, faces).expect("hex patch is manifold")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::VertexId;

    #[test]
    fn grid_interior_valence_is_six() {
        let mesh = triangulated_grid(5, 5);
        let v = VertexId(2 * 5 + 2);
        assert_eq!(mesh.degree(v), 6);
        assert!(!mesh.is_boundary_vertex(v));
    }

    #[test]
    fn strip_is_all_boundary() {
        let mesh = strip(6);
        for v in 0..mesh.vertex_count() {
            assert!(mesh.is_boundary_vertex(VertexId(v)));
        }
    }

    #[test]
    fn hex_patch_shape() {
        let mesh = hex_patch();
        assert_eq!(mesh.vertex_count(), 19);
        assert_eq!(mesh.face_count(), 24);
        assert_eq!(mesh.degree(VertexId(0)), 6);
        assert!(!mesh.is_boundary_vertex(VertexId(0)));
        assert!(mesh.validate().is_clean());
    }
}
