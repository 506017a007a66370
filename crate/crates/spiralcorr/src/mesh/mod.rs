//! Manifold triangle meshes with half-edge connectivity.
//!
//! The mesh is immutable after construction. Half-edges are stored three
//! per face (`half_edge = 3*face + corner`), so `next` is index arithmetic
//! and `twin` is the only stored link. One-ring traversal follows a fixed
//! rotational direction: *against* the face winding, consistently across
//! the mesh. Which chirality that is in world space depends on the input's
//! winding convention; only consistency matters here.

mod io;
pub mod primitives;
mod validate;

pub use io::{load_mesh, load_mesh_lenient, parse_obj, parse_ply, MeshFormat};
pub use validate::{Severity, ValidationReport, Violation};

use thiserror::Error;

/// Index of a vertex, dense in `0..vertex_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-triangle face at line {line} ({arity} vertices)")]
    NonTriangleFace { line: usize, arity: usize },
    #[error("vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("mesh fails manifold validation:\n{0}")]
    InvalidMesh(ValidationReport),
    #[error("vertex {start} is not adjacent to vertex {center}")]
    NotAdjacent { center: VertexId, start: VertexId },
    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(VertexId),
}

const NO_TWIN: u32 = u32::MAX;

/// Immutable triangle mesh with oriented half-edge adjacency.
#[derive(Debug, Clone)]
pub struct HalfEdgeMesh {
    positions: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    /// twin[h] = opposite half-edge, NO_TWIN on boundary or unpaired edges
    twin: Vec<u32>,
    /// canonical outgoing half-edge per vertex (u32::MAX if none); for
    /// boundary vertices this is the start of the against-winding walk
    base: Vec<u32>,
    boundary: Vec<bool>,
}

#[inline]
fn he_face(h: u32) -> usize {
    h as usize / 3
}

#[inline]
fn he_next(h: u32) -> u32 {
    let f = h - h % 3;
    f + (h % 3 + 1) % 3
}

#[inline]
fn he_prev(h: u32) -> u32 {
    let f = h - h % 3;
    f + (h % 3 + 2) % 3
}

impl HalfEdgeMesh {
    /// Builds and validates; any violation is an error.
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self::build_unchecked(positions, faces)?;
        let report = mesh.validate();
        if report.is_clean() {
            Ok(mesh)
        } else {
            Err(MeshError::InvalidMesh(report))
        }
    }

    /// Builds the structure without requiring manifoldness, linking twins
    /// only where they are unambiguous. Intended for validation tooling;
    /// traversal operations assume a mesh that passes [`validate`].
    ///
    /// [`validate`]: HalfEdgeMesh::validate
    pub fn build_unchecked(
        positions: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let v_count = positions.len();
        for face in &faces {
            for &v in face {
                if v >= v_count {
                    return Err(MeshError::IndexOutOfRange {
                        index: v,
                        count: v_count,
                    });
                }
            }
        }
        let he_count = faces.len() * 3;
        let mut twin = vec![NO_TWIN; he_count];

        // directed edge -> half-edge list
        let mut directed: std::collections::HashMap<(usize, usize), Vec<u32>> =
            std::collections::HashMap::new();
        for (f, face) in faces.iter().enumerate() {
            for corner in 0..3 {
                let h = (f * 3 + corner) as u32;
                let u = face[corner];
                let v = face[(corner + 1) % 3];
                directed.entry((u, v)).or_default().push(h);
            }
        }
        for ((u, v), hs) in &directed {
            if u == v || hs.len() != 1 {
                continue; // degenerate or duplicated directed edge: leave unpaired
            }
            if let Some(opp) = directed.get(&(*v, *u)) {
                if opp.len() == 1 {
                    twin[hs[0] as usize] = opp[0];
                }
            }
        }

        let mut base = vec![u32::MAX; v_count];
        for (f, face) in faces.iter().enumerate() {
            for corner in 0..3 {
                let h = (f * 3 + corner) as u32;
                let origin = face[corner];
                if base[origin] == u32::MAX {
                    base[origin] = h;
                }
            }
        }
        let mut mesh = HalfEdgeMesh {
            positions,
            faces,
            twin,
            base,
            boundary: vec![false; v_count],
        };
        mesh.finish_bases();
        Ok(mesh)
    }

    /// Rewinds each boundary vertex's base half-edge to the start of the
    /// against-winding walk and sets boundary flags.
    fn finish_bases(&mut self) {
        for v in 0..self.positions.len() {
            let mut h = self.base[v];
            if h == u32::MAX {
                continue;
            }
            // rotate with the winding until the walk start (capped in case
            // of non-manifold garbage)
            let cap = self.faces.len() * 3 + 1;
            let start = h;
            for _ in 0..cap {
                let p = he_prev(h);
                if self.twin[p as usize] == NO_TWIN {
                    self.boundary[v] = true;
                    break;
                }
                let candidate = self.twin[p as usize];
                if candidate == start {
                    break; // full interior cycle
                }
                h = candidate;
            }
            self.base[v] = h;
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut set = std::collections::HashSet::new();
        for face in &self.faces {
            for corner in 0..3 {
                let u = face[corner];
                let v = face[(corner + 1) % 3];
                set.insert((u.min(v), u.max(v)));
            }
        }
        set.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    pub fn position(&self, v: VertexId) -> [f64; 3] {
        self.positions[v.0]
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_boundary_vertex(&self, v: VertexId) -> bool {
        self.boundary[v.0]
    }

    /// Sum of triangle areas.
    pub fn surface_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let pa = self.positions[a];
                let pb = self.positions[b];
                let pc = self.positions[c];
                let u = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
                let w = [pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2]];
                let cx = u[1] * w[2] - u[2] * w[1];
                let cy = u[2] * w[0] - u[0] * w[2];
                let cz = u[0] * w[1] - u[1] * w[0];
                0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
            })
            .sum()
    }

    fn he_head(&self, h: u32) -> usize {
        self.faces[he_face(h)][(h as usize + 1) % 3]
    }

    fn he_origin(&self, h: u32) -> usize {
        self.faces[he_face(h)][h as usize % 3]
    }

    /// Visits every outgoing half-edge of `v` once, rotating against the
    /// face winding from the stored base.
    fn for_each_outgoing(&self, v: VertexId, mut f: impl FnMut(u32)) {
        let start = self.base[v.0];
        if start == u32::MAX {
            return;
        }
        let mut h = start;
        loop {
            f(h);
            let t = self.twin[h as usize];
            if t == NO_TWIN {
                break;
            }
            h = he_next(t);
            if h == start {
                break;
            }
        }
    }

    /// Neighbors of `v` in the fixed traversal order (against the face
    /// winding). Interior vertices yield their full cycle starting at the
    /// base half-edge. Boundary vertices yield the open chain from one
    /// chain end to the other; the first entry is the neighbor that has no
    /// outgoing half-edge (it sits across the boundary gap and is reached
    /// through its incoming half-edge).
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        let base = self.base[v.0];
        if base == u32::MAX {
            return Vec::new();
        }
        let mut out = Vec::new();
        if self.boundary[v.0] {
            out.push(VertexId(self.he_origin(he_prev(base))));
        }
        self.for_each_outgoing(v, |h| out.push(VertexId(self.he_head(h))));
        out
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors(v).len()
    }

    /// One-ring of `v` beginning at `start`, traversed against the face
    /// winding. Interior rings are a full cycle; on boundary vertices the
    /// walk runs to the chain end and then continues with the remaining
    /// neighbors on the other side of `start`, still moving away from it.
    pub fn ordered_one_ring(
        &self,
        v: VertexId,
        start: VertexId,
    ) -> Result<Vec<VertexId>, MeshError> {
        let chain = self.neighbors(v);
        let k = chain
            .iter()
            .position(|&x| x == start)
            .ok_or(MeshError::NotAdjacent { center: v, start })?;
        let mut ring = chain[k..].to_vec();
        if self.boundary[v.0] {
            ring.extend(chain[..k].iter().rev());
        } else {
            ring.extend_from_slice(&chain[..k]);
        }
        Ok(ring)
    }

    /// Checks all mesh invariants and reports violations.
    pub fn validate(&self) -> ValidationReport {
        validate::validate_mesh(self)
    }

    /// Same mesh with every face winding flipped (test and tooling aid).
    pub fn reversed(&self) -> HalfEdgeMesh {
        let flipped = self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect();
        HalfEdgeMesh::build_unchecked(self.positions.clone(), flipped)
            .expect("indices unchanged by winding flip")
    }
}
