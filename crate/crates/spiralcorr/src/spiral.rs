//! Ring decomposition and the spiral operator.
//!
//! Rings follow the recurrence: the 0-ring is the center itself, and ring
//! k+1 holds every vertex adjacent to ring k that no earlier ring claimed
//! (BFS layers). The spiral is the concatenation of the ordered rings.
//!
//! Ring ordering: the 1-ring is the oriented one-ring walk beginning at a
//! chosen start neighbor. Each deeper vertex is keyed by (position of its
//! earliest previous-ring neighbor — its *anchor* — in that ring's order,
//! angular position around the anchor). The angular sweep around an anchor
//! starts at the vertex the anchor itself was discovered from, so the
//! spiral keeps turning in the mesh's fixed traversal direction. Vertices
//! with no common anchor are thereby ordered like their anchors, and ring
//! components on boundaries fall out of the same key.

use crate::mesh::{HalfEdgeMesh, MeshError, VertexId};
use rand::Rng;

/// Sentinel id for padding entries in fixed-length spirals.
pub const PAD_VERTEX: VertexId = VertexId(usize::MAX);

/// Ordered BFS layers around a center vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingDecomposition {
    pub center: VertexId,
    /// rings[0] = [center]; rings[i] = ordered i-ring
    pub rings: Vec<Vec<VertexId>>,
}

impl RingDecomposition {
    pub fn ring_sizes(&self) -> Vec<usize> {
        self.rings.iter().map(|r| r.len()).collect()
    }

    /// Total number of vertices across all rings (the k-disk size).
    pub fn disk_size(&self) -> usize {
        self.rings.iter().map(|r| r.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpiralMode {
    /// All rings up to and including ring k; variable length.
    ByRing(usize),
    /// Exactly N entries, padded if the disk is exhausted first.
    FixedLength(usize),
}

/// Serialized neighborhood: the center vertex followed by the ordered
/// rings, optionally truncated/padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpiralSequence {
    pub center: VertexId,
    pub start_neighbor: Option<VertexId>,
    /// spiral entries; padding entries hold [`PAD_VERTEX`]
    pub vertices: Vec<VertexId>,
    /// true for real vertices, false for padding (always a suffix)
    pub pad_mask: Vec<bool>,
    /// index into `vertices` where each ring begins (clipped on truncation)
    pub ring_offsets: Vec<usize>,
    /// last vertex of the full oriented 1-ring walk: the cyclic
    /// predecessor of the start neighbor
    pub start_predecessor: Option<VertexId>,
    pub mode: SpiralMode,
}

impl SpiralSequence {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn real_len(&self) -> usize {
        self.pad_mask.iter().filter(|&&m| m).count()
    }

    /// Vertices of the requested ring segment as stored (may be truncated).
    pub fn ring_segment(&self, ring: usize) -> &[VertexId] {
        let start = self.ring_offsets[ring].min(self.real_len());
        let end = if ring + 1 < self.ring_offsets.len() {
            self.ring_offsets[ring + 1]
        } else {
            self.real_len()
        };
        &self.vertices[start..end.min(self.vertices.len())]
    }
}

/// Ordered rings 0..=k around `v`, with ring 1 beginning at `start`.
fn ordered_rings(
    mesh: &HalfEdgeMesh,
    v: VertexId,
    k: usize,
    start: VertexId,
) -> Result<Vec<Vec<VertexId>>, MeshError> {
    let mut rings = vec![vec![v]];
    if k == 0 {
        return Ok(rings);
    }
    let mut depth = vec![usize::MAX; mesh.vertex_count()];
    depth[v.0] = 0;
    // vertex each ring member was discovered from; the angular reference
    let mut parent = vec![VertexId(usize::MAX); mesh.vertex_count()];

    let ring1 = mesh.ordered_one_ring(v, start)?;
    for &w in &ring1 {
        depth[w.0] = 1;
        parent[w.0] = v;
    }
    rings.push(ring1);

    for ring_idx in 2..=k {
        let mut next = Vec::new();
        let prev = rings[ring_idx - 1].clone();
        for &anchor in &prev {
            // sweep the anchor's neighbors starting from the vertex the
            // anchor was discovered from; first encounter fixes the order
            let around = mesh.ordered_one_ring(anchor, parent[anchor.0])?;
            for w in around {
                if depth[w.0] == usize::MAX {
                    depth[w.0] = ring_idx;
                    parent[w.0] = anchor;
                    next.push(w);
                }
            }
        }
        rings.push(next);
    }
    Ok(rings)
}

/// BFS layers 0..=k around `v` (1-ring starts at the canonical neighbor).
pub fn ring_decompose(
    mesh: &HalfEdgeMesh,
    v: VertexId,
    k: usize,
) -> Result<RingDecomposition, MeshError> {
    let neighbors = mesh.neighbors(v);
    if neighbors.is_empty() {
        let mut rings = vec![vec![v]];
        rings.extend((0..k).map(|_| Vec::new()));
        return Ok(RingDecomposition { center: v, rings });
    }
    let rings = ordered_rings(mesh, v, k, neighbors[0])?;
    Ok(RingDecomposition { center: v, rings })
}

/// Spiral over all rings 0..=k: the center, then each ordered ring.
pub fn spiral_by_ring(
    mesh: &HalfEdgeMesh,
    v: VertexId,
    k: usize,
    start: VertexId,
) -> Result<SpiralSequence, MeshError> {
    let rings = ordered_rings(mesh, v, k, start)?;
    let mut vertices = Vec::new();
    let mut ring_offsets = Vec::with_capacity(rings.len());
    for ring in &rings {
        ring_offsets.push(vertices.len());
        vertices.extend_from_slice(ring);
    }
    let pad_mask = vec![true; vertices.len()];
    let ring1 = rings.get(1).map(Vec::as_slice).unwrap_or(&[]);
    let start_predecessor = ring1.last().copied();
    Ok(SpiralSequence {
        center: v,
        start_neighbor: ring1.first().copied(),
        vertices,
        pad_mask,
        ring_offsets,
        start_predecessor,
        mode: SpiralMode::ByRing(k),
    })
}

/// Fixed-length spiral: rings are grown until they cover `n` entries, the
/// sequence is truncated to exactly `n`, and if the whole disk is smaller
/// it is padded with [`PAD_VERTEX`] (mask false).
pub fn spiral_fixed(
    mesh: &HalfEdgeMesh,
    v: VertexId,
    n: usize,
    start: VertexId,
) -> Result<SpiralSequence, MeshError> {
    assert!(n >= 1, "sequence length must be at least 1");
    let mut vertices = vec![v];
    let mut ring_offsets = vec![0];
    let mut start_neighbor = None;
    let mut start_predecessor = None;

    if n > 1 && mesh.degree(v) > 0 {
        let ring1 = mesh.ordered_one_ring(v, start)?;
        start_neighbor = Some(ring1[0]);
        start_predecessor = ring1.last().copied();
        let mut k = 1;
        // grow ring by ring until the disk covers n or is exhausted
        loop {
            let rings = ordered_rings(mesh, v, k, start)?;
            let total: usize = rings.iter().map(|r| r.len()).sum();
            if total >= n || rings.last().unwrap().is_empty() {
                vertices.clear();
                ring_offsets.clear();
                for ring in &rings {
                    ring_offsets.push(vertices.len());
                    vertices.extend_from_slice(ring);
                }
                vertices.truncate(n);
                break;
            }
            k += 1;
        }
    }

    let real = vertices.len();
    let mut pad_mask = vec![true; real];
    vertices.resize(n, PAD_VERTEX);
    pad_mask.resize(n, false);
    Ok(SpiralSequence {
        center: v,
        start_neighbor,
        vertices,
        pad_mask,
        ring_offsets,
        start_predecessor,
        mode: SpiralMode::FixedLength(n),
    })
}

/// Uniformly random 1-ring neighbor of `v`; deterministic given the
/// generator state.
pub fn random_start(
    mesh: &HalfEdgeMesh,
    v: VertexId,
    rng: &mut impl Rng,
) -> Result<VertexId, MeshError> {
    let neighbors = mesh.neighbors(v);
    if neighbors.is_empty() {
        return Err(MeshError::IsolatedVertex(v));
    }
    Ok(neighbors[rng.gen_range(0..neighbors.len())])
}
