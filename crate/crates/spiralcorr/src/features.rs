//! Per-vertex descriptors and their serialization along spirals.
//!
//! Descriptor files use the `VFEAT1` container: the ascii magic line
//! `VFEAT1\n`, a header line `V D name\n`, then `V·D` little-endian 64-bit
//! floats in row-major order. Reads are bit-faithful.
//!
//! Metric augmentation appends to each sequence step the Euclidean
//! distance from the step vertex to the center and the angle at the center
//! between the previous and the current step vertex (radians in [0, π]).
//! The center step and padded steps carry (0, 0). For the first 1-ring
//! step — whose sequence predecessor is the center itself — the previous
//! vertex is the cyclic predecessor in the ring walk, which keeps the
//! appended pairs invariant under the choice of start (up to the cyclic
//! relabeling of steps).

use std::io::Write;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::mesh::{HalfEdgeMesh, VertexId};
use crate::rng::vertex_rng;
use crate::spiral::{random_start, spiral_fixed, SpiralSequence, PAD_VERTEX};

pub const VFEAT_MAGIC: &str = "VFEAT1";

/// Stream tag for spiral-start draws (see [`crate::rng`]).
pub const START_DRAW_TAG: u64 = 0x5710;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed descriptor header: {0}")]
    Header(String),
    #[error("descriptor holds {file} vertices but the mesh has {mesh}")]
    VertexCountMismatch { file: usize, mesh: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

/// V×D per-vertex descriptor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    vertex_count: usize,
    dim: usize,
    pub descriptor_name: String,
}

impl FeatureMatrix {
    pub fn new(
        vertex_count: usize,
        dim: usize,
        values: Vec<f64>,
        name: &str,
    ) -> Result<Self, FeatureError> {
        if values.len() != vertex_count * dim {
            return Err(FeatureError::Header(format!(
                "expected {} values, got {}",
                vertex_count * dim,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: bad / dim,
                col: bad % dim,
            });
        }
        Ok(FeatureMatrix {
            values,
            vertex_count,
            dim,
            descriptor_name: name.to_string(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.values[v * self.dim..(v + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-dimension mean/stddev over all rows (used for the optional
    /// z-score normalization; the default pipeline applies none).
    pub fn column_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.vertex_count as f64;
        let mut mean = vec![0.0; self.dim];
        for v in 0..self.vertex_count {
            for (m, &x) in mean.iter_mut().zip(self.row(v)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dim];
        for v in 0..self.vertex_count {
            for ((s, &m), &x) in var.iter_mut().zip(&mean).zip(self.row(v)) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        (mean, std)
    }

    /// Applies a stored z-score transform.
    pub fn normalized(&self, mean: &[f64], std: &[f64]) -> FeatureMatrix {
        assert_eq!(mean.len(), self.dim);
        assert_eq!(std.len(), self.dim);
        let mut values = self.values.clone();
        for v in 0..self.vertex_count {
            for (c, x) in values[v * self.dim..(v + 1) * self.dim]
                .iter_mut()
                .enumerate()
            {
                *x = (*x - mean[c]) / std[c];
            }
        }
        FeatureMatrix {
            values,
            vertex_count: self.vertex_count,
            dim: self.dim,
            descriptor_name: self.descriptor_name.clone(),
        }
    }
}

/// Reads a `VFEAT1` file and checks it against the mesh.
pub fn load_descriptors(path: &Path, mesh: &HalfEdgeMesh) -> Result<FeatureMatrix, FeatureError> {
    let matrix = read_vfeat(path)?;
    if matrix.vertex_count != mesh.vertex_count() {
        return Err(FeatureError::VertexCountMismatch {
            file: matrix.vertex_count,
            mesh: mesh.vertex_count(),
        });
    }
    Ok(matrix)
}

/// Reads a `VFEAT1` file without a mesh to check against.
pub fn read_vfeat(path: &Path) -> Result<FeatureMatrix, FeatureError> {
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let magic_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| FeatureError::Header("missing magic line".into()))?;
    let magic = std::str::from_utf8(&bytes[..magic_end])
        .map_err(|_| FeatureError::Header("magic is not utf-8".into()))?;
    if magic.trim_end_matches('\r') != VFEAT_MAGIC {
        return Err(FeatureError::Header(format!("bad magic '{magic}'")));
    }
    let header_end = bytes[magic_end + 1..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| magic_end + 1 + p)
        .ok_or_else(|| FeatureError::Header("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[magic_end + 1..header_end])
        .map_err(|_| FeatureError::Header("header is not utf-8".into()))?;
    let mut tokens = header.split_whitespace();
    let v: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| FeatureError::Header(format!("bad vertex count in '{header}'")))?;
    let d: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| FeatureError::Header(format!("bad dimension in '{header}'")))?;
    let name = tokens.next().unwrap_or("descriptor").to_string();

    let payload = &bytes[header_end + 1..];
    if payload.len() != v * d * 8 {
        return Err(FeatureError::Header(format!(
            "payload holds {} bytes, header promises {}",
            payload.len(),
            v * d * 8
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(v, d, values, &name)
}

/// Writes the `VFEAT1` container (bit-exact round trip with [`read_vfeat`]).
pub fn write_vfeat(path: &Path, matrix: &FeatureMatrix) -> Result<(), FeatureError> {
    let mut out = Vec::with_capacity(matrix.values.len() * 8 + 64);
    out.extend_from_slice(VFEAT_MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(
        format!(
            "{} {} {}\n",
            matrix.vertex_count, matrix.dim, matrix.descriptor_name
        )
        .as_bytes(),
    );
    for v in &matrix.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Parses a whitespace-separated table (one row of D values per line,
/// `#`-prefixed lines skipped) into a matrix.
pub fn parse_feature_table(text: &str, name: &str) -> Result<FeatureMatrix, FeatureError> {
    let mut values = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = trimmed.split_whitespace().map(|t| t.parse()).collect();
        let row =
            row.map_err(|_| FeatureError::Header(format!("unparsable value on line {}", idx + 1)))?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(FeatureError::Header(format!(
                    "row {} has {} values, expected {}",
                    idx + 1,
                    row.len(),
                    d
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let dim = dim.ok_or_else(|| FeatureError::Header("empty table".into()))?;
    FeatureMatrix::new(rows, dim, values, name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawFeatureKind {
    Position,
    Normal,
    PositionNormal,
}

impl RawFeatureKind {
    pub fn dim(self) -> usize {
        match self {
            RawFeatureKind::Position | RawFeatureKind::Normal => 3,
            RawFeatureKind::PositionNormal => 6,
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "position" => Some(RawFeatureKind::Position),
            "normal" => Some(RawFeatureKind::Normal),
            "position+normal" => Some(RawFeatureKind::PositionNormal),
            _ => None,
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Simple geometric fallback features: vertex positions and/or
/// area-weighted unit vertex normals.
pub fn raw_features(
    mesh: &HalfEdgeMesh,
    kind: RawFeatureKind,
) -> Result<FeatureMatrix, FeatureError> {
    let v_count = mesh.vertex_count();
    let normals = if kind != RawFeatureKind::Position {
        let mut acc = vec![[0.0f64; 3]; v_count];
        for face in mesh.faces() {
            let [a, b, c] = *face;
            let n = cross(
                sub(mesh.position(VertexId(b)), mesh.position(VertexId(a))),
                sub(mesh.position(VertexId(c)), mesh.position(VertexId(a))),
            );
            // cross product length is twice the face area: area weighting
            for &v in face {
                for axis in 0..3 {
                    acc[v][axis] += n[axis];
                }
            }
        }
        for (v, n) in acc.iter_mut().enumerate() {
            let len = norm(*n);
            if len < 1e-15 {
                return Err(FeatureError::Degenerate(format!(
                    "vertex {v} has a zero-area fan; normal undefined"
                )));
            }
            n.iter_mut().for_each(|x| *x /= len);
        }
        Some(acc)
    } else {
        None
    };

    let dim = kind.dim();
    let mut values = Vec::with_capacity(v_count * dim);
    for v in 0..v_count {
        match kind {
            RawFeatureKind::Position => values.extend(mesh.position(VertexId(v))),
            RawFeatureKind::Normal => values.extend(normals.as_ref().unwrap()[v]),
            RawFeatureKind::PositionNormal => {
                values.extend(mesh.position(VertexId(v)));
                values.extend(normals.as_ref().unwrap()[v]);
            }
        }
    }
    let name = match kind {
        RawFeatureKind::Position => "position",
        RawFeatureKind::Normal => "normal",
        RawFeatureKind::PositionNormal => "position+normal",
    };
    FeatureMatrix::new(v_count, dim, values, name)
}

/// How the appended center distance is measured. Angles are always taken
/// between the straight rays from the center, so only the distance column
/// changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CenterDistance {
    /// straight-line 3D distance (the default)
    #[default]
    Euclidean,
    /// shortest path over the edge graph
    Geodesic,
}

/// (distance-to-center, angle-at-center) pair for every step of a spiral.
///
/// Step 0 and padded steps get (0, 0); the first 1-ring step measures its
/// angle against the cyclic ring predecessor (see module docs).
pub fn metric_pairs(
    mesh: &HalfEdgeMesh,
    spiral: &SpiralSequence,
) -> Result<Vec<(f64, f64)>, FeatureError> {
    metric_pairs_with(mesh, spiral, CenterDistance::Euclidean)
}

/// [`metric_pairs`] with an explicit center-distance convention.
pub fn metric_pairs_with(
    mesh: &HalfEdgeMesh,
    spiral: &SpiralSequence,
    distance: CenterDistance,
) -> Result<Vec<(f64, f64)>, FeatureError> {
    let center = mesh.position(spiral.center);
    let geodesic = match distance {
        CenterDistance::Euclidean => None,
        CenterDistance::Geodesic => {
            Some(crate::eval::geodesic_distances(mesh, spiral.center).distances)
        }
    };
    let mut pairs = Vec::with_capacity(spiral.len());
    for (t, (&c, &real)) in spiral.vertices.iter().zip(&spiral.pad_mask).enumerate() {
        if t == 0 || !real {
            pairs.push((0.0, 0.0));
            continue;
        }
        let prev = if t == 1 {
            spiral
                .start_predecessor
                .expect("nonempty ring has a predecessor")
        } else {
            spiral.vertices[t - 1]
        };
        let to_c = sub(mesh.position(c), center);
        let to_prev = sub(mesh.position(prev), center);
        let dist = norm(to_c);
        let prev_dist = norm(to_prev);
        if dist < 1e-15 || prev_dist < 1e-15 {
            return Err(FeatureError::Degenerate(format!(
                "zero-length ray from center {} toward {} or {}; angle undefined",
                spiral.center, prev, c
            )));
        }
        if prev != c && norm(sub(mesh.position(prev), mesh.position(c))) < 1e-15 {
            return Err(FeatureError::Degenerate(format!(
                "consecutive vertices {prev} and {c} have coincident positions"
            )));
        }
        // atan2(|u x w|, u . w) stays well-conditioned near 0 and pi
        let dot = to_c[0] * to_prev[0] + to_c[1] * to_prev[1] + to_c[2] * to_prev[2];
        let cr = cross(to_prev, to_c);
        let reported = match &geodesic {
            Some(d) => d[c.0],
            None => dist,
        };
        pairs.push((reported, norm(cr).atan2(dot)));
    }
    Ok(pairs)
}

/// One mesh's worth of serialized model input.
#[derive(Debug, Clone, PartialEq)]
pub struct SerializedBatch {
    /// V×N×D' inputs, row-major; padded steps are all-zero
    pub inputs: Vec<f64>,
    /// V×N mask, true = real vertex
    pub pad_mask: Vec<bool>,
    /// V×N spiral vertex ids, `usize::MAX` for padding (used by networks
    /// that re-gather per-vertex activations along the spiral)
    pub spiral_indices: Vec<usize>,
    pub vertex_count: usize,
    pub seq_len: usize,
    /// D' = base dim, +2 when augmented
    pub step_dim: usize,
    pub augmented: bool,
}

impl SerializedBatch {
    pub fn step(&self, v: usize, t: usize) -> &[f64] {
        let off = (v * self.seq_len + t) * self.step_dim;
        &self.inputs[off..off + self.step_dim]
    }
}

/// Serializes every vertex's fixed-length spiral: feature rows are gathered
/// verbatim along the spiral (no blending), metric pairs appended when
/// `augment` is set. Spiral starts are drawn per vertex from the seed via
/// the documented stream derivation, so batches are reproducible.
pub fn serialize_batch(
    mesh: &HalfEdgeMesh,
    features: &FeatureMatrix,
    seq_len: usize,
    seed: u64,
    augment: bool,
) -> Result<SerializedBatch, FeatureError> {
    assert_eq!(
        features.vertex_count(),
        mesh.vertex_count(),
        "feature rows must match mesh vertices"
    );
    assert!(seq_len >= 1);
    let v_count = mesh.vertex_count();
    let base_dim = features.dim();
    let step_dim = base_dim + if augment { 2 } else { 0 };
    let mut inputs = vec![0.0; v_count * seq_len * step_dim];
    let mut pad_mask = vec![false; v_count * seq_len];
    let mut spiral_indices = vec![usize::MAX; v_count * seq_len];

    for v in 0..v_count {
        let mut rng = vertex_rng(seed, START_DRAW_TAG, v);
        let start = random_start(mesh, VertexId(v), &mut rng)
            .map_err(|e| FeatureError::Degenerate(e.to_string()))?;
        let spiral = spiral_fixed(mesh, VertexId(v), seq_len, start)
            .map_err(|e| FeatureError::Degenerate(e.to_string()))?;
        let pairs = if augment {
            Some(metric_pairs(mesh, &spiral)?)
        } else {
            None
        };
        for t in 0..seq_len {
            let real = spiral.pad_mask[t];
            pad_mask[v * seq_len + t] = real;
            if !real {
                continue; // padded steps stay all-zero
            }
            let w = spiral.vertices[t];
            debug_assert_ne!(w, PAD_VERTEX);
            spiral_indices[v * seq_len + t] = w.0;
            let off = (v * seq_len + t) * step_dim;
            inputs[off..off + base_dim].copy_from_slice(features.row(w.0));
            if let Some(pairs) = &pairs {
                inputs[off + base_dim] = pairs[t].0;
                inputs[off + base_dim + 1] = pairs[t].1;
            }
        }
    }
    Ok(SerializedBatch {
        inputs,
        pad_mask,
        spiral_indices,
        vertex_count: v_count,
        seq_len,
        step_dim,
        augmented: augment,
    })
}

/// Serialization with explicitly provided starts (used by tests and by
/// deterministic single-vertex tooling).
pub fn serialize_with_starts(
    mesh: &HalfEdgeMesh,
    features: &FeatureMatrix,
    seq_len: usize,
    starts: &[VertexId],
    augment: bool,
) -> Result<SerializedBatch, FeatureError> {
    assert_eq!(starts.len(), mesh.vertex_count());
    let v_count = mesh.vertex_count();
    let base_dim = features.dim();
    let step_dim = base_dim + if augment { 2 } else { 0 };
    let mut inputs = vec![0.0; v_count * seq_len * step_dim];
    let mut pad_mask = vec![false; v_count * seq_len];
    let mut spiral_indices = vec![usize::MAX; v_count * seq_len];
    for v in 0..v_count {
        let spiral = spiral_fixed(mesh, VertexId(v), seq_len, starts[v])
            .map_err(|e| FeatureError::Degenerate(e.to_string()))?;
        let pairs = if augment {
            Some(metric_pairs(mesh, &spiral)?)
        } else {
            None
        };
        for t in 0..seq_len {
            if !spiral.pad_mask[t] {
                continue;
            }
            pad_mask[v * seq_len + t] = true;
            let w = spiral.vertices[t];
            spiral_indices[v * seq_len + t] = w.0;
            let off = (v * seq_len + t) * step_dim;
            inputs[off..off + base_dim].copy_from_slice(features.row(w.0));
            if let Some(pairs) = &pairs {
                inputs[off + base_dim] = pairs[t].0;
                inputs[off + base_dim + 1] = pairs[t].1;
            }
        }
    }
    Ok(SerializedBatch {
        inputs,
        pad_mask,
        spiral_indices,
        vertex_count: v_count,
        seq_len,
        step_dim,
        augmented: augment,
    })
}

/// Random per-vertex features for tests and examples.
pub fn random_features(
    vertex_count: usize,
    dim: usize,
    rng: &mut impl Rng,
    name: &str,
) -> FeatureMatrix {
    let values = (0..vertex_count * dim)
        .map(|_| rng.gen::<f64>() * 2.0 - 1.0)
        .collect();
    FeatureMatrix::new(vertex_count, dim, values, name).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use crate::rng::derive_rng;
    use crate::spiral::spiral_by_ring;

    #[test]
    fn vfeat_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("desc.vfeat");
        let mut rng = derive_rng(1, &[1]);
        let matrix = random_features(23, 7, &mut rng, "rand");
        write_vfeat(&path, &matrix).unwrap();
        let back = read_vfeat(&path).unwrap();
        assert_eq!(back, matrix);
    }

    #[test]
    fn vertex_count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("desc.vfeat");
        let mut rng = derive_rng(1, &[2]);
        write_vfeat(&path, &random_features(100, 4, &mut rng, "r")).unwrap();
        let mesh = primitives::tetrahedron();
        let err = load_descriptors(&path, &mesh).unwrap_err();
        assert!(matches!(
            err,
            FeatureError::VertexCountMismatch { file: 100, mesh: 4 }
        ));
    }

    #[test]
    fn nan_values_are_rejected() {
        let err = FeatureMatrix::new(2, 2, vec![0.0, 1.0, f64::NAN, 2.0], "bad").unwrap_err();
        assert!(matches!(err, FeatureError::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.vfeat");
        std::fs::write(&path, b"VFEAT1\n4 2 name\n\x00\x00").unwrap();
        assert!(matches!(read_vfeat(&path), Err(FeatureError::Header(_))));
    }

    #[test]
    fn feature_table_parses_whitespace_rows() {
        let matrix = parse_feature_table("# hdr\n1 2 3\n4 5 6\n", "t").unwrap();
        assert_eq!(matrix.vertex_count(), 2);
        assert_eq!(matrix.dim(), 3);
        assert_eq!(matrix.row(1), &[4.0, 5.0, 6.0]);
        assert!(parse_feature_table("1 2\n3\n", "t").is_err());
    }

    #[test]
    fn raw_positions_equal_vertex_coordinates() {
        let mesh = primitives::tetrahedron();
        let feats = raw_features(&mesh, RawFeatureKind::Position).unwrap();
        for v in 0..4 {
            assert_eq!(feats.row(v), mesh.position(VertexId(v)));
        }
    }

    #[test]
    fn flat_grid_normals_are_the_plane_normal() {
        let mesh = primitives::triangulated_grid(4, 4);
        let feats = raw_features(&mesh, RawFeatureKind::Normal).unwrap();
        for v in 0..mesh.vertex_count() {
            let n = feats.row(v);
            assert!((n[0]).abs() < 1e-12 && (n[1]).abs() < 1e-12);
            assert!((n[2] - 1.0).abs() < 1e-12, "normal {n:?}");
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let ico = primitives::icosahedron();
        let radius = norm(ico.position(VertexId(0)));
        let positions: Vec<[f64; 3]> = ico
            .positions()
            .iter()
            .map(|p| [p[0] / radius, p[1] / radius, p[2] / radius])
            .collect();
        let mesh = HalfEdgeMesh::new(positions, ico.faces().to_vec()).unwrap();
        let feats = raw_features(&mesh, RawFeatureKind::Normal).unwrap();
        for v in 0..mesh.vertex_count() {
            let p = mesh.position(VertexId(v));
            let n = feats.row(v);
            let diff = norm(sub([n[0], n[1], n[2]], p));
            assert!(diff < 0.05, "vertex {v}: {diff}");
        }
    }

    #[test]
    fn metric_pair_of_orthogonal_unit_vectors() {
        // the center's three neighbors are pairwise orthogonal unit
        // vectors, so every 1-ring step appends exactly (1.0, π/2)
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
        assert_eq!(pairs[0], (0.0, 0.0));
        for t in 1..4 {
            assert!((pairs[t].0 - 1.0).abs() < 1e-15, "step {t}: {:?}", pairs[t]);
            assert!(
                (pairs[t].1 - std::f64::consts::FRAC_PI_2).abs() < 1e-12,
                "step {t}: {:?}",
                pairs[t]
            );
        }
    }

    #[test]
    fn coincident_consecutive_positions_are_an_error() {
        let positions = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0], // duplicate of vertex 1
            [0.0, 0.0, -1.0],
        ];
        let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        let mesh = HalfEdgeMesh::build_unchecked(positions, faces).unwrap();
        let spiral = spiral_by_ring(&mesh, VertexId(0), 1, VertexId(1)).unwrap();
        let err = metric_pairs(&mesh, &spiral).unwrap_err();
        assert!(err.to_string().contains("coincident"), "{err}");
    }

    #[test]
    fn vertex_on_center_is_an_error() {
        let positions = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0], // coincides with the center
            [0.0, 0.0, -1.0],
        ];
        let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        let mesh = HalfEdgeMesh::build_unchecked(positions, faces).unwrap();
        let spiral = spiral_by_ring(&mesh, VertexId(0), 1, VertexId(1)).unwrap();
        let err = metric_pairs(&mesh, &spiral).unwrap_err();
        assert!(err.to_string().contains("zero-length"), "{err}");
    }

    #[test]
    fn augmented_pairs_are_rigid_motion_invariant() {
        let mesh = primitives::triangulated_grid(6, 6);
        let mut rng = derive_rng(42, &[3]);
        // random rotation from a normalized quaternion plus a translation
        let q: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let qn = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
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
        let t = [3.7, -1.2, 0.4];
        let moved: Vec<[f64; 3]> = mesh
            .positions()
            .iter()
            .map(|p| {
                [
                    rot[0][0] * p[0] + rot[0][1] * p[1] + rot[0][2] * p[2] + t[0],
                    rot[1][0] * p[0] + rot[1][1] * p[1] + rot[1][2] * p[2] + t[1],
                    rot[2][0] * p[0] + rot[2][1] * p[1] + rot[2][2] * p[2] + t[2],
                ]
            })
            .collect();
        let moved_mesh = HalfEdgeMesh::new(moved, mesh.faces().to_vec()).unwrap();
        for v in [0usize, 7, 14, 21, 35] {
            let start = mesh.neighbors(VertexId(v))[0];
            let spiral = spiral_fixed(&mesh, VertexId(v), 12, start).unwrap();
            let a = metric_pairs(&mesh, &spiral).unwrap();
            let b = metric_pairs(&moved_mesh, &spiral).unwrap();
            for (pa, pb) in a.iter().zip(&b) {
                assert!((pa.0 - pb.0).abs() < 1e-9, "distance drifted");
                assert!((pa.1 - pb.1).abs() < 1e-9, "angle drifted");
            }
        }
    }

    #[test]
    fn one_ring_pairs_rotate_with_the_start() {
        let mesh = primitives::triangulated_grid(7, 7);
        let v = VertexId(3 * 7 + 3);
        let neighbors = mesh.neighbors(v);
        let collect = |start: VertexId| {
            let spiral = spiral_by_ring(&mesh, v, 1, start).unwrap();
            metric_pairs(&mesh, &spiral).unwrap()[1..].to_vec()
        };
        let reference = collect(neighbors[0]);
        let ring = mesh.ordered_one_ring(v, neighbors[0]).unwrap();
        for shift in 1..ring.len() {
            let rotated = collect(ring[shift]);
            for i in 0..ring.len() {
                let expect = &reference[(shift + i) % ring.len()];
                assert!((rotated[i].0 - expect.0).abs() < 1e-12);
                assert!((rotated[i].1 - expect.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn serialize_gathers_rows_verbatim() {
        let mesh = primitives::icosahedron();
        let mut rng = derive_rng(11, &[4]);
        let feats = random_features(12, 5, &mut rng, "r");
        let batch = serialize_batch(&mesh, &feats, 9, 77, false).unwrap();
        for v in 0..12 {
            for t in 0..9 {
                let idx = batch.spiral_indices[v * 9 + t];
                assert!(batch.pad_mask[v * 9 + t]);
                assert_eq!(batch.step(v, t), feats.row(idx), "v={v} t={t}");
            }
        }
        // first step is always the center itself
        for v in 0..12 {
            assert_eq!(batch.spiral_indices[v * 9], v);
        }
    }

    #[test]
    fn serialize_is_deterministic_in_the_seed() {
        let mesh = primitives::triangulated_grid(5, 5);
        let mut rng = derive_rng(11, &[5]);
        let feats = random_features(25, 3, &mut rng, "r");
        let a = serialize_batch(&mesh, &feats, 8, 123, true).unwrap();
        let b = serialize_batch(&mesh, &feats, 8, 123, true).unwrap();
        assert_eq!(a, b);
        let c = serialize_batch(&mesh, &feats, 8, 124, true).unwrap();
        assert_ne!(a.spiral_indices, c.spiral_indices);
    }

    #[test]
    fn seq_len_one_keeps_only_the_center_feature() {
        let mesh = primitives::tetrahedron();
        let feats = raw_features(&mesh, RawFeatureKind::Position).unwrap();
        let batch = serialize_batch(&mesh, &feats, 1, 5, false).unwrap();
        for v in 0..4 {
            assert_eq!(batch.step(v, 0), feats.row(v));
        }
    }

    #[test]
    fn exhausted_disk_pads_with_zero_rows() {
        let mesh = primitives::tetrahedron();
        let feats = raw_features(&mesh, RawFeatureKind::Position).unwrap();
        let batch = serialize_batch(&mesh, &feats, 30, 5, false).unwrap();
        for v in 0..4 {
            for t in 0..30 {
                if t < 4 {
                    assert!(batch.pad_mask[v * 30 + t]);
                } else {
                    assert!(!batch.pad_mask[v * 30 + t]);
                    assert!(batch.step(v, t).iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn geodesic_center_distance_switch() {
        let mesh = primitives::triangulated_grid(6, 6);
        let v = VertexId(2 * 6 + 2);
        let start = mesh.neighbors(v)[0];
        let spiral = spiral_by_ring(&mesh, v, 2, start).unwrap();
        let euclid = metric_pairs(&mesh, &spiral).unwrap();
        let geo = metric_pairs_with(&mesh, &spiral, CenterDistance::Geodesic).unwrap();
        for t in 1..spiral.len() {
            // graph distance is an over-estimate; angles agree exactly
            assert!(geo[t].0 >= euclid[t].0 - 1e-12, "step {t}");
            assert_eq!(geo[t].1, euclid[t].1);
        }
        // ring-1 steps coincide (the edge is the shortest path)
        for t in 1..=spiral.ring_segment(1).len() {
            assert!((geo[t].0 - euclid[t].0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_scale_descriptor_header_is_accepted() {
        // 65 x 106 grid = 6890 vertices, 544-dim rows
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shot.vfeat");
        let mesh = primitives::triangulated_grid(65, 106);
        assert_eq!(mesh.vertex_count(), 6890);
        let values = vec![0.125f64; 6890 * 544];
        let matrix = FeatureMatrix::new(6890, 544, values, "shot").unwrap();
        write_vfeat(&path, &matrix).unwrap();
        let loaded = load_descriptors(&path, &mesh).unwrap();
        assert_eq!(loaded.vertex_count(), 6890);
        assert_eq!(loaded.dim(), 544);
    }

    #[test]
    fn zscore_normalization_roundtrips() {
        let mut rng = derive_rng(9, &[6]);
        let feats = random_features(40, 4, &mut rng, "r");
        let (mean, std) = feats.column_stats();
        let normed = feats.normalized(&mean, &std);
        let (m2, s2) = normed.column_stats();
        for c in 0..4 {
            assert!(m2[c].abs() < 1e-12);
            assert!((s2[c] - 1.0).abs() < 1e-9);
        }
    }
}
