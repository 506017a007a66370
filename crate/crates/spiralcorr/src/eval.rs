//! Correspondence scoring: geodesic-radius error curves and robustness
//! sweeps.
//!
//! Geodesic distances are single-source shortest paths over the edge graph
//! with Euclidean edge lengths, normalized by the square root of the total
//! surface area of the target mesh. A prediction's error at a vertex is
//! the normalized distance between the predicted and the true target
//! vertex; the curve is the empirical CDF of those errors over a radius
//! grid. Symmetry is deliberately ignored: a prediction on the mirrored
//! counterpart counts as wrong.

use std::collections::BinaryHeap;

use thiserror::Error;

use crate::mesh::{HalfEdgeMesh, VertexId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction covers {pred} vertices, ground truth {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("label {label} out of range for a target mesh with {count} vertices")]
    LabelOutOfRange { label: usize, count: usize },
    #[error("target vertex {0} is unreachable from the evaluated sources")]
    Disconnected(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed correspondence file {path} at line {line}")]
    BadFile { path: String, line: usize },
}

/// Distances from one source vertex to every vertex, plus the mesh's
/// normalization constant √(surface area).
#[derive(Debug, Clone)]
pub struct GeodesicField {
    pub source: VertexId,
    pub distances: Vec<f64>,
    pub norm_constant: f64,
}

impl GeodesicField {
    pub fn normalized(&self, v: VertexId) -> f64 {
        self.distances[v.0] / self.norm_constant
    }

    pub fn has_unreachable(&self) -> bool {
        self.distances.iter().any(|d| d.is_infinite())
    }
}

struct HeapEntry {
    vertex: usize,
    dist: f64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // min-heap on distance
        other.dist.total_cmp(&self.dist)
    }
}

fn edge_length(mesh: &HalfEdgeMesh, u: usize, v: usize) -> f64 {
    let a = mesh.position(VertexId(u));
    let b = mesh.position(VertexId(v));
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Dijkstra over the edge graph from `source`. Unreachable vertices keep
/// an infinite distance.
pub fn geodesic_distances(mesh: &HalfEdgeMesh, source: VertexId) -> GeodesicField {
    let n = mesh.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source.0] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        vertex: source.0,
        dist: 0.0,
    });
    while let Some(HeapEntry { vertex, dist: d }) = heap.pop() {
        if done[vertex] {
            continue;
        }
        done[vertex] = true;
        for w in mesh.neighbors(VertexId(vertex)) {
            let candidate = d + edge_length(mesh, vertex, w.0);
            if candidate < dist[w.0] {
                dist[w.0] = candidate;
                heap.push(HeapEntry {
                    vertex: w.0,
                    dist: candidate,
                });
            }
        }
    }
    GeodesicField {
        source,
        distances: dist,
        norm_constant: mesh.surface_area().sqrt(),
    }
}

/// Ascending radius grid, inclusive of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid {
            start: 0.0,
            stop: 0.25,
            step: 0.0025,
        }
    }
}

impl RadiusGrid {
    /// Parses `start:stop:step`.
    pub fn parse(spec: &str) -> Option<RadiusGrid> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return None;
        }
        let start = parts[0].parse().ok()?;
        let stop = parts[1].parse().ok()?;
        let step: f64 = parts[2].parse().ok()?;
        if step <= 0.0 || stop < start {
            return None;
        }
        Some(RadiusGrid { start, stop, step })
    }

    pub fn radii(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step).round() as usize;
        let mut radii: Vec<f64> = (0..=count)
            .map(|i| self.start + i as f64 * self.step)
            .collect();
        if let Some(last) = radii.last_mut() {
            if (*last - self.stop).abs() < self.step * 1e-6 {
                *last = self.stop;
            }
        }
        radii
    }
}

/// Empirical CDF of normalized geodesic errors over a radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicErrorCurve {
    pub radii: Vec<f64>,
    pub fractions: Vec<f64>,
    /// trapezoidal area under the curve up to the maximum radius
    pub auc: f64,
}

impl GeodesicErrorCurve {
    pub fn from_errors(errors: &[f64], radii: &[f64]) -> GeodesicErrorCurve {
        let n = errors.len() as f64;
        let fractions: Vec<f64> = radii
            .iter()
            .map(|&r| errors.iter().filter(|&&e| e <= r).count() as f64 / n)
            .collect();
        let mut auc = 0.0;
        for i in 1..radii.len() {
            auc += 0.5 * (fractions[i] + fractions[i - 1]) * (radii[i] - radii[i - 1]);
        }
        GeodesicErrorCurve {
            radii: radii.to_vec(),
            fractions,
            auc,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,fraction\n");
        for (r, f) in self.radii.iter().zip(&self.fractions) {
            out.push_str(&format!("{r},{f}\n"));
        }
        out.push_str(&format!("# auc={}\n", self.auc));
        out
    }
}

/// Normalized geodesic error of each prediction on the target mesh.
pub fn correspondence_errors(
    predicted: &[usize],
    ground_truth: &[usize],
    target_mesh: &HalfEdgeMesh,
) -> Result<Vec<f64>, EvalError> {
    if predicted.len() != ground_truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: predicted.len(),
            gt: ground_truth.len(),
        });
    }
    let count = target_mesh.vertex_count();
    for &label in predicted.iter().chain(ground_truth) {
        if label >= count {
            return Err(EvalError::LabelOutOfRange { label, count });
        }
    }
    // one Dijkstra per distinct ground-truth vertex
    let mut fields: std::collections::HashMap<usize, GeodesicField> =
        std::collections::HashMap::new();
    let mut errors = Vec::with_capacity(predicted.len());
    for (&p, &g) in predicted.iter().zip(ground_truth) {
        let field = fields
            .entry(g)
            .or_insert_with(|| geodesic_distances(target_mesh, VertexId(g)));
        let e = field.normalized(VertexId(p));
        if e.is_infinite() {
            return Err(EvalError::Disconnected(p));
        }
        errors.push(e);
    }
    Ok(errors)
}

/// Scores a prediction against ground truth on the target mesh.
pub fn evaluate(
    predicted: &[usize],
    ground_truth: &[usize],
    target_mesh: &HalfEdgeMesh,
    radii: &[f64],
) -> Result<GeodesicErrorCurve, EvalError> {
    let errors = correspondence_errors(predicted, ground_truth, target_mesh)?;
    Ok(GeodesicErrorCurve::from_errors(&errors, radii))
}

/// Per-radius spread over a set of curves.
#[derive(Debug, Clone)]
pub struct SweepSpread {
    pub radii: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl SweepSpread {
    pub fn from_curves(curves: &[GeodesicErrorCurve]) -> SweepSpread {
        assert!(!curves.is_empty());
        let radii = curves[0].radii.clone();
        let runs = curves.len() as f64;
        let mut mean = vec![0.0; radii.len()];
        let mut min = vec![f64::INFINITY; radii.len()];
        let mut max = vec![f64::NEG_INFINITY; radii.len()];
        for curve in curves {
            assert_eq!(curve.radii.len(), radii.len(), "curves share one grid");
            for (i, &f) in curve.fractions.iter().enumerate() {
                mean[i] += f / runs;
                min[i] = min[i].min(f);
                max[i] = max[i].max(f);
            }
        }
        SweepSpread {
            radii,
            mean,
            min,
            max,
        }
    }

    pub fn max_spread(&self) -> f64 {
        self.min
            .iter()
            .zip(&self.max)
            .fold(0.0f64, |m, (lo, hi)| m.max(hi - lo))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,mean,min,max\n");
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.radii[i], self.mean[i], self.min[i], self.max[i]
            ));
        }
        out
    }
}

/// Runs `predict` once per seed (base_seed, base_seed+1, …) and scores
/// every run; the predictor abstracts over the model so controls can be
/// swept identically.
pub fn sweep_curves<E>(
    runs: usize,
    base_seed: u64,
    mut predict: impl FnMut(u64) -> Result<Vec<usize>, E>,
    ground_truth: &[usize],
    target_mesh: &HalfEdgeMesh,
    radii: &[f64],
) -> Result<(Vec<GeodesicErrorCurve>, SweepSpread), SweepError<E>> {
    assert!(runs >= 1, "at least one run required");
    let mut curves = Vec::with_capacity(runs);
    for run in 0..runs {
        let predicted = predict(base_seed + run as u64).map_err(SweepError::Predict)?;
        let curve =
            evaluate(&predicted, ground_truth, target_mesh, radii).map_err(SweepError::Eval)?;
        curves.push(curve);
    }
    let spread = SweepSpread::from_curves(&curves);
    Ok((curves, spread))
}

#[derive(Debug, Error)]
pub enum SweepError<E> {
    #[error("prediction failed: {0}")]
    Predict(E),
    #[error(transparent)]
    Eval(EvalError),
}

/// Repeated inference with varying spiral-start seeds: run `runs`
/// inferences seeded base_seed, base_seed+1, … and score each one.
pub fn robustness_sweep(
    checkpoint: &crate::model::Checkpoint,
    mesh: &HalfEdgeMesh,
    features: &crate::features::FeatureMatrix,
    ground_truth: &[usize],
    runs: usize,
    base_seed: u64,
    radii: &[f64],
) -> Result<(Vec<GeodesicErrorCurve>, SweepSpread), SweepError<crate::model::ModelError>> {
    sweep_curves(
        runs,
        base_seed,
        |seed| crate::model::infer(checkpoint, mesh, features, seed, false).map(|p| p.targets),
        ground_truth,
        mesh,
        radii,
    )
}

/// Reads a correspondence file: one `source_idx target_idx` pair per line,
/// `#` comments allowed. Returns targets indexed by source.
pub fn read_correspondences(path: &std::path::Path) -> Result<Vec<usize>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let parse = |t: Option<&str>| t.and_then(|x| x.parse::<usize>().ok());
        match (parse(tokens.next()), parse(tokens.next())) {
            (Some(s), Some(t)) => pairs.push((s, t)),
            _ => {
                return Err(EvalError::BadFile {
                    path: path.display().to_string(),
                    line: idx + 1,
                })
            }
        }
    }
    let count = pairs.len();
    let mut targets = vec![usize::MAX; count];
    for (s, t) in pairs {
        if s >= count {
            return Err(EvalError::LabelOutOfRange { label: s, count });
        }
        targets[s] = t;
    }
    if targets.contains(&usize::MAX) {
        return Err(EvalError::LengthMismatch {
            pred: count,
            gt: count,
        });
    }
    Ok(targets)
}

/// Writes a correspondence file (inverse of [`read_correspondences`]).
pub fn write_correspondences(path: &std::path::Path, targets: &[usize]) -> Result<(), EvalError> {
    let mut out = String::new();
    for (s, &t) in targets.iter().enumerate() {
        out.push_str(&format!("{s} {t}\n"));
    }
    std::fs::write(path, out).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use crate::rng::derive_rng;
    use rand::Rng;

    /// Exhaustive all-pairs shortest paths (Floyd–Warshall) oracle.
    fn all_pairs_oracle(mesh: &HalfEdgeMesh) -> Vec<Vec<f64>> {
        let n = mesh.vertex_count();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for v in 0..n {
            d[v][v] = 0.0;
            for w in mesh.neighbors(VertexId(v)) {
                d[v][w.0] = edge_length(mesh, v, w.0);
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

    #[test]
    fn path_distances_on_a_strip_count_unit_edges() {
        let mesh = primitives::triangulated_grid(6, 2);
        let field = geodesic_distances(&mesh, VertexId(0));
        // along the bottom row the shortest path walks unit edges
        for i in 0..6 {
            assert_eq!(field.distances[i], i as f64);
        }
    }

    #[test]
    fn equilateral_triangle_distances_are_all_one() {
        let h = 3.0f64.sqrt() / 2.0;
        let mesh = HalfEdgeMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for v in 0..3 {
            let field = geodesic_distances(&mesh, VertexId(v));
            for w in 0..3 {
                let expect = if v == w { 0.0 } else { 1.0 };
                assert!((field.distances[w] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dijkstra_matches_floyd_warshall_on_the_icosahedron() {
        let mesh = primitives::icosahedron();
        let oracle = all_pairs_oracle(&mesh);
        for v in 0..12 {
            let field = geodesic_distances(&mesh, VertexId(v));
            for w in 0..12 {
                assert_eq!(field.distances[w], oracle[v][w], "d({v},{w})");
            }
        }
    }

    #[test]
    fn geodesic_field_is_symmetric_and_triangle_bounded() {
        let mesh = primitives::torus_grid(6, 5);
        let fields: Vec<GeodesicField> = (0..mesh.vertex_count())
            .map(|v| geodesic_distances(&mesh, VertexId(v)))
            .collect();
        let n = mesh.vertex_count();
        for u in 0..n {
            for v in 0..n {
                assert!((fields[u].distances[v] - fields[v].distances[u]).abs() < 1e-9);
                for w in 0..n {
                    assert!(
                        fields[u].distances[v]
                            <= fields[u].distances[w] + fields[w].distances[v] + 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn perfect_prediction_scores_one_everywhere() {
        let mesh = primitives::icosahedron();
        let gt: Vec<usize> = (0..12).collect();
        let curve = evaluate(&gt, &gt, &mesh, &RadiusGrid::default().radii()).unwrap();
        assert!(curve.fractions.iter().all(|&f| f == 1.0));
        assert_eq!(curve.fractions[0], 1.0); // radius 0 included
    }

    #[test]
    fn single_wrong_vertex_forms_a_step_cdf() {
        let mesh = primitives::icosahedron();
        let gt: Vec<usize> = (0..12).collect();
        let mut pred = gt.clone();
        pred[3] = mesh.neighbors(VertexId(3))[0].0;
        let e = correspondence_errors(&pred, &gt, &mesh).unwrap();
        let wrong = e[3];
        assert!(wrong > 0.0);
        let radii: Vec<f64> = vec![0.0, wrong * 0.5, wrong, wrong * 2.0];
        let curve = GeodesicErrorCurve::from_errors(&e, &radii);
        assert_eq!(curve.fractions[0], 11.0 / 12.0);
        assert_eq!(curve.fractions[1], 11.0 / 12.0);
        assert_eq!(curve.fractions[2], 1.0);
        assert_eq!(curve.fractions[3], 1.0);
    }

    #[test]
    fn random_prediction_matches_exhaustive_oracle_cdf() {
        let mesh = primitives::icosahedron();
        let oracle = all_pairs_oracle(&mesh);
        let area_norm = mesh.surface_area().sqrt();
        let mut rng = derive_rng(31, &[0]);
        let gt: Vec<usize> = (0..12).collect();
        let pred: Vec<usize> = (0..12).map(|_| rng.gen_range(0..12)).collect();
        let radii = RadiusGrid::default().radii();
        let curve = evaluate(&pred, &gt, &mesh, &radii).unwrap();

        let errors: Vec<f64> = pred
            .iter()
            .zip(&gt)
            .map(|(&p, &g)| oracle[g][p] / area_norm)
            .collect();
        for (i, &r) in radii.iter().enumerate() {
            let frac = errors.iter().filter(|&&e| e <= r).count() as f64 / 12.0;
            assert_eq!(curve.fractions[i], frac, "radius {r}");
        }
    }

    #[test]
    fn curves_are_monotone_and_bounded() {
        let mesh = primitives::triangulated_grid(5, 5);
        let mut rng = derive_rng(32, &[0]);
        let gt: Vec<usize> = (0..25).collect();
        let pred: Vec<usize> = (0..25).map(|_| rng.gen_range(0..25)).collect();
        let grid = RadiusGrid {
            start: 0.0,
            stop: 3.0,
            step: 0.05,
        };
        let curve = evaluate(&pred, &gt, &mesh, &grid.radii()).unwrap();
        assert!(curve.fractions.windows(2).all(|w| w[0] <= w[1]));
        assert!(curve.fractions.iter().all(|&f| (0.0..=1.0).contains(&f)));
        // the grid reaches past the normalized diameter, so the tail is 1
        assert_eq!(*curve.fractions.last().unwrap(), 1.0);
    }

    #[test]
    fn scaling_the_target_mesh_leaves_the_curve_unchanged() {
        let base = primitives::icosahedron();
        let gt: Vec<usize> = (0..12).collect();
        let mut rng = derive_rng(33, &[0]);
        let pred: Vec<usize> = (0..12).map(|_| rng.gen_range(0..12)).collect();
        let radii = RadiusGrid::default().radii();
        let reference = evaluate(&pred, &gt, &base, &radii).unwrap();
        for scale in [0.5, 2.0] {
            let scaled = HalfEdgeMesh::new(
                base.positions()
                    .iter()
                    .map(|p| [p[0] * scale, p[1] * scale, p[2] * scale])
                    .collect(),
                base.faces().to_vec(),
            )
            .unwrap();
            let curve = evaluate(&pred, &gt, &scaled, &radii).unwrap();
            assert_eq!(curve.fractions, reference.fractions, "scale {scale}");
        }
    }

    #[test]
    fn consistent_relabeling_leaves_the_curve_unchanged() {
        let mesh = primitives::icosahedron();
        let mut rng = derive_rng(34, &[0]);
        let gt: Vec<usize> = (0..12).map(|_| rng.gen_range(0..12)).collect();
        let pred: Vec<usize> = (0..12).map(|_| rng.gen_range(0..12)).collect();
        let radii = RadiusGrid::default().radii();
        let reference = evaluate(&pred, &gt, &mesh, &radii).unwrap();
        // permute the *source* order: errors are a multiset, curve unchanged
        let perm: Vec<usize> = (0..12).rev().collect();
        let pred_p: Vec<usize> = perm.iter().map(|&i| pred[i]).collect();
        let gt_p: Vec<usize> = perm.iter().map(|&i| gt[i]).collect();
        let permuted = evaluate(&pred_p, &gt_p, &mesh, &radii).unwrap();
        assert_eq!(permuted.fractions, reference.fractions);
    }

    #[test]
    fn label_out_of_range_is_an_error() {
        let mesh = primitives::tetrahedron();
        let err = evaluate(&[0, 1, 9, 3], &[0, 1, 2, 3], &mesh, &[0.0]).unwrap_err();
        assert!(matches!(err, EvalError::LabelOutOfRange { label: 9, .. }));
    }

    #[test]
    fn sweep_of_a_constant_predictor_has_zero_spread() {
        let mesh = primitives::icosahedron();
        let gt: Vec<usize> = (0..12).collect();
        let radii = RadiusGrid::default().radii();
        let (curves, spread) = sweep_curves(
            5,
            100,
            |_seed| Ok::<_, std::convert::Infallible>(vec![0usize; 12]),
            &gt,
            &mesh,
            &radii,
        )
        .unwrap();
        assert_eq!(curves.len(), 5);
        assert_eq!(spread.max_spread(), 0.0);
    }

    #[test]
    fn correspondence_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.txt");
        let targets = vec![3usize, 1, 4, 1, 5];
        write_correspondences(&path, &targets).unwrap();
        assert_eq!(read_correspondences(&path).unwrap(), targets);
    }

    #[test]
    fn curve_csv_has_header_rows_and_auc() {
        let curve = GeodesicErrorCurve::from_errors(&[0.0, 0.1], &[0.0, 0.05, 0.1]);
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "radius,fraction");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("# auc="));
    }
}
