//! Manifoldness and orientation checks.
//!
//! Violations are report entries rather than hard failures so that broken
//! inputs can be inspected. A report is printable as one line per entry:
//! `<severity>\t<element>\t<message>`.

use super::HalfEdgeMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub severity: Severity,
    pub element: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    fn push(&mut self, severity: Severity, element: String, message: String) {
        self.violations.push(Violation {
            severity,
            element,
            message,
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}\t{}\t{}", v.severity, v.element, v.message)?;
        }
        Ok(())
    }
}

pub(super) fn validate_mesh(mesh: &HalfEdgeMesh) -> ValidationReport {
    let mut report = ValidationReport::default();
    let faces = mesh.faces();

    // degenerate and duplicate faces
    let mut seen = std::collections::HashMap::new();
    for (f, face) in faces.iter().enumerate() {
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
            report.push(
                Severity::Error,
                format!("face({f})"),
                format!("degenerate face with repeated vertex: {:?}", face),
            );
            continue;
        }
        let mut key = *face;
        key.sort_unstable();
        if let Some(prev) = seen.insert(key, f) {
            report.push(
                Severity::Error,
                format!("face({f})"),
                format!("duplicate of face({prev})"),
            );
        }
    }

    // per-edge incidence and orientation
    let mut edges: std::collections::BTreeMap<(usize, usize), Vec<(usize, bool)>> =
        std::collections::BTreeMap::new();
    for (f, face) in faces.iter().enumerate() {
        for corner in 0..3 {
            let u = face[corner];
            let v = face[(corner + 1) % 3];
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            edges.entry(key).or_default().push((f, u < v));
        }
    }
    for (&(u, v), incident) in &edges {
        if incident.len() > 2 {
            report.push(
                Severity::Error,
                format!("edge({u},{v})"),
                format!("non-manifold edge with {} incident faces", incident.len()),
            );
        } else if incident.len() == 2 && incident[0].1 == incident[1].1 {
            report.push(
                Severity::Error,
                format!("edge({u},{v})"),
                format!(
                    "inconsistent orientation between face({}) and face({})",
                    incident[0].0, incident[1].0
                ),
            );
        }
    }

    // vertex fans: all incident faces must form one edge-connected wedge
    let mut incident_faces: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertex_count()];
    for (f, face) in faces.iter().enumerate() {
        for &v in face {
            incident_faces[v].push(f);
        }
    }
    for (v, incident) in incident_faces.iter().enumerate() {
        if incident.is_empty() {
            report.push(
                Severity::Error,
                format!("vertex({v})"),
                "isolated vertex (no incident faces)".to_string(),
            );
            continue;
        }
        let components = wedge_components(faces, v, incident);
        if components > 1 {
            report.push(
                Severity::Error,
                format!("vertex({v})"),
                format!("non-manifold vertex: fan splits into {components} components"),
            );
        }
    }

    report
}

/// Number of connected components among the faces incident to `v`, where
/// two faces are adjacent when they share an edge through `v`.
fn wedge_components(faces: &[[usize; 3]], v: usize, incident: &[usize]) -> usize {
    let n = incident.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // edge (v, other) -> local face indices
    let mut by_edge: std::collections::HashMap<usize, Vec<usize>> =
        std::collections::HashMap::new();
    for (local, &f) in incident.iter().enumerate() {
        for corner in 0..3 {
            if faces[f][corner] == v {
                let a = faces[f][(corner + 1) % 3];
                let b = faces[f][(corner + 2) % 3];
                by_edge.entry(a).or_default().push(local);
                by_edge.entry(b).or_default().push(local);
            }
        }
    }
    for locals in by_edge.values() {
        for w in locals.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    (0..n)
        .map(|x| find(&mut parent, x))
        .collect::<std::collections::HashSet<_>>()
        .len()
}
