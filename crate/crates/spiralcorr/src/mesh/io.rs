//! OBJ and PLY readers.
//!
//! OBJ: `v x y z` and `f i j k` lines (1-based indices; texture/normal
//! slots after `/` are ignored, other directives are skipped).
//!
//! PLY: ascii or binary little-endian, a `vertex` element with float or
//! double `x y z` properties (extra scalar properties are skipped) and a
//! `face` element whose first property is a vertex-index list. Faces must
//! be triangles.

use std::path::Path;

use super::{HalfEdgeMesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()? {
            "obj" | "OBJ" => Some(MeshFormat::Obj),
            "ply" | "PLY" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Loads and validates a mesh; any manifold violation is an error.
pub fn load_mesh(path: &Path) -> Result<HalfEdgeMesh, MeshError> {
    let (positions, faces) = read_raw(path)?;
    HalfEdgeMesh::new(positions, faces)
}

/// Loads without requiring manifoldness, for validation tooling.
pub fn load_mesh_lenient(path: &Path) -> Result<HalfEdgeMesh, MeshError> {
    let (positions, faces) = read_raw(path)?;
    HalfEdgeMesh::build_unchecked(positions, faces)
}

type RawMesh = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn read_raw(path: &Path) -> Result<RawMesh, MeshError> {
    let format = MeshFormat::from_path(path).ok_or_else(|| MeshError::Parse {
        line: 0,
        message: format!("unrecognized mesh extension on {}", path.display()),
    })?;
    let bytes = std::fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        MeshFormat::Obj => parse_obj(&bytes),
        MeshFormat::Ply => parse_ply(&bytes),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_obj(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let text =
        std::str::from_utf8(bytes).map_err(|_| parse_err(0, "obj file is not valid utf-8"))?;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coord = [0.0; 3];
                for c in &mut coord {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad coordinate '{tok}'")))?;
                }
                positions.push(coord);
            }
            Some("f") => {
                let mut ids = Vec::with_capacity(4);
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad face index '{tok}'")))?;
                    if raw < 1 {
                        return Err(parse_err(
                            line_no,
                            format!("face index {raw} must be positive (1-based)"),
                        ));
                    }
                    let id = raw as usize - 1;
                    if id >= positions.len() {
                        return Err(MeshError::IndexOutOfRange {
                            index: id,
                            count: positions.len(),
                        });
                    }
                    ids.push(id);
                }
                if ids.len() != 3 {
                    return Err(MeshError::NonTriangleFace {
                        line: line_no,
                        arity: ids.len(),
                    });
                }
                faces.push([ids[0], ids[1], ids[2]]);
            }
            _ => {} // comments, normals, groups, materials
        }
    }
    Ok((positions, faces))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(token: &str) -> Option<PlyType> {
        match token {
            "char" | "int8" => Some(PlyType::I8),
            "uchar" | "uint8" => Some(PlyType::U8),
            "short" | "int16" => Some(PlyType::I16),
            "ushort" | "uint16" => Some(PlyType::U16),
            "int" | "int32" => Some(PlyType::I32),
            "uint" | "uint32" => Some(PlyType::U32),
            "float" | "float32" => Some(PlyType::F32),
            "double" | "float64" => Some(PlyType::F64),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar {
        ty: PlyType,
        name: String,
    },
    List {
        count: PlyType,
        item: PlyType,
        name: String,
    },
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize, line: usize) -> Result<&'a [u8], MeshError> {
        if self.pos + n > self.bytes.len() {
            return Err(parse_err(line, "unexpected end of binary payload"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read(&mut self, ty: PlyType, line: usize) -> Result<f64, MeshError> {
        let raw = self.take(ty.size(), line)?;
        Ok(match ty {
            PlyType::I8 => raw[0] as i8 as f64,
            PlyType::U8 => raw[0] as f64,
            PlyType::I16 => i16::from_le_bytes([raw[0], raw[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([raw[0], raw[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes(raw.try_into().unwrap()) as f64,
            PlyType::U32 => u32::from_le_bytes(raw.try_into().unwrap()) as f64,
            PlyType::F32 => f32::from_le_bytes(raw.try_into().unwrap()) as f64,
            PlyType::F64 => f64::from_le_bytes(raw.try_into().unwrap()),
        })
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    // header is always ascii lines terminated by "end_header"
    let mut offset = 0;
    let mut lines = Vec::new();
    let mut line_start = 0;
    while offset < bytes.len() {
        if bytes[offset] == b'\n' {
            let line = std::str::from_utf8(&bytes[line_start..offset])
                .map_err(|_| parse_err(lines.len() + 1, "header is not valid utf-8"))?
                .trim_end_matches('\r')
                .to_string();
            let done = line.trim() == "end_header";
            lines.push(line);
            offset += 1;
            line_start = offset;
            if done {
                break;
            }
        } else {
            offset += 1;
        }
    }
    if lines.last().map(|l| l.trim()) != Some("end_header") {
        return Err(parse_err(lines.len(), "missing end_header"));
    }
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(parse_err(1, "missing ply magic"));
    }

    let mut binary = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let line_no = idx + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("format") => match tokens.next() {
                Some("ascii") => binary = Some(false),
                Some("binary_little_endian") => binary = Some(true),
                Some(other) => {
                    return Err(parse_err(line_no, format!("unsupported format '{other}'")))
                }
                None => return Err(parse_err(line_no, "format line missing type")),
            },
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "element missing name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "element missing count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before any element"))?;
                let first = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "property missing type"))?;
                if first == "list" {
                    let count = tokens
                        .next()
                        .and_then(PlyType::parse)
                        .ok_or_else(|| parse_err(line_no, "bad list count type"))?;
                    let item = tokens
                        .next()
                        .and_then(PlyType::parse)
                        .ok_or_else(|| parse_err(line_no, "bad list item type"))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "list property missing name"))?;
                    element.properties.push(PlyProperty::List {
                        count,
                        item,
                        name: name.to_string(),
                    });
                } else {
                    let ty = PlyType::parse(first).ok_or_else(|| {
                        parse_err(line_no, format!("bad property type '{first}'"))
                    })?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "property missing name"))?;
                    element.properties.push(PlyProperty::Scalar {
                        ty,
                        name: name.to_string(),
                    });
                }
            }
            Some("comment") | Some("obj_info") | Some("end_header") | None => {}
            Some(other) => {
                return Err(parse_err(
                    line_no,
                    format!("unknown header keyword '{other}'"),
                ))
            }
        }
    }
    let binary = binary.ok_or_else(|| parse_err(0, "missing format line"))?;

    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    if binary {
        let mut cursor = ByteCursor { bytes, pos: offset };
        for element in &elements {
            let is_vertex = element.name == "vertex";
            let is_face = element.name == "face";
            let xyz = if is_vertex {
                Some(locate_xyz(element)?)
            } else {
                None
            };
            for row in 0..element.count {
                let mut coord = [f64::NAN; 3];
                let mut indices: Option<Vec<usize>> = None;
                for (p, prop) in element.properties.iter().enumerate() {
                    match prop {
                        PlyProperty::Scalar { ty, .. } => {
                            let value = cursor.read(*ty, 0)?;
                            if let Some(xyz) = &xyz {
                                for axis in 0..3 {
                                    if xyz[axis] == p {
                                        coord[axis] = value;
                                    }
                                }
                            }
                        }
                        PlyProperty::List { count, item, name } => {
                            let n = cursor.read(*count, 0)? as usize;
                            let mut values = Vec::with_capacity(n);
                            for _ in 0..n {
                                values.push(cursor.read(*item, 0)?);
                            }
                            if is_face && indices.is_none() && is_index_list(name) {
                                indices = Some(values.iter().map(|&v| v as usize).collect());
                            }
                        }
                    }
                }
                if is_vertex {
                    ensure_coord(&coord, row)?;
                    positions.push(coord);
                }
                if is_face {
                    push_face(&mut faces, indices, positions.len(), row)?;
                }
            }
        }
    } else {
        let body = std::str::from_utf8(&bytes[offset..])
            .map_err(|_| parse_err(0, "ascii body is not valid utf-8"))?;
        let mut rows = body.lines().filter(|l| !l.trim().is_empty());
        for element in &elements {
            let is_vertex = element.name == "vertex";
            let is_face = element.name == "face";
            let xyz = if is_vertex {
                Some(locate_xyz(element)?)
            } else {
                None
            };
            for row in 0..element.count {
                let line = rows.next().ok_or_else(|| {
                    parse_err(0, format!("missing row {row} of {}", element.name))
                })?;
                let mut tokens = line.split_whitespace();
                let mut next_value = |what: &str| -> Result<f64, MeshError> {
                    tokens
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| parse_err(0, format!("bad or missing {what}")))
                };
                let mut coord = [f64::NAN; 3];
                let mut indices: Option<Vec<usize>> = None;
                for (p, prop) in element.properties.iter().enumerate() {
                    match prop {
                        PlyProperty::Scalar { .. } => {
                            let value = next_value("scalar value")?;
                            if let Some(xyz) = &xyz {
                                for axis in 0..3 {
                                    if xyz[axis] == p {
                                        coord[axis] = value;
                                    }
                                }
                            }
                        }
                        PlyProperty::List { name, .. } => {
                            let n = next_value("list count")? as usize;
                            let mut values = Vec::with_capacity(n);
                            for _ in 0..n {
                                values.push(next_value("list item")?);
                            }
                            if is_face && indices.is_none() && is_index_list(name) {
                                indices = Some(values.iter().map(|&v| v as usize).collect());
                            }
                        }
                    }
                }
                if is_vertex {
                    ensure_coord(&coord, row)?;
                    positions.push(coord);
                }
                if is_face {
                    push_face(&mut faces, indices, positions.len(), row)?;
                }
            }
        }
    }
    Ok((positions, faces))
}

fn is_index_list(name: &str) -> bool {
    name == "vertex_indices" || name == "vertex_index"
}

fn locate_xyz(element: &PlyElement) -> Result<[usize; 3], MeshError> {
    let mut xyz = [usize::MAX; 3];
    for (p, prop) in element.properties.iter().enumerate() {
        if let PlyProperty::Scalar { name, .. } = prop {
            match name.as_str() {
                "x" => xyz[0] = p,
                "y" => xyz[1] = p,
                "z" => xyz[2] = p,
                _ => {}
            }
        } else {
            return Err(parse_err(
                0,
                "list property in vertex element is unsupported",
            ));
        }
    }
    if xyz.contains(&usize::MAX) {
        return Err(parse_err(0, "vertex element lacks x/y/z properties"));
    }
    Ok(xyz)
}

fn ensure_coord(coord: &[f64; 3], row: usize) -> Result<(), MeshError> {
    if coord.iter().any(|c| c.is_nan()) {
        return Err(parse_err(
            0,
            format!("vertex row {row} has missing coordinates"),
        ));
    }
    Ok(())
}

fn push_face(
    faces: &mut Vec<[usize; 3]>,
    indices: Option<Vec<usize>>,
    vertex_count: usize,
    row: usize,
) -> Result<(), MeshError> {
    let ids =
        indices.ok_or_else(|| parse_err(0, format!("face row {row} lacks a vertex index list")))?;
    if ids.len() != 3 {
        return Err(MeshError::NonTriangleFace {
            line: row + 1,
            arity: ids.len(),
        });
    }
    for &id in &ids {
        if id >= vertex_count {
            return Err(MeshError::IndexOutOfRange {
                index: id,
                count: vertex_count,
            });
        }
    }
    faces.push([ids[0], ids[1], ids[2]]);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::primitives;
    use super::*;

    fn obj_text(mesh: &HalfEdgeMesh) -> String {
        let mut out = String::new();
        for p in mesh.positions() {
            out.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
        for f in mesh.faces() {
            out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        out
    }

    #[test]
    fn obj_tetrahedron_roundtrip() {
        let tet = primitives::tetrahedron();
        let (positions, faces) = parse_obj(obj_text(&tet).as_bytes()).unwrap();
        assert_eq!(positions, tet.positions());
        assert_eq!(faces, tet.faces());
        let mesh = HalfEdgeMesh::new(positions, faces).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.face_count(), 4);
        assert_eq!(mesh.edge_count(), 6);
    }

    #[test]
    fn obj_quad_face_is_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let err = parse_obj(text.as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::NonTriangleFace { arity: 4, .. }));
    }

    #[test]
    fn obj_ignores_slashed_slots_and_other_directives() {
        let text = "# comment\nvn 0 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1/1 2//2 3/3\n";
        let (positions, faces) = parse_obj(text.as_bytes()).unwrap();
        assert_eq!(positions.len(), 3);
        assert_eq!(faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_out_of_range_index() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        let err = parse_obj(text.as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 8, .. }));
    }

    fn ply_ascii(mesh: &HalfEdgeMesh) -> String {
        let mut out = String::new();
        out.push_str("ply\nformat ascii 1.0\ncomment made by tests\n");
        out.push_str(&format!("element vertex {}\n", mesh.vertex_count()));
        out.push_str("property float x\nproperty float y\nproperty float z\n");
        out.push_str(&format!("element face {}\n", mesh.face_count()));
        out.push_str("property list uchar int vertex_indices\nend_header\n");
        for p in mesh.positions() {
            out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        for f in mesh.faces() {
            out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        out
    }

    fn ply_binary(mesh: &HalfEdgeMesh) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
        out.extend_from_slice(format!("element vertex {}\n", mesh.vertex_count()).as_bytes());
        out.extend_from_slice(b"property double x\nproperty double y\nproperty double z\n");
        out.extend_from_slice(format!("element face {}\n", mesh.face_count()).as_bytes());
        out.extend_from_slice(b"property list uchar uint vertex_indices\nend_header\n");
        for p in mesh.positions() {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        for f in mesh.faces() {
            out.push(3);
            for &v in f {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        out
    }

    #[test]
    fn ply_ascii_icosahedron_all_valence_five() {
        let ico = primitives::icosahedron();
        let (positions, faces) = parse_ply(ply_ascii(&ico).as_bytes()).unwrap();
        let mesh = HalfEdgeMesh::new(positions, faces).unwrap();
        assert_eq!(mesh.vertex_count(), 12);
        assert_eq!(mesh.face_count(), 20);
        for v in 0..12 {
            assert_eq!(mesh.degree(super::super::VertexId(v)), 5);
        }
    }

    #[test]
    fn ply_binary_roundtrip_is_bit_exact() {
        let ico = primitives::icosahedron();
        let (positions, faces) = parse_ply(&ply_binary(&ico)).unwrap();
        assert_eq!(positions, ico.positions());
        assert_eq!(faces, ico.faces());
    }

    #[test]
    fn ply_skips_extra_vertex_scalars() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar red\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0 255\n1 0 0 255\n0 1 0 255\n3 0 1 2\n";
        let (positions, faces) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(positions.len(), 3);
        assert_eq!(positions[1], [1.0, 0.0, 0.0]);
        assert_eq!(faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn ply_quad_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 4\n\
                    property float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let err = parse_ply(text.as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::NonTriangleFace { arity: 4, .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_mesh(Path::new("/nonexistent/mesh.obj")).unwrap_err();
        assert!(matches!(err, MeshError::Io { .. }));
    }
}
