//! OBJ and PLY (ASCII and binary little-endian) mesh I/O.

use std::fmt::Write as _;
use std::path::Path;

use super::geom::Vec3;
use super::{MeshError, TriMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh, MeshError> {
    let bytes = std::fs::read(path)?;
    match format {
        MeshFormat::Obj => parse_obj(&String::from_utf8_lossy(&bytes)),
        MeshFormat::Ply => parse_ply(&bytes),
    }
}

/// Loads a mesh, picking the format from the file extension.
pub fn load_mesh_auto(path: &Path) -> Result<TriMesh, MeshError> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| MeshError::parse(0, format!("unknown mesh extension: {}", path.display())))?;
    load_mesh(path, format)
}

/// Writes OBJ, or binary little-endian PLY.
pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<(), MeshError> {
    mesh.validate()?;
    let bytes = match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::Ply => write_ply(mesh, PlyEncoding::BinaryLittleEndian),
    };
    crate::fsutil::write_atomic(path, &bytes)?;
    Ok(())
}

pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    let tok = it.next().ok_or_else(|| MeshError::parse(lineno, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| MeshError::parse(lineno, format!("bad coordinate `{tok}`")))?;
                }
                vertices.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| MeshError::parse(lineno, format!("bad face index `{tok}`")))?;
                    let resolved = match i {
                        0 => return Err(MeshError::parse(lineno, "face index 0 is invalid in OBJ")),
                        i if i > 0 => (i - 1) as usize,
                        i => {
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(MeshError::Topology(format!("relative index {i} on line {lineno}")));
                            }
                            vertices.len() - back
                        }
                    };
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(MeshError::parse(lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 64);
    for v in mesh.vertices() {
        // `{}` on f64 prints the shortest representation that round-trips.
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_ply(mesh: &TriMesh, encoding: PlyEncoding) -> Vec<u8> {
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.face_count()
    )
    .into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            let mut s = String::new();
            for v in mesh.vertices() {
                let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend_from_slice(s.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            for f in mesh.faces() {
                out.push(3);
                for &i in f {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    let header_end = find_subslice(bytes, b"end_header")
        .ok_or_else(|| MeshError::parse(0, "PLY header has no end_header"))?;
    let mut body_start = header_end + b"end_header".len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| MeshError::parse(0, "non-UTF-8 PLY header"))?;
    let mut lines = header.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(MeshError::parse(1, "missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLittleEndian),
            ["format", other, ..] => {
                return Err(MeshError::parse(lineno, format!("unsupported PLY format `{other}`")))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| MeshError::parse(lineno, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements.last_mut().ok_or_else(|| MeshError::parse(lineno, "property before element"))?;
                let ct = Scalar::parse(ct).ok_or_else(|| MeshError::parse(lineno, "bad list count type"))?;
                let it = Scalar::parse(it).ok_or_else(|| MeshError::parse(lineno, "bad list item type"))?;
                el.props.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| MeshError::parse(lineno, "property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| MeshError::parse(lineno, format!("bad type `{ty}`")))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(MeshError::parse(lineno, format!("unexpected header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| MeshError::parse(0, "PLY header has no format line"))?;
    let body = &bytes[body_start..];
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    let mut ascii_tokens = match encoding {
        PlyEncoding::Ascii => Some(
            std::str::from_utf8(body)
                .map_err(|_| MeshError::parse(0, "non-UTF-8 ASCII PLY body"))?
                .split_whitespace(),
        ),
        PlyEncoding::BinaryLittleEndian => None,
    };
    let mut pos = 0usize;
    let mut read = |ty: Scalar| -> Result<f64, MeshError> {
        match ascii_tokens.as_mut() {
            Some(toks) => {
                let t = toks.next().ok_or_else(|| MeshError::parse(0, "PLY body truncated"))?;
                t.parse::<f64>().map_err(|_| MeshError::parse(0, format!("bad PLY value `{t}`")))
            }
            None => {
                let n = ty.size();
                let chunk = body.get(pos..pos + n).ok_or_else(|| MeshError::parse(0, "PLY body truncated"))?;
                pos += n;
                Ok(ty.read_le(chunk))
            }
        }
    };

    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [f64::NAN; 3];
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = read(*ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = read(*ct)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(MeshError::parse(0, "bad PLY list length"));
                        }
                        let mut idx = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            let v = read(*it)?;
                            if v < 0.0 || v.fract() != 0.0 {
                                return Err(MeshError::Topology(format!("invalid face index {v}")));
                            }
                            idx.push(v as usize);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if idx.len() < 3 {
                                return Err(MeshError::parse(0, "face with fewer than 3 vertices"));
                            }
                            for k in 1..idx.len() - 1 {
                                faces.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                if xyz.iter().any(|c| c.is_nan()) {
                    return Err(MeshError::parse(0, "vertex element lacks x/y/z"));
                }
                vertices.push(xyz);
            }
        }
    }
    TriMesh::new(vertices, faces)
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}
