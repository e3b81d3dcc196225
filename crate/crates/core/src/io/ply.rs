//! PLY triangle meshes, ASCII and binary little-endian.
//!
//! Vertex properties `x y z` are required; `nx ny nz` and `u v` (or `s t`,
//! `texture_u texture_v`) are optional. Missing normals are computed from the
//! faces, missing texture coordinates default to zero. Polygons are fan
//! triangulated and degenerate triangles dropped.

use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::render::mesh::Mesh;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
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
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
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

#[derive(Debug, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Source<'a> {
    enc: Encoding,
    body: &'a [u8],
    pos: usize,
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl Source<'_> {
    fn value(&mut self, ty: Scalar) -> Option<f64> {
        match self.enc {
            Encoding::Ascii => self.tokens.next()?.parse().ok(),
            Encoding::BinaryLe => {
                let b = self.body.get(self.pos..self.pos + ty.size())?;
                self.pos += ty.size();
                Some(ty.read_le(b))
            }
        }
    }
}

/// Parses PLY bytes into a mesh; `origin` names the source in error messages.
pub fn decode<T: Real>(bytes: &[u8], origin: &Path) -> Result<Mesh<T>> {
    let bad = |msg: String| Error::format(origin, msg);
    let header_end = bytes
        .windows(10)
        .position(|w| w == b"end_header")
        .ok_or_else(|| bad("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("header is not text".into()))?;
    let body_start = bytes[header_end..]
        .iter()
        .position(|b| *b == b'\n')
        .map(|i| header_end + i + 1)
        .ok_or_else(|| bad("missing end_header newline".into()))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }
    let mut enc = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => enc = Some(Encoding::Ascii),
            ["format", "binary_little_endian", _] => enc = Some(Encoding::BinaryLe),
            ["format", other, _] => return Err(bad(format!("unsupported format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", cnt, item, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element".into()))?;
                let c = Scalar::parse(cnt).ok_or_else(|| bad(format!("unknown type {cnt}")))?;
                let i = Scalar::parse(item).ok_or_else(|| bad(format!("unknown type {item}")))?;
                el.props.push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element".into()))?;
                let t = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown type {ty}")))?;
                el.props.push(Property::Scalar(name.to_string(), t));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(bad(format!("unrecognized header line '{line}'"))),
        }
    }
    let enc = enc.ok_or_else(|| bad("missing format line".into()))?;
    let body = &bytes[body_start..];
    let text = if enc == Encoding::Ascii {
        std::str::from_utf8(body).map_err(|_| bad("ASCII body is not text".into()))?
    } else {
        ""
    };
    let mut src = Source { enc, body, pos: 0, tokens: text.split_ascii_whitespace() };
    let eof = || bad("unexpected end of data".into());

    let mut pos = Vec::new();
    let mut nrm = Vec::new();
    let mut uv = Vec::new();
    let mut faces: Vec<Vec<u32>> = Vec::new();
    let mut have_normals = false;
    for el in &elements {
        for _ in 0..el.count {
            let mut p = [0.0f64; 3];
            let mut n = [0.0f64; 3];
            let mut t = [0.0f64; 2];
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = src.value(*ty).ok_or_else(eof)?;
                        match name.as_str() {
                            "x" => p[0] = v,
                            "y" => p[1] = v,
                            "z" => p[2] = v,
                            "nx" => n[0] = v,
                            "ny" => n[1] = v,
                            "nz" => n[2] = v,
                            "u" | "s" | "texture_u" | "texture_s" => t[0] = v,
                            "v" | "t" | "texture_v" | "texture_t" => t[1] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, cty, ity) => {
                        let count = src.value(*cty).ok_or_else(eof)? as usize;
                        let mut items = Vec::with_capacity(count);
                        for _ in 0..count {
                            items.push(src.value(*ity).ok_or_else(eof)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            faces.push(items.iter().map(|v| *v as u32).collect());
                        }
                    }
                }
            }
            if el.name == "vertex" {
                pos.push(Vec3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2])));
                nrm.push(Vec3::new(T::lit(n[0]), T::lit(n[1]), T::lit(n[2])));
                uv.push([T::lit(t[0]), T::lit(t[1])]);
            }
        }
        if el.name == "vertex" {
            have_normals = el.props.iter().any(|p| matches!(p, Property::Scalar(n, _) if n == "nx"));
        }
    }

    let mut triangles = Vec::new();
    for f in &faces {
        if let Some(k) = f.iter().find(|k| **k as usize >= pos.len()) {
            return Err(bad(format!("face index {k} out of range")));
        }
        for i in 1..f.len().saturating_sub(1) {
            let tri = [f[0], f[i], f[i + 1]];
            let [a, b, c] = tri.map(|k| pos[k as usize]);
            if (b - a).cross(c - a).length() * T::lit(0.5) > T::lit(1e-12) {
                triangles.push(tri);
            }
        }
    }
    let normals = if have_normals {
        nrm.into_iter()
            .map(|n| {
                let len = n.length();
                if len > T::zero() && (len - T::one()).abs() > T::lit(1e-12) { n.normalized() } else { n }
            })
            .collect()
    } else {
        Mesh::compute_vertex_normals(&pos, &triangles)
    };
    Mesh::new(pos, normals, uv, triangles).map_err(|e| bad(e.to_string()))
}

pub fn read_ply<T: Real>(path: &Path) -> Result<Mesh<T>> {
    decode(&read_file(path)?, path)
}

/// Binary little-endian PLY with `double` vertex attributes, so `f64`
/// meshes round-trip exactly.
pub fn encode<T: Real>(mesh: &Mesh<T>) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double nx\nproperty double ny\nproperty double nz\n\
         property double u\nproperty double v\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.triangles().len()
    )
    .into_bytes();
    for ((p, n), t) in mesh.vertices().iter().zip(mesh.normals()).zip(mesh.uvs()) {
        for v in [p.x, p.y, p.z, n.x, n.y, n.z, t[0], t[1]] {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    for tri in mesh.triangles() {
        out.push(3);
        for k in tri {
            out.extend_from_slice(&(*k as i32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply<T: Real>(mesh: &Mesh<T>, path: &Path) -> Result<()> {
    write_file(path, &encode(mesh))
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\n\
        property float x\nproperty float y\nproperty float z\nproperty float s\nproperty float t\n\
        element face 1\nproperty list uchar int vertex_indices\nend_header\n\
        0 0 0 0 0\n1 0 0 1 0\n1 1 0 1 1\n0 1 0 0 1\n4 0 1 2 3\n";

    #[test]
    fn ascii_quad_is_fan_triangulated() {
        let m: Mesh<f64> = decode(QUAD.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.uvs()[2], [1.0, 1.0]);
        assert!(m.normals().iter().all(|n| (n.z - 1.0).abs() < 1e-12));
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let m: Mesh<f64> = decode(QUAD.as_bytes(), Path::new("mem")).unwrap();
        let back: Mesh<f64> = decode(&encode(&m), Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_index() {
        let bad = QUAD.replace("4 0 1 2 3", "3 0 1 9");
        assert!(decode::<f64>(bad.as_bytes(), Path::new("mem")).is_err());
    }

    #[test]
    fn rejects_truncated_binary() {
        let m: Mesh<f64> = decode(QUAD.as_bytes(), Path::new("mem")).unwrap();
        let bytes = encode(&m);
        assert!(decode::<f64>(&bytes[..bytes.len() - 2], Path::new("mem")).is_err());
    }
}
