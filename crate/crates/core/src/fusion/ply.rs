//! PLY mesh reading and writing (ASCII and binary little-endian).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use crate::error::{MvsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

pub fn encode_ply(mesh: &TriangleMesh, format: PlyFormat) -> Vec<u8> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )
    .into_bytes();
    match format {
        PlyFormat::Ascii => {
            for v in &mesh.vertices {
                out.extend_from_slice(format!("{} {} {}\n", v[0], v[1], v[2]).as_bytes());
            }
            for t in &mesh.triangles {
                out.extend_from_slice(format!("3 {} {} {}\n", t[0], t[1], t[2]).as_bytes());
            }
        }
        PlyFormat::BinaryLittleEndian => {
            out.reserve(mesh.vertices.len() * 12 + mesh.triangles.len() * 13);
            for v in &mesh.vertices {
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            for t in &mesh.triangles {
                out.push(3);
                for i in t {
                    out.extend_from_slice(&(*i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn save_ply(mesh: &TriangleMesh, path: &Path, format: PlyFormat) -> Result<()> {
    std::fs::write(path, encode_ply(mesh, format)).map_err(|e| MvsError::io(path, e))
}

pub fn load_ply(path: &Path) -> Result<TriangleMesh> {
    let bytes = std::fs::read(path).map_err(|e| MvsError::io(path, e))?;
    decode_ply(&bytes)
}

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
    fn parse(s: &str) -> Option<Scalar> {
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
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Sequential value source over the body, either whitespace-separated
/// tokens or packed little-endian bytes.
struct Body<'a> {
    bytes: &'a [u8],
    pos: usize,
    ascii: bool,
}

impl<'a> Body<'a> {
    fn token(&mut self) -> Result<(usize, &'a str)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(MvsError::format(start, "unexpected end of data"));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| MvsError::format(start, "non-UTF-8 token"))?;
        Ok((start, s))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(MvsError::format(
                self.pos,
                format!("unexpected end of data: need {n} more bytes"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Reads one value; floats are widened exactly to f64.
    fn value(&mut self, t: Scalar) -> Result<f64> {
        if self.ascii {
            let (at, tok) = self.token()?;
            let bad = || MvsError::format(at, format!("cannot parse {tok:?} as {t:?}"));
            return match t {
                Scalar::F32 => tok.parse::<f32>().map(f64::from).map_err(|_| bad()),
                Scalar::F64 => tok.parse::<f64>().map_err(|_| bad()),
                _ => tok.parse::<i64>().map(|v| v as f64).map_err(|_| bad()),
            };
        }
        let b = self.take(t.size())?;
        Ok(match t {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }
}

fn parse_header(bytes: &[u8]) -> Result<(bool, Vec<Element>, usize)> {
    if !bytes.starts_with(b"ply") {
        return Err(MvsError::format(0, "missing 'ply' magic"));
    }
    let mut pos = 0;
    let mut ascii = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .ok_or_else(|| MvsError::format(pos, "header is not terminated by end_header"))?;
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| MvsError::format(pos, "header is not UTF-8"))?
            .trim_end_matches('\r');
        let at = pos;
        pos = end + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] | [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _] => {
                ascii = Some(match *f {
                    "ascii" => true,
                    "binary_little_endian" => false,
                    other => return Err(MvsError::format(at, format!("unsupported format {other}"))),
                })
            }
            ["element", name, n] => elements.push(Element {
                name: name.to_string(),
                count: n
                    .parse()
                    .map_err(|_| MvsError::format(at, format!("bad element count {n:?}")))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let (Some(c), Some(i)) = (Scalar::parse(c), Scalar::parse(i)) else {
                    return Err(MvsError::format(
                        at,
                        format!("bad list property types in {line:?}"),
                    ));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| MvsError::format(at, "property before any element"))?
                    .props
                    .push(Property {
                        name: name.to_string(),
                        kind: PropKind::List(c, i),
                    });
            }
            ["property", t, name] => {
                let t = Scalar::parse(t)
                    .ok_or_else(|| MvsError::format(at, format!("unknown property type {t:?}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| MvsError::format(at, "property before any element"))?
                    .props
                    .push(Property {
                        name: name.to_string(),
                        kind: PropKind::Scalar(t),
                    });
            }
            ["end_header"] => break,
            _ => return Err(MvsError::format(at, format!("unrecognised header line {line:?}"))),
        }
    }
    let ascii = ascii.ok_or_else(|| MvsError::format(0, "header has no format line"))?;
    Ok((ascii, elements, pos))
}

/// Parses a PLY file. Needs `x`, `y`, `z` on the vertex element; polygon
/// faces are fan-triangulated. Other elements and properties are skipped.
pub fn decode_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let (ascii, elements, start) = parse_header(bytes)?;
    let mut body = Body {
        bytes,
        pos: start,
        ascii,
    };
    let mut mesh = TriangleMesh::default();
    let mut have_vertices = false;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let xyz: Vec<Option<usize>> = el
            .props
            .iter()
            .map(|p| ["x", "y", "z"].iter().position(|n| *n == p.name))
            .collect();
        if is_vertex {
            if (0..3).any(|k| !xyz.contains(&Some(k))) {
                return Err(MvsError::format(0, "vertex element lacks x, y or z"));
            }
            have_vertices = true;
            mesh.vertices.reserve(el.count);
        }
        for _ in 0..el.count {
            let mut p = [0f32; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop.kind {
                    PropKind::Scalar(t) => {
                        let v = body.value(t)?;
                        if let (true, Some(k)) = (is_vertex, xyz[pi]) {
                            p[k] = v as f32;
                        }
                    }
                    PropKind::List(ct, it) => {
                        let at = body.pos;
                        let n = body.value(ct)?;
                        if !(n >= 0.0) {
                            return Err(MvsError::format(at, format!("negative list length {n}")));
                        }
                        let mut idx = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            let at = body.pos;
                            let v = body.value(it)?;
                            if is_face && (v < 0.0 || v > u32::MAX as f64) {
                                return Err(MvsError::format(at, format!("invalid vertex index {v}")));
                            }
                            idx.push(v as u32);
                        }
                        let is_indices = prop.name == "vertex_indices" || prop.name == "vertex_index";
                        if is_face && is_indices && idx.len() >= 3 {
                            for k in 1..idx.len() - 1 {
                                mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                mesh.vertices.push(p);
            }
        }
    }
    if !have_vertices {
        return Err(MvsError::format(0, "file has no vertex element"));
    }
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [1.5, 0.0, -0.25],
                [1.0, 1.0, 1e-7],
                [0.0, 1.0, 3.0e5],
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    #[test]
    fn round_trip_both_formats() {
        for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let m = quad();
            assert_eq!(decode_ply(&encode_ply(&m, f)).unwrap(), m);
        }
    }

    #[test]
    fn reads_foreign_layouts() {
        let text = "ply\r\nformat ascii 1.0\r\ncomment made elsewhere\r\nelement vertex 4\r\n\
            property double z\r\nproperty uchar red\r\nproperty double x\r\nproperty double y\r\n\
            element face 1\r\nproperty list uchar uint vertex_index\r\nelement edge 1\r\n\
            property int a\r\nproperty int b\r\nend_header\r\n\
            0 255 0 0\r\n0 1 1 0\r\n0 2 1 1\r\n0 3 0 1\r\n4 0 1 2 3\r\n0 1\r\n";
        let m = decode_ply(text.as_bytes()).unwrap();
        assert_eq!(m.vertices[2], [1.0, 1.0, 0.0]);
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn malformed_inputs_error() {
        assert!(decode_ply(b"obj\n").is_err());
        assert!(
            decode_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n")
                .is_err()
        );
        let mut bin = encode_ply(&quad(), PlyFormat::BinaryLittleEndian);
        bin.truncate(bin.len() - 3);
        match decode_ply(&bin) {
            Err(MvsError::Format { .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut bad = quad();
        bad.triangles[0][2] = 9;
        assert!(decode_ply(&encode_ply(&bad, PlyFormat::Ascii)).is_err());
        assert!(decode_ply(b"ply\nformat binary_big_endian 1.0\nend_header\n").is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(
            verts in prop::collection::vec(prop::array::uniform3(any::<f32>().prop_filter("finite", |v| v.is_finite())), 3..40),
            tris in prop::collection::vec(prop::array::uniform3(0u32..3), 0..40),
        ) {
            let m = TriangleMesh { vertices: verts, triangles: tris };
            for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
                let back = decode_ply(&encode_ply(&m, f)).unwrap();
                prop_assert_eq!(back.triangles.clone(), m.triangles.clone());
                for (a, b) in back.vertices.iter().zip(&m.vertices) {
                    for k in 0..3 {
                        prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
                    }
                }
            }
        }
    }
}
