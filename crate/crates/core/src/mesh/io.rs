//! ASCII OFF and binary little-endian PLY (f32 vertices, u32 face indices).

use std::fs;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::Vec3;

pub fn encode_off(mesh: &TriMesh) -> String {
    let mut s = format!("OFF\n{} {} 0\n", mesh.num_vertices(), mesh.num_faces());
    for p in mesh.vertices() {
        s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    for f in mesh.faces() {
        s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    s
}

pub fn decode_off(text: &str) -> Result<TriMesh> {
    let bad = |m: &str| Error::Format(format!("OFF: {m}"));
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    match tokens.next() {
        Some("OFF") => {}
        Some(t) if t.starts_with("OFF") => return Err(bad("only plain OFF is supported")),
        _ => return Err(bad("missing OFF header")),
    }
    fn number<'a>(tokens: &mut impl Iterator<Item = &'a str>) -> Result<f64> {
        let t = tokens.next().ok_or_else(|| Error::Format("OFF: unexpected end of file".into()))?;
        t.parse().map_err(|_| Error::Format(format!("OFF: expected a number, found '{t}'")))
    }
    fn integer<'a>(tokens: &mut impl Iterator<Item = &'a str>) -> Result<usize> {
        let x = number(tokens)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(Error::Format("OFF: expected a non-negative integer".into()));
        }
        Ok(x as usize)
    }
    let (nv, nf, _edges) = (integer(&mut tokens)?, integer(&mut tokens)?, integer(&mut tokens)?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(Vec3::new(number(&mut tokens)?, number(&mut tokens)?, number(&mut tokens)?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        if integer(&mut tokens)? != 3 {
            return Err(bad("only triangle faces are supported"));
        }
        let mut f = [0u32; 3];
        for v in &mut f {
            *v = integer(&mut tokens)? as u32;
        }
        faces.push(f);
    }
    TriMesh::new(vertices, faces)
}

const PLY_HEADER_END: &[u8] = b"end_header\n";

pub fn encode_ply(mesh: &TriMesh) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.num_vertices(),
        mesh.num_faces()
    );
    let mut out = header.into_bytes();
    out.reserve(12 * mesh.num_vertices() + 13 * mesh.num_faces());
    for p in mesh.vertices() {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for v in f {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_ply(bytes: &[u8]) -> Result<TriMesh> {
    let bad = |m: &str| Error::Format(format!("PLY: {m}"));
    let end = bytes
        .windows(PLY_HEADER_END.len())
        .position(|w| w == PLY_HEADER_END)
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("bad magic"));
    }
    let (mut nv, mut nf) = (None, None);
    let mut vertex_props = Vec::new();
    let mut face_list = None;
    let mut current = "";
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(bad(&format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                current = "vertex";
                nv = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?);
            }
            ["element", "face", n] => {
                current = "face";
                nf = Some(n.parse::<usize>().map_err(|_| bad("bad face count"))?);
            }
            ["element", ..] => return Err(bad("unsupported element")),
            ["property", "list", count, index, _] if current == "face" => {
                face_list = Some((count.to_string(), index.to_string()));
            }
            ["property", ty, name] if current == "vertex" => vertex_props.push((ty.to_string(), name.to_string())),
            _ => return Err(bad(&format!("unsupported header line '{line}'"))),
        }
    }
    let (nv, nf) = (nv.ok_or_else(|| bad("no vertex element"))?, nf.unwrap_or(0));
    let xyz_f32 = vertex_props.len() == 3
        && vertex_props.iter().zip(["x", "y", "z"]).all(|((ty, n), want)| ty == "float" && n == want);
    if !xyz_f32 {
        return Err(bad("vertices must be float x, y, z"));
    }
    let (count_ty, index_ty) = face_list.ok_or_else(|| bad("no face index list"))?;
    if count_ty != "uchar" || !(index_ty == "uint" || index_ty == "int") {
        return Err(bad("face lists must be uchar count, uint indices"));
    }

    let body = &bytes[end + PLY_HEADER_END.len()..];
    let need = 12 * nv + 13 * nf;
    if body.len() != need {
        return Err(bad(&format!("expected {need} body bytes, found {}", body.len())));
    }
    let f32_at = |at: usize| f32::from_le_bytes(body[at..at + 4].try_into().unwrap()) as f64;
    let u32_at = |at: usize| u32::from_le_bytes(body[at..at + 4].try_into().unwrap());
    let vertices = (0..nv).map(|i| Vec3::new(f32_at(12 * i), f32_at(12 * i + 4), f32_at(12 * i + 8))).collect();
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let at = 12 * nv + 13 * i;
        if body[at] != 3 {
            return Err(bad("only triangle faces are supported"));
        }
        faces.push([u32_at(at + 1), u32_at(at + 5), u32_at(at + 9)]);
    }
    TriMesh::new(vertices, faces)
}

/// Load by extension (`.off` or `.ply`).
pub fn read(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("off") => decode_off(&fs::read_to_string(path)?),
        Some("ply") => decode_ply(&fs::read(path)?),
        _ => Err(Error::Format(format!("unknown mesh format: {}", path.display()))),
    }
}

/// Save by extension (`.off` or `.ply`).
pub fn write(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("off") => Ok(fs::write(path, encode_off(mesh))?),
        Some("ply") => Ok(fs::write(path, encode_ply(mesh))?),
        _ => Err(Error::Format(format!("unknown mesh format: {}", path.display()))),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn f32_mesh(m: &TriMesh) -> TriMesh {
        m.map_vertices(|p| p.map(|c| c as f32 as f64))
    }

    #[test]
    fn ply_round_trip_is_exact_in_single_precision() {
        let s = shapes::icosphere(2);
        assert_eq!(decode_ply(&encode_ply(&s)).unwrap(), f32_mesh(&s));
    }

    #[test]
    fn off_round_trip() {
        let s = shapes::torus(1.0, 0.3, 9, 5);
        assert_eq!(decode_off(&encode_off(&s)).unwrap(), s);
    }

    #[test]
    fn off_with_comments() {
        let text = "OFF # header\n# a comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let m = decode_off(text).unwrap();
        assert_eq!(m.num_faces(), 1);
    }

    #[test]
    fn ply_header_is_standard() {
        let bytes = encode_ply(&shapes::tetrahedron());
        let text = String::from_utf8_lossy(&bytes[..bytes.windows(11).position(|w| w == b"end_header\n").unwrap()]);
        assert!(text.starts_with("ply\nformat binary_little_endian 1.0\nelement vertex 4\n"));
        assert!(text.contains("property list uchar uint vertex_indices"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_ply(b"plx\nend_header\n").is_err());
        assert!(decode_off("OFF\n3 1 0\n0 0 0\n").is_err());
        let mut bytes = encode_ply(&shapes::tetrahedron());
        bytes.pop();
        assert!(decode_ply(&bytes).is_err());
    }
}
