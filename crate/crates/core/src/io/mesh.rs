//! ASCII PLY and Wavefront OBJ readers (geometry only).

use std::fmt::Write as _;
use std::path::Path;

use super::DatasetError;
use crate::geometry::Vec3;
use crate::scene::MeshAsset;

/// Loads a `.ply` (ASCII) or `.obj` mesh; the object id and name are the
/// file stem.
pub fn load_mesh(path: &Path) -> Result<MeshAsset, DatasetError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_owned();
    let context = path.display().to_string();
    let mesh = match ext.as_str() {
        "ply" => parse_ply(&std::fs::read(path)?, &stem, &context)?,
        "obj" => parse_obj(&std::fs::read(path)?, &stem, &context)?,
        other => return Err(DatasetError::UnsupportedFormat(format!("{context}: extension {other:?}"))),
    };
    Ok(mesh.with_source(path))
}

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16",
    "uint16", "int32", "uint32", "float32", "float64",
];

pub fn parse_ply(bytes: &[u8], id: &str, context: &str) -> Result<MeshAsset, DatasetError> {
    let err = |msg: String| DatasetError::parse(context, msg);
    let text = std::str::from_utf8(bytes).map_err(|_| {
        if bytes.windows(6).any(|w| w == b"binary") {
            DatasetError::UnsupportedFormat(format!("{context}: binary PLY"))
        } else {
            err("file is not valid UTF-8".into())
        }
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err("missing 'ply' magic".into())),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut spacing = None;
    let mut header_done = false;
    let mut body_start = 0;
    for (no, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            None => continue,
            Some("format") => match tok.next() {
                Some("ascii") => {}
                Some(f) if f.starts_with("binary") => {
                    return Err(DatasetError::UnsupportedFormat(format!("{context}: {f} PLY")))
                }
                _ => return Err(err(format!("line {}: bad format line", no + 1))),
            },
            Some("comment") => {
                if tok.next() == Some("spacing") {
                    let v: Vec<f64> = tok.filter_map(|t| t.parse().ok()).collect();
                    if v.len() == 3 && v.iter().all(|x| x.is_finite() && *x > 0.0) {
                        spacing = Some(Vec3::new(v[0], v[1], v[2]));
                    }
                }
            }
            Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| err(format!("line {}: element without name", no + 1)))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| err(format!("line {}: bad element count", no + 1)))?;
                elements.push(Element { name: name.to_owned(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(format!("line {}: property before element", no + 1)))?;
                let t: Vec<&str> = tok.collect();
                let prop = match t.as_slice() {
                    ["list", count_ty, item_ty, name]
                        if SCALAR_TYPES.contains(count_ty) && SCALAR_TYPES.contains(item_ty) =>
                    {
                        Property::List((*name).to_owned())
                    }
                    [ty, name] if SCALAR_TYPES.contains(ty) => Property::Scalar((*name).to_owned()),
                    _ => return Err(err(format!("line {}: bad property line", no + 1))),
                };
                el.props.push(prop);
            }
            Some("end_header") => {
                header_done = true;
                body_start = no + 1;
                break;
            }
            Some(other) => return Err(err(format!("line {}: unknown header keyword {other:?}", no + 1))),
        }
    }
    if !header_done {
        return Err(err("header not terminated by end_header".into()));
    }

    let mut tokens = text.lines().skip(body_start).flat_map(str::split_whitespace);
    let mut next = |what: &str| tokens.next().ok_or_else(|| err(format!("unexpected end of file reading {what}")));
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut saw_vertex = false;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let pos = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(s) if s == n))
        };
        let (ix, iy, iz) = (pos("x"), pos("y"), pos("z"));
        if is_vertex {
            saw_vertex = true;
            if ix.is_none() || iy.is_none() || iz.is_none() {
                return Err(err("vertex element lacks x/y/z".into()));
            }
        }
        if el.props.is_empty() && !is_face {
            continue;
        }
        for _ in 0..el.count {
            let mut xyz = [0.0f64; 3];
            let mut face: Option<Vec<usize>> = None;
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_) => {
                        let t = next(&el.name)?;
                        let v: f64 = t.parse().map_err(|_| err(format!("bad number {t:?} in {}", el.name)))?;
                        if is_vertex {
                            if Some(pi) == ix {
                                xyz[0] = v;
                            } else if Some(pi) == iy {
                                xyz[1] = v;
                            } else if Some(pi) == iz {
                                xyz[2] = v;
                            }
                        }
                    }
                    Property::List(name) => {
                        let t = next(&el.name)?;
                        let n: usize = t.parse().map_err(|_| err(format!("bad list length {t:?}")))?;
                        let mut items = Vec::new();
                        for _ in 0..n {
                            let t = next(&el.name)?;
                            let v: usize = t.parse().map_err(|_| err(format!("bad index {t:?}")))?;
                            items.push(v);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            face = Some(items);
                        }
                    }
                }
            }
            if is_vertex {
                let v = Vec3::from(xyz);
                if !v.is_finite() {
                    return Err(err(format!("vertex {} is not finite", vertices.len())));
                }
                vertices.push(v);
            } else if is_face {
                let f = face.ok_or_else(|| err("face element lacks vertex_indices".into()))?;
                push_fan(&f, &mut triangles).map_err(err)?;
            }
        }
    }
    if !saw_vertex {
        return Err(err("no vertex element".into()));
    }
    finish(id, vertices, triangles, context).map(|mut m| {
        m.spacing = spacing;
        m
    })
}

pub fn parse_obj(bytes: &[u8], id: &str, context: &str) -> Result<MeshAsset, DatasetError> {
    let err = |msg: String| DatasetError::parse(context, msg);
    let text = std::str::from_utf8(bytes).map_err(|_| err("file is not valid UTF-8".into()))?;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let t = tok.next().ok_or_else(|| err(format!("line {}: short vertex", no + 1)))?;
                    *c = t.parse().map_err(|_| err(format!("line {}: bad number {t:?}", no + 1)))?;
                }
                let v = Vec3::from(xyz);
                if !v.is_finite() {
                    return Err(err(format!("line {}: non-finite vertex", no + 1)));
                }
                vertices.push(v);
            }
            Some("f") => {
                let mut face = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| err(format!("line {}: bad index {t:?}", no + 1)))?;
                    let n = vertices.len() as i64;
                    let resolved = match i {
                        0 => return Err(err(format!("line {}: index 0", no + 1))),
                        i if i > 0 => i - 1,
                        i => n + i,
                    };
                    if resolved < 0 || resolved >= n {
                        return Err(err(format!("line {}: index {i} out of range", no + 1)));
                    }
                    face.push(resolved as usize);
                }
                push_fan(&face, &mut triangles).map_err(|m| err(format!("line {}: {m}", no + 1)))?;
            }
            _ => {}
        }
    }
    finish(id, vertices, triangles, context)
}

/// Fan-triangulates a polygon: `(0, i, i+1)`.
fn push_fan(face: &[usize], out: &mut Vec<[u32; 3]>) -> Result<(), String> {
    if face.len() < 3 {
        return Err(format!("face with {} vertices", face.len()));
    }
    let idx = |i: usize| u32::try_from(face[i]).map_err(|_| format!("index {} too large", face[i]));
    for i in 1..face.len() - 1 {
        out.push([idx(0)?, idx(i)?, idx(i + 1)?]);
    }
    Ok(())
}

fn finish(id: &str, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, context: &str) -> Result<MeshAsset, DatasetError> {
    MeshAsset::new(id, id, vertices, triangles).map_err(|e| DatasetError::parse(context, e.to_string()))
}

/// Writes an ASCII PLY with `x y z` vertices and triangle faces.
pub fn write_ply(mesh: &MeshAsset) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    if let Some(sp) = mesh.spacing {
        let _ = writeln!(s, "comment spacing {} {} {}", sp.x, sp.y, sp.z);
    }
    let _ = writeln!(s, "element vertex {}", mesh.vertices().len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(s, "element face {}", mesh.triangles().len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}
