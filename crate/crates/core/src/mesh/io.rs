use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Loads an OBJ or STL (ASCII or binary) file and scales it to meters.
pub fn load_mesh(path: impl AsRef<Path>, scale: f64) -> Result<TriangleMesh> {
    let path = path.as_ref();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::MeshParse {
            path: path.to_path_buf(),
            message: format!("scale must be a positive real, got {scale}"),
        });
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let (vertices, triangles) = match ext.as_deref() {
        Some("obj") => read_obj(path)?,
        Some("stl") => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_stl(&bytes).map_err(|message| Error::MeshParse {
                path: path.to_path_buf(),
                message,
            })?
        }
        _ => {
            return Err(Error::MeshParse {
                path: path.to_path_buf(),
                message: "unsupported extension (expected .obj or .stl)".into(),
            })
        }
    };
    let vertices = vertices.into_iter().map(|v| v * scale).collect();
    TriangleMesh::new(vertices, triangles)
}

fn read_obj(path: &Path) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _materials) = tobj::load_obj(path, &opts).map_err(|e| Error::MeshParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for model in models {
        let m = model.mesh;
        let base = vertices.len() as u32;
        vertices.extend(
            m.positions
                .chunks_exact(3)
                .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)),
        );
        triangles.extend(
            m.indices
                .chunks_exact(3)
                .map(|t| [base + t[0], base + t[1], base + t[2]]),
        );
    }
    Ok((vertices, triangles))
}

/// Parses STL bytes; vertices shared by facets are welded by exact coordinates.
pub(crate) fn parse_stl(bytes: &[u8]) -> std::result::Result<(Vec<Vec3>, Vec<[u32; 3]>), String> {
    let facets = if is_binary_stl(bytes) {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let rec = &bytes[84 + 50 * i..84 + 50 * (i + 1)];
            let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
            // skip the 12-byte facet normal
            let v = |k: usize| Vec3::new(f(12 + 12 * k), f(16 + 12 * k), f(20 + 12 * k));
            out.push([v(0), v(1), v(2)]);
        }
        out
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| "not a binary STL and not UTF-8 text".to_string())?;
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(3);
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("vertex") => {
                    let coords: Vec<f64> = it
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    if coords.len() != 3 {
                        return Err(format!("line {}: vertex needs 3 coordinates", lineno + 1));
                    }
                    cur.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("endloop") => {
                    if cur.len() != 3 {
                        return Err(format!("line {}: facet with {} vertices", lineno + 1, cur.len()));
                    }
                    out.push([cur[0], cur[1], cur[2]]);
                    cur.clear();
                }
                _ => {}
            }
        }
        if !text.trim_start().starts_with("solid") {
            return Err("missing `solid` header".into());
        }
        out
    };

    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(facets.len());
    for f in facets {
        let mut tri = [0u32; 3];
        for (k, v) in f.iter().enumerate() {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            tri[k] = *index.entry(key).or_insert_with(|| {
                vertices.push(*v);
                (vertices.len() - 1) as u32
            });
        }
        triangles.push(tri);
    }
    Ok((vertices, triangles))
}

fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == 84 + 50 * n
}

/// Writes `v`/`f` records only.
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn unit_cube_obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        write_obj(&shapes::cuboid(Vec3::new(1.0, 1.0, 1.0)), &p).unwrap();
        let m = load_mesh(&p, 1.0).unwrap();
        assert!((m.area() - 6.0).abs() < 1e-9);
        assert!((m.volume() - 1.0).abs() < 1e-9);
        let m = load_mesh(&p, 0.1).unwrap();
        assert!((m.volume() - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn obj_without_faces_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\n").unwrap();
        assert!(matches!(load_mesh(&p, 1.0), Err(Error::DegenerateMesh(_))));
    }

    #[test]
    fn ascii_and_binary_stl() {
        let cube = shapes::cuboid(Vec3::new(1.0, 2.0, 3.0));
        let mut ascii = String::from("solid cube\n");
        let mut bin = vec![0u8; 80];
        bin.extend((cube.len() as u32).to_le_bytes());
        for (i, n) in cube.normals().iter().enumerate() {
            let tri = cube.triangle(i);
            ascii.push_str(&format!("facet normal {} {} {}\nouter loop\n", n.x, n.y, n.z));
            bin.extend([0u8; 12]);
            for v in tri {
                ascii.push_str(&format!("vertex {} {} {}\n", v.x, v.y, v.z));
                for c in v.iter() {
                    bin.extend((*c as f32).to_le_bytes());
                }
            }
            ascii.push_str("endloop\nendfacet\n");
            bin.extend([0u8; 2]);
        }
        ascii.push_str("endsolid cube\n");
        for bytes in [ascii.into_bytes(), bin] {
            let (v, t) = parse_stl(&bytes).unwrap();
            assert_eq!(v.len(), 8);
            let m = TriangleMesh::new(v, t).unwrap();
            assert!((m.volume() - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(parse_stl(b"solid x\nvertex 1 2\nendloop\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_mesh(dir.path().join("missing.obj"), 1.0),
            Err(Error::Io { .. })
        ));
        let p = dir.path().join("x.ply");
        std::fs::write(&p, "ply").unwrap();
        assert!(matches!(load_mesh(&p, 1.0), Err(Error::MeshParse { .. })));
    }
}
