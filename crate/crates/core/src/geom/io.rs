//! ASCII OFF / OBJ / XYZ readers and writers.
//!
//! Polygonal faces are fan-triangulated on load. OBJ texture and normal
//! references (`f 1/2/3 ...`) are accepted and ignored; negative OBJ indices
//! are resolved relative to the vertices read so far.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Mesh, Point, PointCloud, Shape};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

/// Loads an OFF or OBJ triangle mesh.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match extension(path).as_str() {
        "off" => parse_off(&text, path),
        "obj" => match parse_obj(&text, path)? {
            Shape::Mesh(m) => Ok(m),
            Shape::Cloud(_) => Err(parse_err(path, 0, "OBJ file has no faces")),
        },
        other => Err(parse_err(
            path,
            0,
            format!("unsupported mesh extension `{other}`"),
        )),
    }
}

/// Loads an XYZ file or the vertices of an OBJ file as a point cloud.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match extension(path).as_str() {
        "xyz" | "txt" => parse_xyz(&text, path),
        "obj" => PointCloud::new(parse_obj(&text, path)?.vertices().to_vec()),
        other => Err(parse_err(
            path,
            0,
            format!("unsupported point cloud extension `{other}`"),
        )),
    }
}

/// Loads a mesh (OFF, OBJ with faces) or a point cloud (XYZ, OBJ without faces).
pub fn load_shape(path: impl AsRef<Path>) -> Result<Shape> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match extension(path).as_str() {
        "off" => parse_off(&text, path).map(Shape::Mesh),
        "obj" => parse_obj(&text, path),
        "xyz" | "txt" => parse_xyz(&text, path).map(Shape::Cloud),
        other => Err(parse_err(path, 0, format!("unsupported extension `{other}`"))),
    }
}

/// Numbered, comment-stripped, non-empty lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("expected a number, found `{tok}`")))
}

fn parse_usize(tok: &str, path: &Path, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(path, line, format!("expected an index, found `{tok}`")))
}

fn fan(poly: &[usize], out: &mut Vec<[usize; 3]>) {
    for w in 1..poly.len() - 1 {
        out.push([poly[0], poly[w], poly[w + 1]]);
    }
}

pub fn parse_off(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut head_tokens = header.split_whitespace();
    if head_tokens.next() != Some("OFF") {
        return Err(parse_err(path, hline, "missing OFF header"));
    }
    let rest: Vec<&str> = head_tokens.collect();
    let (cline, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (l, c) = lines
            .next()
            .ok_or_else(|| parse_err(path, hline, "missing element counts"))?;
        (l, c.split_whitespace().collect())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(path, cline, "expected `n_vertices n_faces [n_edges]`"));
    }
    let nv = parse_usize(counts[0], path, cline)?;
    let nf = parse_usize(counts[1], path, cline)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines
            .next()
            .ok_or_else(|| parse_err(path, cline, "unexpected end of file in vertex list"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(path, l, "vertex needs 3 coordinates"));
        }
        vertices.push([
            parse_f64(toks[0], path, l)?,
            parse_f64(toks[1], path, l)?,
            parse_f64(toks[2], path, l)?,
        ]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines
            .next()
            .ok_or_else(|| parse_err(path, cline, "unexpected end of file in face list"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        let k = parse_usize(toks[0], path, l)?;
        if k < 3 || toks.len() < k + 1 {
            return Err(parse_err(path, l, format!("malformed face with {k} corners")));
        }
        let poly = toks[1..=k]
            .iter()
            .map(|t| {
                let i = parse_usize(t, path, l)?;
                if i >= nv {
                    return Err(parse_err(
                        path,
                        l,
                        format!("face index {i} out of range (n = {nv})"),
                    ));
                }
                Ok(i)
            })
            .collect::<Result<Vec<_>>>()?;
        fan(&poly, &mut faces);
    }
    Mesh::new(vertices, faces)
}

/// Parses OBJ text. Files without `f` records come back as point clouds.
pub fn parse_obj(text: &str, path: &Path) -> Result<Shape> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut faces = Vec::new();
    for (l, s) in content_lines(text) {
        let mut toks = s.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(parse_err(path, l, "vertex needs 3 coordinates"));
                }
                vertices.push([
                    parse_f64(c[0], path, l)?,
                    parse_f64(c[1], path, l)?,
                    parse_f64(c[2], path, l)?,
                ]);
            }
            Some("f") => {
                let poly = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let raw: i64 = head.parse().map_err(|_| {
                            parse_err(path, l, format!("expected a face index, found `{t}`"))
                        })?;
                        let resolved = match raw {
                            0 => {
                                return Err(parse_err(
                                    path,
                                    l,
                                    "OBJ face indices are 1-based; found 0",
                                ))
                            }
                            r if r > 0 => r as usize - 1,
                            r => {
                                let back = r.unsigned_abs() as usize;
                                if back > vertices.len() {
                                    return Err(parse_err(
                                        path,
                                        l,
                                        format!("relative index {r} before first vertex"),
                                    ));
                                }
                                vertices.len() - back
                            }
                        };
                        Ok(resolved)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if poly.len() < 3 {
                    return Err(parse_err(path, l, "face needs at least 3 corners"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return PointCloud::new(vertices).map(Shape::Cloud);
    }
    let n = vertices.len();
    if let Some(bad) = faces.iter().flatten().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: *bad, len: n });
    }
    Mesh::new(vertices, faces).map(Shape::Mesh)
}

/// Whitespace separated `x y z` per line; extra columns are ignored.
pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut pts = Vec::new();
    for (l, s) in content_lines(text) {
        let c: Vec<&str> = s.split(|ch: char| ch.is_whitespace() || ch == ',').filter(|t| !t.is_empty()).collect();
        if c.len() < 3 {
            return Err(parse_err(path, l, "point needs 3 coordinates"));
        }
        pts.push([
            parse_f64(c[0], path, l)?,
            parse_f64(c[1], path, l)?,
            parse_f64(c[2], path, l)?,
        ]);
    }
    PointCloud::new(pts)
}

/// Full-precision OFF text.
pub fn write_off(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.n_vertices(), mesh.n_faces());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for p in mesh.vertices() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

/// Writes OFF or OBJ depending on the extension of `path`.
pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match extension(path).as_str() {
        "obj" => write_obj(mesh),
        "off" => write_off(mesh),
        other => {
            return Err(Error::InvalidParameter(format!(
                "cannot write mesh with extension `{other}`"
            )))
        }
    };
    fs::write(path, text)?;
    Ok(())
}

/// Writes XYZ (or OBJ `v` records when the extension is `.obj`).
pub fn save_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let obj = extension(&path) == "obj";
    let mut s = String::new();
    for p in cloud.vertices() {
        if obj {
            s.push_str("v ");
        }
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::primitives;

    fn p() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn single_triangle_off() {
        let m = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n", p()).unwrap();
        assert_eq!((m.n_vertices(), m.n_faces()), (3, 1));
    }

    #[test]
    fn off_counts_on_header_line_and_comments() {
        let m = parse_off(
            "# comment\nOFF 4 1 0\n0 0 0\n1 0 0\n1 1 0 # trailing\n0 1 0\n4 0 1 2 3\n",
            p(),
        )
        .unwrap();
        assert_eq!(m.n_faces(), 2);
    }

    #[test]
    fn off_bad_number_reports_line() {
        let err = parse_off("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n", p()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn off_degenerate_face() {
        let err = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 1\n", p()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFace { face: 0, indices: [0, 1, 1] }));
    }

    #[test]
    fn obj_zero_index_is_rejected() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", p()).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 4);
                assert!(msg.contains("1-based"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn obj_slashes_and_negative_indices() {
        let s = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n", p()).unwrap();
        let m = s.as_mesh().unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_without_faces_is_cloud() {
        let s = parse_obj("v 0 0 0\nv 1 2 3\n", p()).unwrap();
        assert!(matches!(s, Shape::Cloud(ref c) if c.n_vertices() == 2));
    }

    #[test]
    fn icosphere_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico4.off");
        save_mesh(&primitives::icosphere(4), &path).unwrap();
        let m = load_mesh(&path).unwrap();
        assert_eq!(m.n_vertices(), 2562);
        assert_eq!(m, primitives::icosphere(4));
        let obj = dir.path().join("ico4.obj");
        save_mesh(&m, &obj).unwrap();
        assert_eq!(load_mesh(&obj).unwrap(), m);
    }

    #[test]
    fn xyz_cloud() {
        let c = parse_xyz("0 0 0\n1,2,3\n", p()).unwrap();
        assert_eq!(c.vertices()[1], [1.0, 2.0, 3.0]);
        assert!(parse_xyz("", p()).is_err());
    }
}
