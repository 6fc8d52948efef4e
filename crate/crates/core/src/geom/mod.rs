//! Shape containers and everything that only needs geometry: file IO,
//! regions, submesh extraction, vertex areas, sampling and the synthetic
//! cube dataset.

mod cube;
mod dataset;
mod io;
pub mod primitives;
mod region;
mod sampling;
mod submesh;

use crate::error::{Error, Result};

pub use cube::{
    build_cube, generate_cube_dataset, pattern_catalog, CubeDataset, CubeDatasetSpec, CubeSpec,
    Pattern, PatternFamily, PATTERN_COUNT,
};
pub use dataset::{Dataset, Split, MANIFEST_NAME};
pub use io::{
    load_mesh, load_point_cloud, load_shape, parse_obj, parse_off, parse_xyz, save_mesh,
    save_point_cloud, write_obj, write_off,
};
pub use region::{load_region, parse_region, Region};
pub use sampling::farthest_point_sample;
pub use submesh::{extract_submesh, Submesh};

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let d = sub(a, b);
    dot(&d, &d)
}

/// Triangle mesh with shared vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh, checking face indices and rejecting faces that repeat
    /// a vertex.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if !faces.is_empty() && n < 3 {
            return Err(Error::InvalidParameter(format!(
                "mesh with faces needs at least 3 vertices, got {n}"
            )));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace {
                    face: fi,
                    indices: *f,
                });
            }
        }
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "vertex {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new coordinates.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
        0.5 * norm(&cross(&sub(pb, pa), &sub(pc, pa)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Barycentric vertex areas: one third of the area of every incident
    /// triangle. Isolated vertices get zero.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let a = self.face_area(fi) / 3.0;
            for &v in f {
                areas[v] += a;
            }
        }
        areas
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted and deduplicated.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| {
                [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
                    .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Vertex adjacency lists, sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn transformed(&self, f: impl Fn(&Point) -> Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Unorganised set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    vertices: Vec<Point>,
}

impl PointCloud {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidParameter("point cloud is empty".into()));
        }
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn transformed(&self, f: impl Fn(&Point) -> Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
        }
    }
}

/// Either kind of shape carrier.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Mesh(Mesh),
    Cloud(PointCloud),
}

impl Shape {
    pub fn vertices(&self) -> &[Point] {
        match self {
            Shape::Mesh(m) => m.vertices(),
            Shape::Cloud(c) => c.vertices(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices().len()
    }

    pub fn as_mesh(&self) -> Option<&Mesh> {
        match self {
            Shape::Mesh(m) => Some(m),
            Shape::Cloud(_) => None,
        }
    }
}

impl From<Mesh> for Shape {
    fn from(m: Mesh) -> Self {
        Shape::Mesh(m)
    }
}

impl From<PointCloud> for Shape {
    fn from(c: PointCloud) -> Self {
        Shape::Cloud(c)
    }
}

/// Barycentric per-vertex areas of `mesh`.
pub fn vertex_areas(mesh: &Mesh) -> Vec<f64> {
    mesh.vertex_areas()
}
