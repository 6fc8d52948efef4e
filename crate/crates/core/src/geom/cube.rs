//! Synthetic cuboids with an extruded pattern on the front face.
//!
//! Every cube is built on the same closed lattice surface of `[0, r]^3`
//! (`6 r^2 + 2` vertices), so all shapes share one connectivity. The front
//! face is the `z = r` side and its vertices come first in the vertex order.
//! A shape is the lattice cube scaled to unit width, stretched along `z` by
//! a depth factor, with a pattern raised outward on the front face.
//!
//! The pattern catalog has 125 entries, enumerated family by family:
//!
//! | family    | count | parameters                                                     |
//! |-----------|-------|----------------------------------------------------------------|
//! | circle    | 25    | radius `0.10 + 0.008 i`, `i = 0..25`                           |
//! | square    | 30    | half side `0.10 + 0.03 i`, `i = 0..6`; rotation `11.25 j` deg, `j = 0..5` |
//! | ellipse   | 35    | semi-major `0.14 + 0.025 i`, `i = 0..7`, aspect 0.55; rotation as above |
//! | rectangle | 35    | half length `0.14 + 0.025 i`, `i = 0..7`, aspect 0.5; rotation as above |
//!
//! Rotations stay within `[0, 45]` degrees because the front face is
//! symmetric under quarter turns and mirroring, so any larger angle would
//! reproduce an isometric shape. The raised height follows a smoothstep of
//! the signed distance to the pattern outline over a two-cell band, which
//! keeps neighbouring catalog entries geometrically distinct at any grid
//! resolution.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Dataset, Mesh, Point, Region, Shape, Split};
use crate::error::{invalid, Result};

pub const PATTERN_COUNT: usize = 125;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternFamily {
    Circle,
    Ellipse,
    Square,
    Rectangle,
}

/// A pattern outline in front-face coordinates (unit face centred at 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub family: PatternFamily,
    /// Radius, semi-major axis or half side length.
    pub size: f64,
    /// Minor/major ratio; 1 for circles and squares.
    pub aspect: f64,
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
}

impl Pattern {
    /// Signed distance (approximate for ellipses) from `(x, y)` to the
    /// outline; negative inside.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let (s, c) = (-self.rotation).sin_cos();
        let (u, v) = (c * x - s * y, s * x + c * y);
        let a = self.size;
        let b = self.size * self.aspect;
        match self.family {
            PatternFamily::Circle => (u * u + v * v).sqrt() - a,
            PatternFamily::Ellipse => ((u / a).powi(2) + (v / b).powi(2)).sqrt().mul_add(b, -b),
            PatternFamily::Square | PatternFamily::Rectangle => {
                let dx = u.abs() - a;
                let dy = v.abs() - b;
                let outside = (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
                outside + dx.max(dy).min(0.0)
            }
        }
    }

    /// Largest distance from the face centre that the outline reaches.
    pub fn extent(&self) -> f64 {
        match self.family {
            PatternFamily::Circle | PatternFamily::Ellipse => self.size,
            PatternFamily::Square | PatternFamily::Rectangle => {
                self.size * (1.0 + self.aspect * self.aspect).sqrt()
            }
        }
    }
}

const ROTATIONS: usize = 5;

fn rotation(j: usize) -> f64 {
    j as f64 * (PI / 4.0) / (ROTATIONS - 1) as f64
}

/// The 125 front-face patterns, in catalog order.
pub fn pattern_catalog() -> Vec<Pattern> {
    let mut out = Vec::with_capacity(PATTERN_COUNT);
    for i in 0..25 {
        out.push(Pattern {
            family: PatternFamily::Circle,
            size: 0.10 + 0.008 * i as f64,
            aspect: 1.0,
            rotation: 0.0,
        });
    }
    for i in 0..6 {
        for j in 0..ROTATIONS {
            out.push(Pattern {
                family: PatternFamily::Square,
                size: 0.10 + 0.03 * i as f64,
                aspect: 1.0,
                rotation: rotation(j),
            });
        }
    }
    for (family, aspect) in [(PatternFamily::Ellipse, 0.55), (PatternFamily::Rectangle, 0.5)] {
        for i in 0..7 {
            for j in 0..ROTATIONS {
                out.push(Pattern {
                    family,
                    size: 0.14 + 0.025 * i as f64,
                    aspect,
                    rotation: rotation(j),
                });
            }
        }
    }
    debug_assert_eq!(out.len(), PATTERN_COUNT);
    out
}

/// Parameters of one generated cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub face_resolution: usize,
    pub pattern_id: usize,
    pub depth_factor: f64,
    pub extrusion_height: f64,
}

/// Ranges for a whole dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeDatasetSpec {
    pub face_resolution: usize,
    /// Catalog ids to use; all 125 by default.
    pub patterns: Vec<usize>,
    pub depth_count: usize,
    pub depth_min: f64,
    pub depth_max: f64,
    /// In units of the cube edge.
    pub extrusion_height: f64,
    pub seed: u64,
}

impl Default for CubeDatasetSpec {
    fn default() -> Self {
        Self {
            face_resolution: 20,
            patterns: (0..PATTERN_COUNT).collect(),
            depth_count: 8,
            depth_min: 0.6,
            depth_max: 2.0,
            extrusion_height: 0.15,
            seed: 0,
        }
    }
}

impl CubeDatasetSpec {
    /// Evenly spaced depth factors, inclusive of both ends.
    pub fn depth_factors(&self) -> Vec<f64> {
        if self.depth_count == 1 {
            return vec![self.depth_min];
        }
        (0..self.depth_count)
            .map(|i| {
                self.depth_min
                    + (self.depth_max - self.depth_min) * i as f64 / (self.depth_count - 1) as f64
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CubeDataset {
    pub dataset: Dataset,
    /// Parallel to `dataset.shapes`.
    pub specs: Vec<CubeSpec>,
}

pub const MIN_FACE_RESOLUTION: usize = 8;

/// Shared lattice: vertex positions in `[0, r]^3` and faces.
struct Lattice {
    coords: Vec<[usize; 3]>,
    faces: Vec<[usize; 3]>,
    front: usize,
}

fn lattice(r: usize) -> Lattice {
    let on_surface = |p: [usize; 3]| p.iter().any(|&c| c == 0 || c == r);
    let mut front: Vec<[usize; 3]> = Vec::new();
    let mut rest: Vec<[usize; 3]> = Vec::new();
    for k in 0..=r {
        for j in 0..=r {
            for i in 0..=r {
                let p = [i, j, k];
                if !on_surface(p) {
                    continue;
                }
                if k == r {
                    front.push(p);
                } else {
                    rest.push(p);
                }
            }
        }
    }
    let n_front = front.len();
    let coords: Vec<[usize; 3]> = front.into_iter().chain(rest).collect();
    let index: HashMap<[usize; 3], usize> =
        coords.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    // (normal axis, side, u axis, v axis) with u x v pointing outward.
    let sides = [
        (2, r, 0, 1),
        (2, 0, 1, 0),
        (0, r, 1, 2),
        (0, 0, 2, 1),
        (1, r, 2, 0),
        (1, 0, 0, 2),
    ];
    let mut faces = Vec::with_capacity(12 * r * r);
    for (axis, side, ua, va) in sides {
        let at = |a: usize, b: usize| {
            let mut p = [0usize; 3];
            p[axis] = side;
            p[ua] = a;
            p[va] = b;
            index[&p]
        };
        for b in 0..r {
            for a in 0..r {
                let (p00, p10, p11, p01) = (at(a, b), at(a + 1, b), at(a + 1, b + 1), at(a, b + 1));
                faces.push([p00, p10, p11]);
                faces.push([p00, p11, p01]);
            }
        }
    }
    Lattice {
        coords,
        faces,
        front: n_front,
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn place(lat: &Lattice, r: usize, spec: &CubeSpec, pattern: &Pattern) -> Vec<Point> {
    let rf = r as f64;
    let band = 2.0 / rf;
    lat.coords
        .iter()
        .enumerate()
        .map(|(idx, &[i, j, k])| {
            let x = i as f64 / rf - 0.5;
            let y = j as f64 / rf - 0.5;
            let mut z = (k as f64 / rf - 0.5) * spec.depth_factor;
            if idx < lat.front {
                let sd = pattern.signed_distance(x, y);
                z += spec.extrusion_height * smoothstep(0.5 - sd / band);
            }
            [x, y, z]
        })
        .collect()
}

fn check_resolution(r: usize) -> Result<()> {
    if r < MIN_FACE_RESOLUTION {
        return Err(invalid(format!(
            "face resolution {r} is below the minimum of {MIN_FACE_RESOLUTION}"
        )));
    }
    Ok(())
}

/// Builds a single cube and its front-face region.
pub fn build_cube(spec: &CubeSpec) -> Result<(Mesh, Region)> {
    check_resolution(spec.face_resolution)?;
    let catalog = pattern_catalog();
    let pattern = catalog
        .get(spec.pattern_id)
        .ok_or_else(|| invalid(format!("pattern id {} not in [0, 125)", spec.pattern_id)))?;
    let lat = lattice(spec.face_resolution);
    let mesh = Mesh::new(place(&lat, spec.face_resolution, spec, pattern), lat.faces.clone())?;
    let region = Region::new("front", (0..lat.front).collect(), mesh.n_vertices())?;
    Ok((mesh, region))
}

/// Every (pattern, depth) combination, pattern-major, with a seeded 90/10
/// split.
pub fn generate_cube_dataset(spec: &CubeDatasetSpec) -> Result<CubeDataset> {
    let r = spec.face_resolution;
    check_resolution(r)?;
    if spec.depth_count == 0 || spec.patterns.is_empty() {
        return Err(invalid("dataset needs at least one pattern and one depth"));
    }
    if !(spec.depth_min > 0.0 && spec.depth_max >= spec.depth_min) {
        return Err(invalid("depth range must be positive and ordered"));
    }
    let catalog = pattern_catalog();
    let lat = lattice(r);
    let n = lat.coords.len();
    let region = Region::new("front", (0..lat.front).collect(), n)?;
    let depths = spec.depth_factors();

    let mut shapes = Vec::with_capacity(spec.patterns.len() * depths.len());
    let mut specs = Vec::with_capacity(shapes.capacity());
    for &pid in &spec.patterns {
        let pattern = catalog
            .get(pid)
            .ok_or_else(|| invalid(format!("pattern id {pid} not in [0, 125)")))?;
        for &d in &depths {
            let cs = CubeSpec {
                face_resolution: r,
                pattern_id: pid,
                depth_factor: d,
                extrusion_height: spec.extrusion_height,
            };
            let mesh = Mesh::new(place(&lat, r, &cs, pattern), lat.faces.clone())?;
            shapes.push(Shape::Mesh(mesh));
            specs.push(cs);
        }
    }
    let count = shapes.len();
    Ok(CubeDataset {
        dataset: Dataset {
            regions: vec![vec![region]; count],
            shapes,
            split: Split::ninety_ten(count, spec.seed),
            seed: spec.seed,
        },
        specs,
    })
}
