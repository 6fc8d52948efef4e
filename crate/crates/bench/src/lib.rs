//! Fixtures shared by the benchmarks.

use spectraforge::geom::{build_cube, CubeSpec};
use spectraforge::{Mesh, Region};

/// Cube with the front-face region, `face_resolution` cells per edge.
pub fn cube(face_resolution: usize) -> (Mesh, Region) {
    build_cube(&CubeSpec {
        face_resolution,
        pattern_id: 17,
        depth_factor: 1.3,
        extrusion_height: 0.15,
    })
    .expect("valid cube spec")
}
