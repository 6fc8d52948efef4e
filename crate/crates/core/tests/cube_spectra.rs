use std::time::Instant;

use spectraforge::eigen::{relative_residual, smallest_eigenpairs};
use spectraforge::geom::{build_cube, CubeSpec};
use spectraforge::operators::{cotan_laplacian, pat_operator};

fn cube(r: usize, pattern_id: usize, depth: f64) -> (spectraforge::Mesh, spectraforge::Region) {
    build_cube(&CubeSpec {
        face_resolution: r,
        pattern_id,
        depth_factor: depth,
        extrusion_height: 0.15,
    })
    .unwrap()
}

#[test]
fn global_and_patch_spectra_converge() {
    for (r, k) in [(20, 30), (35, 30)] {
        let (mesh, front) = cube(r, 7, 1.3);
        let (l, m) = cotan_laplacian(&mesh).unwrap();
        let t = Instant::now();
        let s = smallest_eigenpairs(&l, &m, k, true, 0).unwrap();
        eprintln!("r={r} n={} global k={k}: {:?}", mesh.n_vertices(), t.elapsed());
        let v = s.eigenvectors.as_ref().unwrap();
        for i in 0..k {
            let res = relative_residual(&l, &m, s.eigenvalues[i], v.column(i).as_slice());
            assert!(res < 1e-8, "pair {i}: {res:e}");
        }
        let pat = pat_operator(&mesh, &front).unwrap();
        let t = Instant::now();
        let p = smallest_eigenpairs(&pat.operator, &pat.mass, 15, true, 0).unwrap();
        eprintln!("  patch n={}: {:?}", pat.mass.dim(), t.elapsed());
        let v = p.eigenvectors.as_ref().unwrap();
        for i in 0..15 {
            let res = relative_residual(&pat.operator, &pat.mass, p.eigenvalues[i], v.column(i).as_slice());
            assert!(res < 1e-8, "patch pair {i}: {res:e}");
        }
    }
}
