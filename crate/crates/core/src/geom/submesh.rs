use super::{Mesh, Region};
use crate::error::{Error, Result};

/// A region cut out of its host mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Submesh {
    pub mesh: Mesh,
    /// Submesh indices of vertices that touch, in the host mesh, a vertex
    /// that did not make it into the submesh.
    pub boundary: Vec<usize>,
    /// Submesh index -> host index. Increasing.
    pub vertex_map: Vec<usize>,
}

/// Keeps the faces whose three corners lie in `region` and reindexes the
/// vertices they use, preserving host order.
pub fn extract_submesh(mesh: &Mesh, region: &Region) -> Result<Submesh> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = mesh.n_vertices();
    let inside = region.mask(n);
    let kept: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .filter(|f| f.iter().all(|&v| inside[v]))
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySubmesh);
    }

    let mut used = vec![false; n];
    for &v in kept.iter().flatten() {
        used[v] = true;
    }
    let vertex_map: Vec<usize> = (0..n).filter(|&v| used[v]).collect();
    let mut to_sub = vec![usize::MAX; n];
    for (s, &v) in vertex_map.iter().enumerate() {
        to_sub[v] = s;
    }

    let adjacency = mesh.adjacency();
    let boundary: Vec<usize> = vertex_map
        .iter()
        .enumerate()
        .filter(|(_, &v)| adjacency[v].iter().any(|&w| !used[w]))
        .map(|(s, _)| s)
        .collect();

    let vertices = vertex_map.iter().map(|&v| mesh.vertices()[v]).collect();
    let faces = kept
        .iter()
        .map(|f| [to_sub[f[0]], to_sub[f[1]], to_sub[f[2]]])
        .collect();
    Ok(Submesh {
        mesh: Mesh::new(vertices, faces)?,
        boundary,
        vertex_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::primitives::grid;

    #[test]
    fn full_region_is_identity() {
        let m = grid(4, 4, 1.0, 1.0);
        let r = Region::full("all", m.n_vertices()).unwrap();
        let s = extract_submesh(&m, &r).unwrap();
        assert_eq!(s.mesh, m);
        assert!(s.boundary.is_empty());
        assert_eq!(s.vertex_map, (0..m.n_vertices()).collect::<Vec<_>>());
    }

    #[test]
    fn single_interior_face() {
        let m = grid(4, 4, 1.0, 1.0);
        // cell (1,1), lower triangle: (1,1) (2,1) (2,2)
        let idx = |i: usize, j: usize| j * 5 + i;
        let r = Region::new("f", vec![idx(1, 1), idx(2, 1), idx(2, 2)], 25).unwrap();
        let s = extract_submesh(&m, &r).unwrap();
        assert_eq!(s.mesh.n_faces(), 1);
        assert_eq!(s.boundary, vec![0, 1, 2]);
        assert_eq!(s.vertex_map, vec![idx(1, 1), idx(2, 1), idx(2, 2)]);
    }

    #[test]
    fn too_small_region_has_no_face() {
        let m = grid(3, 3, 1.0, 1.0);
        let r = Region::new("e", vec![0, 1], 16).unwrap();
        assert!(matches!(extract_submesh(&m, &r), Err(Error::EmptySubmesh)));
    }
}
