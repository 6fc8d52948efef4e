//! Discrete Laplace-type operators.
//!
//! Every operator comes as a generalized pair `(L, M)` with `L` symmetric
//! positive semi-definite and `M` the diagonal lumped mass, to be solved as
//! `L φ = λ M φ`.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{cross, dot, extract_submesh, norm, sub, Mesh, PointCloud, Region};
use crate::sparse::CsrMatrix;

/// Diagonal lumped mass matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrix {
    diag: Vec<f64>,
}

impl MassMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(i) = diag.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::ZeroMass(i));
        }
        Ok(Self { diag })
    }

    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self {
            diag: keep.iter().map(|&i| self.diag[i]).collect(),
        }
    }
}

/// Symmetric rank-`b` update `weight * F F^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRank {
    pub weight: f64,
    /// `n x b`.
    pub factor: DMatrix<f64>,
}

/// Sparse symmetric stiffness, optionally with a dense low-rank term.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    pub matrix: CsrMatrix,
    pub low_rank: Option<LowRank>,
}

impl SparseOperator {
    pub fn new(matrix: CsrMatrix) -> Self {
        Self {
            matrix,
            low_rank: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.mul(x);
        if let Some(lr) = &self.low_rank {
            let xv = nalgebra::DVectorView::from_slice(x, x.len());
            let coeffs = lr.factor.tr_mul(&xv);
            let extra = &lr.factor * coeffs;
            for (yi, e) in y.iter_mut().zip(extra.iter()) {
                *yi += lr.weight * e;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.matrix.to_dense();
        if let Some(lr) = &self.low_rank {
            d += lr.weight * &lr.factor * lr.factor.transpose();
        }
        d
    }

    /// Restriction to `keep` (principal submatrix, low-rank rows included).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self {
            matrix: self.matrix.principal_submatrix(keep),
            low_rank: self.low_rank.as_ref().map(|lr| LowRank {
                weight: lr.weight,
                factor: lr.factor.select_rows(keep),
            }),
        }
    }

    /// Matrix Market dump of the sparse part. A low-rank term, if present,
    /// is noted in a comment only.
    pub fn to_matrix_market(&self) -> String {
        let mut s = self.matrix.to_matrix_market();
        if let Some(lr) = &self.low_rank {
            let header_end = s.find('\n').unwrap() + 1;
            s.insert_str(
                header_end,
                &format!(
                    "% plus low-rank term of rank {} with weight {:?} (not listed)\n",
                    lr.factor.ncols(),
                    lr.weight
                ),
            );
        }
        s
    }
}

/// Which operator to use on a region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocalizedOperatorKind {
    /// Cut the region out and impose Dirichlet conditions on the cut.
    Pat,
    /// `L + τ M V` with `V` the indicator of the complement of the region.
    Ham { tau: Option<f64> },
    /// Hamiltonian plus `μ M Φ Φ^T M` penalising overlap with the first
    /// `basis_size` global eigenfunctions.
    Lmh {
        tau: Option<f64>,
        mu: Option<f64>,
        basis_size: Option<usize>,
    },
}

impl LocalizedOperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pat => "pat",
            Self::Ham { .. } => "ham",
            Self::Lmh { .. } => "lmh",
        }
    }
}

/// Multiplier applied to the mean of the first 30 global eigenvalues to get
/// the default potential height.
pub const DEFAULT_TAU_FACTOR: f64 = 1e4;

/// Cotangent of the angle between `a` and `b`, or `None` when the pair is
/// (numerically) collinear.
fn cotangent(a: &[f64; 3], b: &[f64; 3]) -> Option<f64> {
    let s = norm(&cross(a, b));
    let scale = norm(a) * norm(b);
    if s.is_nan() || s <= 1e-14 * scale {
        return None;
    }
    let c = dot(a, b) / s;
    c.is_finite().then_some(c)
}

/// Cotangent stiffness and lumped barycentric mass.
///
/// Off-diagonal `(i, j)` is `-(cot α + cot β) / 2` over the triangles
/// sharing edge `ij`; the diagonal is minus the off-diagonal row sum.
/// Angles of zero-area triangles contribute nothing (logged as a warning).
pub fn cotan_laplacian(mesh: &Mesh) -> Result<(SparseOperator, MassMatrix)> {
    let n = mesh.n_vertices();
    let v = mesh.vertices();
    let mut off: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.n_faces() * 6);
    let mut clamped = 0usize;
    for f in mesh.faces() {
        for c in 0..3 {
            let (k, i, j) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
            let Some(cot) = cotangent(&sub(&v[i], &v[k]), &sub(&v[j], &v[k])) else {
                clamped += 1;
                continue;
            };
            let w = -0.5 * cot;
            off.push((i, j, w));
            off.push((j, i, w));
        }
    }
    if clamped > 0 {
        warn!("cotan_laplacian: {clamped} angles of degenerate triangles clamped to zero weight");
    }
    let offdiag = CsrMatrix::from_triplets(n, &off);
    let mut triplets: Vec<(usize, usize, f64)> = offdiag.triplets().collect();
    for i in 0..n {
        let s: f64 = offdiag.row(i).map(|(_, w)| w).sum();
        triplets.push((i, i, -s));
    }
    let stiffness = CsrMatrix::from_triplets(n, &triplets);
    let mass = MassMatrix::new(mesh.vertex_areas())?;
    Ok((SparseOperator::new(stiffness), mass))
}

/// Result of removing boundary rows and columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduced {
    pub operator: SparseOperator,
    pub mass: MassMatrix,
    /// Reduced index -> original index.
    pub interior_map: Vec<usize>,
}

/// Homogeneous Dirichlet conditions by deleting the boundary rows and
/// columns of both matrices.
pub fn dirichlet_reduce(
    op: &SparseOperator,
    mass: &MassMatrix,
    boundary: &[usize],
) -> Result<Reduced> {
    let n = op.dim();
    if mass.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mass.dim(),
        });
    }
    if let Some(&bad) = boundary.iter().find(|&&b| b >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    if boundary.is_empty() {
        return Ok(Reduced {
            operator: op.clone(),
            mass: mass.clone(),
            interior_map: (0..n).collect(),
        });
    }
    let mut on_boundary = vec![false; n];
    for &b in boundary {
        on_boundary[b] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !on_boundary[i]).collect();
    if interior.is_empty() {
        return Err(Error::AllBoundary);
    }
    Ok(Reduced {
        operator: op.restrict(&interior),
        mass: mass.restrict(&interior),
        interior_map: interior,
    })
}

/// Patch operator: cotangent Laplacian of the region's submesh with
/// Dirichlet conditions on the cut. `interior_map` refers to host-mesh
/// vertex indices.
pub fn pat_operator(mesh: &Mesh, region: &Region) -> Result<Reduced> {
    let sub = extract_submesh(mesh, region)?;
    let (l, m) = cotan_laplacian(&sub.mesh)?;
    let mut reduced = dirichlet_reduce(&l, &m, &sub.boundary)?;
    for idx in &mut reduced.interior_map {
        *idx = sub.vertex_map[*idx];
    }
    Ok(reduced)
}

/// `L + τ M V`, `V` the 0/1 indicator of vertices outside `region`.
pub fn ham_operator(mesh: &Mesh, region: &Region, tau: f64) -> Result<(SparseOperator, MassMatrix)> {
    let (l, m) = cotan_laplacian(mesh)?;
    ham_from_pair(&l, &m, region, tau)
}

/// Hamiltonian on an already assembled pair.
pub fn ham_from_pair(
    l: &SparseOperator,
    m: &MassMatrix,
    region: &Region,
    tau: f64,
) -> Result<(SparseOperator, MassMatrix)> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid(format!("potential weight must be >= 0, got {tau}")));
    }
    let n = l.dim();
    if region.indices().last().is_some_and(|&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            index: *region.indices().last().unwrap(),
            len: n,
        });
    }
    if tau == 0.0 {
        return Ok((l.clone(), m.clone()));
    }
    let inside = region.mask(n);
    let potential: Vec<f64> = (0..n)
        .map(|i| if inside[i] { 0.0 } else { m.diag()[i] })
        .collect();
    if potential.iter().all(|&p| p == 0.0) {
        return Ok((l.clone(), m.clone()));
    }
    let mut op = SparseOperator::new(l.matrix.add_diagonal(tau, &potential));
    op.low_rank = l.low_rank.clone();
    Ok((op, m.clone()))
}

/// `L + τ M V + μ M Φ Φ^T M` where the columns of `basis` are the first
/// mass-orthonormal global eigenvectors.
pub fn lmh_operator(
    mesh: &Mesh,
    region: &Region,
    tau: f64,
    mu: f64,
    basis: &DMatrix<f64>,
) -> Result<(SparseOperator, MassMatrix)> {
    let (l, m) = cotan_laplacian(mesh)?;
    lmh_from_pair(&l, &m, region, tau, mu, basis)
}

pub fn lmh_from_pair(
    l: &SparseOperator,
    m: &MassMatrix,
    region: &Region,
    tau: f64,
    mu: f64,
    basis: &DMatrix<f64>,
) -> Result<(SparseOperator, MassMatrix)> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(format!("orthogonality weight must be >= 0, got {mu}")));
    }
    if basis.ncols() > 0 && basis.nrows() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: basis.nrows(),
        });
    }
    let (mut op, mass) = ham_from_pair(l, m, region, tau)?;
    if mu == 0.0 || basis.ncols() == 0 {
        return Ok((op, mass));
    }
    let mut factor = basis.clone();
    for (i, mut row) in factor.row_iter_mut().enumerate() {
        row *= mass.diag()[i];
    }
    op.low_rank = Some(LowRank { weight: mu, factor });
    Ok((op, mass))
}

/// Default k for the point-cloud graph.
pub const DEFAULT_K_NEIGHBORS: usize = 12;

/// Symmetrised k-nearest-neighbour graph Laplacian with Gaussian weights
/// `exp(-d^2 / σ^2)`, `σ` the mean distance to the k-th neighbour. Mass is
/// uniform, with total equal to the mean squared distance to the centroid,
/// so that spectra do not depend on rigid motions.
pub fn pointcloud_laplacian(
    cloud: &PointCloud,
    k_neighbors: usize,
) -> Result<(SparseOperator, MassMatrix)> {
    let pts = cloud.vertices();
    let n = pts.len();
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(invalid(format!(
            "k_neighbors must be in [1, {n}), got {k_neighbors}"
        )));
    }
    let mut neighbors: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (crate::geom::dist2(&pts[i], &pts[j]), j))
            .collect();
        d.select_nth_unstable_by(k_neighbors - 1, |a, b| a.partial_cmp(b).unwrap());
        d.truncate(k_neighbors);
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        neighbors.push(d);
    }
    let mut sigma = neighbors
        .iter()
        .map(|nb| nb[k_neighbors - 1].0.sqrt())
        .sum::<f64>()
        / n as f64;
    let centroid = pts.iter().fold([0.0; 3], |acc, p| {
        [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]
    });
    let centroid = centroid.map(|c| c / n as f64);
    let spread = pts
        .iter()
        .map(|p| crate::geom::dist2(p, &centroid))
        .sum::<f64>()
        / n as f64;
    let floor = if spread > 0.0 { 1e-9 * spread.sqrt() } else { 1.0 };
    if sigma.is_nan() || sigma <= floor {
        warn!("pointcloud_laplacian: neighbourhood scale {sigma:e} floored to {floor:e} (duplicate points?)");
        sigma = floor;
    }
    let mut edges: Vec<(usize, usize, f64)> = neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&(d2, j)| (i.min(j), i.max(j), d2)))
        .collect();
    edges.sort_by_key(|a| (a.0, a.1));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let mut triplets = Vec::with_capacity(edges.len() * 2 + n);
    let mut degree = vec![0.0; n];
    for (i, j, d2) in edges {
        let w = (-d2 / (sigma * sigma)).exp();
        triplets.push((i, j, -w));
        triplets.push((j, i, -w));
        degree[i] += w;
        degree[j] += w;
    }
    triplets.extend(degree.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let total = if spread > 0.0 { spread } else { 1.0 };
    let mass = MassMatrix::new(vec![total / n as f64; n])?;
    Ok((SparseOperator::new(CsrMatrix::from_triplets(n, &triplets)), mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::primitives::{grid, grid_perimeter, icosphere};
    use approx::assert_relative_eq;

    #[test]
    fn two_triangle_square_weights() {
        // square split along the 0-2 diagonal
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let (l, mass) = cotan_laplacian(&m).unwrap();
        // boundary edges see one 45 degree angle: -(1)/2
        assert_relative_eq!(l.matrix.get(0, 1), -0.5, epsilon = 1e-15);
        assert_relative_eq!(l.matrix.get(1, 2), -0.5, epsilon = 1e-15);
        // the diagonal edge is opposite two right angles: cot 90 = 0
        assert!(l.matrix.get(0, 2).abs() < 1e-15);
        // no edge between 1 and 3
        assert_eq!(l.matrix.get(1, 3), 0.0);
        assert_relative_eq!(l.matrix.get(0, 0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(mass.total(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(mass.diag()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(mass.diag()[1], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_interior_stencil_is_five_point() {
        let n = 6;
        let h = 1.0 / n as f64;
        let m = grid(n, n, 1.0, 1.0);
        let (l, mass) = cotan_laplacian(&m).unwrap();
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let c = idx(3, 3);
        assert_relative_eq!(l.matrix.get(c, c), 4.0, epsilon = 1e-12);
        for nb in [idx(2, 3), idx(4, 3), idx(3, 2), idx(3, 4)] {
            assert_relative_eq!(l.matrix.get(c, nb), -1.0, epsilon = 1e-12);
        }
        // diagonal neighbours sit across the hypotenuse: zero weight
        assert!(l.matrix.get(c, idx(4, 4)).abs() < 1e-12);
        assert!(l.matrix.get(c, idx(2, 2)).abs() < 1e-12);
        assert_relative_eq!(mass.diag()[c], h * h, epsilon = 1e-15);
    }

    #[test]
    fn closed_mesh_rows_sum_to_zero() {
        let (l, m) = cotan_laplacian(&icosphere(3)).unwrap();
        let r = l.apply(&vec![1.0; l.dim()]);
        assert!(r.iter().all(|x| x.abs() < 1e-10));
        assert!(l.matrix.asymmetry() < 1e-12);
        let area: f64 = icosphere(3).surface_area();
        assert_relative_eq!(m.total(), area, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_triangle_is_clamped() {
        let m = Mesh::new(
            vec![
                [0.0; 3],
                [1.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [1.0, -1.0, 0.0],
            ],
            vec![[0, 1, 2], [0, 2, 3], [0, 4, 1], [1, 4, 2]],
        )
        .unwrap();
        let (l, _) = cotan_laplacian(&m).unwrap();
        assert!(l.matrix.triplets().all(|(_, _, v)| v.is_finite()));
    }

    #[test]
    fn isolated_vertex_has_no_mass() {
        let m = Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [3.0, 3.0, 3.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(cotan_laplacian(&m), Err(Error::ZeroMass(3))));
    }

    #[test]
    fn dirichlet_edge_cases() {
        let (l, m) = cotan_laplacian(&grid(3, 3, 1.0, 1.0)).unwrap();
        let same = dirichlet_reduce(&l, &m, &[]).unwrap();
        assert_eq!(same.operator, l);
        assert_eq!(same.mass, m);
        let all_but_one: Vec<usize> = (1..16).collect();
        let one = dirichlet_reduce(&l, &m, &all_but_one).unwrap();
        assert_eq!(one.operator.dim(), 1);
        assert_eq!(one.interior_map, vec![0]);
        let all: Vec<usize> = (0..16).collect();
        assert!(matches!(dirichlet_reduce(&l, &m, &all), Err(Error::AllBoundary)));
        assert!(dirichlet_reduce(&l, &m, &[16]).is_err());
        let red = dirichlet_reduce(&l, &m, &grid_perimeter(3, 3)).unwrap();
        assert_eq!(red.operator.dim(), 4);
    }

    #[test]
    fn pat_matches_composition() {
        let mesh = icosphere(2);
        let region = Region::new(
            "cap",
            (0..mesh.n_vertices()).filter(|&i| mesh.vertices()[i][2] > 0.3).collect(),
            mesh.n_vertices(),
        )
        .unwrap();
        let pat = pat_operator(&mesh, &region).unwrap();
        let sub = extract_submesh(&mesh, &region).unwrap();
        let (l, m) = cotan_laplacian(&sub.mesh).unwrap();
        let red = dirichlet_reduce(&l, &m, &sub.boundary).unwrap();
        assert_eq!(pat.operator, red.operator);
        assert_eq!(pat.mass, red.mass);
    }

    #[test]
    fn pat_on_closed_component_is_plain_lbo() {
        let mesh = icosphere(1);
        let region = Region::full("all", mesh.n_vertices()).unwrap();
        let pat = pat_operator(&mesh, &region).unwrap();
        let (l, m) = cotan_laplacian(&mesh).unwrap();
        assert_eq!(pat.operator, l);
        assert_eq!(pat.mass, m);
    }

    #[test]
    fn ham_identities() {
        let mesh = icosphere(2);
        let (l, m) = cotan_laplacian(&mesh).unwrap();
        let region = Region::new("r", (0..40).collect(), mesh.n_vertices()).unwrap();
        let (h0, m0) = ham_operator(&mesh, &region, 0.0).unwrap();
        assert_eq!((h0, m0), (l.clone(), m.clone()));
        let full = Region::full("all", mesh.n_vertices()).unwrap();
        let (hf, _) = ham_operator(&mesh, &full, 1e6).unwrap();
        assert_eq!(hf, l);
        let (h, _) = ham_operator(&mesh, &region, 10.0).unwrap();
        let i = 100;
        assert_relative_eq!(
            h.matrix.get(i, i),
            l.matrix.get(i, i) + 10.0 * m.diag()[i],
            epsilon = 1e-12
        );
        assert_eq!(h.matrix.get(3, 3), l.matrix.get(3, 3));
        assert!(ham_operator(&mesh, &region, -1.0).is_err());
    }

    #[test]
    fn lmh_identities_and_shape() {
        let mesh = icosphere(1);
        let n = mesh.n_vertices();
        let region = Region::new("r", (0..10).collect(), n).unwrap();
        let basis = DMatrix::from_fn(n, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let (ham, _) = ham_operator(&mesh, &region, 5.0).unwrap();
        let (lmh0, _) = lmh_operator(&mesh, &region, 5.0, 0.0, &basis).unwrap();
        assert_eq!(lmh0, ham);
        let (lmh_empty, _) = lmh_operator(&mesh, &region, 5.0, 3.0, &DMatrix::zeros(n, 0)).unwrap();
        assert_eq!(lmh_empty, ham);
        let (lmh, m) = lmh_operator(&mesh, &region, 5.0, 3.0, &basis).unwrap();
        let dense = lmh.to_dense();
        let md = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(m.diag()));
        let expected = ham.to_dense() + 3.0 * &md * &basis * basis.transpose() * &md;
        assert!((dense.clone() - expected).amax() < 1e-12);
        assert!((dense.clone() - dense.transpose()).amax() < 1e-12);
        assert!(lmh_operator(&mesh, &region, 5.0, 1.0, &DMatrix::zeros(n + 1, 2)).is_err());
    }

    #[test]
    fn point_cloud_kernel_and_symmetry() {
        let pts: Vec<[f64; 3]> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.sin(), (1.3 * t).cos(), 0.1 * t]
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let (l, m) = pointcloud_laplacian(&cloud, 8).unwrap();
        let r = l.apply(&vec![1.0; 60]);
        assert!(r.iter().all(|x| x.abs() < 1e-12));
        assert!(l.matrix.asymmetry() < 1e-15);
        assert!(m.diag().iter().all(|&x| x > 0.0));
        assert!(pointcloud_laplacian(&cloud, 60).is_err());
    }

    #[test]
    fn point_cloud_duplicates_are_floored() {
        let cloud = PointCloud::new(vec![[1.0, 2.0, 3.0]; 5]).unwrap();
        let (l, m) = pointcloud_laplacian(&cloud, 2).unwrap();
        assert!(l.matrix.triplets().all(|(_, _, v)| v.is_finite()));
        assert!(m.diag().iter().all(|&x| x > 0.0));
    }
}
