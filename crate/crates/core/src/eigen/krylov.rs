//! Block shift-and-invert Krylov solver for the low end of `L φ = λ M φ`.
//!
//! The pair is symmetrised as `C = M^{-1/2} L M^{-1/2}`. Krylov blocks are
//! built from `T = (C − σ I)^{-1}` with `σ` slightly below zero so the
//! constant mode of closed shapes stays factorizable; every column is
//! orthogonalized against the whole basis. Ritz pairs are extracted by a
//! Rayleigh-Ritz projection of `C` itself rather than `T`, which keeps the
//! huge near-null eigenvalue of `T` out of the residuals. Unconverged runs
//! restart from the best `k + block` Ritz vectors.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{diagonal_scale, normalize_signs, residual_floor, EnvelopeCholesky, Spectrum};
use crate::error::{Error, Result};
use crate::operators::{MassMatrix, SparseOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub block_size: usize,
    pub max_restarts: usize,
    /// Target relative residual (see [`super::relative_residual`]).
    pub tolerance: f64,
    /// Shift is `−shift_factor · mean(L_ii / M_ii)`.
    pub shift_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            block_size: 8,
            max_restarts: 40,
            tolerance: 1e-9,
            shift_factor: 1e-8,
        }
    }
}

/// Residual level accepted when restarts run out.
const ACCEPTABLE_RESIDUAL: f64 = 1e-8;

struct ShiftInvert<'a> {
    chol: EnvelopeCholesky,
    sqrt_m: Vec<f64>,
    woodbury: Option<Woodbury<'a>>,
}

/// Pieces for `(S + μ F F^T)^{-1} = S^{-1} − G K^{-1} F^T S^{-1}`,
/// `G = S^{-1} F`, `K = I/μ + F^T G`.
struct Woodbury<'a> {
    factor: &'a DMatrix<f64>,
    g: DMatrix<f64>,
    k: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl ShiftInvert<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = v.iter().zip(&self.sqrt_m).map(|(x, s)| x * s).collect();
        self.chol.solve_in_place(&mut b);
        if let Some(w) = &self.woodbury {
            let t = w.factor.tr_mul(&DVector::from_column_slice(&b));
            let u = w.k.solve(&t);
            let corr = &w.g * u;
            for (bi, c) in b.iter_mut().zip(corr.iter()) {
                *bi -= c;
            }
        }
        for (bi, s) in b.iter_mut().zip(&self.sqrt_m) {
            *bi *= s;
        }
        b
    }

    fn apply_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(block.nrows(), block.ncols());
        for (j, col) in block.column_iter().enumerate() {
            let r = self.apply(col.as_slice());
            out.column_mut(j).copy_from_slice(&r);
        }
        out
    }
}

fn random_block(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

/// Orthonormalizes `block` against the first `cols` columns of `q` and
/// within itself. Dependent columns are replaced by random directions while
/// room remains.
fn orthonormalize(
    q: &DMatrix<f64>,
    cols: usize,
    block: DMatrix<f64>,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = q.nrows();
    let qv = q.columns(0, cols);
    let project = |v: &mut DVector<f64>, done: &[DVector<f64>]| {
        for _ in 0..2 {
            if cols > 0 {
                let c = qv.tr_mul(v);
                *v -= qv * c;
            }
            for u in done {
                let d = u.dot(v);
                v.axpy(-d, u, 1.0);
            }
        }
    };
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(block.ncols());
    for j in 0..block.ncols() {
        if cols + out.len() >= n {
            break;
        }
        let mut v = block.column(j).into_owned();
        let before = v.norm();
        project(&mut v, &out);
        let mut after = v.norm();
        let mut attempts = 0;
        while !(after > 1e-10 * before && after > 0.0) && attempts < 3 {
            v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let b = v.norm();
            project(&mut v, &out);
            after = v.norm();
            if after > 1e-10 * b {
                break;
            }
            attempts += 1;
        }
        if after > 0.0 && after.is_finite() {
            out.push(v / after);
        }
    }
    DMatrix::from_columns(&out)
}

/// The `k` smallest eigenpairs of `L φ = λ M φ`, ascending. Deterministic
/// for a given seed.
pub fn smallest_eigenpairs(
    op: &SparseOperator,
    mass: &MassMatrix,
    k: usize,
    want_vectors: bool,
    seed: u64,
) -> Result<Spectrum> {
    smallest_eigenpairs_with(op, mass, k, want_vectors, seed, &SolverOptions::default())
}

pub fn smallest_eigenpairs_with(
    op: &SparseOperator,
    mass: &MassMatrix,
    k: usize,
    want_vectors: bool,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Spectrum> {
    let n = op.dim();
    if mass.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mass.dim(),
        });
    }
    if k > n {
        return Err(Error::TooManyEigenpairs { k, n });
    }
    if k == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: want_vectors.then(|| DMatrix::zeros(n, 0)),
        });
    }

    let floor = residual_floor(op, mass);
    let shift = -opts.shift_factor * diagonal_scale(op, mass);
    let shifted = op.matrix.add_diagonal(-shift, mass.diag());
    let chol = EnvelopeCholesky::new(&shifted)?;
    let sqrt_m: Vec<f64> = mass.diag().iter().map(|m| m.sqrt()).collect();
    let inv_sqrt_m: Vec<f64> = sqrt_m.iter().map(|s| 1.0 / s).collect();
    let woodbury = match &op.low_rank {
        Some(lr) if lr.weight > 0.0 && lr.factor.ncols() > 0 => {
            let mut g = lr.factor.clone();
            for mut col in g.column_iter_mut() {
                chol.solve_in_place(col.as_mut_slice());
            }
            let b = lr.factor.ncols();
            let kmat = DMatrix::identity(b, b) / lr.weight + lr.factor.tr_mul(&g);
            let k = nalgebra::Cholesky::new(0.5 * (&kmat + kmat.transpose()))
                .ok_or(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
            Some(Woodbury {
                factor: &lr.factor,
                g,
                k,
            })
        }
        _ => None,
    };
    let t = ShiftInvert {
        chol,
        sqrt_m: sqrt_m.clone(),
        woodbury,
    };
    let apply_c = |y: &[f64]| -> Vec<f64> {
        let psi: Vec<f64> = y.iter().zip(&inv_sqrt_m).map(|(a, b)| a * b).collect();
        op.apply(&psi)
            .iter()
            .zip(&inv_sqrt_m)
            .map(|(a, b)| a * b)
            .collect()
    };

    // wide enough to hold the near-degenerate clusters of symmetric shapes
    let p = opts.block_size.max(k.div_ceil(2)).clamp(1, n);
    let m_max = n.min((2 * k + 2 * p).max(k + 4 * p));
    let keep = (k + p).min(m_max.saturating_sub(p)).max(k.min(m_max));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained = DMatrix::<f64>::zeros(n, 0);
    let mut start = random_block(n, p, &mut rng);
    let mut worst = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        let mut q = DMatrix::<f64>::zeros(n, m_max);
        let mut cols = retained.ncols();
        q.columns_mut(0, cols).copy_from(&retained);
        let mut block = orthonormalize(&q, cols, start.clone(), &mut rng);
        while cols < m_max && block.ncols() > 0 {
            let b = block.ncols().min(m_max - cols);
            q.columns_mut(cols, b).copy_from(&block.columns(0, b));
            cols += b;
            if cols >= m_max {
                break;
            }
            let next = t.apply_block(&block.columns(0, b).into_owned());
            block = orthonormalize(&q, cols, next, &mut rng);
            if block.ncols() == 0 {
                block = orthonormalize(&q, cols, random_block(n, p, &mut rng), &mut rng);
            }
        }
        let qv = q.columns(0, cols).into_owned();
        let mut cq = DMatrix::<f64>::zeros(n, cols);
        for j in 0..cols {
            let c = apply_c(qv.column(j).as_slice());
            cq.column_mut(j).copy_from_slice(&c);
        }
        let h = qv.tr_mul(&cq);
        let h = 0.5 * (&h + h.transpose());
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let r = keep.min(cols);
        let s = DMatrix::from_fn(cols, r, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order[..r].iter().map(|&i| eig.eigenvalues[i]).collect();
        let y = &qv * &s;
        let cy = &cq * &s;

        let mut residuals = Vec::with_capacity(k);
        for i in 0..k.min(r) {
            let (mut rr, mut ll, mut mm) = (0.0, 0.0, 0.0);
            for row in 0..n {
                let sm = sqrt_m[row];
                let yv = y[(row, i)];
                let cv = cy[(row, i)];
                rr += (sm * (cv - theta[i] * yv)).powi(2);
                ll += (sm * cv).powi(2);
                mm += (sm * yv).powi(2);
            }
            residuals.push(rr.sqrt() / ll.sqrt().max(floor * mm.sqrt()));
        }
        worst = residuals.iter().copied().fold(0.0, f64::max);
        debug!("restart {restart}: {cols} basis vectors, worst residual {worst:e}");
        let exact = cols == n;
        let accept = worst <= opts.tolerance
            || exact
            || (restart == opts.max_restarts && worst <= ACCEPTABLE_RESIDUAL);
        if accept && r >= k {
            if restart == opts.max_restarts && worst > opts.tolerance && !exact {
                warn!("eigensolver stopped at residual {worst:e} after {restart} restarts");
            }
            let eigenvalues = theta[..k].to_vec();
            let eigenvectors = want_vectors.then(|| {
                let mut v = DMatrix::from_fn(n, k, |i, j| y[(i, j)] * inv_sqrt_m[i]);
                normalize_signs(&mut v);
                v
            });
            return Ok(Spectrum {
                eigenvalues,
                eigenvectors,
            });
        }

        // restart from the retained Ritz vectors, expanding from the first
        // unconverged ones
        let first_bad = residuals
            .iter()
            .position(|&x| x > opts.tolerance)
            .unwrap_or(0);
        let cols_from = first_bad.min(r.saturating_sub(1));
        let take = p.min(r - cols_from);
        start = t.apply_block(&y.columns(cols_from, take).into_owned());
        let empty = DMatrix::<f64>::zeros(n, 0);
        retained = orthonormalize(&empty, 0, y, &mut rng);
    }
    Err(Error::NoConvergence {
        restarts: opts.max_restarts,
        residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{dense_eigen_oracle, mass_orthonormality_error, relative_residual};
    use crate::geom::primitives::icosphere;
    use crate::operators::cotan_laplacian;
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_pair() {
        let op = SparseOperator::new(CsrMatrix::from_diagonal(&[1.0, 1.0]));
        let s = smallest_eigenpairs(&op, &MassMatrix::identity(2), 2, true, 0).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_pairs() {
        let op = SparseOperator::new(CsrMatrix::from_diagonal(&[1.0, 2.0]));
        assert!(matches!(
            smallest_eigenpairs(&op, &MassMatrix::identity(2), 3, false, 0),
            Err(Error::TooManyEigenpairs { k: 3, n: 2 })
        ));
    }

    #[test]
    fn sphere_matches_oracle_with_residuals() {
        let mesh = icosphere(2);
        let (l, m) = cotan_laplacian(&mesh).unwrap();
        let s = smallest_eigenpairs(&l, &m, 20, true, 1).unwrap();
        let d = dense_eigen_oracle(&l, &m).unwrap();
        let top = s.eigenvalues[19];
        for (a, b) in s.eigenvalues.iter().zip(&d.eigenvalues) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3 * top), "{a} vs {b}");
        }
        assert!(s.eigenvalues[0] < 1e-8 * s.eigenvalues[1]);
        let v = s.eigenvectors.as_ref().unwrap();
        assert!(mass_orthonormality_error(v, &m) < 1e-8);
        for i in 0..20 {
            let r = relative_residual(&l, &m, s.eigenvalues[i], v.column(i).as_slice());
            assert!(r < 1e-8, "pair {i}: residual {r:e}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (l, m) = cotan_laplacian(&icosphere(2)).unwrap();
        let a = smallest_eigenpairs(&l, &m, 10, true, 5).unwrap();
        let b = smallest_eigenpairs(&l, &m, 10, true, 5).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }
}
