//! Truncated spectra of symmetric-definite pairs `L φ = λ M φ`.

mod cholesky;
mod krylov;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use cholesky::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use krylov::{smallest_eigenpairs, SolverOptions};

use crate::error::{Error, Result};
use crate::operators::{MassMatrix, SparseOperator};

/// Ascending eigenvalues, optionally with mass-orthonormal eigenvectors as
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Option<DMatrix<f64>>,
}

impl Spectrum {
    pub fn from_values(eigenvalues: Vec<f64>) -> Self {
        Self {
            eigenvalues,
            eigenvectors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// First `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors.as_ref().map(|v| v.columns(0, k).into_owned()),
        }
    }

    /// JSON array of the eigenvalues at full precision.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.eigenvalues).expect("floats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::from_values(serde_json::from_str(text)?))
    }
}

/// Flips each column so that its first entry of significant magnitude is
/// positive.
pub(crate) fn normalize_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * scale).copied() {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Largest problem [`dense_eigen_oracle`] accepts.
pub const DENSE_LIMIT: usize = 2000;

/// Full spectrum by dense reduction `M^{-1/2} L M^{-1/2}` and a symmetric
/// eigendecomposition. Reference implementation for tests.
pub fn dense_eigen_oracle(op: &SparseOperator, mass: &MassMatrix) -> Result<Spectrum> {
    let n = op.dim();
    if n > DENSE_LIMIT {
        return Err(Error::DenseGuard {
            n,
            limit: DENSE_LIMIT,
        });
    }
    if mass.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mass.dim(),
        });
    }
    let inv_sqrt: Vec<f64> = mass.diag().iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut c = op.to_dense();
    for j in 0..n {
        for i in 0..n {
            c[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])] * inv_sqrt[i]);
    normalize_signs(&mut vectors);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(vectors),
    })
}

/// `‖Lψ − λMψ‖ / max(‖Lψ‖, floor · ‖Mψ‖)` where `floor` is `1e-4` times
/// the mean diagonal ratio `L_ii / M_ii`. The floor only matters for the
/// near-null modes of closed shapes, whose `‖Lψ‖` is pure rounding.
pub fn relative_residual(op: &SparseOperator, mass: &MassMatrix, value: f64, vector: &[f64]) -> f64 {
    let lv = op.apply(vector);
    let mv: Vec<f64> = vector.iter().zip(mass.diag()).map(|(x, m)| x * m).collect();
    let r = lv
        .iter()
        .zip(&mv)
        .map(|(a, b)| (a - value * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let lnorm = lv.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mnorm = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
    r / lnorm.max(residual_floor(op, mass) * mnorm)
}

pub(crate) fn residual_floor(op: &SparseOperator, mass: &MassMatrix) -> f64 {
    1e-4 * diagonal_scale(op, mass)
}

/// Mean of `|L_ii| / M_ii`.
pub(crate) fn diagonal_scale(op: &SparseOperator, mass: &MassMatrix) -> f64 {
    let n = op.dim().max(1);
    let diag = op.matrix.diagonal();
    let trace_scale = diag
        .iter()
        .zip(mass.diag())
        .map(|(l, m)| l.abs() / m)
        .sum::<f64>()
        / n as f64;
    trace_scale.max(f64::MIN_POSITIVE)
}

/// `max |ψ_i^T M ψ_j − δ_ij|`.
pub fn mass_orthonormality_error(vectors: &DMatrix<f64>, mass: &MassMatrix) -> f64 {
    let mv = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
        vectors[(i, j)] * mass.diag()[i]
    });
    let g = vectors.transpose() * mv;
    (g - DMatrix::identity(vectors.ncols(), vectors.ncols())).amax()
}
