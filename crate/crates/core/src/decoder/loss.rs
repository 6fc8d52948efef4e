//! Reconstruction losses and their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{dist2, Point};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Frobenius,
    Chamfer,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(Self::Frobenius),
            "chamfer" => Ok(Self::Chamfer),
            other => Err(invalid(format!("unknown loss `{other}`"))),
        }
    }
}

/// `‖pred − target‖²_F`.
pub fn loss_frobenius(pred: &[Point], target: &[Point]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    Ok(pred.iter().zip(target).map(|(p, t)| dist2(p, t)).sum())
}

/// For each point of `from`, the index of its nearest point in `to` (lowest
/// index on ties).
fn nearest(from: &[Point], to: &[Point]) -> Vec<(usize, f64)> {
    from.iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, q) in to.iter().enumerate() {
                let d = dist2(p, q);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

/// Mean squared nearest-neighbour distance from `pred` to `target` plus the
/// symmetric term.
pub fn loss_chamfer(pred: &[Point], target: &[Point]) -> Result<f64> {
    Ok(chamfer_with_grad(pred, target)?.0)
}

/// Chamfer loss and its gradient with respect to `pred`.
pub fn chamfer_with_grad(pred: &[Point], target: &[Point]) -> Result<(f64, Vec<Point>)> {
    if pred.is_empty() || target.is_empty() {
        return Err(invalid("chamfer distance needs non-empty point sets"));
    }
    let (n, m) = (pred.len() as f64, target.len() as f64);
    let forward = nearest(pred, target);
    let backward = nearest(target, pred);
    let mut grad = vec![[0.0; 3]; pred.len()];
    let mut a = 0.0;
    for (i, &(j, d)) in forward.iter().enumerate() {
        a += d;
        for c in 0..3 {
            grad[i][c] += 2.0 * (pred[i][c] - target[j][c]) / n;
        }
    }
    let mut b = 0.0;
    for (j, &(i, d)) in backward.iter().enumerate() {
        b += d;
        for c in 0..3 {
            grad[i][c] += 2.0 * (pred[i][c] - target[j][c]) / m;
        }
    }
    Ok((a / n + b / m, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect()
    }

    #[test]
    fn frobenius_cases() {
        let t = vec![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]];
        assert_eq!(loss_frobenius(&t, &t).unwrap(), 0.0);
        let mut p = t.clone();
        p[1][0] += 1.0;
        assert_eq!(loss_frobenius(&p, &t).unwrap(), 1.0);
        assert!(loss_frobenius(&p[..1], &t).is_err());
    }

    #[test]
    fn chamfer_cases() {
        let t = vec![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]];
        assert_eq!(loss_chamfer(&t, &t).unwrap(), 0.0);
        let d = 0.7;
        assert!((loss_chamfer(&[[0.0; 3]], &[[0.0, d, 0.0]]).unwrap() - 2.0 * d * d).abs() < 1e-15);
        assert!(loss_chamfer(&[], &t).is_err());
    }

    #[test]
    fn chamfer_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = cloud(&mut rng, 12);
        let t = cloud(&mut rng, 9);
        let (_, g) = chamfer_with_grad(&p, &t).unwrap();
        let h = 1e-7;
        for i in 0..p.len() {
            for c in 0..3 {
                let mut up = p.clone();
                up[i][c] += h;
                let mut down = p.clone();
                down[i][c] -= h;
                let num = (loss_chamfer(&up, &t).unwrap() - loss_chamfer(&down, &t).unwrap()) / (2.0 * h);
                assert!((num - g[i][c]).abs() < 1e-6, "{num} vs {}", g[i][c]);
            }
        }
    }

    proptest! {
        #[test]
        fn chamfer_symmetric_and_zero_only_on_equal_sets(seed in 0u64..1000, n in 1usize..8, m in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = cloud(&mut rng, n);
            let b = cloud(&mut rng, m);
            let ab = loss_chamfer(&a, &b).unwrap();
            prop_assert!((ab - loss_chamfer(&b, &a).unwrap()).abs() < 1e-14);
            prop_assert!(ab > 0.0);
            let mut shuffled = a.clone();
            shuffled.reverse();
            prop_assert_eq!(loss_chamfer(&a, &shuffled).unwrap(), 0.0);
        }
    }
}
