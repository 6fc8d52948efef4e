use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dist2, Point};
use crate::error::{invalid, Result};

/// Farthest-point sampling: the seed picks the first index, every further
/// pick maximises the Euclidean distance to the points already chosen
/// (ties resolved towards the lower index).
pub fn farthest_point_sample(points: &[Point], count: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if count > n {
        return Err(invalid(format!("cannot sample {count} of {n} points")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = Vec::with_capacity(count);
    chosen.push(first);
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while chosen.len() < count {
        let (next, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, &points[next]);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_points_is_permutation() {
        let pts: Vec<Point> = (0..17).map(|i| [i as f64 * 0.3, (i * i) as f64, 0.0]).collect();
        let mut s = farthest_point_sample(&pts, pts.len(), 3).unwrap();
        s.sort_unstable();
        assert_eq!(s, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn segment_extremes() {
        let pts: Vec<Point> = (0..11).map(|i| [i as f64, 0.0, 0.0]).collect();
        for seed in 0..20 {
            let s = farthest_point_sample(&pts, 2, seed).unwrap();
            let start = s[0];
            let expected = if start >= 5 { 0 } else { 10 };
            assert_eq!(s[1], expected, "start {start}");
        }
    }

    #[test]
    fn deterministic_and_count_checked() {
        let pts: Vec<Point> = (0..30).map(|i| [(i as f64).sin(), (i as f64).cos(), i as f64]).collect();
        assert_eq!(
            farthest_point_sample(&pts, 10, 42).unwrap(),
            farthest_point_sample(&pts, 10, 42).unwrap()
        );
        assert!(farthest_point_sample(&pts, 31, 0).is_err());
    }
}
