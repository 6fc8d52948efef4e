//! Reconstruction error measures and the nearest-encoding baseline.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use log::warn;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::SpectralEncoding;
use crate::error::{invalid, Error, Result};
use crate::geom::{dist2, farthest_point_sample, Mesh, Point, Region};

/// Which vertices a measure averages over.
#[derive(Clone, Copy, Debug)]
pub enum Selection<'a> {
    All,
    Region(&'a Region),
    Complement(&'a Region),
}

impl Selection<'_> {
    fn indices(&self, n: usize) -> Vec<usize> {
        match self {
            Selection::All => (0..n).collect(),
            Selection::Region(r) => r.indices().to_vec(),
            Selection::Complement(r) => r.complement_indices(n),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            Selection::Region(r) | Selection::Complement(r) => match r.indices().last() {
                Some(&last) if last >= n => Err(Error::IndexOutOfRange { index: last, len: n }),
                _ => Ok(()),
            },
            Selection::All => Ok(()),
        }
    }
}

fn same_count(pred: usize, gt: usize) -> Result<()> {
    if pred != gt {
        return Err(Error::DimensionMismatch {
            expected: gt,
            got: pred,
        });
    }
    Ok(())
}

fn same_connectivity(pred: &Mesh, gt: &Mesh) -> Result<()> {
    same_count(pred.n_vertices(), gt.n_vertices())?;
    if pred.faces() != gt.faces() {
        return Err(invalid("meshes do not share connectivity"));
    }
    Ok(())
}

/// Mean squared displacement over the selected vertices.
pub fn mse(pred: &[Point], gt: &[Point], sel: Selection) -> Result<f64> {
    same_count(pred.len(), gt.len())?;
    sel.check(gt.len())?;
    let idx = sel.indices(gt.len());
    if idx.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(idx.iter().map(|&i| dist2(&pred[i], &gt[i])).sum::<f64>() / idx.len() as f64)
}

/// Mean absolute difference of per-vertex barycentric areas.
pub fn area_error(pred: &Mesh, gt: &Mesh, sel: Selection) -> Result<f64> {
    same_connectivity(pred, gt)?;
    sel.check(gt.n_vertices())?;
    let idx = sel.indices(gt.n_vertices());
    if idx.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (ap, ag) = (pred.vertex_areas(), gt.vertex_areas());
    Ok(idx.iter().map(|&i| (ap[i] - ag[i]).abs()).sum::<f64>() / idx.len() as f64)
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest edge-path lengths from `source`; unreachable vertices are
/// infinite.
pub fn graph_distances(points: &[Point], adjacency: &[Vec<usize>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &w in &adjacency[v] {
            let nd = d + dist2(&points[v], &points[w]).sqrt();
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub mean: f64,
    /// Sample-vertex pairs skipped because one mesh had no path.
    pub excluded_pairs: usize,
}

/// Mean `|d_pred(s, v) − d_gt(s, v)|` over samples `s` and selected `v`,
/// with edge-graph distances.
pub fn metric_distortion(pred: &Mesh, gt: &Mesh, samples: &[usize], sel: Selection) -> Result<Distortion> {
    same_connectivity(pred, gt)?;
    sel.check(gt.n_vertices())?;
    let n = gt.n_vertices();
    if samples.is_empty() {
        return Err(invalid("metric distortion needs at least one sample"));
    }
    if let Some(&bad) = samples.iter().find(|&&s| s >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let targets = sel.indices(n);
    if targets.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let adj = gt.adjacency();
    let per_sample: Vec<(f64, usize, usize)> = samples
        .par_iter()
        .map(|&s| {
            let dp = graph_distances(pred.vertices(), &adj, s);
            let dg = graph_distances(gt.vertices(), &adj, s);
            let (mut sum, mut used, mut skipped) = (0.0, 0, 0);
            for &v in &targets {
                if dp[v].is_finite() && dg[v].is_finite() {
                    sum += (dp[v] - dg[v]).abs();
                    used += 1;
                } else {
                    skipped += 1;
                }
            }
            (sum, used, skipped)
        })
        .collect();
    let (sum, used, skipped) = per_sample
        .iter()
        .fold((0.0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if skipped > 0 {
        warn!("metric distortion: {skipped} unreachable sample-vertex pairs excluded");
    }
    Ok(Distortion {
        mean: if used > 0 { sum / used as f64 } else { 0.0 },
        excluded_pairs: skipped,
    })
}

/// The rotation `R` and translation `t` minimising `Σ ‖R p + t − q‖²`
/// over proper rotations.
pub fn procrustes(p: &[Point], q: &[Point]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = p.len() as f64;
    let centroid = |pts: &[Point]| pts.iter().fold(Vector3::zeros(), |a, x| a + Vector3::from(*x)) / n;
    let (cp, cq) = (centroid(p), centroid(q));
    let mut h = Matrix3::zeros();
    for (a, b) in p.iter().zip(q) {
        h += (Vector3::from(*a) - cp) * (Vector3::from(*b) - cq).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    (r, cq - r * cp)
}

/// Region MSE after the best rigid alignment of the predicted patch onto the
/// ground-truth patch.
pub fn align_error(pred: &[Point], gt: &[Point], region: &Region) -> Result<f64> {
    same_count(pred.len(), gt.len())?;
    Selection::Region(region).check(gt.len())?;
    if region.len() < 3 {
        return Err(invalid(format!(
            "alignment needs at least 3 region vertices, got {}",
            region.len()
        )));
    }
    let p: Vec<Point> = region.indices().iter().map(|&i| pred[i]).collect();
    let q: Vec<Point> = region.indices().iter().map(|&i| gt[i]).collect();
    let (r, t) = procrustes(&p, &q);
    let moved: Vec<Point> = p
        .iter()
        .map(|x| {
            let y = r * Vector3::from(*x) + t;
            [y.x, y.y, y.z]
        })
        .collect();
    mse(&moved, &q, Selection::All)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnnResult {
    /// Mean MSE of the nearest training shape against each test ground truth.
    pub enn: f64,
    /// Percentage of test items where the model beats the baseline.
    pub em_lt_enn: f64,
    /// Training index chosen for each test item.
    pub nearest: Vec<usize>,
    pub baseline_mse: Vec<f64>,
}

/// Nearest training encoding (Euclidean) for each test encoding; ties go to
/// the training shape with the smallest MSE so the result does not depend on
/// training-set order.
pub fn enn_baseline(
    test_encodings: &[&SpectralEncoding],
    train_encodings: &[&SpectralEncoding],
    train_shapes: &[&[Point]],
    gt_shapes: &[&[Point]],
    model_mse: &[f64],
) -> Result<EnnResult> {
    if train_encodings.is_empty() {
        return Err(invalid("nearest-neighbour baseline needs a training set"));
    }
    same_count(train_shapes.len(), train_encodings.len())?;
    same_count(gt_shapes.len(), test_encodings.len())?;
    same_count(model_mse.len(), test_encodings.len())?;
    let layout = &train_encodings[0].layout;
    if train_encodings
        .iter()
        .chain(test_encodings)
        .any(|e| &e.layout != layout)
    {
        return Err(Error::LayoutMismatch);
    }
    let results: Vec<Result<(usize, f64)>> = test_encodings
        .par_iter()
        .zip(gt_shapes.par_iter())
        .map(|(te, gt)| {
            let mut best: Option<(f64, f64, usize)> = None;
            for (j, tr) in train_encodings.iter().enumerate() {
                let d: f64 = te.values.iter().zip(&tr.values).map(|(a, b)| (a - b) * (a - b)).sum();
                let closer = match best {
                    None => true,
                    Some((bd, _, _)) => d < bd,
                };
                let tied = matches!(best, Some((bd, _, _)) if d == bd);
                if closer || tied {
                    let e = mse(train_shapes[j], gt, Selection::All)?;
                    if closer || e < best.expect("tied implies some").1 {
                        best = Some((d, e, j));
                    }
                }
            }
            let (_, e, j) = best.expect("non-empty training set");
            Ok((j, e))
        })
        .collect();
    let mut nearest = Vec::with_capacity(results.len());
    let mut baseline = Vec::with_capacity(results.len());
    for r in results {
        let (j, e) = r?;
        nearest.push(j);
        baseline.push(e);
    }
    let count = baseline.len().max(1) as f64;
    let wins = model_mse.iter().zip(&baseline).filter(|(m, b)| m < b).count();
    Ok(EnnResult {
        enn: baseline.iter().sum::<f64>() / count,
        em_lt_enn: 100.0 * wins as f64 / count,
        nearest,
        baseline_mse: baseline,
    })
}

/// Dataset-level averages. Raw values are unscaled; `scaling` records the
/// factor each column is multiplied by when displayed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub mse: f64,
    pub mse_region: Option<f64>,
    pub mse_region_complement: Option<f64>,
    pub area: Option<f64>,
    pub area_region: Option<f64>,
    pub metric: Option<f64>,
    pub metric_region: Option<f64>,
    pub align: Option<f64>,
    pub enn: Option<f64>,
    pub em_lt_enn: Option<f64>,
    pub metric_excluded_pairs: usize,
    pub scaling: BTreeMap<String, f64>,
}

pub fn default_scaling() -> BTreeMap<String, f64> {
    [
        ("mse", 1e6),
        ("mse_region", 1e6),
        ("mse_region_complement", 1e6),
        ("area", 1e3),
        ("area_region", 1e3),
        ("metric", 1e2),
        ("metric_region", 1e2),
        ("align", 1e6),
        ("enn", 1e6),
        ("em_lt_enn", 1.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Geodesic sources per shape; 0 skips the metric columns.
    pub metric_samples: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            metric_samples: 100,
            seed: 0,
        }
    }
}

/// Per-shape measures averaged over the test set.
///
/// `regions` (one per shape) enables the region columns; `baseline` adds
/// ENN and EM<ENN.
pub fn evaluate(
    preds: &[Mesh],
    gts: &[Mesh],
    regions: Option<&[&Region]>,
    baseline: Option<&EnnResult>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    same_count(preds.len(), gts.len())?;
    if preds.is_empty() {
        return Err(invalid("nothing to evaluate"));
    }
    if let Some(r) = regions {
        same_count(r.len(), gts.len())?;
    }
    let count = preds.len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut cols: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut excluded = 0;
    for (k, (p, g)) in preds.iter().zip(gts).enumerate() {
        let region = regions.map(|r| r[k]);
        cols.entry("mse").or_default().push(mse(p.vertices(), g.vertices(), Selection::All)?);
        cols.entry("area").or_default().push(area_error(p, g, Selection::All)?);
        if let Some(r) = region {
            cols.entry("mse_region")
                .or_default()
                .push(mse(p.vertices(), g.vertices(), Selection::Region(r))?);
            if r.len() < g.n_vertices() {
                cols.entry("mse_region_complement")
                    .or_default()
                    .push(mse(p.vertices(), g.vertices(), Selection::Complement(r))?);
            }
            cols.entry("area_region")
                .or_default()
                .push(area_error(p, g, Selection::Region(r))?);
            cols.entry("align")
                .or_default()
                .push(align_error(p.vertices(), g.vertices(), r)?);
        }
        if opts.metric_samples > 0 {
            let samples = farthest_point_sample(
                g.vertices(),
                opts.metric_samples.min(g.n_vertices()),
                opts.seed,
            )?;
            let d = metric_distortion(p, g, &samples, Selection::All)?;
            excluded += d.excluded_pairs;
            cols.entry("metric").or_default().push(d.mean);
            if let Some(r) = region {
                let d = metric_distortion(p, g, &samples, Selection::Region(r))?;
                cols.entry("metric_region").or_default().push(d.mean);
            }
        }
    }
    let get = |k: &str| cols.get(k).map(|v| mean(v));
    Ok(EvalReport {
        count,
        mse: get("mse").expect("always computed"),
        mse_region: get("mse_region"),
        mse_region_complement: get("mse_region_complement"),
        area: get("area"),
        area_region: get("area_region"),
        metric: get("metric"),
        metric_region: get("metric_region"),
        align: get("align"),
        enn: baseline.map(|b| b.enn),
        em_lt_enn: baseline.map(|b| b.em_lt_enn),
        metric_excluded_pairs: excluded,
        scaling: default_scaling(),
    })
}

impl EvalReport {
    fn columns(&self) -> Vec<(&'static str, &'static str, Option<f64>)> {
        vec![
            ("mse", "MSE", Some(self.mse)),
            ("mse_region", "MSE-R", self.mse_region),
            ("mse_region_complement", "MSE-Rc", self.mse_region_complement),
            ("area", "Area", self.area),
            ("area_region", "Area-R", self.area_region),
            ("metric", "Metric", self.metric),
            ("metric_region", "Metric-R", self.metric_region),
            ("align", "Align", self.align),
            ("enn", "ENN", self.enn),
            ("em_lt_enn", "EM<ENN", self.em_lt_enn),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned two-row table of scaled values; the header shows each scale.
    pub fn to_table(&self) -> String {
        let cells: Vec<(String, String)> = self
            .columns()
            .into_iter()
            .filter_map(|(key, name, v)| {
                let v = v?;
                let s = self.scaling.get(key).copied().unwrap_or(1.0);
                let head = if key == "em_lt_enn" {
                    format!("{name} (%)")
                } else if s == 1.0 {
                    name.to_string()
                } else {
                    format!("{name} (x1e-{})", s.log10().round() as i32)
                };
                Some((head, format!("{:.3}", v * s)))
            })
            .collect();
        let mut head = String::new();
        let mut row = String::new();
        for (h, v) in &cells {
            let w = h.len().max(v.len());
            write!(head, "{h:>w$}  ").expect("write to string");
            write!(row, "{v:>w$}  ").expect("write to string");
        }
        format!("{}\n{}\n", head.trim_end(), row.trim_end())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::primitives::{grid, icosphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation(a: f64, b: f64) -> Matrix3<f64> {
        let rz = Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, b.cos(), -b.sin(), 0.0, b.sin(), b.cos());
        rz * rx
    }

    fn rigid(m: &Mesh) -> Mesh {
        let r = rotation(0.7, -0.4);
        m.transformed(|p| {
            let y = r * Vector3::from(*p) + Vector3::new(0.3, -1.0, 2.0);
            [y.x, y.y, y.z]
        })
    }

    fn jitter(m: &Mesh, seed: u64, amount: f64) -> Mesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point> = m
            .vertices()
            .iter()
            .map(|p| p.map(|c| c + rng.random_range(-amount..amount)))
            .collect();
        Mesh::new(pts, m.faces().to_vec()).unwrap()
    }

    #[test]
    fn mse_cases() {
        let g = grid(4, 4, 1.0, 1.0);
        assert_eq!(mse(g.vertices(), g.vertices(), Selection::All).unwrap(), 0.0);
        let moved = g.transformed(|p| [p[0] + 1e-3, p[1], p[2]]);
        assert!((mse(moved.vertices(), g.vertices(), Selection::All).unwrap() - 1e-6).abs() < 1e-18);
        assert!(mse(&g.vertices()[1..], g.vertices(), Selection::All).is_err());
    }

    #[test]
    fn region_and_complement_combine() {
        let g = icosphere(2);
        let p = jitter(&g, 1, 0.05);
        let r = Region::new("R", (0..40).collect(), g.n_vertices()).unwrap();
        let full = mse(p.vertices(), g.vertices(), Selection::All).unwrap();
        let a = mse(p.vertices(), g.vertices(), Selection::Region(&r)).unwrap();
        let b = mse(p.vertices(), g.vertices(), Selection::Complement(&r)).unwrap();
        let n = g.n_vertices() as f64;
        assert!((full - (40.0 * a + (n - 40.0) * b) / n).abs() < 1e-12);
    }

    #[test]
    fn area_matches_naive_oracle_and_scaling_law() {
        let g = jitter(&icosphere(1), 2, 0.05);
        let p = jitter(&g, 3, 0.05);
        let area = |m: &Mesh, v: usize| -> f64 {
            let mut a = 0.0;
            for f in m.faces() {
                if f.contains(&v) {
                    let [x, y, z] = f.map(|i| Vector3::from(m.vertices()[i]));
                    a += (y - x).cross(&(z - x)).norm() / 6.0;
                }
            }
            a
        };
        let n = g.n_vertices();
        let oracle = (0..n).map(|v| (area(&p, v) - area(&g, v)).abs()).sum::<f64>() / n as f64;
        assert!((area_error(&p, &g, Selection::All).unwrap() - oracle).abs() < 1e-12);

        let flat = grid(6, 6, 1.0, 1.0);
        let s = 1.5;
        let scaled = flat.transformed(|q| q.map(|c| c * s));
        let expected = (s * s - 1.0) * flat.vertex_areas().iter().sum::<f64>() / flat.n_vertices() as f64;
        assert!((area_error(&scaled, &flat, Selection::All).unwrap() - expected).abs() < 1e-12);
        assert_eq!(area_error(&flat, &flat, Selection::All).unwrap(), 0.0);
    }

    #[test]
    fn distances_on_a_chain_are_arc_length() {
        // strip of triangles along x; bottom row vertices 0..=n
        let g = grid(8, 1, 4.0, 0.5);
        let d = graph_distances(g.vertices(), &g.adjacency(), 0);
        for (i, v) in d.iter().enumerate().take(9) {
            assert!((v - 0.5 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn distortion_scaling_and_invariance() {
        let g = icosphere(2);
        let samples = farthest_point_sample(g.vertices(), 10, 0).unwrap();
        assert_eq!(metric_distortion(&g, &g, &samples, Selection::All).unwrap().mean, 0.0);
        let s = 1.3;
        let scaled = g.transformed(|p| p.map(|c| c * s));
        let adj = g.adjacency();
        let mut total = 0.0;
        for &src in &samples {
            total += graph_distances(g.vertices(), &adj, src).iter().sum::<f64>();
        }
        let mean_d = total / (samples.len() * g.n_vertices()) as f64;
        let d = metric_distortion(&scaled, &g, &samples, Selection::All).unwrap();
        assert!((d.mean - (s - 1.0) * mean_d).abs() < 1e-12);

        let p = jitter(&g, 5, 0.03);
        let before = metric_distortion(&p, &g, &samples, Selection::All).unwrap().mean;
        let after = metric_distortion(&rigid(&p), &rigid(&g), &samples, Selection::All).unwrap().mean;
        assert!((before - after).abs() < 1e-9);
        let a1 = area_error(&p, &g, Selection::All).unwrap();
        let a2 = area_error(&rigid(&p), &rigid(&g), Selection::All).unwrap();
        assert!((a1 - a2).abs() < 1e-9);
    }

    #[test]
    fn disconnected_pairs_are_excluded() {
        let m = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [5.0, 0.0, 0.0],
                [6.0, 0.0, 0.0],
                [5.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let d = metric_distortion(&m, &m, &[0], Selection::All).unwrap();
        assert_eq!(d.excluded_pairs, 3);
        assert_eq!(d.mean, 0.0);
    }

    #[test]
    fn alignment_cases() {
        let g = jitter(&icosphere(2), 6, 0.05);
        let r = Region::new("R", (0..60).collect(), g.n_vertices()).unwrap();
        assert!(align_error(g.vertices(), g.vertices(), &r).unwrap() < 1e-20);
        assert!(align_error(rigid(&g).vertices(), g.vertices(), &r).unwrap() < 1e-10);
        let tiny = Region::new("t", vec![0, 1], g.n_vertices()).unwrap();
        assert!(align_error(g.vertices(), g.vertices(), &tiny).is_err());
    }

    #[test]
    fn procrustes_beats_rotation_grid() {
        let g = jitter(&icosphere(1), 7, 0.1);
        let p = jitter(&rigid(&g), 8, 0.1);
        let r = Region::new("R", (0..30).collect(), g.n_vertices()).unwrap();
        let value = align_error(p.vertices(), g.vertices(), &r).unwrap();
        let q: Vec<Point> = r.indices().iter().map(|&i| g.vertices()[i]).collect();
        let src: Vec<Point> = r.indices().iter().map(|&i| p.vertices()[i]).collect();
        let center = |pts: &[Point]| pts.iter().fold(Vector3::zeros(), |a, x| a + Vector3::from(*x)) / pts.len() as f64;
        let (cs, cq) = (center(&src), center(&q));
        let mut best = f64::INFINITY;
        let steps = 24;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let ang = |s: usize| 2.0 * std::f64::consts::PI * s as f64 / steps as f64;
                    let rot = nalgebra::Rotation3::from_euler_angles(ang(i), ang(j) / 2.0, ang(k)).into_inner();
                    let e = src
                        .iter()
                        .zip(&q)
                        .map(|(a, b)| (rot * (Vector3::from(*a) - cs) + cq - Vector3::from(*b)).norm_squared())
                        .sum::<f64>()
                        / q.len() as f64;
                    best = best.min(e);
                }
            }
        }
        assert!(value <= best + 1e-12, "{value} vs grid {best}");
    }

    #[test]
    fn enn_picks_exact_match_and_ignores_order() {
        use crate::eigen::Spectrum;
        use crate::encoding::build_encoding;
        let enc = |s: f64| build_encoding(&Spectrum::from_values(vec![0.0, s, 2.0 * s + 1.0]), &[]).unwrap();
        let shape = |s: f64| vec![[s, 0.0, 0.0], [0.0, s, 0.0]];
        let train_e: Vec<SpectralEncoding> = [1.0, 2.0, 3.0].map(enc).to_vec();
        let train_s: Vec<Vec<Point>> = [1.0, 2.0, 3.0].map(shape).to_vec();
        let test_e = [enc(2.0), enc(2.9)];
        let test_s = [shape(2.0), shape(2.9)];
        let run = |order: &[usize]| {
            let te: Vec<&SpectralEncoding> = order.iter().map(|&i| &train_e[i]).collect();
            let ts: Vec<&[Point]> = order.iter().map(|&i| train_s[i].as_slice()).collect();
            enn_baseline(
                &test_e.iter().collect::<Vec<_>>(),
                &te,
                &ts,
                &test_s.iter().map(|s| s.as_slice()).collect::<Vec<_>>(),
                &[0.5, 0.0],
            )
            .unwrap()
        };
        let a = run(&[0, 1, 2]);
        assert_eq!(a.baseline_mse[0], 0.0);
        assert_eq!(a.nearest, vec![1, 2]);
        assert_eq!(a.em_lt_enn, 50.0);
        let b = run(&[2, 0, 1]);
        assert_eq!(a.enn, b.enn);
        assert_eq!(a.em_lt_enn, b.em_lt_enn);
        assert!(enn_baseline(&[], &[], &[], &[], &[]).is_err());
    }

    #[test]
    fn report_table_and_json() {
        let g = icosphere(1);
        let p = jitter(&g, 9, 0.01);
        let r = Region::new("R", (0..20).collect(), g.n_vertices()).unwrap();
        let rep = evaluate(&[p], &[g], Some(&[&r]), None, &EvalOptions { metric_samples: 5, seed: 0 }).unwrap();
        assert!(rep.mse > 0.0 && rep.align.unwrap() <= rep.mse_region.unwrap() + 1e-15);
        let table = rep.to_table();
        assert!(table.lines().next().unwrap().starts_with("MSE (x1e-6)"));
        assert_eq!(table.lines().count(), 2);
        let back: EvalReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}
