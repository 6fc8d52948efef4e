use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{load_region, load_shape, save_mesh, save_point_cloud, Region, Shape};
use crate::error::{Error, Result};

/// Train/test partition of `[0, count)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded 90/10 partition. Both sides are sorted; the test side holds
    /// `round(count / 10)` items, at least one whenever `count >= 2`.
    pub fn ninety_ten(count: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut n_test = (count as f64 / 10.0).round() as usize;
        if count >= 2 {
            n_test = n_test.max(1);
        }
        let mut test = order[..n_test].to_vec();
        let mut train = order[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Self { train, test }
    }
}

/// Shapes with their regions and a train/test split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub shapes: Vec<Shape>,
    pub regions: Vec<Vec<Region>>,
    pub split: Split,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    shapes: Vec<PathBuf>,
    regions: Vec<Vec<PathBuf>>,
    split: Split,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Dataset {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Writes shapes, region files and `manifest.json` under `dir`.
    /// Identical regions shared by every shape are written once. `extra`
    /// is stored verbatim in the manifest.
    pub fn save(&self, dir: impl AsRef<Path>, extra: Option<serde_json::Value>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("shapes"))?;
        fs::create_dir_all(dir.join("regions"))?;
        let width = self.len().max(1).to_string().len().max(4);
        let shared = self
            .regions
            .first()
            .filter(|first| self.regions.iter().all(|r| r == *first));

        let mut shape_paths = Vec::with_capacity(self.len());
        let mut region_paths = Vec::with_capacity(self.len());
        let mut shared_paths: Option<Vec<PathBuf>> = None;
        for (i, (shape, regions)) in self.shapes.iter().zip(&self.regions).enumerate() {
            let rel = match shape {
                Shape::Mesh(m) => {
                    let rel = PathBuf::from(format!("shapes/{i:0width$}.off"));
                    save_mesh(m, dir.join(&rel))?;
                    rel
                }
                Shape::Cloud(c) => {
                    let rel = PathBuf::from(format!("shapes/{i:0width$}.xyz"));
                    save_point_cloud(c, dir.join(&rel))?;
                    rel
                }
            };
            shape_paths.push(rel);
            let paths = if shared.is_some() {
                shared_paths
                    .get_or_insert_with(|| {
                        regions
                            .iter()
                            .map(|r| PathBuf::from(format!("regions/{}.json", r.label())))
                            .collect()
                    })
                    .clone()
            } else {
                regions
                    .iter()
                    .map(|r| PathBuf::from(format!("regions/{i:0width$}_{}.json", r.label())))
                    .collect()
            };
            for (r, p) in regions.iter().zip(&paths) {
                let full = dir.join(p);
                if shared.is_none() || !full.exists() || i == 0 {
                    fs::write(full, r.to_json())?;
                }
            }
            region_paths.push(paths);
        }
        let manifest = Manifest {
            shapes: shape_paths,
            regions: region_paths,
            split: self.split.clone(),
            seed: self.seed,
            extra,
        };
        fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Reads `manifest.json` (or the given manifest file) and everything it
    /// references. Paths are relative to the manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_NAME)
        } else {
            path.to_path_buf()
        };
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        if manifest.shapes.len() != manifest.regions.len() {
            return Err(Error::DimensionMismatch {
                expected: manifest.shapes.len(),
                got: manifest.regions.len(),
            });
        }
        let shapes = manifest
            .shapes
            .iter()
            .map(|p| load_shape(base.join(p)))
            .collect::<Result<Vec<_>>>()?;
        let mut cache: std::collections::HashMap<(PathBuf, usize), Region> = Default::default();
        let mut regions = Vec::with_capacity(shapes.len());
        for (shape, paths) in shapes.iter().zip(&manifest.regions) {
            let n = shape.n_vertices();
            let mut list = Vec::with_capacity(paths.len());
            for p in paths {
                let key = (base.join(p), n);
                let r = match cache.get(&key) {
                    Some(r) => r.clone(),
                    None => {
                        let r = load_region(&key.0, n)?;
                        cache.insert(key, r.clone());
                        r
                    }
                };
                list.push(r);
            }
            regions.push(list);
        }
        let count = shapes.len();
        let split = manifest.split;
        let mut seen = vec![false; count];
        for &i in split.train.iter().chain(&split.test) {
            if i >= count || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "split is not a partition of 0..{count} (index {i})"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("split does not cover every shape".into()));
        }
        Ok(Self {
            shapes,
            regions,
            split,
            seed: manifest.seed,
        })
    }

    /// The `extra` block of a manifest, if any.
    pub fn manifest_extra(path: impl AsRef<Path>) -> Result<Option<serde_json::Value>> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_NAME)
        } else {
            path.to_path_buf()
        };
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        Ok(manifest.extra)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn split_is_partition(count in 0usize..400, seed in any::<u64>()) {
            let s = Split::ninety_ten(count, seed);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..count).collect::<Vec<_>>());
            prop_assert_eq!(&s, &Split::ninety_ten(count, seed));
            if count >= 2 {
                prop_assert!(!s.test.is_empty() && !s.train.is_empty());
            }
        }
    }

    #[test]
    fn thousand_splits_nine_hundred() {
        let s = Split::ninety_ten(1000, 7);
        assert_eq!((s.train.len(), s.test.len()), (900, 100));
    }
}
