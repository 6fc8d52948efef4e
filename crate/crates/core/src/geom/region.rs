use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, duplicate-free subset of the vertices of a host shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    label: String,
    indices: Vec<usize>,
}

impl Region {
    /// Sorts and deduplicates `indices`, then checks them against a host
    /// shape with `n_vertices` vertices.
    pub fn new(label: impl Into<String>, mut indices: Vec<usize>, n_vertices: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if let Some(&last) = indices.last() {
            if last >= n_vertices {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    len: n_vertices,
                });
            }
        }
        Ok(Self {
            label: label.into(),
            indices,
        })
    }

    /// Every vertex of an `n`-vertex shape.
    pub fn full(label: impl Into<String>, n: usize) -> Result<Self> {
        Self::new(label, (0..n).collect(), n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.indices.binary_search(&v).is_ok()
    }

    /// Membership mask over `n` vertices.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.indices {
            if i < n {
                m[i] = true;
            }
        }
        m
    }

    /// Indices in `[0, n)` not in the region; may be empty.
    pub fn complement_indices(&self, n: usize) -> Vec<usize> {
        let mask = self.mask(n);
        (0..n).filter(|&i| !mask[i]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.indices).expect("index list serializes")
    }
}

/// Parses a JSON integer array or a whitespace-separated integer list.
pub fn parse_region(text: &str, label: &str, n_vertices: usize) -> Result<Region> {
    let trimmed = text.trim();
    let indices: Vec<usize> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed)?
    } else {
        trimmed
            .split_whitespace()
            .enumerate()
            .map(|(i, t)| {
                t.parse::<usize>().map_err(|_| {
                    Error::InvalidParameter(format!("region entry #{i} `{t}` is not an index"))
                })
            })
            .collect::<Result<_>>()?
    };
    Region::new(label, indices, n_vertices)
}

/// Loads a region file; the label is the file stem.
pub fn load_region(path: impl AsRef<Path>, n_vertices: usize) -> Result<Region> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("region");
    parse_region(&fs::read_to_string(path)?, label, n_vertices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_newline_list() {
        let r = parse_region("2\n0\n1", "r", 5).unwrap();
        assert_eq!(r.indices(), &[0, 1, 2]);
    }

    #[test]
    fn dedups() {
        assert_eq!(parse_region("3 3 4", "r", 5).unwrap().indices(), &[3, 4]);
    }

    #[test]
    fn json_array() {
        assert_eq!(parse_region("[4, 1]", "r", 5).unwrap().indices(), &[1, 4]);
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(
            parse_region("1\n10", "r", 5),
            Err(Error::IndexOutOfRange { index: 10, len: 5 })
        ));
    }

    #[test]
    fn empty() {
        assert!(matches!(parse_region("  \n", "r", 5), Err(Error::EmptyRegion)));
        assert!(matches!(parse_region("[]", "r", 5), Err(Error::EmptyRegion)));
    }

    #[test]
    fn label_from_file_stem() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("head.json");
        fs::write(&p, "[0,1]").unwrap();
        assert_eq!(load_region(&p, 3).unwrap().label(), "head");
    }
}
