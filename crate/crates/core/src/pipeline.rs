//! Shape → spectra → encoding, for single shapes and whole datasets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{smallest_eigenpairs, Spectrum};
use crate::encoding::{build_encoding, SpectralEncoding};
use crate::error::{invalid, Error, Result};
use crate::geom::{Dataset, PointCloud, Region, Shape};
use crate::operators::{
    cotan_laplacian, ham_from_pair, lmh_from_pair, pat_operator, pointcloud_laplacian,
    LocalizedOperatorKind, MassMatrix, SparseOperator, DEFAULT_K_NEIGHBORS, DEFAULT_TAU_FACTOR,
};

/// Number of global eigenvalues whose mean sets the default potential height.
const TAU_REFERENCE_COUNT: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    /// Global eigenvalues kept (`k`).
    pub global_k: usize,
    /// Eigenvalues per region (`h`).
    pub local_k: usize,
    /// Localized operator; `None` encodes the global spectrum only. Written
    /// either as a table (`{ kind = "ham", tau = 50.0 }`) or as a bare name,
    /// with `"lbo"` meaning no localized operator.
    #[serde(with = "operator_repr")]
    pub operator: Option<LocalizedOperatorKind>,
    /// Neighbourhood size of the point-cloud graph.
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            global_k: 15,
            local_k: 15,
            operator: Some(LocalizedOperatorKind::Pat),
            k_neighbors: DEFAULT_K_NEIGHBORS,
            seed: 0,
        }
    }
}

impl EncodingConfig {
    /// Global spectrum only, as in the plain LBO baseline.
    pub fn global_only(k: usize) -> Self {
        Self {
            global_k: k,
            operator: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.global_k < 2 || (self.operator.is_some() && self.local_k < 2) {
            return Err(invalid("spectra need at least 2 eigenvalues"));
        }
        Ok(())
    }

    /// Short name such as `lbo30` or `pat15+15`.
    pub fn name(&self) -> String {
        match &self.operator {
            None => format!("lbo{}", self.global_k),
            Some(op) => format!("{}{}+{}", op.name(), self.global_k, self.local_k),
        }
    }
}

/// Parses `lbo`, `pat`, `ham` or `lmh`; localized operators get default
/// parameters.
pub fn parse_operator(name: &str) -> Result<Option<LocalizedOperatorKind>> {
    match name {
        "lbo" | "none" => Ok(None),
        "pat" => Ok(Some(LocalizedOperatorKind::Pat)),
        "ham" => Ok(Some(LocalizedOperatorKind::Ham { tau: None })),
        "lmh" => Ok(Some(LocalizedOperatorKind::Lmh {
            tau: None,
            mu: None,
            basis_size: None,
        })),
        other => Err(invalid(format!("unknown operator `{other}` (expected lbo, pat, ham or lmh)"))),
    }
}

mod operator_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::operators::LocalizedOperatorKind;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Name(String),
        Full(LocalizedOperatorKind),
    }

    pub fn serialize<S: Serializer>(op: &Option<LocalizedOperatorKind>, s: S) -> Result<S::Ok, S::Error> {
        match op {
            None => Repr::Name("lbo".into()),
            Some(op) => Repr::Full(*op),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<LocalizedOperatorKind>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Full(op) => Ok(Some(op)),
            Repr::Name(name) => super::parse_operator(&name).map_err(serde::de::Error::custom),
        }
    }
}

/// Global spectrum plus one spectrum per region.
#[derive(Clone, Debug)]
pub struct ShapeSpectra {
    pub global: Spectrum,
    pub locals: Vec<(String, Spectrum)>,
}

impl ShapeSpectra {
    /// Encoding from the first `global_k` and `local_k` eigenvalues.
    pub fn encode(&self, global_k: usize, local_k: Option<usize>) -> Result<SpectralEncoding> {
        let too_many = |k: usize, have: usize| Error::TooManyEigenpairs { k, n: have };
        if global_k > self.global.len() {
            return Err(too_many(global_k, self.global.len()));
        }
        let locals = match local_k {
            None => Vec::new(),
            Some(h) => self
                .locals
                .iter()
                .map(|(l, s)| {
                    if h > s.len() {
                        Err(too_many(h, s.len()))
                    } else {
                        Ok((l.clone(), Spectrum::from_values(s.eigenvalues[..h].to_vec())))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        build_encoding(
            &Spectrum::from_values(self.global.eigenvalues[..global_k].to_vec()),
            &locals,
        )
    }
}

/// Laplacian pair of a mesh (cotangent) or cloud (k-NN graph).
pub fn laplacian_pair(shape: &Shape, k_neighbors: usize) -> Result<(SparseOperator, MassMatrix)> {
    match shape {
        Shape::Mesh(m) => cotan_laplacian(m),
        Shape::Cloud(c) => pointcloud_laplacian(c, k_neighbors.min(c.n_vertices() - 1).max(1)),
    }
}

/// Default potential height: `DEFAULT_TAU_FACTOR` times the mean of the
/// first 30 global eigenvalues.
pub fn default_tau(global: &Spectrum) -> f64 {
    let k = global.len().min(TAU_REFERENCE_COUNT);
    DEFAULT_TAU_FACTOR * global.eigenvalues[..k].iter().sum::<f64>() / k as f64
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::TooManyEigenpairs { k, n });
    }
    Ok(())
}

/// Global and per-region spectra. `global_k` may exceed the configured value
/// so one solve serves several encodings.
pub fn compute_spectra(
    shape: &Shape,
    regions: &[Region],
    cfg: &EncodingConfig,
    global_k: usize,
) -> Result<ShapeSpectra> {
    cfg.validate()?;
    let (l, m) = laplacian_pair(shape, cfg.k_neighbors)?;
    let n = l.dim();
    let op = match &cfg.operator {
        None => {
            check_k(global_k, n)?;
            return Ok(ShapeSpectra {
                global: smallest_eigenpairs(&l, &m, global_k, false, cfg.seed)?,
                locals: Vec::new(),
            });
        }
        Some(op) => op,
    };
    let needs_tau = matches!(op, LocalizedOperatorKind::Ham { tau: None } | LocalizedOperatorKind::Lmh { tau: None, .. });
    let needs_basis = matches!(op, LocalizedOperatorKind::Lmh { .. });
    let solve_k = if needs_tau {
        global_k.max(TAU_REFERENCE_COUNT).min(n)
    } else {
        global_k
    };
    check_k(global_k, n)?;
    let full = smallest_eigenpairs(&l, &m, solve_k, needs_basis, cfg.seed)?;
    let global = full.truncated(global_k);

    let mut locals = Vec::with_capacity(regions.len());
    for region in regions {
        let spectrum = match op {
            LocalizedOperatorKind::Pat => match shape {
                Shape::Mesh(mesh) => {
                    let r = pat_operator(mesh, region)?;
                    check_k(cfg.local_k, r.mass.dim())?;
                    smallest_eigenpairs(&r.operator, &r.mass, cfg.local_k, false, cfg.seed)?
                }
                Shape::Cloud(cloud) => {
                    let sub = PointCloud::new(region.indices().iter().map(|&i| cloud.vertices()[i]).collect())?;
                    let (sl, sm) = laplacian_pair(&sub.into(), cfg.k_neighbors)?;
                    check_k(cfg.local_k, sl.dim())?;
                    smallest_eigenpairs(&sl, &sm, cfg.local_k, false, cfg.seed)?
                }
            },
            LocalizedOperatorKind::Ham { tau } => {
                let tau = tau.unwrap_or_else(|| default_tau(&full));
                let (h, hm) = ham_from_pair(&l, &m, region, tau)?;
                check_k(cfg.local_k, n)?;
                smallest_eigenpairs(&h, &hm, cfg.local_k, false, cfg.seed)?
            }
            LocalizedOperatorKind::Lmh { tau, mu, basis_size } => {
                let tau = tau.unwrap_or_else(|| default_tau(&full));
                let mu = mu.unwrap_or(tau);
                let b = basis_size.unwrap_or(global_k);
                check_k(b, full.len())?;
                let vectors = full.eigenvectors.as_ref().expect("vectors requested");
                let basis = vectors.columns(0, b).into_owned();
                let (h, hm) = lmh_from_pair(&l, &m, region, tau, mu, &basis)?;
                check_k(cfg.local_k, n)?;
                smallest_eigenpairs(&h, &hm, cfg.local_k, false, cfg.seed)?
            }
        };
        locals.push((region.label().to_string(), Spectrum::from_values(spectrum.eigenvalues)));
    }
    Ok(ShapeSpectra {
        global: Spectrum::from_values(global.eigenvalues),
        locals,
    })
}

pub fn encode_shape(shape: &Shape, regions: &[Region], cfg: &EncodingConfig) -> Result<SpectralEncoding> {
    compute_spectra(shape, regions, cfg, cfg.global_k)?
        .encode(cfg.global_k, cfg.operator.as_ref().map(|_| cfg.local_k))
}

/// Spectra of every shape in a dataset, in dataset order. Runs on the rayon
/// pool; results do not depend on the number of threads.
pub fn dataset_spectra(dataset: &Dataset, cfg: &EncodingConfig, global_k: usize) -> Result<Vec<ShapeSpectra>> {
    dataset
        .shapes
        .par_iter()
        .zip(dataset.regions.par_iter())
        .map(|(shape, regions)| compute_spectra(shape, regions, cfg, global_k))
        .collect()
}

pub fn encode_dataset(dataset: &Dataset, cfg: &EncodingConfig) -> Result<Vec<SpectralEncoding>> {
    dataset_spectra(dataset, cfg, cfg.global_k)?
        .iter()
        .map(|s| s.encode(cfg.global_k, cfg.operator.as_ref().map(|_| cfg.local_k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{build_cube, CubeSpec};

    fn cube() -> (Shape, Region) {
        let (m, r) = build_cube(&CubeSpec {
            face_resolution: 8,
            pattern_id: 3,
            depth_factor: 1.2,
            extrusion_height: 0.15,
        })
        .unwrap();
        (m.into(), r)
    }

    #[test]
    fn names_and_lengths() {
        let (shape, front) = cube();
        let pat = EncodingConfig::default();
        assert_eq!(pat.name(), "pat15+15");
        let e = encode_shape(&shape, std::slice::from_ref(&front), &pat).unwrap();
        assert_eq!(e.len(), 28);
        assert_eq!(e.layout[1].label, "front");
        let lbo = EncodingConfig::global_only(30);
        assert_eq!(lbo.name(), "lbo30");
        assert_eq!(encode_shape(&shape, &[front], &lbo).unwrap().len(), 29);
    }

    #[test]
    fn shared_solve_matches_separate_solves() {
        let (shape, front) = cube();
        let cfg = EncodingConfig::default();
        let spectra = compute_spectra(&shape, std::slice::from_ref(&front), &cfg, 30).unwrap();
        let shared = spectra.encode(15, Some(15)).unwrap();
        let direct = encode_shape(&shape, &[front], &cfg).unwrap();
        assert_eq!(shared.layout, direct.layout);
        for (a, b) in shared.values.iter().zip(&direct.values) {
            assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn ham_and_lmh_defaults_run() {
        let (shape, front) = cube();
        for op in [
            LocalizedOperatorKind::Ham { tau: None },
            LocalizedOperatorKind::Lmh {
                tau: None,
                mu: None,
                basis_size: None,
            },
        ] {
            let cfg = EncodingConfig {
                global_k: 10,
                local_k: 10,
                operator: Some(op),
                ..Default::default()
            };
            let e = encode_shape(&shape, std::slice::from_ref(&front), &cfg).unwrap();
            assert_eq!(e.len(), 18);
            assert!(e.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn point_cloud_patch() {
        let (shape, front) = cube();
        let cloud: Shape = PointCloud::new(shape.vertices().to_vec()).unwrap().into();
        let e = encode_shape(&cloud, &[front], &EncodingConfig::default()).unwrap();
        assert_eq!(e.len(), 28);
    }

    #[test]
    fn operator_spellings() {
        let lbo: EncodingConfig = serde_json::from_str(r#"{"operator": "lbo", "global_k": 30}"#).unwrap();
        assert_eq!(lbo, EncodingConfig::global_only(30));
        let ham: EncodingConfig = serde_json::from_str(r#"{"operator": {"kind": "ham", "tau": 2.0}}"#).unwrap();
        assert_eq!(ham.operator, Some(LocalizedOperatorKind::Ham { tau: Some(2.0) }));
        for cfg in [lbo, ham, EncodingConfig::default()] {
            let back: EncodingConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(parse_operator("xyz").is_err());
    }

    #[test]
    fn too_many_local_pairs() {
        let (shape, front) = cube();
        let cfg = EncodingConfig {
            local_k: 10_000,
            ..Default::default()
        };
        assert!(matches!(
            encode_shape(&shape, &[front], &cfg),
            Err(Error::TooManyEigenpairs { .. })
        ));
    }
}
