//! One function per subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use spectraforge::decoder::{self, write_loss_csv, Samples};
use spectraforge::encoding::{dataset_stats, interpolate as interp, swap_segments};
use spectraforge::geom::{
    generate_cube_dataset, load_region, load_shape, save_mesh, save_point_cloud, CubeDatasetSpec,
    Dataset, PATTERN_COUNT,
};
use spectraforge::metrics::{enn_baseline, evaluate as eval_report, mse, EvalOptions, Selection};
use spectraforge::pipeline::{compute_spectra, encode_dataset, encode_shape, parse_operator};
use spectraforge::{
    init_decoder, DecoderModel, EncodingConfig, LocalizedOperatorKind, LossKind, Mesh, Region,
    Shape, SpectralEncoding, TrainConfig,
};

use crate::config::{require, RunConfig};
use crate::{display, CliError, EncodingFlags, *};

/// Encodings of a whole dataset, in dataset order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSet {
    pub config: EncodingConfig,
    pub encodings: Vec<SpectralEncoding>,
}

impl EncodingSet {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &serde_json::to_string(self)?)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn save_shape(shape: &Shape, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    match shape {
        Shape::Mesh(m) => save_mesh(m, path)?,
        Shape::Cloud(c) => save_point_cloud(c, path)?,
    }
    Ok(())
}

/// Config section with command-line overrides applied.
pub fn merge_encoding(base: &EncodingConfig, flags: &EncodingFlags) -> Result<EncodingConfig, CliError> {
    let mut cfg = base.clone();
    if let Some(op) = &flags.op {
        cfg.operator = parse_operator(op).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(k) = flags.k {
        cfg.global_k = k;
    }
    if let Some(h) = flags.h {
        cfg.local_k = h;
    }
    if let Some(k) = flags.k_neighbors {
        cfg.k_neighbors = k;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    let op_name = cfg.name();
    let no_param = |name: &str| usage(format!("--{name} does not apply to operator `{op_name}`"));
    match &mut cfg.operator {
        Some(LocalizedOperatorKind::Ham { tau }) => {
            if flags.tau.is_some() {
                *tau = flags.tau;
            }
            if flags.mu.is_some() {
                return Err(no_param("mu"));
            }
            if flags.basis.is_some() {
                return Err(no_param("basis"));
            }
        }
        Some(LocalizedOperatorKind::Lmh { tau, mu, basis_size }) => {
            if flags.tau.is_some() {
                *tau = flags.tau;
            }
            if flags.mu.is_some() {
                *mu = flags.mu;
            }
            if flags.basis.is_some() {
                *basis_size = flags.basis;
            }
        }
        _ => {
            for (name, set) in [("tau", flags.tau.is_some()), ("mu", flags.mu.is_some()), ("basis", flags.basis.is_some())] {
                if set {
                    return Err(no_param(name));
                }
            }
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

pub fn gen_cube(a: &GenCubeArgs) -> Result<(), CliError> {
    let count = a.patterns.unwrap_or(PATTERN_COUNT);
    if count == 0 || count > PATTERN_COUNT {
        return Err(usage(format!("--patterns must be in 1..={PATTERN_COUNT}")));
    }
    let spec = CubeDatasetSpec {
        face_resolution: a.face_res,
        patterns: (0..count).collect(),
        depth_count: a.depths,
        depth_min: a.depth_min,
        depth_max: a.depth_max,
        extrusion_height: a.height,
        seed: a.seed,
    };
    let cubes = generate_cube_dataset(&spec)?;
    let extra = serde_json::json!({ "generator": spec, "cubes": cubes.specs });
    cubes.dataset.save(&a.out, Some(extra))?;
    info!("wrote {} cubes to {}", cubes.dataset.len(), display(&a.out));
    Ok(())
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    global: &'a [f64],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    regions: Vec<RegionSpectrum<'a>>,
}

#[derive(Serialize)]
struct RegionSpectrum<'a> {
    label: &'a str,
    eigenvalues: &'a [f64],
}

pub fn spectrum(a: &SpectrumArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let mut enc = merge_encoding(&cfg.encoding, &a.encoding)?;
    let shape = load_shape(&a.mesh)?;
    let regions = match &a.region {
        Some(p) => vec![load_region(p, shape.n_vertices())?],
        None => {
            enc.operator = None;
            Vec::new()
        }
    };
    if !regions.is_empty() && enc.operator.is_none() {
        return Err(usage("--region needs a localized operator (--op pat|ham|lmh)"));
    }
    let spectra = compute_spectra(&shape, &regions, &enc, enc.global_k)?;
    let out = SpectrumOut {
        global: &spectra.global.eigenvalues,
        regions: spectra
            .locals
            .iter()
            .map(|(label, s)| RegionSpectrum {
                label,
                eigenvalues: &s.eigenvalues,
            })
            .collect(),
    };
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn default_encodings_path(dataset: &Path, cfg: &EncodingConfig) -> PathBuf {
    dataset.join(format!("encodings_{}.json", cfg.name()))
}

pub fn encode(a: &EncodeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let enc = merge_encoding(&cfg.encoding, &a.encoding)?;
    if let Some(mesh) = &a.mesh {
        let shape = load_shape(mesh)?;
        let regions = a
            .region
            .iter()
            .map(|p| load_region(p, shape.n_vertices()))
            .collect::<spectraforge::Result<Vec<_>>>()?;
        if enc.operator.is_some() && regions.is_empty() {
            return Err(usage("a localized operator needs at least one --region"));
        }
        let e = encode_shape(&shape, &regions, &enc)?;
        return emit(a.out.as_deref().or(cfg.out.as_deref()), &e.to_json());
    }
    let dataset_path = a
        .dataset
        .as_deref()
        .or(cfg.dataset.as_deref())
        .ok_or_else(|| usage("encode needs --mesh or --dataset"))?;
    let ds = Dataset::load(dataset_path)?;
    let set = EncodingSet {
        encodings: encode_dataset(&ds, &enc)?,
        config: enc,
    };
    let out = a
        .out
        .clone()
        .or_else(|| cfg.encodings.clone())
        .unwrap_or_else(|| default_encodings_path(dataset_path, &set.config));
    set.save(&out)?;
    info!("wrote {} encodings to {}", set.encodings.len(), display(&out));
    Ok(())
}

/// Encodings for `ds`: read from `path` when given, computed otherwise.
fn dataset_encodings(ds: &Dataset, path: Option<&Path>, enc: &EncodingConfig) -> Result<EncodingSet, CliError> {
    let set = match path {
        Some(p) => EncodingSet::load(p)?,
        None => EncodingSet {
            encodings: encode_dataset(ds, enc)?,
            config: enc.clone(),
        },
    };
    if set.encodings.len() != ds.len() {
        return Err(usage(format!(
            "{} encodings for a dataset of {} shapes",
            set.encodings.len(),
            ds.len()
        )));
    }
    Ok(set)
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

pub fn merge_train(base: &TrainConfig, a: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut t = base.clone();
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if let Some(v) = a.late_lr {
        t.late_learning_rate = v;
    }
    if let Some(v) = a.lr_switch {
        t.schedule_switch = v;
    }
    if let Some(v) = a.train_seed {
        t.seed = v;
    }
    if let Some(v) = a.dropout {
        t.dropout = v;
    }
    if let Some(v) = &a.loss {
        t.loss = v.parse::<LossKind>().map_err(|e| usage(e.to_string()))?;
    }
    t.validate().map_err(|e| usage(e.to_string()))?;
    Ok(t)
}

pub fn train(a: &TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let tcfg = merge_train(&cfg.train, a)?;
    let enc = merge_encoding(&cfg.encoding, &a.encoding)?;
    let dataset_path = a.dataset.clone().or_else(|| cfg.dataset.clone());
    let ds = Dataset::load(require(&dataset_path, "dataset")?)?;
    let out = a.out.clone().or_else(|| cfg.model.clone()).or_else(|| cfg.out.clone());
    let out = require(&out, "out")?;
    let set = dataset_encodings(&ds, a.encodings.as_deref().or(cfg.encodings.as_deref()), &enc)?;

    let train_enc = pick(&set.encodings, &ds.split.train);
    let train_shapes = pick(&ds.shapes, &ds.split.train);
    let test_enc = pick(&set.encodings, &ds.split.test);
    let test_shapes = pick(&ds.shapes, &ds.split.test);
    if train_enc.is_empty() {
        return Err(usage("the training split is empty"));
    }
    let hidden = a.hidden.clone().unwrap_or_else(|| cfg.hidden());

    let mut model = match &a.resume {
        Some(p) => DecoderModel::load(p)?,
        None => {
            let mut m = init_decoder(
                &train_enc[0].layout,
                &hidden,
                ds.shapes[0].n_vertices(),
                tcfg.dropout,
                tcfg.seed,
            )?;
            m.meta.faces = ds.shapes[0].as_mesh().map(|mesh| mesh.faces().to_vec());
            m.meta.stats = Some(dataset_stats(&train_enc)?);
            m.meta.encoding_config = Some(serde_json::to_value(&set.config)?);
            m
        }
    };
    let history = decoder::train(
        &mut model,
        &Samples::new(&train_enc, &train_shapes)?,
        &Samples::new(&test_enc, &test_shapes)?,
        &tcfg,
    )?;
    model.save(out)?;
    if let Some(csv) = a.loss_csv.as_ref().or(cfg.loss_csv.as_ref()) {
        write_loss_csv(&history, csv)?;
    }
    if let Some(last) = history.last() {
        info!(
            "epoch {}: train {:.6e}, test {}",
            last.epoch,
            last.train,
            last.test.map_or("n/a".into(), |t| format!("{t:.6e}"))
        );
    }
    Ok(())
}

fn model_path<'a>(flag: &'a Option<PathBuf>, cfg: &'a RunConfig) -> Result<&'a Path, CliError> {
    flag.as_deref()
        .or(cfg.model.as_deref())
        .ok_or_else(|| usage("missing --model (flag or config key)"))
}

pub fn reconstruct(a: &ReconstructArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model = DecoderModel::load(model_path(&a.model, cfg)?)?;
    let e = SpectralEncoding::load(&a.encoding)?;
    save_shape(&model.reconstruct(&e)?, &a.out)
}

fn decode_optional(model: &Option<PathBuf>, shape_out: &Option<PathBuf>, e: &SpectralEncoding) -> Result<(), CliError> {
    if let (Some(m), Some(out)) = (model, shape_out) {
        save_shape(&DecoderModel::load(m)?.reconstruct(e)?, out)?;
    } else if model.is_some() {
        return Err(usage("--model given without --shape-out"));
    }
    Ok(())
}

pub fn swap(a: &SwapArgs) -> Result<(), CliError> {
    if a.take.is_empty() {
        return Err(usage("--take needs at least one segment label"));
    }
    let ea = SpectralEncoding::load(&a.a)?;
    let eb = SpectralEncoding::load(&a.b)?;
    let labels: Vec<&str> = a.take.iter().map(String::as_str).collect();
    let out = swap_segments(&ea, &eb, &labels)?;
    out.save(&a.out)?;
    decode_optional(&a.model, &a.shape_out, &out)
}

pub fn interpolate(a: &InterpolateArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.t) {
        return Err(usage("--t must be in [0, 1]"));
    }
    let ea = SpectralEncoding::load(&a.a)?;
    let eb = SpectralEncoding::load(&a.b)?;
    let labels: Vec<&str> = if a.segments.is_empty() {
        ea.labels().collect()
    } else {
        a.segments.iter().map(String::as_str).collect()
    };
    let out = interp(&ea, &eb, a.t, &labels)?;
    out.save(&a.out)?;
    decode_optional(&a.model, &a.shape_out, &out)
}

pub fn stats(a: &StatsArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let path = a.encodings.clone().or_else(|| cfg.encodings.clone());
    let set = EncodingSet::load(require(&path, "encodings")?)?;
    let chosen: Vec<&SpectralEncoding> = if a.train_only {
        let ds_path = require(&cfg.dataset, "dataset")?;
        let ds = Dataset::load(ds_path)?;
        ds.split.train.iter().map(|&i| &set.encodings[i]).collect()
    } else {
        set.encodings.iter().collect()
    };
    let s = dataset_stats(chosen)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&s)?)
}

pub fn evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model = DecoderModel::load(model_path(&a.model, cfg)?)?;
    let dataset_path = a.dataset.clone().or_else(|| cfg.dataset.clone());
    let ds = Dataset::load(require(&dataset_path, "dataset")?)?;
    let enc: EncodingConfig = match &model.meta.encoding_config {
        Some(v) => serde_json::from_value(v.clone())?,
        None => cfg.encoding.clone(),
    };
    let set = dataset_encodings(&ds, a.encodings.as_deref().or(cfg.encodings.as_deref()), &enc)?;
    if ds.split.test.is_empty() {
        return Err(usage("the test split is empty"));
    }
    let test_enc: Vec<&SpectralEncoding> = ds.split.test.iter().map(|&i| &set.encodings[i]).collect();
    let train_enc: Vec<&SpectralEncoding> = ds.split.train.iter().map(|&i| &set.encodings[i]).collect();
    let preds = model.predict(test_enc.iter().copied())?;
    let gts: Vec<&Shape> = ds.split.test.iter().map(|&i| &ds.shapes[i]).collect();

    let model_mse = preds
        .iter()
        .zip(&gts)
        .map(|(p, g)| mse(p, g.vertices(), Selection::All))
        .collect::<spectraforge::Result<Vec<_>>>()?;
    let baseline = if train_enc.is_empty() {
        None
    } else {
        let train_pts: Vec<&[_]> = ds.split.train.iter().map(|&i| ds.shapes[i].vertices()).collect();
        let gt_pts: Vec<&[_]> = gts.iter().map(|s| s.vertices()).collect();
        Some(enn_baseline(&test_enc, &train_enc, &train_pts, &gt_pts, &model_mse)?)
    };

    let gt_meshes: Vec<Mesh> = gts
        .iter()
        .map(|s| {
            s.as_mesh()
                .cloned()
                .ok_or_else(|| usage("evaluate needs a mesh dataset"))
        })
        .collect::<Result<_, _>>()?;
    let pred_meshes = preds
        .into_iter()
        .zip(&gt_meshes)
        .map(|(p, g)| g.with_vertices(p))
        .collect::<spectraforge::Result<Vec<_>>>()?;
    let regions: Option<Vec<&Region>> = ds
        .split
        .test
        .iter()
        .map(|&i| ds.regions[i].first())
        .collect();
    let opts = EvalOptions {
        metric_samples: a.metric_samples.or(cfg.metric_samples).unwrap_or(EvalOptions::default().metric_samples),
        seed: enc.seed,
    };
    let report = eval_report(&pred_meshes, &gt_meshes, regions.as_deref(), baseline.as_ref(), &opts)?;
    println!("{}", report.to_table());
    if let Some(out) = a.out.as_ref().or(cfg.out.as_ref()) {
        write_text(out, &report.to_json())?;
    }
    Ok(())
}

pub fn serve(a: &ServeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let path = model_path(&a.model, cfg)?;
    let bytes = fs::read(path)?;
    let state = crate::serve::ServiceState::from_bytes(&bytes)?;
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        info!("serving {} on http://{addr}", display(path));
        axum::serve(listener, crate::serve::router(state)).await
    })?;
    Ok(())
}
