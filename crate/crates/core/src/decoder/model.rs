//! The decoder as a deployable artifact: network, input layout, output
//! connectivity and training metadata, with a checksummed binary format.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::mlp::Mlp;
use crate::encoding::{EncodingStats, Segment, SpectralEncoding};
use crate::error::{Error, Result};
use crate::geom::{Mesh, Point, PointCloud, Shape};

const MAGIC: &[u8; 4] = b"SPFD";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub test: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub loss: LossKind,
    pub history: Vec<EpochLoss>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub layout: Vec<Segment>,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub n_vertices: usize,
    /// Connectivity of the training meshes; `None` for point clouds.
    pub faces: Option<Vec<[usize; 3]>>,
    /// Per-dimension input standardization `(x − mean) / scale`.
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// Output coordinates are `mean + scale * network_output`; empty means
    /// the raw network output.
    #[serde(default)]
    pub output_mean: Vec<f64>,
    #[serde(default)]
    pub output_scale: Vec<f64>,
    pub stats: Option<EncodingStats>,
    /// How the training encodings were computed, opaque to the decoder.
    pub encoding_config: Option<serde_json::Value>,
    pub training: TrainingMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderModel {
    pub meta: ModelMeta,
    pub net: Mlp<f32>,
}

/// A fresh model mapping encodings with `layout` to `n_vertices` points.
pub fn init_decoder(
    layout: &[Segment],
    hidden: &[usize],
    n_vertices: usize,
    dropout: f64,
    seed: u64,
) -> Result<DecoderModel> {
    let input_len: usize = layout.iter().map(|s| s.len).sum();
    let net = Mlp::new(input_len, hidden, 3 * n_vertices, dropout, seed)?;
    Ok(DecoderModel {
        meta: ModelMeta {
            layout: layout.to_vec(),
            hidden: hidden.to_vec(),
            dropout,
            n_vertices,
            faces: None,
            input_mean: vec![0.0; input_len],
            input_scale: vec![1.0; input_len],
            output_mean: Vec::new(),
            output_scale: Vec::new(),
            stats: None,
            encoding_config: None,
            training: TrainingMeta {
                seed,
                ..Default::default()
            },
        },
        net,
    })
}

impl DecoderModel {
    pub fn input_len(&self) -> usize {
        self.net.input_len()
    }

    pub fn n_vertices(&self) -> usize {
        self.meta.n_vertices
    }

    /// Rows of standardized network input.
    pub fn prepare_inputs<'a>(
        &self,
        encodings: impl IntoIterator<Item = &'a SpectralEncoding>,
    ) -> Result<Array2<f32>> {
        let encodings: Vec<&SpectralEncoding> = encodings.into_iter().collect();
        let d = self.input_len();
        let mut x = Array2::zeros((encodings.len(), d));
        for (r, e) in encodings.iter().enumerate() {
            if e.layout != self.meta.layout {
                return Err(Error::LayoutMismatch);
            }
            for (i, &v) in e.values.iter().enumerate() {
                x[(r, i)] = ((v - self.meta.input_mean[i]) / self.meta.input_scale[i]) as f32;
            }
        }
        Ok(x)
    }

    /// Maps raw network output rows to coordinates in place.
    pub fn destandardize(&self, y: &mut Array2<f32>) {
        if self.meta.output_scale.is_empty() {
            return;
        }
        for mut row in y.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.meta.output_mean).zip(&self.meta.output_scale) {
                *v = *m as f32 + *s as f32 * *v;
            }
        }
    }

    /// Eval-mode coordinates, one `Vec<Point>` per encoding.
    pub fn predict<'a>(
        &self,
        encodings: impl IntoIterator<Item = &'a SpectralEncoding>,
    ) -> Result<Vec<Vec<Point>>> {
        let x = self.prepare_inputs(encodings)?;
        let mut y = self.net.forward(x.view())?;
        self.destandardize(&mut y);
        Ok(y.rows().into_iter().map(|r| to_points(r.iter().copied())).collect())
    }

    /// Eval-mode reconstruction wrapped in the training connectivity.
    pub fn reconstruct(&self, encoding: &SpectralEncoding) -> Result<Shape> {
        let pts = self.predict([encoding])?.pop().expect("one row");
        match &self.meta.faces {
            Some(faces) => Ok(Mesh::new(pts, faces.clone())?.into()),
            None => Ok(PointCloud::new(pts)?.into()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        let tensors = self.net.tensors();
        out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 4 + 4 + 8 + 4 || &bytes[..4] != MAGIC {
            return Err(bad("not a decoder checkpoint"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(bad("checksum mismatch (truncated or corrupted file)"));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let meta_len = r.u64()? as usize;
        let meta: ModelMeta = serde_json::from_slice(r.take(meta_len)?)?;
        let input_len: usize = meta.layout.iter().map(|s| s.len).sum();
        if meta.input_mean.len() != input_len || meta.input_scale.len() != input_len {
            return Err(bad("input standardization does not match the layout"));
        }
        let out_len = meta.output_mean.len();
        if out_len != meta.output_scale.len() || (out_len != 0 && out_len != 3 * meta.n_vertices) {
            return Err(bad("output standardization does not match the vertex count"));
        }
        let mut net = Mlp::<f32>::new(input_len, &meta.hidden, 3 * meta.n_vertices, meta.dropout, 0)?;
        let count = r.u64()? as usize;
        let mut slots = net.tensors_mut();
        if count != slots.len() {
            return Err(bad("tensor count does not match the architecture"));
        }
        for slot in slots.iter_mut() {
            let len = r.u64()? as usize;
            if len != slot.len() {
                return Err(bad("tensor size does not match the architecture"));
            }
            let raw = r.take(4 * len)?;
            for (v, chunk) in slot.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            }
        }
        drop(slots);
        if r.pos != body.len() {
            return Err(bad("trailing bytes"));
        }
        if let Some(faces) = &meta.faces {
            if faces.iter().flatten().any(|&i| i >= meta.n_vertices) {
                return Err(bad("face index out of range"));
            }
        }
        Ok(Self { meta, net })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub(crate) fn to_points(values: impl Iterator<Item = f32>) -> Vec<Point> {
    let flat: Vec<f64> = values.map(f64::from).collect();
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::build_encoding;
    use crate::eigen::Spectrum;

    fn encoding(shift: f64) -> SpectralEncoding {
        let g: Vec<f64> = (0..6).map(|i| (i * i) as f64 + shift).collect();
        let l: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 + shift).collect();
        build_encoding(&Spectrum::from_values(g), &[("R".into(), Spectrum::from_values(l))]).unwrap()
    }

    fn model() -> DecoderModel {
        let mut m = init_decoder(&encoding(0.0).layout, &[8, 8, 8], 4, 0.1, 7).unwrap();
        m.meta.faces = Some(vec![[0, 1, 2], [0, 2, 3]]);
        m.net.norms[1].running_var.mapv_inplace(|v| v * 1.7);
        m
    }

    #[test]
    fn sizes() {
        let m = model();
        assert_eq!(m.input_len(), 9);
        assert_eq!(m.net.output_len(), 12);
        let cube = init_decoder(&encoding(0.0).layout, &[258, 1024, 2048], 7350, 0.0, 0).unwrap();
        assert_eq!(cube.net.output_len(), 22050);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let m = model();
        let bytes = m.to_bytes();
        let back = DecoderModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        let e = encoding(0.3);
        assert_eq!(back.predict([&e]).unwrap(), m.predict([&e]).unwrap());
        assert!(matches!(
            DecoderModel::from_bytes(&bytes[..bytes.len() - 9]),
            Err(Error::Checkpoint(_))
        ));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(DecoderModel::from_bytes(&flipped).is_err());
    }

    #[test]
    fn reconstruct_checks_layout() {
        let m = model();
        let shape = m.reconstruct(&encoding(0.1)).unwrap();
        assert_eq!(shape.as_mesh().unwrap().faces(), &[[0, 1, 2], [0, 2, 3]]);
        let other = build_encoding(&Spectrum::from_values((0..10).map(f64::from).collect()), &[]).unwrap();
        assert!(matches!(m.reconstruct(&other), Err(Error::LayoutMismatch)));
    }
}
