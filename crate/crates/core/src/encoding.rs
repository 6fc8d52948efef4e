//! Spectral encodings: consecutive eigenvalue differences of the global
//! spectrum followed by those of each local spectrum.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigen::Spectrum;
use crate::error::{invalid, Error, Result};

/// Label of the global segment.
pub const GLOBAL: &str = "global";

/// A labelled slice `[offset, offset + len)` of an encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEncoding {
    pub layout: Vec<Segment>,
    pub values: Vec<f64>,
}

/// Per-dimension extremes over a set of encodings sharing one layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub layout: Vec<Segment>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// `[λ2 − λ1, λ3 − λ2, …]`.
pub fn diff_encode(spectrum: &Spectrum) -> Result<Vec<f64>> {
    let ev = &spectrum.eigenvalues;
    if ev.len() < 2 {
        return Err(Error::SpectrumTooShort(ev.len()));
    }
    let d: Vec<f64> = ev.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = d.iter().position(|x| x.is_nan() || *x < 0.0) {
        return Err(invalid(format!(
            "spectrum is not sorted ascending at position {}",
            i + 1
        )));
    }
    Ok(d)
}

/// Concatenates the global differences with those of every local spectrum,
/// in the given order.
pub fn build_encoding(global: &Spectrum, locals: &[(String, Spectrum)]) -> Result<SpectralEncoding> {
    let mut layout = Vec::with_capacity(1 + locals.len());
    let mut values = Vec::new();
    let parts = std::iter::once((GLOBAL, global)).chain(locals.iter().map(|(l, s)| (l.as_str(), s)));
    for (label, spectrum) in parts {
        if layout.iter().any(|s: &Segment| s.label == label) {
            return Err(invalid(format!("duplicate segment label `{label}`")));
        }
        let d = diff_encode(spectrum)?;
        layout.push(Segment {
            label: label.to_string(),
            offset: values.len(),
            len: d.len(),
        });
        values.extend(d);
    }
    Ok(SpectralEncoding { layout, values })
}

impl SpectralEncoding {
    /// Checks that `layout` tiles `values` contiguously with unique labels.
    pub fn new(layout: Vec<Segment>, values: Vec<f64>) -> Result<Self> {
        let mut offset = 0;
        for (i, s) in layout.iter().enumerate() {
            if s.offset != offset || s.len == 0 {
                return Err(invalid(format!("segment `{}` breaks the layout", s.label)));
            }
            if layout[..i].iter().any(|o| o.label == s.label) {
                return Err(invalid(format!("duplicate segment label `{}`", s.label)));
            }
            offset += s.len;
        }
        if offset != values.len() {
            return Err(Error::DimensionMismatch {
                expected: offset,
                got: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.layout.iter().map(|s| s.label.as_str())
    }

    pub fn find(&self, label: &str) -> Result<&Segment> {
        self.layout
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn segment(&self, label: &str) -> Result<&[f64]> {
        let s = self.find(label)?;
        Ok(&self.values[s.offset..s.offset + s.len])
    }

    /// Segments as `(label, values)` pairs.
    pub fn segments(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.layout
            .iter()
            .map(|s| (s.label.as_str(), &self.values[s.offset..s.offset + s.len]))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("encoding serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SpectralEncoding = serde_json::from_str(text)?;
        Self::new(raw.layout, raw.values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn resolve<'a>(enc: &'a SpectralEncoding, labels: &[&str]) -> Result<Vec<&'a Segment>> {
    labels.iter().map(|l| enc.find(l)).collect()
}

/// Copy of `a` with every segment named in `take_from_b` taken from `b`.
pub fn swap_segments(
    a: &SpectralEncoding,
    b: &SpectralEncoding,
    take_from_b: &[&str],
) -> Result<SpectralEncoding> {
    a.check_compatible(b)?;
    let mut out = a.clone();
    for s in resolve(a, take_from_b)? {
        let r = s.offset..s.offset + s.len;
        out.values[r.clone()].copy_from_slice(&b.values[r]);
    }
    Ok(out)
}

/// `(1 − t) a + t b` on the named segments, `a` elsewhere.
pub fn interpolate(
    a: &SpectralEncoding,
    b: &SpectralEncoding,
    t: f64,
    segments: &[&str],
) -> Result<SpectralEncoding> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("interpolation parameter {t} outside [0, 1]")));
    }
    a.check_compatible(b)?;
    let mut out = a.clone();
    for s in resolve(a, segments)? {
        for i in s.offset..s.offset + s.len {
            out.values[i] = (1.0 - t) * a.values[i] + t * b.values[i];
        }
    }
    Ok(out)
}

/// Elementwise min and max.
pub fn dataset_stats<'a>(
    encodings: impl IntoIterator<Item = &'a SpectralEncoding>,
) -> Result<EncodingStats> {
    let mut it = encodings.into_iter();
    let first = it
        .next()
        .ok_or_else(|| invalid("statistics need at least one encoding"))?;
    let mut stats = EncodingStats {
        layout: first.layout.clone(),
        min: first.values.clone(),
        max: first.values.clone(),
    };
    for e in it {
        if e.layout != stats.layout {
            return Err(Error::LayoutMismatch);
        }
        for (i, &v) in e.values.iter().enumerate() {
            stats.min[i] = stats.min[i].min(v);
            stats.max[i] = stats.max[i].max(v);
        }
    }
    Ok(stats)
}

impl EncodingStats {
    /// Encoding made of the minimum or maximum on each named segment;
    /// `use_max(label)` picks the side.
    pub fn corner(&self, use_max: impl Fn(&str) -> bool) -> SpectralEncoding {
        let mut values = self.min.clone();
        for s in &self.layout {
            if use_max(&s.label) {
                values[s.offset..s.offset + s.len].copy_from_slice(&self.max[s.offset..s.offset + s.len]);
            }
        }
        SpectralEncoding {
            layout: self.layout.clone(),
            values,
        }
    }
}
