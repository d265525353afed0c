use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named, contiguous slice of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub length: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.length
    }
}

/// Flat parameter storage with named segments.
///
/// Segments are disjoint, laid out in order, and cover `values` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ParamVector {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl TryFrom<RawParams> for ParamVector {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ParamVector::from_parts(raw.values, raw.segments)
    }
}

impl From<ParamVector> for RawParams {
    fn from(p: ParamVector) -> Self {
        RawParams {
            values: p.values,
            segments: p.segments,
        }
    }
}

impl ParamVector {
    /// All-zero parameters with the given `(name, length)` layout.
    pub fn zeros(layout: &[(&str, usize)]) -> Self {
        let mut segments = Vec::with_capacity(layout.len());
        let mut offset = 0;
        for &(name, length) in layout {
            segments.push(Segment {
                name: name.to_string(),
                offset,
                length,
            });
            offset += length;
        }
        Self {
            values: vec![0.0; offset],
            segments,
        }
    }

    /// A single unnamed-ish segment covering `values`.
    pub fn flat(values: Vec<f64>) -> Self {
        let length = values.len();
        Self {
            values,
            segments: vec![Segment {
                name: "theta".to_string(),
                offset: 0,
                length,
            }],
        }
    }

    pub fn from_parts(values: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        let mut expected = 0;
        for seg in &segments {
            if seg.offset != expected {
                return Err(Error::Invariant(format!(
                    "segment `{}` starts at {} but the previous segment ends at {}",
                    seg.name, seg.offset, expected
                )));
            }
            if seg.length == 0 {
                return Err(Error::Invariant(format!("segment `{}` is empty", seg.name)));
            }
            expected += seg.length;
        }
        if expected != values.len() {
            return Err(Error::Invariant(format!(
                "segments cover {expected} values but {} are stored",
                values.len()
            )));
        }
        for (i, name) in segments.iter().map(|s| &s.name).enumerate() {
            if segments[..i].iter().any(|s| &s.name == name) {
                return Err(Error::Invariant(format!("duplicate segment name `{name}`")));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite parameter at index {i}")));
        }
        Ok(Self { values, segments })
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "layout length mismatch");
        Self {
            values,
            segments: self.segments.clone(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.segments.iter().find(|s| s.name == name).map(Segment::range)
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.range(name).map(|r| &self.values[r])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.range(name)?;
        Some(&mut self.values[r])
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance between two vectors of equal length.
    pub fn distance(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
