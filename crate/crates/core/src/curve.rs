//! Sampled curves and their plot-ready CSV form.
//!
//! Every statistic the library computes - correlation versus spacing or lag,
//! spectra versus frequency, densities versus angle - is emitted as a
//! [`CurveSeries`]: one strictly increasing axis, real or complex values and a
//! metadata map. CSV output carries the metadata as `# key=value` comment
//! lines and writes floats with 17 significant digits so files round-trip
//! exactly and identical runs are byte-identical.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve axis must be strictly increasing at index {index}: {prev} -> {next}")]
    AxisNotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("axis has {axis} samples but values has {values}")]
    LengthMismatch { axis: usize, values: usize },
    #[error("failed writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Real(v) => v.len(),
            Values::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A sampled function of one variable with axis and provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub x_name: String,
    pub x_unit: String,
    pub value_name: String,
    pub x: Vec<f64>,
    pub values: Values,
    pub metadata: BTreeMap<String, String>,
}

impl CurveSeries {
    pub fn real(
        x_name: impl Into<String>,
        x_unit: impl Into<String>,
        value_name: impl Into<String>,
        x: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, CurveError> {
        Self::build(x_name, x_unit, value_name, x, Values::Real(values))
    }

    pub fn complex(
        x_name: impl Into<String>,
        x_unit: impl Into<String>,
        value_name: impl Into<String>,
        x: Vec<f64>,
        values: Vec<Complex64>,
    ) -> Result<Self, CurveError> {
        Self::build(x_name, x_unit, value_name, x, Values::Complex(values))
    }

    fn build(
        x_name: impl Into<String>,
        x_unit: impl Into<String>,
        value_name: impl Into<String>,
        x: Vec<f64>,
        values: Values,
    ) -> Result<Self, CurveError> {
        for (i, w) in x.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(CurveError::AxisNotIncreasing {
                    index: i + 1,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        if x.len() != values.len() {
            return Err(CurveError::LengthMismatch {
                axis: x.len(),
                values: values.len(),
            });
        }
        Ok(Self {
            x_name: x_name.into(),
            x_unit: x_unit.into(),
            value_name: value_name.into(),
            x,
            values,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Render the CSV byte stream: `# key=value` metadata lines, a header row
    /// and one row per sample. Complex curves emit re/im/abs columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}={v}\n"));
        }
        match &self.values {
            Values::Real(v) => {
                out.push_str(&format!("{},{}\n", self.x_name, self.value_name));
                for (x, y) in self.x.iter().zip(v) {
                    out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*y)));
                }
            }
            Values::Complex(v) => {
                out.push_str(&format!(
                    "{},{name}_re,{name}_im,{name}_abs\n",
                    self.x_name,
                    name = self.value_name
                ));
                for (x, y) in self.x.iter().zip(v) {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        fmt_f64(*x),
                        fmt_f64(y.re),
                        fmt_f64(y.im),
                        fmt_f64(y.norm())
                    ));
                }
            }
        }
        out
    }

    /// Write the CSV rendering to `path`.
    pub fn write_csv(&self, path: &Path) -> Result<(), CurveError> {
        let mut file = std::fs::File::create(path).map_err(|source| CurveError::Io {
            path: path.display().to_string(),
            source,
        })?;
        file.write_all(self.to_csv().as_bytes())
            .map_err(|source| CurveError::Io {
                path: path.display().to_string(),
                source,
            })
    }
}

/// 17 significant digits: enough for exact f64 round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
