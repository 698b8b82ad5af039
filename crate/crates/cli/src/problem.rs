//! Problem files.
//!
//! ```toml
//! alphabet_x = 2
//! alphabet_y = 2
//! mode = "independent"          # or "joint"
//! sources = [["2/3", "1/3"], ["3/4", "1/4"]]
//! distortion = "hamming"        # or a matrix of numbers
//! delta = 0.05
//! labels = ["a", "b"]           # optional
//! ```
//!
//! In joint mode `sources` is replaced by `num_sources` and a flat `joint`
//! PMF over `X^m` with source 1 as the most significant digit.
//! Probabilities may be numbers or fraction strings.

use serde::Deserialize;
use switchrd::probcore::{DistortionMatrix, SourceList};
use switchrd::region::exact::{parse_rational, to_f64};
use switchrd::region::RegionSpec;
use switchrd::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Int(v) => Ok(*v as f64),
            Number::Float(v) => Ok(*v),
            Number::Text(s) => parse_rational(s).map(|r| to_f64(&r)),
        }
    }
}

fn values(v: &[Number]) -> Result<Vec<f64>> {
    v.iter().map(Number::value).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DistortionSpec {
    Named(String),
    Matrix(Vec<Vec<Number>>),
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Mode {
    #[default]
    Independent,
    Joint,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    alphabet_x: usize,
    alphabet_y: Option<usize>,
    #[serde(default)]
    mode: Mode,
    sources: Option<Vec<Vec<Number>>>,
    num_sources: Option<usize>,
    joint: Option<Vec<Number>>,
    distortion: DistortionSpec,
    delta: Option<Number>,
    labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub alphabet_x: usize,
    pub sources: SourceList,
    pub distortion: DistortionMatrix,
    pub delta: f64,
    pub labels: Option<Vec<String>>,
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawProblem =
            toml::from_str(text).map_err(|e| Error::Parse(format!("problem file: {e}")))?;
        let k = raw.alphabet_x;
        let sources = match raw.mode {
            Mode::Independent => {
                if raw.joint.is_some() || raw.num_sources.is_some() {
                    return Err(Error::Parse(
                        "`joint` and `num_sources` need mode = \"joint\"".into(),
                    ));
                }
                let rows = raw
                    .sources
                    .ok_or_else(|| Error::Parse("missing `sources`".into()))?;
                let rows = rows.iter().map(|r| values(r)).collect::<Result<Vec<_>>>()?;
                if let Some(bad) = rows.iter().position(|r| r.len() != k) {
                    return Err(Error::Dimension(format!(
                        "source {bad} has {} entries, alphabet_x = {k}",
                        rows[bad].len()
                    )));
                }
                SourceList::from_vecs(rows)?
            }
            Mode::Joint => {
                if raw.sources.is_some() {
                    return Err(Error::Parse(
                        "mode = \"joint\" takes `joint`, not `sources`".into(),
                    ));
                }
                let m = raw
                    .num_sources
                    .ok_or_else(|| Error::Parse("missing `num_sources`".into()))?;
                let joint = raw
                    .joint
                    .ok_or_else(|| Error::Parse("missing `joint`".into()))?;
                SourceList::joint(k, m, values(&joint)?)?
            }
        };
        let distortion = match raw.distortion {
            DistortionSpec::Named(name) if name.eq_ignore_ascii_case("hamming") => {
                if raw.alphabet_y.is_some_and(|y| y != k) {
                    return Err(Error::Dimension(
                        "hamming distortion needs alphabet_y = alphabet_x".into(),
                    ));
                }
                DistortionMatrix::hamming(k)
            }
            DistortionSpec::Named(name) => {
                return Err(Error::Parse(format!("unknown distortion `{name}`")))
            }
            DistortionSpec::Matrix(rows) => {
                DistortionMatrix::new(rows.iter().map(|r| values(r)).collect::<Result<_>>()?)?
            }
        };
        let alphabet_y = raw.alphabet_y.unwrap_or(distortion.y_size());
        if distortion.x_size() != k || distortion.y_size() != alphabet_y {
            return Err(Error::Dimension(format!(
                "distortion matrix is {}x{}, expected {k}x{alphabet_y}",
                distortion.x_size(),
                distortion.y_size()
            )));
        }
        let delta = raw.delta.map(|d| d.value()).transpose()?.unwrap_or(0.0);
        if delta < 0.0 || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta must be ≥ 0, got {delta}"
            )));
        }
        if let Some(labels) = &raw.labels {
            if labels.len() != k {
                return Err(Error::Dimension(format!(
                    "{} labels for {k} symbols",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            alphabet_x: k,
            sources,
            distortion,
            delta,
            labels: raw.labels,
        })
    }

    pub fn region(&self) -> RegionSpec {
        RegionSpec {
            sources: self.sources.clone(),
            delta: self.delta,
        }
    }

    pub fn label(&self, symbol: usize) -> String {
        self.labels
            .as_ref()
            .map_or_else(|| symbol.to_string(), |l| l[symbol].clone())
    }
}

/// Parses `0.5,0.5` or `1/2,1/2`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| parse_rational(t.trim()).map(|r| to_f64(&r)))
        .collect()
}
