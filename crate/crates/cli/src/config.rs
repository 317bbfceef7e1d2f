//! TOML problem files.
//!
//! Real numbers are written as decimal strings (`"0.5"`, `"-1e-3"`) and read
//! back with Rust's locale-independent parser; plain TOML numbers are also
//! accepted on input. Serialization always emits the shortest round-trip form.
//!
//! ```toml
//! n = 1
//! n_trunc = 8
//! R0 = "0.1"
//!
//! [mode]
//! kind = "decay"
//! a = "0.5"
//!
//! [[lambda]]
//! re = "-1.0"
//! im = "0.0"
//!
//! [[perturbation]]
//! alpha = [2]
//! beta = [1]
//!
//! [[perturbation.time_coeff]]
//! re_c = "1.0"
//! im_c = "0.0"
//! k = 0
//! re_mu = "-0.5"
//! im_mu = "0.0"
//!
//! [output]
//! dir = "out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use strongnf::{ExpMonomial, MultiIndex, PolyXY, RegimeConfig, TimeCoeff};

/// A real number stored as a decimal string.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Num(pub f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Float(f64),
            Int(i64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Num)
                .map_err(|_| serde::de::Error::custom(format!("not a decimal number: {s:?}"))),
            Repr::Float(v) => Ok(Num(v)),
            Repr::Int(v) => Ok(Num(v as f64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RawMode {
    Decay { a: Num },
    Nonresonant { gamma: Num, tau: Num },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawComplex {
    pub re: Num,
    #[serde(default)]
    pub im: Num,
}

/// One `c t^k e^{mu t}` term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawExp {
    pub re_c: Num,
    #[serde(default)]
    pub im_c: Num,
    #[serde(default)]
    pub k: u32,
    #[serde(default)]
    pub re_mu: Num,
    #[serde(default)]
    pub im_mu: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTerm {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub time_coeff: Vec<RawExp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawOutput {
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSequences {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub n: usize,
    pub n_trunc: u32,
    #[serde(rename = "R0")]
    pub r0: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    pub mode: RawMode,
    pub lambda: Vec<RawComplex>,
    #[serde(default)]
    pub perturbation: Vec<RawTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<RawOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequences: Option<RawSequences>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("malformed problem file")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing problem")
    }
}

/// A validated problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub raw: RawConfig,
    pub n: usize,
    pub n_trunc: u32,
    pub r0: f64,
    pub max_iterations: Option<usize>,
    pub regime: RegimeConfig,
    pub lambda: Vec<Complex64>,
    pub perturbation: PolyXY,
    pub output_dir: Option<PathBuf>,
    pub eps0: Option<f64>,
    pub j_max: usize,
}

pub const DEFAULT_J_MAX: usize = 100;

pub fn time_coeff(records: &[RawExp]) -> TimeCoeff {
    TimeCoeff::from_terms(
        records
            .iter()
            .map(|e| {
                ExpMonomial::new(
                    Complex64::new(e.re_c.0, e.im_c.0),
                    e.k,
                    Complex64::new(e.re_mu.0, e.im_mu.0),
                )
            })
            .collect(),
    )
}

pub fn raw_terms(p: &PolyXY) -> Vec<RawTerm> {
    p.iter()
        .map(|(idx, c)| RawTerm {
            alpha: idx.alpha().to_vec(),
            beta: idx.beta().to_vec(),
            time_coeff: c
                .terms()
                .iter()
                .map(|m| RawExp {
                    re_c: Num(m.coeff.re),
                    im_c: Num(m.coeff.im),
                    k: m.power,
                    re_mu: Num(m.rate.re),
                    im_mu: Num(m.rate.im),
                })
                .collect(),
        })
        .collect()
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_raw(RawConfig::parse(&text)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let n = raw.n;
        if n == 0 {
            bail!("n must be at least 1");
        }
        if raw.lambda.len() != n {
            bail!("lambda has {} entries, n = {n}", raw.lambda.len());
        }
        let regime = match raw.mode {
            RawMode::Decay { a } => RegimeConfig::decay(a.0)?,
            RawMode::Nonresonant { gamma, tau } => RegimeConfig::nonresonant(gamma.0, tau.0)?,
        };
        let lambda = raw
            .lambda
            .iter()
            .map(|c| Complex64::new(c.re.0, c.im.0))
            .collect();
        let mut terms = Vec::with_capacity(raw.perturbation.len());
        for (i, t) in raw.perturbation.iter().enumerate() {
            if t.alpha.len() != n || t.beta.len() != n {
                bail!("perturbation term {i}: alpha/beta must have length {n}");
            }
            terms.push((
                MultiIndex::new(t.alpha.clone(), t.beta.clone())?,
                time_coeff(&t.time_coeff),
            ));
        }
        let perturbation = PolyXY::from_terms(n, raw.n_trunc, terms)?;
        Ok(Self {
            n,
            n_trunc: raw.n_trunc,
            r0: raw.r0.0,
            max_iterations: raw.max_iterations,
            regime,
            lambda,
            perturbation,
            output_dir: raw.output.as_ref().map(|o| PathBuf::from(&o.dir)),
            eps0: raw.sequences.as_ref().and_then(|s| s.eps0).map(|v| v.0),
            j_max: raw
                .sequences
                .as_ref()
                .and_then(|s| s.j_max)
                .unwrap_or(DEFAULT_J_MAX),
            raw,
        })
    }
}

/// Optional parameter grid for `bounds-check`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsGrid {
    #[serde(default)]
    pub tail: Vec<TailRow>,
    #[serde(default)]
    pub weighted: Vec<WeightedRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub m: u32,
    pub n_min: u32,
    pub r: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub m: u32,
    pub mu: Num,
    pub delta: Num,
}

impl BoundsGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).context("malformed grid file")
    }

    pub fn default_grid() -> Self {
        Self {
            tail: strongnf::analytic_bounds::default_tail_grid()
                .into_iter()
                .map(|(m, n_min, r)| TailRow {
                    m,
                    n_min,
                    r: Num(r),
                })
                .collect(),
            weighted: strongnf::analytic_bounds::default_weighted_grid()
                .into_iter()
                .map(|(m, mu, delta)| WeightedRow {
                    m,
                    mu: Num(mu),
                    delta: Num(delta),
                })
                .collect(),
        }
    }
}
