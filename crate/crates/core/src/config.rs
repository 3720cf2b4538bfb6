//! TOML kernel descriptions.
//!
//! ```toml
//! dim = 1
//! r = 0.1
//! M = 1.0
//!
//! [[terms]]
//! lag = 0.1
//! matrix = -1.0                      # scalar shorthand for n = 1
//!
//! [[terms]]
//! lag = 0.0
//! matrix = { values = [[0.2]], profile = { kind = "sin", a = 0.0, b = 1.0, omega = 2.0 } }
//!
//! [density]
//! matrix = [[0.5]]
//! shape = { kind = "exp", rate = 3.0 }
//! ```

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DelayKernel, ThetaShape, TimeProfile};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub dim: usize,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub lag: f64,
    pub matrix: MatrixSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub shape: ShapeSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Constant(Vec<Vec<f64>>),
    Profiled {
        values: Vec<Vec<f64>>,
        #[serde(default)]
        profile: ProfileSpec,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    #[default]
    Const,
    Sin {
        a: f64,
        b: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Expdecay {
        a: f64,
        b: f64,
        rate: f64,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    #[default]
    Uniform,
    Exp {
        rate: f64,
    },
    Linear {
        a: f64,
        b: f64,
    },
}

impl ProfileSpec {
    fn build(&self) -> TimeProfile<f64> {
        match *self {
            ProfileSpec::Const => TimeProfile::Const,
            ProfileSpec::Sin { a, b, omega, phase } => TimeProfile::Sin { a, b, omega, phase },
            ProfileSpec::Expdecay { a, b, rate } => TimeProfile::ExpDecay { a, b, rate },
        }
    }
}

impl ShapeSpec {
    fn build(&self) -> ThetaShape<f64> {
        match *self {
            ShapeSpec::Uniform => ThetaShape::Uniform,
            ShapeSpec::Exp { rate } => ThetaShape::Exp { rate },
            ShapeSpec::Linear { a, b } => ThetaShape::Linear { a, b },
        }
    }
}

impl MatrixSpec {
    fn build(&self, dim: usize) -> Result<(Matrix<f64>, TimeProfile<f64>)> {
        let (rows, profile) = match self {
            MatrixSpec::Scalar(v) => {
                if dim != 1 {
                    return Err(Error::Config(format!("scalar coefficient given for dim = {dim}")));
                }
                (vec![vec![*v]], TimeProfile::Const)
            }
            MatrixSpec::Constant(rows) => (rows.clone(), TimeProfile::Const),
            MatrixSpec::Profiled { values, profile } => (values.clone(), profile.build()),
        };
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("coefficient matrix must be {dim}x{dim}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("coefficient matrix has non-finite entries".into()));
        }
        Ok((Matrix::from_rows(&rows), profile))
    }
}

impl KernelSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<DelayKernel<f64>> {
        let mut k = DelayKernel::new(self.dim, self.r, self.m)?;
        for t in &self.terms {
            let (m, p) = t.matrix.build(self.dim)?;
            k = k.with_profiled_term(t.lag, m, p)?;
        }
        if let Some(d) = &self.density {
            let (m, p) = d.matrix.build(self.dim)?;
            k = k.with_density(m, p, d.shape.build())?;
        }
        Ok(k)
    }
}
