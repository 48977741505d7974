//! JSON interchange format for `(g, P, F, T, θ)` at a point.

use std::fs;
use std::path::Path;

use natcon::{Covector, Dim, Metric, ProductStructure, StructureTensor, Tensor3, TorsionTensor};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Matrices are nested row arrays; `F` and `T` are flattened row-major with
/// index `(i·2n + j)·2n + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub dim: usize,
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TensorFile {
    pub fn new(g: &Metric, p: &ProductStructure) -> Self {
        Self {
            dim: g.dim(),
            g: rows(g.components()),
            p: rows(p.components()),
            f: None,
            t: None,
            theta: None,
        }
    }

    pub fn with_f(mut self, f: &StructureTensor) -> Self {
        self.f = Some(f.tensor().as_slice().to_vec());
        self
    }

    pub fn with_t(mut self, t: &TorsionTensor) -> Self {
        self.t = Some(t.tensor().as_slice().to_vec());
        self
    }

    pub fn with_theta(mut self, theta: &Covector) -> Self {
        self.theta = Some(theta.components().to_vec());
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        file.check_shapes()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = fs::read(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(e.to_string()))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tensor files always serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.dim;
        Dim::from_total(d).map_err(|e| CliError::Parse(e.to_string()))?;
        let square = |name: &str, m: &[Vec<f64>]| {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                Err(CliError::Parse(format!("{name} must be a {d}x{d} array")))
            } else {
                Ok(())
            }
        };
        square("g", &self.g)?;
        square("P", &self.p)?;
        for (name, len, v) in [
            ("F", d * d * d, &self.f),
            ("T", d * d * d, &self.t),
            ("theta", d, &self.theta),
        ] {
            if let Some(v) = v {
                if v.len() != len {
                    return Err(CliError::Parse(format!(
                        "{name} has {} entries, expected {len}",
                        v.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn matrix(&self, m: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| m[i][j])
    }

    /// Validated metric and product structure.
    pub fn geometry(&self) -> Result<(Metric, ProductStructure)> {
        let g = Metric::new(self.matrix(&self.g))?;
        let p = ProductStructure::new(self.matrix(&self.p), &g)?;
        Ok((g, p))
    }

    pub fn structure_tensor(&self, p: &ProductStructure) -> Result<StructureTensor> {
        let f = self
            .f
            .clone()
            .ok_or_else(|| CliError::Parse("missing field F".into()))?;
        Ok(StructureTensor::new(Tensor3::from_vec(self.dim, f)?, p)?)
    }

    pub fn torsion(&self) -> Result<TorsionTensor> {
        let t = self
            .t
            .clone()
            .ok_or_else(|| CliError::Parse("missing field T".into()))?;
        Ok(TorsionTensor::new(Tensor3::from_vec(self.dim, t)?)?)
    }

    pub fn theta(&self) -> Option<Covector> {
        self.theta.clone().map(Covector::new)
    }

    /// Copy with every entry rounded to `decimals` places and `-0` cleared,
    /// for comparing files produced along different numerical paths.
    pub fn normalized(&self, decimals: i32) -> Self {
        let scale = 10f64.powi(decimals);
        let round = |v: f64| {
            let r = (v * scale).round() / scale;
            if r == 0.0 {
                0.0
            } else {
                r
            }
        };
        let vec = |v: &Vec<f64>| v.iter().map(|&x| round(x)).collect::<Vec<_>>();
        Self {
            dim: self.dim,
            g: self.g.iter().map(vec).collect(),
            p: self.p.iter().map(vec).collect(),
            f: self.f.as_ref().map(vec),
            t: self.t.as_ref().map(vec),
            theta: self.theta.as_ref().map(vec),
        }
    }
}
