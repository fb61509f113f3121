use std::path::PathBuf;

use kahler_core::geodesic_envelope::{default_directions, Direction, Scheme, SweepMode};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A complex number written as a real or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexInput {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexInput {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexInput::Real(x) => Complex64::new(x, 0.0),
            ComplexInput::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// A scalar or an `m × m` matrix given as an array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Scalar(ComplexInput),
    Rows(Vec<Vec<ComplexInput>>),
}

impl MatrixInput {
    pub fn parse(name: &str, text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!(
                "--{name}: expected a number, [re, im] or an array of rows ({e})"
            ))
        })
    }

    pub fn to_matrix(&self, name: &str) -> Result<DMatrix<Complex64>, CliError> {
        match self {
            MatrixInput::Scalar(z) => Ok(DMatrix::from_element(1, 1, z.value())),
            MatrixInput::Rows(rows) => {
                let m = rows.len();
                if m == 0 || rows.iter().any(|r| r.len() != m) {
                    return Err(CliError::Validation(format!(
                        "--{name} must be a non-empty square matrix"
                    )));
                }
                Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j].value()))
            }
        }
    }
}

/// Boundary potential of a `solve-geodesic` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    /// Builder potential with one fixed cutoff profile.
    Symmetric {
        p: f64,
        q: ComplexInput,
        radius: f64,
        plateau: f64,
    },
    /// Builder potential; the cutoff is searched over the default lattice.
    Builder {
        p: f64,
        q: ComplexInput,
    },
    /// Slice read from a grid CSV; it fixes `n`.
    Csv {
        path: PathBuf,
    },
    /// Patch problem with the sharp family as Dirichlet data; `nt = n + 1`.
    SharpFamily {
        epsilon: f64,
    },
}

fn default_omega11() -> f64 {
    1.0
}

/// `solve-geodesic` configuration. Optional solver fields fall back to the
/// solver defaults; the resolved values are written back into the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub n: usize,
    #[serde(default)]
    pub nt: Option<usize>,
    #[serde(default = "default_omega11")]
    pub omega11: f64,
    pub v: PotentialSpec,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub directions: Option<Vec<Direction>>,
    #[serde(default)]
    pub tol_sweep: Option<f64>,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    #[serde(default)]
    pub relaxation: Option<f64>,
    #[serde(default)]
    pub nested: Option<bool>,
    /// Also solve from a second start below the first and report the gap.
    #[serde(default)]
    pub uniqueness_probe: bool,
}

impl SolveConfig {
    pub fn directions(&self) -> Vec<Direction> {
        self.directions.clone().unwrap_or_else(default_directions)
    }
}
