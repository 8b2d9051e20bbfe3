use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use ratedist::sources::{
    analytic_rd_binary, analytic_rd_gaussian, analytic_rd_laplacian, build_bifurcation_fixture,
    build_binary, build_gaussian, build_laplacian, GridSpec,
};
use ratedist::RdProblem;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Where a problem instance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Binary {
        p_one: f64,
    },
    Gaussian {
        sigma: f64,
        half_width: f64,
        delta: f64,
    },
    Laplacian {
        sigma: f64,
        half_width: f64,
        delta: f64,
    },
    Bifurcation,
    File(PathBuf),
}

/// Overrides for the built-in source parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SourceParams {
    pub p: Option<f64>,
    pub sigma: Option<f64>,
    pub grid_m: Option<f64>,
    pub grid_delta: Option<f64>,
}

impl SourceSpec {
    /// Resolves a fixture name or, failing that, a path to a problem file.
    pub fn parse(name: &str, params: SourceParams) -> Result<Self> {
        let sigma = params.sigma.unwrap_or(2.0);
        match name {
            "binary" => Ok(SourceSpec::Binary {
                p_one: params.p.unwrap_or(0.5),
            }),
            "gaussian" => Ok(SourceSpec::Gaussian {
                sigma,
                half_width: params.grid_m.unwrap_or(8.0),
                delta: params.grid_delta.unwrap_or(0.5),
            }),
            "laplacian" => Ok(SourceSpec::Laplacian {
                sigma,
                half_width: params.grid_m.unwrap_or(14.0),
                delta: params.grid_delta.unwrap_or(0.2),
            }),
            "bifurcation" => Ok(SourceSpec::Bifurcation),
            path => {
                let path = PathBuf::from(path);
                if path.is_file() {
                    Ok(SourceSpec::File(path))
                } else {
                    Err(CliError::Invalid(format!(
                        "unknown source `{name}`: not a fixture name and no such file"
                    )))
                }
            }
        }
    }

    pub fn build(&self) -> Result<RdProblem> {
        let problem = match self {
            SourceSpec::Binary { p_one } => build_binary(*p_one)?,
            SourceSpec::Gaussian {
                sigma,
                half_width,
                delta,
            } => build_gaussian(&GridSpec::new(*half_width, *delta)?, *sigma)?,
            SourceSpec::Laplacian {
                sigma,
                half_width,
                delta,
            } => build_laplacian(&GridSpec::new(*half_width, *delta)?, *sigma)?,
            SourceSpec::Bifurcation => build_bifurcation_fixture(),
            SourceSpec::File(path) => ProblemFile::load(path)?.into_problem()?,
        };
        Ok(problem)
    }

    /// Closed-form `R(D)` of the underlying continuous or binary source.
    pub fn analytic_rate(&self, distortion: f64) -> Option<f64> {
        match self {
            SourceSpec::Binary { p_one } => Some(analytic_rd_binary(*p_one, distortion)),
            SourceSpec::Gaussian { sigma, .. } => Some(analytic_rd_gaussian(*sigma, distortion)),
            SourceSpec::Laplacian { sigma, .. } => Some(analytic_rd_laplacian(*sigma, distortion)),
            SourceSpec::Bifurcation | SourceSpec::File(_) => None,
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Binary { p_one } => write!(f, "binary(p={p_one})"),
            SourceSpec::Gaussian {
                sigma,
                half_width,
                delta,
            } => {
                write!(f, "gaussian(sigma={sigma},M={half_width},delta={delta})")
            }
            SourceSpec::Laplacian {
                sigma,
                half_width,
                delta,
            } => {
                write!(f, "laplacian(sigma={sigma},M={half_width},delta={delta})")
            }
            SourceSpec::Bifurcation => write!(f, "bifurcation"),
            SourceSpec::File(path) => write!(f, "{}", path.display()),
        }
    }
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub p: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_labels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_labels: Option<Vec<f64>>,
}

impl ProblemFile {
    pub fn from_problem(problem: &RdProblem) -> Self {
        Self {
            p: problem.p().to_vec(),
            d: problem.d().outer_iter().map(|row| row.to_vec()).collect(),
            x_labels: problem.x_labels().map(<[f64]>::to_vec),
            y_labels: problem.y_labels().map(<[f64]>::to_vec),
        }
    }

    pub fn into_problem(self) -> Result<RdProblem> {
        let m = self.d.len();
        let n = self.d.first().map_or(0, Vec::len);
        if let Some(i) = self.d.iter().position(|row| row.len() != n) {
            return Err(CliError::Invalid(format!(
                "row {} of d has {} entries, expected {n}",
                i + 1,
                self.d[i].len()
            )));
        }
        let d = Array2::from_shape_vec((m, n), self.d.into_iter().flatten().collect())
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        let problem = RdProblem::new(Array1::from(self.p), d)?;
        match (self.x_labels, self.y_labels) {
            (None, None) => Ok(problem),
            (x, y) => {
                let x = x.unwrap_or_else(|| (0..m).map(|i| i as f64).collect());
                let y = y.unwrap_or_else(|| (0..n).map(|j| j as f64).collect());
                Ok(problem.with_labels(x, y)?)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    As,
    Ba,
    Both,
}

impl FromStr for SolverChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as" => Ok(SolverChoice::As),
            "ba" => Ok(SolverChoice::Ba),
            "both" => Ok(SolverChoice::Both),
            other => Err(CliError::Invalid(format!(
                "unknown solver `{other}` (as, ba, both)"
            ))),
        }
    }
}

/// Arithmetic grid `start, ..., stop` with `points` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && start < stop) {
            return Err(CliError::Invalid(format!(
                "grid needs start < stop, got {start} and {stop}"
            )));
        }
        if points < 2 {
            return Err(CliError::Invalid(format!(
                "grid needs at least 2 points, got {points}"
            )));
        }
        Ok(Self {
            start,
            stop,
            points,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.stop
                } else {
                    self.start + step * k as f64
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;

    /// `start:stop:points`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Invalid(format!("expected start:stop:points, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let stop = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        Grid::new(start, stop, points)
    }
}

/// Built-in instances listed by `fixtures`.
#[derive(Debug, Clone, Serialize)]
pub struct FixtureInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub m: usize,
    pub n: usize,
    pub d_min: f64,
    pub d_max: f64,
}

pub fn fixtures() -> Vec<FixtureInfo> {
    let entries = [
        (
            "binary",
            "uniform binary source, Hamming distortion (--p sets P(X=1))",
        ),
        (
            "gaussian",
            "Gaussian sigma=2 on [-8, 8), delta=0.5, squared error",
        ),
        (
            "laplacian",
            "Laplacian sigma=2 on [-14, 14), delta=0.2, absolute error",
        ),
        (
            "bifurcation",
            "two letters, three reproductions; curve has an affine piece near [0.14, 0.25]",
        ),
    ];
    entries
        .into_iter()
        .map(|(name, description)| {
            let problem = SourceSpec::parse(name, SourceParams::default())
                .and_then(|s| s.build())
                .expect("fixtures are valid");
            FixtureInfo {
                name,
                description,
                m: problem.m(),
                n: problem.n(),
                d_min: problem.min_distortion(),
                d_max: problem.max_distortion(),
            }
        })
        .collect()
}
