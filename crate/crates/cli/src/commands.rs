use std::time::Instant;

use ratedist::alternating::SolverState;
use ratedist::sources::{build_binary, gaussian_fixture, laplacian_fixture};
use ratedist::{
    ba_fixed_slope, ba_search_slope, kkt_residuals, solve_as, AsOptions, BaOptions, BaSolution,
    RdError, RdProblem, RdSolution, ResidualRecord,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Grid, SolverChoice, SourceSpec};
use crate::error::{CliError, Result};

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub as_opts: AsOptions,
    pub ba_opts: BaOptions,
}

impl Default for SolverSettings {
    /// Library defaults, except that the BA slope search lands within 1e-9
    /// of the target so its rate is comparable with the alternating one.
    fn default() -> Self {
        Self {
            as_opts: AsOptions::default(),
            ba_opts: BaOptions {
                slope_search_tol: 1e-9,
                ..BaOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub source: SourceSpec,
    pub distortion: f64,
    pub solver: SolverChoice,
    pub settings: SolverSettings,
    /// Include `w` and `r` in the report.
    pub full: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsReport {
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub distortion: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lambda_capped: bool,
    pub residuals: ResidualRecord,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaReport {
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub distortion: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub search_steps: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub source: String,
    pub target: f64,
    pub d_min: f64,
    pub d_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_rate_nats: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternating: Option<AsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blahut: Option<BaReport>,
    /// `|rate_AS - rate_BA|` when both ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_difference: Option<f64>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.alternating.as_ref().is_none_or(|r| r.converged)
            && self.blahut.as_ref().is_none_or(|r| r.converged)
    }

    /// The report as curve rows: the alternating run first, then BA.
    pub fn rows(&self) -> Vec<CurveRow> {
        let mut rows = Vec::new();
        if let Some(a) = &self.alternating {
            rows.push(CurveRow {
                d: self.target,
                rate_nats: Some(a.rate_nats),
                rate_bits: Some(a.rate_bits),
                lambda: Some(a.lambda),
                iterations: Some(a.iterations),
                converged: a.converged,
                r_psi: Some(a.residuals.r_psi),
                r_phi: Some(a.residuals.r_phi),
                r_lambda: Some(a.residuals.r_lambda),
                r_eta: Some(a.residuals.r_eta),
                wall_time_s: a.wall_time_s,
            });
        }
        if let Some(b) = &self.blahut {
            rows.push(CurveRow {
                rate_nats: Some(b.rate_nats),
                rate_bits: Some(b.rate_bits),
                lambda: Some(b.lambda),
                iterations: Some(b.iterations),
                converged: b.converged,
                ..CurveRow::failed(b.distortion, b.wall_time_s)
            });
        }
        rows
    }

    /// [`SolveReport::rows`] with a leading `solver` column.
    pub fn labelled_rows(&self) -> Vec<SolveRow> {
        let labels = self
            .alternating
            .as_ref()
            .map(|_| "as")
            .into_iter()
            .chain(self.blahut.as_ref().map(|_| "ba"));
        labels
            .zip(self.rows())
            .map(|(solver, row)| SolveRow {
                solver,
                d: row.d,
                rate_nats: row.rate_nats,
                rate_bits: row.rate_bits,
                lambda: row.lambda,
                iterations: row.iterations,
                converged: row.converged,
                r_psi: row.r_psi,
                r_phi: row.r_phi,
                r_lambda: row.r_lambda,
                r_eta: row.r_eta,
                wall_time_s: row.wall_time_s,
            })
            .collect()
    }
}

/// CSV row of `solve`: a [`CurveRow`] tagged with the solver that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRow {
    pub solver: &'static str,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "R_nats")]
    pub rate_nats: Option<f64>,
    #[serde(rename = "R_bits")]
    pub rate_bits: Option<f64>,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub r_psi: Option<f64>,
    pub r_phi: Option<f64>,
    pub r_lambda: Option<f64>,
    pub r_eta: Option<f64>,
    pub wall_time_s: f64,
}

fn matrix_rows(w: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    w.outer_iter().map(|row| row.to_vec()).collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn as_report(sol: &RdSolution, wall: f64, full: bool) -> AsReport {
    AsReport {
        rate_nats: sol.rate,
        rate_bits: sol.rate_bits(),
        distortion: sol.distortion,
        lambda: sol.lambda,
        iterations: sol.iterations,
        converged: sol.converged,
        lambda_capped: sol.lambda_capped,
        residuals: sol.residuals,
        wall_time_s: wall,
        r: full.then(|| sol.r.to_vec()),
        w: full.then(|| matrix_rows(sol.w.matrix())),
    }
}

fn ba_report(sol: &BaSolution, steps: usize, wall: f64, full: bool) -> BaReport {
    BaReport {
        rate_nats: sol.rate,
        rate_bits: sol.rate / std::f64::consts::LN_2,
        distortion: sol.distortion,
        lambda: sol.lambda,
        iterations: sol.iterations,
        converged: sol.converged,
        search_steps: steps,
        wall_time_s: wall,
        r: full.then(|| sol.r.to_vec()),
        w: full.then(|| matrix_rows(sol.w.matrix())),
    }
}

pub fn cmd_solve(config: &SolveConfig) -> Result<SolveReport> {
    let problem = config.source.build()?;
    let target = config.distortion;
    let (d_min, d_max) = (problem.min_distortion(), problem.max_distortion());
    let mut warnings = Vec::new();
    if target >= d_max {
        warnings.push("distortion constraint inactive".to_string());
    }

    let alternating = match config.solver {
        SolverChoice::As | SolverChoice::Both => {
            let (sol, wall) = timed(|| solve_as(&problem, target, &config.settings.as_opts));
            let sol = sol?;
            if sol.lambda_capped {
                warnings.push(format!(
                    "lambda reached its cap {}",
                    config.settings.as_opts.lambda_cap
                ));
            }
            Some(as_report(&sol, wall, config.full))
        }
        SolverChoice::Ba => None,
    };

    let blahut = match config.solver {
        SolverChoice::Ba | SolverChoice::Both => {
            let (found, wall) =
                timed(|| ba_search_slope(&problem, target, &config.settings.ba_opts));
            match found {
                Ok(found) => Some(ba_report(
                    &found.solution,
                    found.search_steps,
                    wall,
                    config.full,
                )),
                Err(RdError::TargetUnreachable { .. }) if target >= d_max => {
                    warnings
                        .push("slope search skipped: rate is zero at this distortion".to_string());
                    None
                }
                Err(e) => return Err(e.into()),
            }
        }
        SolverChoice::As => None,
    };

    let rate_difference = match (&alternating, &blahut) {
        (Some(a), Some(b)) => Some((a.rate_nats - b.rate_nats).abs()),
        _ => None,
    };
    Ok(SolveReport {
        source: config.source.to_string(),
        target,
        d_min,
        d_max,
        analytic_rate_nats: config.source.analytic_rate(target).map(|r| r.max(0.0)),
        alternating,
        blahut,
        rate_difference,
        warnings,
    })
}

/// What a curve sweep varies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sweep {
    Distortion(Grid),
    /// Parametric Blahut-Arimoto sweep over slopes.
    Slope(Grid),
}

#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub source: SourceSpec,
    pub solver: SolverChoice,
    pub sweep: Sweep,
    pub settings: SolverSettings,
}

/// One row of the curve CSV. Failed points keep their row with empty values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "R_nats")]
    pub rate_nats: Option<f64>,
    #[serde(rename = "R_bits")]
    pub rate_bits: Option<f64>,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub r_psi: Option<f64>,
    pub r_phi: Option<f64>,
    pub r_lambda: Option<f64>,
    pub r_eta: Option<f64>,
    pub wall_time_s: f64,
}

impl CurveRow {
    fn failed(d: f64, wall: f64) -> Self {
        Self {
            d,
            rate_nats: None,
            rate_bits: None,
            lambda: None,
            iterations: None,
            converged: false,
            r_psi: None,
            r_phi: None,
            r_lambda: None,
            r_eta: None,
            wall_time_s: wall,
        }
    }

    pub fn from_as(d: f64, sol: &RdSolution, wall: f64) -> Self {
        Self {
            d,
            rate_nats: Some(sol.rate),
            rate_bits: Some(sol.rate_bits()),
            lambda: Some(sol.lambda),
            iterations: Some(sol.iterations),
            converged: sol.converged,
            r_psi: Some(sol.residuals.r_psi),
            r_phi: Some(sol.residuals.r_phi),
            r_lambda: Some(sol.residuals.r_lambda),
            r_eta: Some(sol.residuals.r_eta),
            wall_time_s: wall,
        }
    }

    pub fn from_ba(sol: &BaSolution, wall: f64) -> Self {
        Self {
            d: sol.distortion,
            rate_nats: Some(sol.rate),
            rate_bits: Some(sol.rate / std::f64::consts::LN_2),
            lambda: Some(sol.lambda),
            iterations: Some(sol.iterations),
            converged: sol.converged,
            wall_time_s: wall,
            ..Self::failed(sol.distortion, wall)
        }
    }
}

/// Sweeps the grid in parallel; rows come back in grid order.
pub fn cmd_curve(config: &CurveConfig) -> Result<Vec<CurveRow>> {
    let problem = config.source.build()?;
    let settings = &config.settings;
    let rows = match (config.solver, config.sweep) {
        (SolverChoice::As, Sweep::Distortion(grid)) => grid
            .values()
            .into_par_iter()
            .map(|d| {
                let (sol, wall) = timed(|| solve_as(&problem, d, &settings.as_opts));
                sol.map_or_else(
                    |_| CurveRow::failed(d, wall),
                    |s| CurveRow::from_as(d, &s, wall),
                )
            })
            .collect(),
        (SolverChoice::Ba, Sweep::Distortion(grid)) => grid
            .values()
            .into_par_iter()
            .map(|d| {
                let (found, wall) = timed(|| ba_search_slope(&problem, d, &settings.ba_opts));
                match found {
                    Ok(found) => CurveRow {
                        d,
                        ..CurveRow::from_ba(&found.solution, wall)
                    },
                    Err(_) => CurveRow::failed(d, wall),
                }
            })
            .collect(),
        (SolverChoice::Ba, Sweep::Slope(grid)) => {
            let mut rows: Vec<CurveRow> = grid
                .values()
                .into_par_iter()
                .map(|lambda| {
                    let (sol, wall) = timed(|| ba_fixed_slope(&problem, lambda, &settings.ba_opts));
                    sol.map_or_else(
                        |_| CurveRow::failed(f64::NAN, wall),
                        |s| CurveRow::from_ba(&s, wall),
                    )
                })
                .collect();
            rows.sort_by(|a, b| a.d.total_cmp(&b.d));
            rows
        }
        (SolverChoice::As, Sweep::Slope(_)) => {
            return Err(CliError::Invalid(
                "the alternating solver takes distortion targets; use --dmin/--dmax/--points"
                    .into(),
            ))
        }
        (SolverChoice::Both, _) => {
            return Err(CliError::Invalid(
                "curve runs one solver at a time; pick as or ba".into(),
            ))
        }
    };
    Ok(rows)
}

/// One benchmark case for `compare`.
#[derive(Debug, Clone)]
pub struct CompareCase {
    pub label: String,
    pub problem: RdProblem,
    pub distortion: f64,
}

/// The six benchmark cases: binary at 0.1 and 0.4, the Gaussian and
/// Laplacian fixtures at 0.5 and 1.0.
pub fn benchmark_cases() -> Vec<CompareCase> {
    let binary = build_binary(0.5).expect("valid");
    let gaussian = gaussian_fixture();
    let laplacian = laplacian_fixture();
    let case = |label: &str, problem: &RdProblem, distortion| CompareCase {
        label: label.to_string(),
        problem: problem.clone(),
        distortion,
    };
    vec![
        case("binary", &binary, 0.1),
        case("binary", &binary, 0.4),
        case("gaussian", &gaussian, 0.5),
        case("gaussian", &gaussian, 1.0),
        case("laplacian", &laplacian, 0.5),
        case("laplacian", &laplacian, 1.0),
    ]
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub cases: Vec<CompareCase>,
    pub repeats: usize,
    /// Iteration budget for both solvers.
    pub max_iter: usize,
    pub slope_search_tol: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            cases: benchmark_cases(),
            repeats: 1,
            max_iter: 1000,
            slope_search_tol: 1e-9,
        }
    }
}

impl CompareConfig {
    /// Both solvers spend their whole budget: no early exit on either side.
    pub fn as_options(&self) -> AsOptions {
        AsOptions {
            max_iter: self.max_iter,
            residual_tol: 0.0,
            ..AsOptions::default()
        }
    }

    pub fn ba_options(&self) -> BaOptions {
        BaOptions {
            max_iter: self.max_iter,
            tol: 0.0,
            slope_search_tol: self.slope_search_tol,
            ..BaOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub case: String,
    #[serde(rename = "D")]
    pub d: f64,
    pub lambda_as: f64,
    pub lambda_ba: f64,
    pub rate_as: f64,
    pub rate_ba: f64,
    pub abs_difference: f64,
    pub as_mean_s: f64,
    pub as_median_s: f64,
    pub ba_mean_s: f64,
    pub ba_median_s: f64,
    pub speedup: f64,
    pub ba_search_steps: usize,
}

fn mean_and_median(mut xs: Vec<f64>) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let k = xs.len() / 2;
    let median = if xs.len() % 2 == 1 {
        xs[k]
    } else {
        0.5 * (xs[k - 1] + xs[k])
    };
    (mean, median)
}

/// Times both solvers on each case. Runs sequentially so timings do not
/// compete for cores.
pub fn cmd_compare(config: &CompareConfig) -> Result<Vec<CompareRow>> {
    if config.repeats == 0 {
        return Err(CliError::Invalid("repeats must be at least 1".into()));
    }
    let as_opts = config.as_options();
    let ba_opts = config.ba_options();
    let mut rows = Vec::with_capacity(config.cases.len());
    for case in &config.cases {
        let mut as_times = Vec::with_capacity(config.repeats);
        let mut ba_times = Vec::with_capacity(config.repeats);
        let mut last = None;
        for _ in 0..config.repeats {
            let (sol, t_as) = timed(|| solve_as(&case.problem, case.distortion, &as_opts));
            let (found, t_ba) = timed(|| ba_search_slope(&case.problem, case.distortion, &ba_opts));
            as_times.push(t_as);
            ba_times.push(t_ba);
            last = Some((sol?, found?));
        }
        let (sol, found) = last.expect("at least one repeat");
        let (as_mean_s, as_median_s) = mean_and_median(as_times);
        let (ba_mean_s, ba_median_s) = mean_and_median(ba_times);
        rows.push(CompareRow {
            case: case.label.clone(),
            d: case.distortion,
            lambda_as: sol.lambda,
            lambda_ba: found.solution.lambda,
            rate_as: sol.rate,
            rate_ba: found.solution.rate,
            abs_difference: (sol.rate - found.solution.rate).abs(),
            as_mean_s,
            as_median_s,
            ba_mean_s,
            ba_median_s,
            speedup: ba_mean_s / as_mean_s,
            ba_search_steps: found.search_steps,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub iter: usize,
    pub r_psi: f64,
    pub r_phi: f64,
    pub r_lambda: f64,
    pub r_eta: f64,
}

impl From<ResidualRecord> for ResidualRow {
    fn from(r: ResidualRecord) -> Self {
        Self {
            iter: r.iteration,
            r_psi: r.r_psi,
            r_phi: r.r_phi,
            r_lambda: r.r_lambda,
            r_eta: r.r_eta,
        }
    }
}

/// Residual trace of one alternating run, starting with the initial point
/// as iteration 0.
pub fn cmd_residuals(
    source: &SourceSpec,
    distortion: f64,
    opts: &AsOptions,
) -> Result<Vec<ResidualRow>> {
    let problem = source.build()?;
    let opts = AsOptions {
        record_trace: true,
        ..opts.clone()
    };
    let start = kkt_residuals(&SolverState::initial(&problem), &problem, distortion);
    let sol = solve_as(&problem, distortion, &opts)?;
    Ok(std::iter::once(start)
        .chain(sol.trace)
        .map(ResidualRow::from)
        .collect())
}
