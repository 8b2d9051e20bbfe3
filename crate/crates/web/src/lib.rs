//! Browser bindings: each export takes plain numbers and strings and
//! returns a JSON document for the page to plot.

use ratedist::alternating::SolverState;
use ratedist::sources::{
    analytic_marginal, analytic_rd_binary, analytic_rd_gaussian, analytic_rd_laplacian,
    build_binary, build_gaussian, build_laplacian, GridSpec, SourceFamily,
};
use ratedist::{ba_fixed_slope, kkt_residuals, solve_as, AsOptions, BaOptions, RdProblem};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// A demo source: the problem plus what is known about it in closed form.
struct Source {
    problem: RdProblem,
    kind: Kind,
    sigma: f64,
    grid: Option<GridSpec>,
}

#[derive(Clone, Copy)]
enum Kind {
    Binary,
    Gaussian,
    Laplacian,
}

impl Source {
    fn new(name: &str, sigma: f64, delta: f64) -> Result<Self, String> {
        let err = |e: ratedist::RdError| e.to_string();
        match name {
            "binary" => Ok(Self {
                problem: build_binary(sigma).map_err(err)?,
                kind: Kind::Binary,
                sigma,
                grid: None,
            }),
            "gaussian" | "laplacian" => {
                let gaussian = name == "gaussian";
                let half = if gaussian { 4.0 * sigma } else { 7.0 * sigma };
                let half = (half / delta).ceil() * delta;
                let grid = GridSpec::new(half, delta).map_err(err)?;
                let problem = if gaussian {
                    build_gaussian(&grid, sigma)
                } else {
                    build_laplacian(&grid, sigma)
                }
                .map_err(err)?;
                let kind = if gaussian {
                    Kind::Gaussian
                } else {
                    Kind::Laplacian
                };
                Ok(Self {
                    problem,
                    kind,
                    sigma,
                    grid: Some(grid),
                })
            }
            other => Err(format!("unknown source `{other}`")),
        }
    }

    fn analytic(&self, d: f64) -> f64 {
        match self.kind {
            Kind::Binary => analytic_rd_binary(self.sigma, d),
            Kind::Gaussian => analytic_rd_gaussian(self.sigma, d),
            Kind::Laplacian => analytic_rd_laplacian(self.sigma, d),
        }
    }
}

#[derive(Serialize)]
struct Point {
    d: f64,
    rate: f64,
}

#[derive(Serialize)]
struct Curve {
    alternating: Vec<Point>,
    blahut: Vec<Point>,
    analytic: Vec<Point>,
    d_max: f64,
}

/// Alternating sweep over `points` distortions, a parametric BA sweep over
/// as many slopes, and the closed form, all in nats.
pub fn curve_json(source: &str, param: f64, delta: f64, points: usize) -> Result<String, String> {
    let src = Source::new(source, param, delta)?;
    let problem = &src.problem;
    let points = points.clamp(2, 200);
    let d_max = problem.max_distortion();
    let lo = problem.min_distortion() + 0.02 * (d_max - problem.min_distortion());
    let ds: Vec<f64> = (0..points)
        .map(|k| lo + (d_max - lo) * k as f64 / (points - 1) as f64)
        .collect();

    let mut alternating = Vec::with_capacity(points);
    for &d in &ds {
        let sol = solve_as(problem, d, &AsOptions::default()).map_err(|e| e.to_string())?;
        alternating.push(Point { d, rate: sol.rate });
    }
    let top = alternating
        .iter()
        .map(|p| p.rate)
        .fold(0.0, f64::max)
        .max(1e-3);
    // Slopes up to the steepest point of the alternating sweep.
    let steepest = solve_as(problem, lo, &AsOptions::default())
        .map_err(|e| e.to_string())?
        .lambda;
    let mut blahut = Vec::with_capacity(points);
    for k in 0..points {
        let lambda = steepest * (k + 1) as f64 / points as f64;
        let sol =
            ba_fixed_slope(problem, lambda, &BaOptions::default()).map_err(|e| e.to_string())?;
        blahut.push(Point {
            d: sol.distortion,
            rate: sol.rate,
        });
    }
    let analytic = ds
        .iter()
        .map(|&d| Point {
            d,
            rate: src.analytic(d).max(0.0),
        })
        .filter(|p| p.rate <= 1.5 * top)
        .collect();
    to_json(&Curve {
        alternating,
        blahut,
        analytic,
        d_max,
    })
}

#[derive(Serialize)]
struct Marginal {
    x: Vec<f64>,
    source: Vec<f64>,
    solver: Vec<f64>,
    analytic: Option<Vec<f64>>,
    rate: f64,
    lambda: f64,
}

/// Output marginal found by the alternating solver at `distortion`, next to
/// the source and, for Gaussian and Laplacian sources, the closed form.
pub fn marginal_json(
    source: &str,
    param: f64,
    delta: f64,
    distortion: f64,
) -> Result<String, String> {
    let src = Source::new(source, param, delta)?;
    let sol =
        solve_as(&src.problem, distortion, &AsOptions::default()).map_err(|e| e.to_string())?;
    let x = match src.problem.x_labels() {
        Some(labels) => labels.to_vec(),
        None => (0..src.problem.m()).map(|i| i as f64).collect(),
    };
    let family = match src.kind {
        Kind::Gaussian => Some(SourceFamily::Gaussian),
        Kind::Laplacian => Some(SourceFamily::Laplacian),
        Kind::Binary => None,
    };
    let analytic = match (family, &src.grid) {
        (Some(f), Some(grid)) => analytic_marginal(f, src.sigma, distortion, grid).ok(),
        _ => None,
    };
    to_json(&Marginal {
        x,
        source: src.problem.p().to_vec(),
        solver: sol.r.to_vec(),
        analytic,
        rate: sol.rate,
        lambda: sol.lambda,
    })
}

#[derive(Serialize)]
struct Trace {
    iter: Vec<usize>,
    r_psi: Vec<f64>,
    r_phi: Vec<f64>,
    r_lambda: Vec<f64>,
    r_eta: Vec<f64>,
}

/// Per-iteration KKT residuals, starting from the initial point.
pub fn residuals_json(
    source: &str,
    param: f64,
    delta: f64,
    distortion: f64,
    max_iter: usize,
) -> Result<String, String> {
    let src = Source::new(source, param, delta)?;
    let opts = AsOptions {
        max_iter: max_iter.clamp(1, 20_000),
        record_trace: true,
        ..AsOptions::default()
    };
    let start = kkt_residuals(
        &SolverState::initial(&src.problem),
        &src.problem,
        distortion,
    );
    let sol = solve_as(&src.problem, distortion, &opts).map_err(|e| e.to_string())?;
    let mut trace = Trace {
        iter: vec![],
        r_psi: vec![],
        r_phi: vec![],
        r_lambda: vec![],
        r_eta: vec![],
    };
    for r in std::iter::once(start).chain(sol.trace) {
        trace.iter.push(r.iteration);
        trace.r_psi.push(r.r_psi);
        trace.r_phi.push(r.r_phi);
        trace.r_lambda.push(r.r_lambda);
        trace.r_eta.push(r.r_eta);
    }
    to_json(&trace)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn rd_curve(source: &str, param: f64, delta: f64, points: usize) -> Result<String, JsValue> {
    curve_json(source, param, delta, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn output_marginal(
    source: &str,
    param: f64,
    delta: f64,
    distortion: f64,
) -> Result<String, JsValue> {
    marginal_json(source, param, delta, distortion).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn residual_trace(
    source: &str,
    param: f64,
    delta: f64,
    distortion: f64,
    max_iter: usize,
) -> Result<String, JsValue> {
    residuals_json(source, param, delta, distortion, max_iter).map_err(|e| JsValue::from_str(&e))
}
