//! KKT residuals and linear-segment detection on sampled curves.

use serde::{Deserialize, Serialize};

use crate::alternating::SolverState;
use crate::problem::RdProblem;

/// Absolute KKT residuals of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iteration: usize,
    /// `sum_j |psi_j sum_i K_ij phi_i p_i - 1|`
    pub r_psi: f64,
    /// `sum_i |phi_i sum_j K_ij psi_j r_j - 1|`
    pub r_phi: f64,
    /// `|lambda (sum_ij phi_i psi_j p_i r_j d_ij K_ij - D)|`
    pub r_lambda: f64,
    /// `|sum_j r_j - 1|`
    pub r_eta: f64,
}

impl ResidualRecord {
    pub fn max(&self) -> f64 {
        self.r_psi
            .max(self.r_phi)
            .max(self.r_lambda)
            .max(self.r_eta)
    }
}

pub fn kkt_residuals(state: &SolverState, problem: &RdProblem, target: f64) -> ResidualRecord {
    let p = problem.p();
    let d = problem.d();
    let k = &state.kernel;

    let col = k.t().dot(&(&state.phi * &p));
    let r_psi = col
        .iter()
        .zip(state.psi.iter())
        .map(|(&c, &psi)| (psi * c - 1.0).abs())
        .sum();

    let row = k.dot(&(&state.psi * &state.r));
    let r_phi = row
        .iter()
        .zip(state.phi.iter())
        .map(|(&c, &phi)| (phi * c - 1.0).abs())
        .sum();

    let r_lambda = if state.lambda == 0.0 {
        0.0
    } else {
        let weighted = &state.psi * &state.r;
        let achieved: f64 = k
            .outer_iter()
            .zip(d.outer_iter())
            .enumerate()
            .map(|(i, (krow, drow))| {
                let row: f64 = krow
                    .iter()
                    .zip(drow.iter())
                    .zip(weighted.iter())
                    .map(|((&k, &d), &w)| k * d * w)
                    .sum();
                state.phi[i] * p[i] * row
            })
            .sum();
        (state.lambda * (achieved - target)).abs()
    };

    let r_eta = (state.r.sum() - 1.0).abs();

    ResidualRecord {
        iteration: state.iteration,
        r_psi,
        r_phi,
        r_lambda,
        r_eta,
    }
}

/// One sample of a rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub distortion: f64,
    /// Nats.
    pub rate: f64,
    pub lambda: f64,
}

/// Samples ordered by distortion, with a note on where they came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RdCurve {
    pub points: Vec<CurvePoint>,
    pub solver: String,
    pub source: String,
}

impl RdCurve {
    pub fn new(solver: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            points: Vec::new(),
            solver: solver.into(),
            source: source.into(),
        }
    }

    pub fn from_points(points: &[(f64, f64)]) -> Self {
        Self {
            points: points
                .iter()
                .map(|&(distortion, rate)| CurvePoint {
                    distortion,
                    rate,
                    lambda: f64::NAN,
                })
                .collect(),
            ..Self::default()
        }
    }
}

/// A run of samples on which the curve is affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSegment {
    pub d_start: f64,
    pub d_end: f64,
    /// Least-squares slope of `R` against `D` over the run (negative).
    pub slope: f64,
    /// Sample indices covered, inclusive.
    pub first: usize,
    pub last: usize,
}

/// Default tolerance on second divided differences.
pub const SEGMENT_TOL: f64 = 1e-4;

/// Maximal runs of at least three consecutive samples whose second divided
/// differences `R[D_{k-1}, D_k, D_{k+1}]` are all within `tol` of zero.
pub fn detect_linear_segment(curve: &RdCurve, tol: f64) -> Vec<LinearSegment> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Vec::new();
    }
    let flat: Vec<bool> = pts
        .windows(3)
        .map(|w| second_divided_difference(w).abs() <= tol)
        .collect();

    let mut out = Vec::new();
    let mut k = 0;
    while k < flat.len() {
        if !flat[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < flat.len() && flat[k] {
            k += 1;
        }
        // windows start..k are flat; they cover samples start..=k+1.
        let (first, last) = (start, k + 1);
        out.push(LinearSegment {
            d_start: pts[first].distortion,
            d_end: pts[last].distortion,
            slope: fit_slope(&pts[first..=last]),
            first,
            last,
        });
    }
    out
}

fn second_divided_difference(w: &[CurvePoint]) -> f64 {
    let s01 = (w[1].rate - w[0].rate) / (w[1].distortion - w[0].distortion);
    let s12 = (w[2].rate - w[1].rate) / (w[2].distortion - w[1].distortion);
    (s12 - s01) / (w[2].distortion - w[0].distortion)
}

fn fit_slope(pts: &[CurvePoint]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.distortion).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.rate).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in pts {
        sxy += (p.distortion - mx) * (p.rate - my);
        sxx += (p.distortion - mx).powi(2);
    }
    sxy / sxx
}
