//! Blahut-Arimoto baseline.
//!
//! For a fixed slope `lambda` the classical recursion alternates
//! `w_ij = r_j exp(-lambda d_ij) / sum_k r_k exp(-lambda d_ik)` and
//! `r_j = sum_i p_i w_ij`, landing on the point of the curve where the slope
//! is `-lambda`. Hitting a prescribed distortion therefore needs an outer
//! search over `lambda`.

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::error::{RdError, Result};
use crate::problem::{expected_distortion, induced_marginal, ConditionalLaw, RdProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct BaOptions {
    pub max_iter: usize,
    /// Stop once successive rates differ by less than this.
    pub tol: f64,
    /// Accepted `|D_achieved - D_target|` in the slope search.
    pub slope_search_tol: f64,
    /// Budget of fixed-slope runs in the slope search.
    pub slope_search_max: usize,
    /// Keep `R + lambda D` per iteration in [`BaSolution::objective_trace`].
    pub record_trace: bool,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-10,
            slope_search_tol: 1e-6,
            slope_search_max: 100,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaSolution {
    /// Nats.
    pub rate: f64,
    pub distortion: f64,
    pub w: ConditionalLaw,
    pub r: Array1<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Parametric point of the curve with slope `-lambda`.
pub fn ba_fixed_slope(problem: &RdProblem, lambda: f64, opts: &BaOptions) -> Result<BaSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RdError::Domain(format!(
            "slope must be nonnegative, got {lambda}"
        )));
    }
    let p = problem.p();
    let (m, n) = (problem.m(), problem.n());
    let kernel = problem.d().mapv(|d| (-lambda * d).exp());
    let mut r = Array1::from_elem(n, 1.0 / n as f64);
    let mut w = Array2::zeros((m, n));
    let mut rate = f64::INFINITY;
    let mut distortion = f64::NAN;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        for (i, (mut wrow, krow)) in w.outer_iter_mut().zip(kernel.outer_iter()).enumerate() {
            Zip::from(&mut wrow)
                .and(&krow)
                .and(&r)
                .for_each(|w, &k, &r| *w = k * r);
            let total = wrow.sum();
            if total.is_nan() || total <= 0.0 {
                return Err(RdError::ZeroDenominator {
                    which: "ba row",
                    index: i,
                });
            }
            wrow /= total;
        }
        let law = ConditionalLaw::from_matrix_unchecked(w);
        r = induced_marginal(&law, p);
        let next = mutual_information(&law, p, &r);
        distortion = expected_distortion(&law, p, problem.d());
        w = law.into_matrix();
        iterations += 1;
        if opts.record_trace {
            trace.push(next + lambda * distortion);
        }
        let change = (next - rate).abs();
        rate = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(BaSolution {
        rate: rate.max(0.0),
        distortion,
        w: ConditionalLaw::from_matrix_unchecked(w),
        r,
        lambda,
        iterations,
        converged,
        objective_trace: trace,
    })
}

fn mutual_information(w: &ConditionalLaw, p: ArrayView1<'_, f64>, r: &Array1<f64>) -> f64 {
    let mut total = 0.0;
    for (row, &pi) in w.matrix().outer_iter().zip(p.iter()) {
        for (&wij, &rj) in row.iter().zip(r.iter()) {
            let mass = pi * wij;
            if mass > 0.0 {
                total += mass * (wij / rj).ln();
            }
        }
    }
    total
}

/// Slope search result.
#[derive(Debug, Clone)]
pub struct BaSearch {
    pub solution: BaSolution,
    /// Number of fixed-slope runs performed, including bracketing.
    pub search_steps: usize,
}

/// Largest slope tried while bracketing before giving up.
const LAMBDA_CEILING: f64 = 1e8;

/// Bisects on `lambda` until a fixed-slope run lands within
/// `slope_search_tol` of `target`. Runs that exhaust `max_iter` count as
/// final; check `solution.converged`.
///
/// Fails with [`RdError::LinearSegment`] when the bracket collapses onto one
/// slope whose achieved distortions still straddle the target: the curve is
/// affine there and no single slope identifies the point.
pub fn ba_search_slope(problem: &RdProblem, target: f64, opts: &BaOptions) -> Result<BaSearch> {
    let (low, high) = (problem.min_distortion(), problem.max_distortion());
    if !(target > low && target < high) {
        return Err(RdError::TargetUnreachable { target, low, high });
    }
    let tol = opts.slope_search_tol;
    let hit = |s: &BaSolution| (s.distortion - target).abs() <= tol;
    let mut steps = 0;
    let run = |lambda: f64, steps: &mut usize| {
        *steps += 1;
        ba_fixed_slope(problem, lambda, opts)
    };

    let mut lo = 0.0;
    let mut lo_d = f64::INFINITY;
    let mut hi = 1.0;
    let mut best = run(hi, &mut steps)?;
    while best.distortion >= target {
        if hit(&best) {
            return Ok(BaSearch {
                solution: best,
                search_steps: steps,
            });
        }
        lo = hi;
        lo_d = best.distortion;
        hi *= 2.0;
        if hi > LAMBDA_CEILING {
            return Err(RdError::TargetUnreachable { target, low, high });
        }
        best = run(hi, &mut steps)?;
    }
    let mut hi_d = best.distortion;

    let mut collapsed = false;
    while steps < opts.slope_search_max {
        if hit(&best) {
            return Ok(BaSearch {
                solution: best,
                search_steps: steps,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi.max(1.0) {
            collapsed = true;
            break;
        }
        best = run(mid, &mut steps)?;
        if best.distortion > target {
            lo = mid;
            lo_d = best.distortion;
        } else {
            hi = mid;
            hi_d = best.distortion;
        }
    }
    if hit(&best) {
        return Ok(BaSearch {
            solution: best,
            search_steps: steps,
        });
    }
    if !collapsed {
        return Err(RdError::RootNotConverged {
            what: "slope search",
            steps,
            residual: best.distortion - target,
        });
    }
    Err(RdError::LinearSegment {
        target,
        lambda: 0.5 * (lo + hi),
        d_low: hi_d,
        d_high: lo_d,
    })
}
