//! Alternating Sinkhorn solver for the rate-distortion function at a
//! prescribed distortion.
//!
//! The transition law is parameterised as `w_ij = phi_i K_ij psi_j r_j` with
//! `K_ij = exp(-lambda d_ij)`. Each outer iteration
//!
//! 1. rescales `psi` so that `sum_i w_ij p_i = r_j`,
//! 2. rescales `phi` so that every row of `w` sums to one,
//! 3. solves `G(lambda) = 0` (distortion constraint) by safeguarded Newton and
//!    refreshes `K`,
//! 4. solves `F(eta) = 0` (normalization of `r`) and sets
//!    `r_j = s_j / (eta - beta_j)`, where `s_j` is the column mass of `w` and
//!    `beta_j = -ln psi_j - 1/2`.
//!
//! The source duals `alpha_i` are never formed; they are recoverable as
//! `alpha_i = -p_i (ln phi_i + 1/2)`.

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::diagnostics::{kkt_residuals, ResidualRecord};
use crate::error::{RdError, Result};
use crate::problem::{ConditionalLaw, RdProblem, RdSolution};
use crate::root::newton_decreasing;

/// Options for [`solve_as`].
#[derive(Debug, Clone, PartialEq)]
pub struct AsOptions {
    pub max_iter: usize,
    /// Early exit once the largest of the four KKT residuals is below this.
    pub residual_tol: f64,
    pub newton_tol: f64,
    pub newton_max_steps: usize,
    pub lambda_cap: f64,
    /// Keep the per-iteration residuals in [`RdSolution::trace`].
    pub record_trace: bool,
}

impl Default for AsOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            residual_tol: 1e-9,
            newton_tol: 1e-12,
            newton_max_steps: 50,
            lambda_cap: 1e4,
            record_trace: false,
        }
    }
}

/// Scalings, kernel and duals of one solver run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub phi: Array1<f64>,
    pub psi: Array1<f64>,
    /// `K_ij = exp(-lambda d_ij)` for the current `lambda`.
    pub kernel: Array2<f64>,
    pub r: Array1<f64>,
    pub lambda: f64,
    pub eta: f64,
    /// `beta_j = -ln psi_j - 1/2`, kept in step with `psi`.
    pub beta: Array1<f64>,
    pub iteration: usize,
    levels: DistortionLevels,
}

/// Distinct distortion values and, per matrix entry, which one it holds.
///
/// Grid sources have only `O(M + N)` distinct values, so exponentials are
/// taken per value rather than per entry.
#[derive(Debug, Clone)]
struct DistortionLevels {
    values: Vec<f64>,
    index: Vec<usize>,
}

impl DistortionLevels {
    fn new(d: ndarray::ArrayView2<'_, f64>) -> Self {
        let mut values: Vec<f64> = d.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let index = d
            .iter()
            .map(|x| {
                values
                    .binary_search_by(|v| v.total_cmp(x))
                    .expect("value present")
            })
            .collect();
        Self { values, index }
    }
}

impl SolverState {
    /// Starting point: unit scalings, `lambda = 1`, uniform `r`.
    pub fn initial(problem: &RdProblem) -> Self {
        let (m, n) = (problem.m(), problem.n());
        let mut state = Self {
            phi: Array1::ones(m),
            psi: Array1::ones(n),
            kernel: Array2::zeros((m, n)),
            r: Array1::from_elem(n, 1.0 / n as f64),
            lambda: 1.0,
            eta: 0.5,
            beta: Array1::from_elem(n, -0.5),
            iteration: 0,
            levels: DistortionLevels::new(problem.d()),
        };
        state.set_lambda(1.0, problem);
        state
    }

    /// Sets `lambda` and recomputes the kernel.
    pub fn set_lambda(&mut self, lambda: f64, problem: &RdProblem) {
        debug_assert_eq!(self.levels.index.len(), problem.m() * problem.n());
        self.lambda = lambda;
        let table: Vec<f64> = self
            .levels
            .values
            .iter()
            .map(|&d| (-lambda * d).exp())
            .collect();
        for (k, &l) in self.kernel.iter_mut().zip(&self.levels.index) {
            *k = table[l];
        }
    }

    /// Current transition law `w_ij = phi_i K_ij psi_j r_j`.
    pub fn transition(&self) -> Array2<f64> {
        let mut w = self.kernel.clone();
        for (mut row, &phi) in w.outer_iter_mut().zip(self.phi.iter()) {
            Zip::from(&mut row)
                .and(&self.psi)
                .and(&self.r)
                .for_each(|x, &psi, &r| *x *= phi * psi * r);
        }
        w
    }

    /// Column masses `s_j = sum_i w_ij p_i`.
    pub fn column_mass(&self, p: ArrayView1<'_, f64>) -> Array1<f64> {
        let weighted = &self.phi * &p;
        let mut s = self.kernel.t().dot(&weighted);
        Zip::from(&mut s)
            .and(&self.psi)
            .and(&self.r)
            .for_each(|s, &psi, &r| *s *= psi * r);
        s
    }
}

/// `psi_j <- 1 / sum_i K_ij phi_i p_i`; also refreshes `beta`.
pub fn sinkhorn_update_psi(state: &mut SolverState, p: ArrayView1<'_, f64>) -> Result<()> {
    let weighted = &state.phi * &p;
    let sums = state.kernel.t().dot(&weighted);
    for (j, &s) in sums.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(RdError::ZeroDenominator {
                which: "psi",
                index: j,
            });
        }
    }
    state.psi = sums.mapv(f64::recip);
    state.beta = state.psi.mapv(|psi| -psi.ln() - 0.5);
    Ok(())
}

/// `phi_i <- 1 / sum_j K_ij psi_j r_j`.
pub fn sinkhorn_update_phi(state: &mut SolverState) -> Result<()> {
    let weighted = &state.psi * &state.r;
    let sums = state.kernel.dot(&weighted);
    for (i, &s) in sums.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(RdError::ZeroDenominator {
                which: "phi",
                index: i,
            });
        }
    }
    state.phi = sums.mapv(f64::recip);
    Ok(())
}

/// Distortion residual as a function of a trial slope with the scalings and
/// `r` held fixed: `G(lambda) = sum_ij d_ij p_i phi_i exp(-lambda d_ij) psi_j r_j - D`.
pub fn g_lambda(lambda: f64, state: &SolverState, problem: &RdProblem, target: f64) -> f64 {
    DistortionResidual::new(state, problem, target)
        .eval(lambda)
        .0
}

/// `G` with its terms summed per distinct distortion value.
struct DistortionResidual {
    coeff: Vec<f64>,
    dist: Vec<f64>,
    target: f64,
}

impl DistortionResidual {
    fn new(state: &SolverState, problem: &RdProblem, target: f64) -> Self {
        let levels = &state.levels;
        let p = problem.p();
        let n = problem.n();
        let mut by_level = vec![0.0; levels.values.len()];
        let col: Vec<f64> = state
            .psi
            .iter()
            .zip(state.r.iter())
            .map(|(a, b)| a * b)
            .collect();
        for i in 0..problem.m() {
            let row_weight = p[i] * state.phi[i];
            if row_weight == 0.0 {
                continue;
            }
            let idx = &levels.index[i * n..(i + 1) * n];
            for (&l, &c) in idx.iter().zip(&col) {
                by_level[l] += row_weight * c;
            }
        }
        let mut coeff = Vec::new();
        let mut dist = Vec::new();
        for (&w, &d) in by_level.iter().zip(&levels.values) {
            if w > 0.0 && d > 0.0 {
                coeff.push(w * d);
                dist.push(d);
            }
        }
        Self {
            coeff,
            dist,
            target,
        }
    }

    /// `(G(lambda), G'(lambda))`.
    fn eval(&self, lambda: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut dg = 0.0;
        for (&c, &d) in self.coeff.iter().zip(&self.dist) {
            let t = c * (-lambda * d).exp();
            g += t;
            dg -= t * d;
        }
        (g - self.target, dg)
    }
}

/// Outcome of the slope update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaUpdate {
    pub lambda: f64,
    /// `G` stayed positive up to `lambda_cap`.
    pub capped: bool,
}

/// Solves `G(lambda) = 0` over `lambda >= 0`, warm-started from `state.lambda`.
///
/// Returns `lambda = 0` when `G(0) <= 0`: the distortion constraint is then
/// inactive. Does not modify the state.
pub fn newton_lambda(
    state: &SolverState,
    problem: &RdProblem,
    target: f64,
    opts: &AsOptions,
) -> Result<LambdaUpdate> {
    let g = DistortionResidual::new(state, problem, target);
    let cap = opts.lambda_cap;
    let start = if state.lambda > 0.0 && state.lambda.is_finite() {
        state.lambda.min(cap)
    } else {
        1.0_f64.min(cap)
    };
    let (lo, hi) = if g.eval(start).0 > 0.0 {
        let (mut lo, mut hi) = (start, (2.0 * start).min(cap));
        while g.eval(hi).0 > 0.0 {
            if hi >= cap {
                return Ok(LambdaUpdate {
                    lambda: cap,
                    capped: true,
                });
            }
            lo = hi;
            hi = (2.0 * hi).min(cap);
        }
        (lo, hi)
    } else {
        // G is decreasing, so only now can the constraint be inactive.
        if g.coeff.iter().sum::<f64>() - target <= 0.0 {
            return Ok(LambdaUpdate {
                lambda: 0.0,
                capped: false,
            });
        }
        (0.0, start)
    };
    let lambda = newton_decreasing(
        |x| g.eval(x),
        lo,
        hi,
        start,
        opts.newton_tol,
        opts.newton_max_steps,
        "lambda",
    )?;
    Ok(LambdaUpdate {
        lambda,
        capped: false,
    })
}

/// Largest `beta_j` over columns that carry mass. `F` has its rightmost
/// pole there; columns with `s_j = 0` contribute nothing.
fn active_beta_max(column_mass: ArrayView1<'_, f64>, beta: ArrayView1<'_, f64>) -> Option<f64> {
    column_mass
        .iter()
        .zip(beta.iter())
        .filter(|(&s, _)| s > 0.0)
        .map(|(_, &b)| b)
        .fold(None, |acc: Option<f64>, b| {
            Some(acc.map_or(b, |a| a.max(b)))
        })
}

/// Normalization residual `F(eta) = sum_j s_j / (eta - beta_j) - 1`.
///
/// Defined for `eta` above every `beta_j` whose column carries mass.
pub fn f_eta(eta: f64, column_mass: ArrayView1<'_, f64>, beta: ArrayView1<'_, f64>) -> Result<f64> {
    let bmax = active_beta_max(column_mass, beta)
        .ok_or_else(|| RdError::Domain("all column masses are zero".into()))?;
    if eta <= bmax {
        return Err(RdError::Domain(format!(
            "eta = {eta} is not above max beta = {bmax}"
        )));
    }
    Ok(f_and_derivative(eta, column_mass, beta).0)
}

fn f_and_derivative(eta: f64, s: ArrayView1<'_, f64>, beta: ArrayView1<'_, f64>) -> (f64, f64) {
    let mut f = -1.0;
    let mut df = 0.0;
    for (&sj, &bj) in s.iter().zip(beta.iter()) {
        if sj > 0.0 {
            let inv = 1.0 / (eta - bj);
            f += sj * inv;
            df -= sj * inv * inv;
        }
    }
    (f, df)
}

/// Unique root of `F` to the right of its last pole.
pub fn newton_eta(
    column_mass: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    opts: &AsOptions,
) -> Result<f64> {
    newton_eta_from(column_mass, beta, None, opts)
}

fn newton_eta_from(
    s: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    warm: Option<f64>,
    opts: &AsOptions,
) -> Result<f64> {
    let bmax = active_beta_max(s, beta)
        .ok_or_else(|| RdError::Domain("all column masses are zero".into()))?;
    let total: f64 = s.iter().filter(|&&x| x > 0.0).sum();
    let f = |eta: f64| f_and_derivative(eta, s, beta);

    let mut gap = 1e-12 * bmax.abs().max(1.0);
    while f(bmax + gap).0 <= 0.0 {
        // The root hugs the pole; shrink until F is positive again.
        gap *= 0.5;
        if bmax + gap <= bmax {
            return Ok(bmax + gap * 2.0);
        }
    }
    let lo = bmax + gap;
    let mut hi = bmax + total;
    while f(hi).0 > 0.0 {
        hi += total;
    }
    let x0 = warm.unwrap_or(hi);
    newton_decreasing(f, lo, hi, x0, opts.newton_tol, opts.newton_max_steps, "eta")
}

/// `r_j = s_j / (eta - beta_j)`; zero-mass columns get `r_j = 0`.
pub fn update_r(
    column_mass: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    eta: f64,
) -> Array1<f64> {
    Zip::from(column_mass)
        .and(beta)
        .map_collect(|&s, &b| if s > 0.0 { s / (eta - b) } else { 0.0 })
}

/// Runs one outer iteration in the order: psi, phi, lambda (and kernel),
/// eta, r. Returns the slope update for cap bookkeeping.
pub fn as_iteration(
    state: &mut SolverState,
    problem: &RdProblem,
    target: f64,
    opts: &AsOptions,
) -> Result<LambdaUpdate> {
    let p = problem.p();
    sinkhorn_update_psi(state, p)?;
    sinkhorn_update_phi(state)?;
    let lam = newton_lambda(state, problem, target, opts)?;
    state.set_lambda(lam.lambda, problem);
    let s = state.column_mass(p);
    let eta = newton_eta_from(s.view(), state.beta.view(), Some(state.eta), opts)?;
    state.eta = eta;
    state.r = update_r(s.view(), state.beta.view(), eta);
    state.iteration += 1;
    Ok(lam)
}

/// Rate in nats read off the state: `sum_ij (phi_i p_i K_ij psi_j r_j) ln(phi_i K_ij psi_j)`.
pub fn state_rate(state: &SolverState, p: ArrayView1<'_, f64>) -> f64 {
    let mut total = 0.0;
    for (i, krow) in state.kernel.outer_iter().enumerate() {
        let phi = state.phi[i];
        let pi = p[i];
        for (j, &k) in krow.iter().enumerate() {
            let ratio = phi * k * state.psi[j];
            let mass = pi * ratio * state.r[j];
            if mass > 0.0 {
                total += mass * ratio.ln();
            }
        }
    }
    total
}

/// Computes `R(D)` for the given distortion target.
///
/// Stops after `max_iter` iterations or when all four KKT residuals drop
/// below `residual_tol`; a run that hits `max_iter` comes back with
/// `converged = false` rather than an error. Targets at or above
/// [`RdProblem::max_distortion`] return the zero-rate solution directly.
pub fn solve_as(problem: &RdProblem, target: f64, opts: &AsOptions) -> Result<RdSolution> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(RdError::Domain(format!(
            "distortion target must be positive, got {target}"
        )));
    }
    if target >= problem.max_distortion() {
        return Ok(zero_rate_solution(problem));
    }
    let mut state = SolverState::initial(problem);
    let mut trace = Vec::new();
    let mut residuals = ResidualRecord::default();
    let mut converged = false;
    let mut capped = false;
    while state.iteration < opts.max_iter {
        let lam = as_iteration(&mut state, problem, target, opts)?;
        capped = lam.capped;
        residuals = kkt_residuals(&state, problem, target);
        if opts.record_trace {
            trace.push(residuals);
        }
        if residuals.max() < opts.residual_tol {
            converged = true;
            break;
        }
    }
    Ok(finish(state, problem, residuals, converged, capped, trace))
}

/// Every source letter mapped to the column with the least average
/// distortion.
fn zero_rate_solution(problem: &RdProblem) -> RdSolution {
    let cols = problem.column_distortions();
    let best = cols
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .expect("non-empty alphabet");
    let mut r = Array1::zeros(problem.n());
    r[best] = 1.0;
    let w = ConditionalLaw::independent(problem.m(), r.view());
    RdSolution {
        rate: 0.0,
        distortion: cols[best],
        w,
        r,
        lambda: 0.0,
        iterations: 0,
        converged: true,
        lambda_capped: false,
        residuals: ResidualRecord::default(),
        trace: Vec::new(),
    }
}

fn finish(
    state: SolverState,
    problem: &RdProblem,
    residuals: ResidualRecord,
    converged: bool,
    lambda_capped: bool,
    trace: Vec<ResidualRecord>,
) -> RdSolution {
    let p = problem.p();
    let rate = state_rate(&state, p).max(0.0);
    let w = ConditionalLaw::from_matrix_unchecked(state.transition());
    let distortion = crate::problem::expected_distortion(&w, p, problem.d());
    RdSolution {
        rate,
        distortion,
        w,
        r: state.r,
        lambda: state.lambda,
        iterations: state.iteration,
        converged,
        lambda_capped,
        residuals,
        trace,
    }
}
