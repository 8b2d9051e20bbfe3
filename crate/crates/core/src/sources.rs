//! Benchmark sources, closed-form rate-distortion functions and closed-form
//! optimal output marginals.
//!
//! Continuous sources are truncated to `[-M, M]` and cut into `2N` cells of
//! width `delta = M / N`. Cell `i` covers `[x_i, x_{i+1})` with
//! `x_i = -M + i delta`, carries mass `F(x_{i+1}) - F(x_i)` and is
//! represented by its left edge `x_i`. Reproduction letters sit on the same
//! points, so the distortion matrix is square.

use ndarray::{array, Array1, Array2};

use crate::error::{RdError, Result};
use crate::problem::RdProblem;

/// Uniform grid on `[-half_width, half_width]` with spacing `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    half_width: f64,
    delta: f64,
    n_half: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite() && half_width > 0.0 && half_width.is_finite()) {
            return Err(RdError::Domain(format!(
                "grid needs positive half-width and spacing, got M = {half_width}, delta = {delta}"
            )));
        }
        let ratio = half_width / delta;
        let n_half = ratio.round();
        if (ratio - n_half).abs() > 1e-9 * ratio.max(1.0) || n_half < 1.0 {
            return Err(RdError::Domain(format!(
                "M / delta = {ratio} is not a positive integer"
            )));
        }
        Ok(Self {
            half_width,
            delta,
            n_half: n_half as usize,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of mass cells, `2N`.
    pub fn cells(&self) -> usize {
        2 * self.n_half
    }

    /// The `2N + 1` cell edges.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells()).map(|i| self.edge(i)).collect()
    }

    /// Left edge of each cell.
    pub fn representatives(&self) -> Vec<f64> {
        (0..self.cells()).map(|i| self.edge(i)).collect()
    }

    /// Index of the cell whose representative is the origin.
    pub fn zero_cell(&self) -> usize {
        self.n_half
    }

    fn edge(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.delta
    }
}

/// Cell masses of a distribution given by its cdf, renormalized to sum to
/// one. Returns `(representatives, masses)`.
pub fn discretize_source<F>(cdf: F, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> f64,
{
    let values: Vec<f64> = grid.edges().into_iter().map(&cdf).collect();
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(RdError::Domain(format!("cdf value {v} outside [0, 1]")));
    }
    let mut masses: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = masses.iter().position(|&m| m < 0.0) {
        return Err(RdError::Domain(format!("cdf decreases on cell {}", i + 1)));
    }
    let total: f64 = masses.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(RdError::Domain(
            "no probability mass inside the grid".into(),
        ));
    }
    masses.iter_mut().for_each(|m| *m /= total);
    Ok((grid.representatives(), masses))
}

pub fn gaussian_cdf(x: f64, sigma: f64) -> f64 {
    0.5 * libm::erfc(-x / (sigma * std::f64::consts::SQRT_2))
}

/// Laplacian with density `exp(-|x| / sigma) / (2 sigma)`.
pub fn laplacian_cdf(x: f64, sigma: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / sigma).exp()
    } else {
        1.0 - 0.5 * (-x / sigma).exp()
    }
}

/// Binary source `(1 - p_one, p_one)` with Hamming distortion.
pub fn build_binary(p_one: f64) -> Result<RdProblem> {
    if !(p_one > 0.0 && p_one < 1.0) {
        return Err(RdError::Domain(format!(
            "p_one must lie in (0, 1), got {p_one}"
        )));
    }
    RdProblem::new(array![1.0 - p_one, p_one], array![[0.0, 1.0], [1.0, 0.0]])
}

fn build_grid_source<C, D>(grid: &GridSpec, cdf: C, dist: D) -> Result<RdProblem>
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (points, masses) = discretize_source(cdf, grid)?;
    let n = points.len();
    // Offsets from index differences so equal gaps give bit-identical entries.
    let delta = grid.delta();
    let d = Array2::from_shape_fn((n, n), |(i, j)| dist((i as f64 - j as f64) * delta));
    RdProblem::new_renormalized(Array1::from(masses), d)?.with_labels(points.clone(), points)
}

/// Discretized Gaussian (standard deviation `sigma`) with squared error.
pub fn build_gaussian(grid: &GridSpec, sigma: f64) -> Result<RdProblem> {
    check_sigma(sigma)?;
    build_grid_source(grid, |x| gaussian_cdf(x, sigma), |e| e * e)
}

/// Discretized Laplacian (scale `sigma`) with absolute error.
pub fn build_laplacian(grid: &GridSpec, sigma: f64) -> Result<RdProblem> {
    check_sigma(sigma)?;
    build_grid_source(grid, |x| laplacian_cdf(x, sigma), f64::abs)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(RdError::Domain(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

/// Gaussian benchmark: `M = 8`, `delta = 0.5`, `sigma = 2`.
pub fn gaussian_fixture() -> RdProblem {
    build_gaussian(&GridSpec::new(8.0, 0.5).expect("valid grid"), 2.0).expect("valid source")
}

/// Laplacian benchmark: `M = 14`, `delta = 0.2`, `sigma = 2`.
pub fn laplacian_fixture() -> RdProblem {
    build_laplacian(&GridSpec::new(14.0, 0.2).expect("valid grid"), 2.0).expect("valid source")
}

/// Two-letter source with three reproduction letters whose curve contains
/// an affine piece between two support changes.
pub fn build_bifurcation_fixture() -> RdProblem {
    RdProblem::new(array![0.4, 0.6], array![[1.0, 0.0, 0.3], [0.0, 1.0, 0.3]])
        .expect("fixture is valid")
}

/// Binary entropy in nats.
pub fn binary_entropy(q: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(q) + term(1.0 - q)
}

/// `H_b(p) - H_b(D)` below `min(p, 1 - p)`, zero above.
pub fn analytic_rd_binary(p_one: f64, distortion: f64) -> f64 {
    let p = p_one.min(1.0 - p_one);
    if distortion >= p {
        0.0
    } else {
        binary_entropy(p) - binary_entropy(distortion.max(0.0))
    }
}

/// `ln(sigma^2 / D) / 2` below `sigma^2`, zero above.
pub fn analytic_rd_gaussian(sigma: f64, distortion: f64) -> f64 {
    let var = sigma * sigma;
    if distortion >= var {
        0.0
    } else {
        0.5 * (var / distortion).ln()
    }
}

/// `ln(sigma / D)` below `sigma`, zero above.
pub fn analytic_rd_laplacian(sigma: f64, distortion: f64) -> f64 {
    if distortion >= sigma {
        0.0
    } else {
        (sigma / distortion).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFamily {
    Gaussian,
    Laplacian,
}

/// Optimal output distribution at distortion `D`, discretized on `grid`
/// with the same cell convention as the source.
///
/// Gaussian: centered Gaussian of variance `sigma^2 - D`. Laplacian: an atom
/// of mass `D^2 / sigma^2` at the origin plus `(1 - D^2 / sigma^2)` times the
/// source density; the atom goes to [`GridSpec::zero_cell`].
pub fn analytic_marginal(
    family: SourceFamily,
    sigma: f64,
    distortion: f64,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    match family {
        SourceFamily::Gaussian => {
            let var = sigma * sigma - distortion;
            if !(distortion > 0.0 && var > 0.0) {
                return Err(RdError::Domain(format!(
                    "D = {distortion} outside (0, sigma^2) = (0, {})",
                    sigma * sigma
                )));
            }
            let sd = var.sqrt();
            Ok(discretize_source(|x| gaussian_cdf(x, sd), grid)?.1)
        }
        SourceFamily::Laplacian => {
            if !(distortion > 0.0 && distortion < sigma) {
                return Err(RdError::Domain(format!(
                    "D = {distortion} outside (0, sigma) = (0, {sigma})"
                )));
            }
            let atom = (distortion / sigma).powi(2);
            let (_, mut masses) = discretize_source(|x| laplacian_cdf(x, sigma), grid)?;
            masses.iter_mut().for_each(|m| *m *= 1.0 - atom);
            masses[grid.zero_cell()] += atom;
            Ok(masses)
        }
    }
}
