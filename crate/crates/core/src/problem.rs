//! Problem instances and the objective and constraint evaluations shared by
//! both solvers.
//!
//! A problem is a source distribution `p` over `M` letters together with an
//! `M x N` distortion matrix `d`. A test channel is an `M x N` row-stochastic
//! matrix `w`; its output marginal is `r_j = sum_i w_ij p_i`. All
//! logarithms are natural, so rates are in nats.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::diagnostics::ResidualRecord;
use crate::error::{RdError, Result};

/// Tolerance on `sum(p) == 1` accepted at construction.
pub const PROB_TOL: f64 = 1e-12;

/// Row-sum tolerance for a [`ConditionalLaw`].
pub const ROW_TOL: f64 = 1e-9;

/// A discrete memoryless source with a distortion measure.
#[derive(Debug, Clone, PartialEq)]
pub struct RdProblem {
    p: Array1<f64>,
    d: Array2<f64>,
    x_labels: Option<Vec<f64>>,
    y_labels: Option<Vec<f64>>,
}

impl RdProblem {
    /// Builds a problem, rejecting it if any invariant is violated.
    pub fn new(p: Array1<f64>, d: Array2<f64>) -> Result<Self> {
        let violations = validate_problem(p.view(), d.view());
        if !violations.is_empty() {
            return Err(RdError::InvalidProblem(violations));
        }
        Ok(Self {
            p,
            d,
            x_labels: None,
            y_labels: None,
        })
    }

    /// Like [`RdProblem::new`] but rescales `p` to sum to one instead of
    /// rejecting a normalization error. Every other invariant is still enforced.
    pub fn new_renormalized(p: Array1<f64>, d: Array2<f64>) -> Result<Self> {
        let total = p.sum();
        if total.is_finite() && total > 0.0 && p.iter().all(|&x| x >= 0.0) {
            Self::new(&p / total, d)
        } else {
            Self::new(p, d)
        }
    }

    /// Attaches alphabet coordinates (grid points for discretized sources).
    pub fn with_labels(mut self, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let mut bad = Vec::new();
        if x.len() != self.m() {
            bad.push(format!(
                "x_labels has length {}, expected {}",
                x.len(),
                self.m()
            ));
        }
        if y.len() != self.n() {
            bad.push(format!(
                "y_labels has length {}, expected {}",
                y.len(),
                self.n()
            ));
        }
        if !bad.is_empty() {
            return Err(RdError::InvalidProblem(bad));
        }
        self.x_labels = Some(x);
        self.y_labels = Some(y);
        Ok(self)
    }

    pub fn p(&self) -> ArrayView1<'_, f64> {
        self.p.view()
    }

    pub fn d(&self) -> ArrayView2<'_, f64> {
        self.d.view()
    }

    pub fn x_labels(&self) -> Option<&[f64]> {
        self.x_labels.as_deref()
    }

    pub fn y_labels(&self) -> Option<&[f64]> {
        self.y_labels.as_deref()
    }

    /// Source alphabet size.
    pub fn m(&self) -> usize {
        self.p.len()
    }

    /// Reproduction alphabet size.
    pub fn n(&self) -> usize {
        self.d.ncols()
    }

    /// Per-column expected distortion `sum_i p_i d_ij`, i.e. the distortion of
    /// always answering letter `j`.
    pub fn column_distortions(&self) -> Array1<f64> {
        self.d.t().dot(&self.p)
    }

    /// Smallest distortion reachable at zero rate: `min_j sum_i p_i d_ij`.
    pub fn max_distortion(&self) -> f64 {
        self.column_distortions()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest achievable distortion: `sum_i p_i min_j d_ij`.
    pub fn min_distortion(&self) -> f64 {
        self.d
            .outer_iter()
            .zip(self.p.iter())
            .map(|(row, &pi)| pi * row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }
}

/// Checks every problem invariant and returns one message per violation.
/// Locations are 1-based `(row, column)` pairs. An empty list means valid.
pub fn validate_problem(p: ArrayView1<'_, f64>, d: ArrayView2<'_, f64>) -> Vec<String> {
    let mut out = Vec::new();
    if p.is_empty() {
        out.push("source alphabet is empty".to_string());
    }
    if d.ncols() == 0 {
        out.push("reproduction alphabet is empty".to_string());
    }
    if d.nrows() != p.len() {
        out.push(format!(
            "distortion matrix has {} rows but p has length {}",
            d.nrows(),
            p.len()
        ));
    }
    for (i, &pi) in p.iter().enumerate() {
        if !pi.is_finite() {
            out.push(format!("non-finite probability at {}", i + 1));
        } else if pi < 0.0 {
            out.push(format!("negative probability {pi} at {}", i + 1));
        }
    }
    let total: f64 = p.sum();
    if !p.is_empty() && (total - 1.0).abs() > PROB_TOL {
        out.push(format!("p sums to {total}"));
    }
    for ((i, j), &dij) in d.indexed_iter() {
        if !dij.is_finite() {
            out.push(format!("non-finite distortion at ({},{})", i + 1, j + 1));
        } else if dij < 0.0 {
            out.push(format!(
                "negative distortion {dij} at ({},{})",
                i + 1,
                j + 1
            ));
        }
    }
    out
}

/// A row-stochastic test channel `w_ij = W(y_j | x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLaw {
    w: Array2<f64>,
}

impl ConditionalLaw {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        let mut bad = Vec::new();
        for ((i, j), &x) in w.indexed_iter() {
            if !(x >= 0.0 && x.is_finite()) {
                bad.push(format!(
                    "invalid transition probability {x} at ({},{})",
                    i + 1,
                    j + 1
                ));
            }
        }
        for (i, row) in w.outer_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > ROW_TOL {
                bad.push(format!("row {} sums to {s}", i + 1));
            }
        }
        if bad.is_empty() {
            Ok(Self { w })
        } else {
            Err(RdError::InvalidProblem(bad))
        }
    }

    /// Wraps a matrix without checking row sums. Used for solver output,
    /// whose rows are stochastic only up to the reported residuals.
    pub fn from_matrix_unchecked(w: Array2<f64>) -> Self {
        Self { w }
    }

    /// Every row equal to `r`.
    pub fn independent(m: usize, r: ArrayView1<'_, f64>) -> Self {
        let mut w = Array2::zeros((m, r.len()));
        w.rows_mut().into_iter().for_each(|mut row| row.assign(&r));
        Self { w }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.w
    }
}

/// `sum_ij w_ij p_i [ln w_ij - ln r_j]`, skipping zero-mass terms.
///
/// With `r` equal to the induced marginal this is the mutual information
/// `I(X;Y)`; for any other `r` it exceeds it by `KL(induced || r)`.
pub fn commot_objective(
    w: &ConditionalLaw,
    p: ArrayView1<'_, f64>,
    r: ArrayView1<'_, f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, row) in w.w.outer_iter().enumerate() {
        let pi = p[i];
        for (j, &wij) in row.iter().enumerate() {
            let mass = wij * pi;
            if mass == 0.0 {
                continue;
            }
            if r[j] <= 0.0 {
                return Err(RdError::Domain(format!(
                    "r_{} = {} but column {} carries mass",
                    j + 1,
                    r[j],
                    j + 1
                )));
            }
            total += mass * (wij.ln() - r[j].ln());
        }
    }
    Ok(total)
}

/// `sum_ij w_ij p_i d_ij`.
pub fn expected_distortion(
    w: &ConditionalLaw,
    p: ArrayView1<'_, f64>,
    d: ArrayView2<'_, f64>,
) -> f64 {
    w.w.outer_iter()
        .zip(d.outer_iter())
        .zip(p.iter())
        .map(|((wr, dr), &pi)| pi * wr.dot(&dr))
        .sum()
}

/// Output marginal `r_j = sum_i w_ij p_i`.
pub fn induced_marginal(w: &ConditionalLaw, p: ArrayView1<'_, f64>) -> Array1<f64> {
    w.w.t().dot(&p)
}

/// Result of a rate-distortion solve at one distortion target.
#[derive(Debug, Clone)]
pub struct RdSolution {
    /// Rate in nats.
    pub rate: f64,
    /// Achieved expected distortion.
    pub distortion: f64,
    pub w: ConditionalLaw,
    /// Output marginal.
    pub r: Array1<f64>,
    /// Magnitude of the rate-distortion slope at the solution.
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the distortion dual hit its cap.
    pub lambda_capped: bool,
    /// KKT residuals of the final state.
    pub residuals: ResidualRecord,
    /// Per-iteration residuals, when requested.
    pub trace: Vec<ResidualRecord>,
}

impl RdSolution {
    pub fn rate_bits(&self) -> f64 {
        self.rate / std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn hamming(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 })
    }

    #[test]
    fn valid_binary_instance() {
        assert!(validate_problem(array![0.5, 0.5].view(), hamming(2).view()).is_empty());
    }

    #[test]
    fn normalization_violation_reported() {
        let v = validate_problem(array![0.5, 0.6].view(), hamming(2).view());
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("p sums to 1.1"), "{v:?}");
    }

    #[test]
    fn negative_distortion_located() {
        let d = array![[-0.1, 0.0, 0.3], [0.0, 1.0, 0.3]];
        let v = validate_problem(array![0.4, 0.6].view(), d.view());
        assert_eq!(v, vec!["negative distortion -0.1 at (1,1)".to_string()]);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let v = validate_problem(array![0.2, 0.3, 0.5].view(), hamming(2).view());
        assert!(v.iter().any(|s| s.contains("2 rows but p has length 3")));
        assert!(RdProblem::new(array![0.2, 0.3, 0.5], hamming(2)).is_err());
    }

    #[test]
    fn renormalize_option() {
        let prob = RdProblem::new_renormalized(array![1.0, 3.0], hamming(2)).unwrap();
        assert_abs_diff_eq!(prob.p()[1], 0.75);
    }

    #[test]
    fn objective_independent_is_zero() {
        let r = Array1::from_elem(3, 1.0 / 3.0);
        let w = ConditionalLaw::independent(4, r.view());
        let p = array![0.1, 0.2, 0.3, 0.4];
        assert_abs_diff_eq!(commot_objective(&w, p.view(), r.view()).unwrap(), 0.0);
    }

    #[test]
    fn objective_identity_is_log_m() {
        let w = ConditionalLaw::new(Array2::eye(4)).unwrap();
        let p = Array1::from_elem(4, 0.25);
        let v = commot_objective(&w, p.view(), p.view()).unwrap();
        assert_abs_diff_eq!(v, 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn objective_binary_optimum() {
        // Optimal binary symmetric test channel at D = 0.1.
        let w = ConditionalLaw::new(array![[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let p = array![0.5, 0.5];
        let v = commot_objective(&w, p.view(), p.view()).unwrap();
        assert_abs_diff_eq!(v, 0.368064, epsilon = 1e-6);
    }

    #[test]
    fn objective_domain_error() {
        let w = ConditionalLaw::new(array![[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let p = array![0.5, 0.5];
        assert!(commot_objective(&w, p.view(), array![1.0, 0.0].view()).is_err());
        // A zero r_j is fine when its column carries no mass.
        let w = ConditionalLaw::new(array![[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(
            commot_objective(&w, p.view(), array![1.0, 0.0].view()).unwrap(),
            0.0
        );
    }

    #[test]
    fn distortion_examples() {
        let p = array![0.5, 0.5];
        let id = ConditionalLaw::new(Array2::eye(2)).unwrap();
        assert_eq!(expected_distortion(&id, p.view(), hamming(2).view()), 0.0);
        let unif = ConditionalLaw::independent(2, array![0.5, 0.5].view());
        assert_abs_diff_eq!(expected_distortion(&unif, p.view(), hamming(2).view()), 0.5);

        let d = array![[1.0, 0.0, 0.3], [0.0, 1.0, 0.3]];
        let third = ConditionalLaw::independent(2, array![0.0, 0.0, 1.0].view());
        assert_abs_diff_eq!(
            expected_distortion(&third, array![0.4, 0.6].view(), d.view()),
            0.3
        );
    }

    #[test]
    fn marginal_examples() {
        let unif = ConditionalLaw::independent(3, array![0.25, 0.25, 0.5].view());
        let r = induced_marginal(&unif, array![0.2, 0.3, 0.5].view());
        assert_abs_diff_eq!(r, array![0.25, 0.25, 0.5], epsilon = 1e-15);
        let id = ConditionalLaw::new(Array2::eye(2)).unwrap();
        assert_eq!(
            induced_marginal(&id, array![0.3, 0.7].view()),
            array![0.3, 0.7]
        );
    }

    #[test]
    fn zero_rate_distortion_bounds() {
        let prob =
            RdProblem::new(array![0.4, 0.6], array![[1.0, 0.0, 0.3], [0.0, 1.0, 0.3]]).unwrap();
        assert_abs_diff_eq!(prob.max_distortion(), 0.3, epsilon = 1e-15);
        assert_eq!(prob.min_distortion(), 0.0);
    }

    #[test]
    fn conditional_law_rejects_bad_rows() {
        assert!(ConditionalLaw::new(array![[0.5, 0.4]]).is_err());
        assert!(ConditionalLaw::new(array![[1.5, -0.5]]).is_err());
    }
}
