#![allow(dead_code)]

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use ratedist::RdProblem;

/// Smallest `D_max - D_min` accepted for generated instances. Narrower
/// ranges put the optimal slope in the hundreds, where the solver can lose
/// a needed column to underflow before the slope gets there.
pub const MIN_RANGE: f64 = 0.05;

pub fn probability(len: usize) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(0.05f64..1.0, len).prop_map(|v| {
        let a = Array1::from(v);
        let total = a.sum();
        a / total
    })
}

pub fn matrix(m: usize, n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0f64..1.0, m * n)
        .prop_map(move |v| Array2::from_shape_vec((m, n), v).unwrap())
}

/// Random instance with `2 <= M, N <= 12`.
pub fn problem() -> impl Strategy<Value = RdProblem> {
    (2usize..=12, 2usize..=12)
        .prop_flat_map(|(m, n)| (probability(m), matrix(m, n)))
        .prop_map(|(p, d)| RdProblem::new_renormalized(p, d).unwrap())
        .prop_filter("distortion range too narrow", |prob| {
            prob.max_distortion() - prob.min_distortion() >= MIN_RANGE
        })
}

/// Instance together with a target at the given fraction of its range.
pub fn problem_and_target(lo: f64, hi: f64) -> impl Strategy<Value = (RdProblem, f64)> {
    (problem(), lo..hi).prop_map(|(prob, u)| {
        let target = interior(&prob, u);
        (prob, target)
    })
}

pub fn interior(prob: &RdProblem, u: f64) -> f64 {
    prob.min_distortion() + u * (prob.max_distortion() - prob.min_distortion())
}

/// Random row-stochastic matrix.
pub fn stochastic(m: usize, n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.01f64..1.0, m * n).prop_map(move |v| {
        let mut a = Array2::from_shape_vec((m, n), v).unwrap();
        for mut row in a.outer_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        a
    })
}

/// Root of a decreasing function by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, steps: usize) -> f64 {
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
