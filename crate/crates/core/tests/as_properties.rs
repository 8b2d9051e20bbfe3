mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use ratedist::alternating::{
    as_iteration, f_eta, g_lambda, newton_eta, newton_lambda, sinkhorn_update_phi,
    sinkhorn_update_psi,
};
use ratedist::problem::{commot_objective, expected_distortion, induced_marginal};
use ratedist::{
    ba_fixed_slope, kkt_residuals, solve_as, AsOptions, BaOptions, RdProblem, SolverState,
};

use common::{bisect, interior, problem, problem_and_target};

/// Rate accuracy of a run stopped at the default residual tolerance.
const RATE_EPS: f64 = 1e-8;

fn long_run() -> AsOptions {
    AsOptions {
        max_iter: 20_000,
        ..AsOptions::default()
    }
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 128,
        max_global_rejects: 4096,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn rows_sum_to_one_after_phi_update((prob, target) in problem_and_target(0.1, 0.9)) {
        let opts = AsOptions::default();
        let mut st = SolverState::initial(&prob);
        for _ in 0..25 {
            sinkhorn_update_psi(&mut st, prob.p()).unwrap();
            sinkhorn_update_phi(&mut st).unwrap();
            for row in st.transition().outer_iter() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            }
            as_iteration(&mut st, &prob, target, &opts).unwrap();
        }
    }

    #[test]
    fn converged_solution_is_feasible((prob, target) in problem_and_target(0.2, 0.8)) {
        let opts = long_run();
        let sol = solve_as(&prob, target, &opts).unwrap();
        prop_assume!(sol.converged);
        let tol = 10.0 * opts.residual_tol;
        let induced = induced_marginal(&sol.w, prob.p());
        for (a, b) in induced.iter().zip(sol.r.iter()) {
            prop_assert!((a - b).abs() < tol, "marginal {} vs {}", a, b);
        }
        let achieved = expected_distortion(&sol.w, prob.p(), prob.d());
        if sol.lambda > 0.0 {
            prop_assert!((achieved - target).abs() < tol, "distortion {} vs {}", achieved, target);
        } else {
            prop_assert!(achieved <= target + tol);
        }
        let objective = commot_objective(&sol.w, prob.p(), sol.r.view()).unwrap();
        prop_assert!((sol.rate - objective).abs() < 1e-10, "rate {} vs objective {}", sol.rate, objective);
    }

    #[test]
    fn rate_falls_with_distortion(prob in problem(), u in 0.15f64..0.75, gap in 0.02f64..0.1) {
        let opts = long_run();
        let a = solve_as(&prob, interior(&prob, u), &opts).unwrap();
        let b = solve_as(&prob, interior(&prob, u + gap), &opts).unwrap();
        prop_assume!(a.converged && b.converged);
        prop_assert!(a.rate >= b.rate - 1e-9, "R({}) = {} < R(later) = {}", u, a.rate, b.rate);
    }

    #[test]
    fn curve_is_convex(prob in problem()) {
        let opts = long_run();
        let ds: Vec<f64> = (0..6).map(|k| interior(&prob, 0.15 + 0.13 * k as f64)).collect();
        let sols: Vec<_> = ds.iter().map(|&t| solve_as(&prob, t, &opts).unwrap()).collect();
        prop_assume!(sols.iter().all(|s| s.converged));
        for pair in sols.windows(2) {
            prop_assert!(pair[1].lambda <= pair[0].lambda + 1e-6, "slope rose from {} to {}", pair[0].lambda, pair[1].lambda);
        }
        // A rate error of RATE_EPS per point moves a second difference by up to 4 RATE_EPS / h^2.
        let h = ds[1] - ds[0];
        for k in 1..ds.len() - 1 {
            let left = (sols[k].rate - sols[k - 1].rate) / (ds[k] - ds[k - 1]);
            let right = (sols[k + 1].rate - sols[k].rate) / (ds[k + 1] - ds[k]);
            let second = (right - left) / (0.5 * (ds[k + 1] - ds[k - 1]));
            prop_assert!(second >= -4.0 * RATE_EPS / (h * h), "second difference {} at {}", second, ds[k]);
        }
    }

    #[test]
    fn scaling_distortion_scales_slope((prob, target) in problem_and_target(0.2, 0.8), c in 0.25f64..4.0) {
        let opts = long_run();
        let base = solve_as(&prob, target, &opts).unwrap();
        let scaled_prob = RdProblem::new(prob.p().to_owned(), prob.d().mapv(|d| c * d)).unwrap();
        let scaled = solve_as(&scaled_prob, c * target, &opts).unwrap();
        prop_assume!(base.converged && scaled.converged);
        prop_assert!((base.rate - scaled.rate).abs() < 1e-8, "rates {} {}", base.rate, scaled.rate);
        prop_assert!((base.lambda / c - scaled.lambda).abs() < 1e-6, "slopes {} {}", base.lambda / c, scaled.lambda);
    }

    #[test]
    fn slope_lies_between_difference_quotients((prob, target) in problem_and_target(0.25, 0.75)) {
        let opts = long_run();
        let h = 1e-3 * (prob.max_distortion() - prob.min_distortion());
        let mid = solve_as(&prob, target, &opts).unwrap();
        let lo = solve_as(&prob, target - h, &opts).unwrap();
        let hi = solve_as(&prob, target + h, &opts).unwrap();
        prop_assume!(mid.converged && lo.converged && hi.converged);
        let left = (lo.rate - mid.rate) / h;
        let right = (mid.rate - hi.rate) / h;
        let noise = 2.0 * RATE_EPS / h + 1e-6 * mid.lambda;
        prop_assert!(
            right - noise <= mid.lambda && mid.lambda <= left + noise,
            "lambda {} outside one-sided quotients [{}, {}]", mid.lambda, right, left
        );
    }

    #[test]
    fn matches_blahut_at_same_slope((prob, target) in problem_and_target(0.2, 0.8)) {
        let sol = solve_as(&prob, target, &long_run()).unwrap();
        prop_assume!(sol.converged && sol.lambda > 0.0);
        let ba = ba_fixed_slope(&prob, sol.lambda, &BaOptions { max_iter: 200_000, tol: 1e-15, ..BaOptions::default() }).unwrap();
        prop_assume!(ba.converged && (ba.distortion - target).abs() < 1e-8);
        prop_assert!((sol.rate - ba.rate).abs() < 1e-7, "AS {} vs BA {}", sol.rate, ba.rate);
    }

    #[test]
    fn g_is_decreasing_with_bisection_root(
        (prob, target) in problem_and_target(0.1, 0.9),
        seed in prop::collection::vec(0.2f64..5.0, 48),
    ) {
        let mut st = SolverState::initial(&prob);
        let (m, n) = (prob.m(), prob.n());
        st.phi = Array1::from_iter((0..m).map(|i| seed[i]));
        st.psi = Array1::from_iter((0..n).map(|j| seed[12 + j]));
        let r = Array1::from_iter((0..n).map(|j| seed[24 + j]));
        st.r = &r / r.sum();
        let grid: Vec<f64> = (0..40).map(|k| 0.25 * k as f64).collect();
        for w in grid.windows(2) {
            let (a, b) = (g_lambda(w[0], &st, &prob, target), g_lambda(w[1], &st, &prob, target));
            prop_assert!(b <= a + 1e-15);
        }
        let up = newton_lambda(&st, &prob, target, &AsOptions::default()).unwrap();
        prop_assume!(!up.capped);
        if up.lambda == 0.0 {
            prop_assert!(g_lambda(0.0, &st, &prob, target) <= 0.0);
        } else {
            let oracle = bisect(|x| g_lambda(x, &st, &prob, target), 0.0, 2.0 * up.lambda + 1.0, 200);
            prop_assert!((up.lambda - oracle).abs() <= 1e-10 * oracle.max(1.0), "newton {} bisection {}", up.lambda, oracle);
        }
    }

    #[test]
    fn f_is_decreasing_with_bisection_root(
        s in prop::collection::vec(0.0f64..1.0, 1..=12),
        beta in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let s = Array1::from(s);
        prop_assume!(s.sum() > 1e-3);
        let s = &s / s.sum();
        let beta = Array1::from_iter(beta.into_iter().take(s.len()));
        let bmax = s.iter().zip(beta.iter()).filter(|(&a, _)| a > 0.0).map(|(_, &b)| b).fold(f64::NEG_INFINITY, f64::max);
        let mut last = f64::INFINITY;
        for k in 1..60 {
            let eta = bmax + 0.05 * k as f64;
            let v = f_eta(eta, s.view(), beta.view()).unwrap();
            prop_assert!(v < last);
            last = v;
        }
        let eta = newton_eta(s.view(), beta.view(), &AsOptions::default()).unwrap();
        let oracle = bisect(|x| f_eta(x, s.view(), beta.view()).unwrap(), bmax + 1e-300_f64.max(1e-14 * bmax.abs()), bmax + 2.0, 200);
        prop_assert!((eta - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "newton {} bisection {}", eta, oracle);
    }

    #[test]
    fn residuals_are_permutation_equivariant(
        (prob, target) in problem_and_target(0.2, 0.8),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pi: Vec<usize> = (0..prob.m()).collect();
        let mut sigma: Vec<usize> = (0..prob.n()).collect();
        pi.shuffle(&mut rng);
        sigma.shuffle(&mut rng);
        let p = Array1::from_iter(pi.iter().map(|&i| prob.p()[i]));
        let d = Array2::from_shape_fn((prob.m(), prob.n()), |(i, j)| prob.d()[[pi[i], sigma[j]]]);
        let permuted = RdProblem::new_renormalized(p, d).unwrap();

        let opts = AsOptions::default();
        let mut a = SolverState::initial(&prob);
        let mut b = SolverState::initial(&permuted);
        for _ in 0..30 {
            as_iteration(&mut a, &prob, target, &opts).unwrap();
            as_iteration(&mut b, &permuted, target, &opts).unwrap();
        }
        let ra = kkt_residuals(&a, &prob, target);
        let rb = kkt_residuals(&b, &permuted, target);
        for (x, y) in [(ra.r_psi, rb.r_psi), (ra.r_phi, rb.r_phi), (ra.r_lambda, rb.r_lambda), (ra.r_eta, rb.r_eta)] {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-6), "{} vs {}", x, y);
        }
    }
}
