use std::process::Command;

use ratedist::sources::gaussian_fixture;
use ratedist::{solve_as, AsOptions};
use ratedist_cli::output::write_csv;
use ratedist_cli::{
    cmd_curve, cmd_residuals, cmd_solve, exit, fixtures, CurveConfig, CurveRow, Grid, ProblemFile,
    SolveConfig, SolverChoice, SolverSettings, SourceParams, SourceSpec, Sweep,
};

fn binary() -> SourceSpec {
    SourceSpec::parse("binary", SourceParams::default()).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ratedist"))
}

#[test]
fn problem_file_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gaussian.json");
    let original = gaussian_fixture();
    ProblemFile::from_problem(&original).save(&path).unwrap();
    let loaded = ProblemFile::load(&path).unwrap().into_problem().unwrap();
    assert_eq!(loaded.p(), original.p());
    assert_eq!(loaded.d(), original.d());
    assert_eq!(loaded.x_labels(), original.x_labels());

    let a = solve_as(&original, 1.0, &AsOptions::default()).unwrap();
    let b = solve_as(&loaded, 1.0, &AsOptions::default()).unwrap();
    assert_eq!(a.rate.to_bits(), b.rate.to_bits());
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    assert_eq!(a.r, b.r);
}

#[test]
fn file_source_solves_like_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"p": [0.5, 0.5], "d": [[0, 1], [1, 0]]}"#).unwrap();
    let source = SourceSpec::parse(path.to_str().unwrap(), SourceParams::default()).unwrap();
    let config = SolveConfig {
        source,
        distortion: 0.1,
        solver: SolverChoice::As,
        settings: SolverSettings::default(),
        full: true,
    };
    let report = cmd_solve(&config).unwrap();
    let a = report.alternating.unwrap();
    assert!((a.lambda - 2.1972).abs() < 1e-3);
    assert_eq!(a.r.unwrap().len(), 2);
    assert_eq!(a.w.unwrap().len(), 2);
}

#[test]
fn invalid_problem_file_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"p": [0.6, 0.5], "d": [[0, -1], [1, 0]]}"#).unwrap();
    let out = bin()
        .args([
            "solve",
            "--distortion",
            "0.1",
            "--source",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::INVALID_INPUT));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("p sums to 1.1"), "{err}");
    assert!(err.contains("negative distortion"), "{err}");
}

#[test]
fn ragged_matrix_is_rejected() {
    let file = ProblemFile {
        p: vec![0.5, 0.5],
        d: vec![vec![0.0, 1.0], vec![1.0]],
        x_labels: None,
        y_labels: None,
    };
    assert!(file.into_problem().is_err());
}

#[test]
fn solve_both_reports_agreement() {
    let config = SolveConfig {
        source: binary(),
        distortion: 0.1,
        solver: SolverChoice::Both,
        settings: SolverSettings::default(),
        full: false,
    };
    let report = cmd_solve(&config).unwrap();
    assert!((report.alternating.as_ref().unwrap().lambda - 2.1972).abs() < 1e-3);
    assert!(report.rate_difference.unwrap() < 1e-7);
    assert!(report.warnings.is_empty());
    assert_eq!(report.rows().len(), 2);
    let solvers: Vec<_> = report.labelled_rows().iter().map(|r| r.solver).collect();
    assert_eq!(solvers, ["as", "ba"]);
}

#[test]
fn inactive_constraint_is_flagged() {
    let config = SolveConfig {
        source: binary(),
        distortion: 0.7,
        solver: SolverChoice::As,
        settings: SolverSettings::default(),
        full: false,
    };
    let report = cmd_solve(&config).unwrap();
    assert_eq!(report.alternating.unwrap().rate_nats, 0.0);
    assert!(report
        .warnings
        .iter()
        .any(|w| w == "distortion constraint inactive"));
}

#[test]
fn curve_rows_follow_the_grid() {
    let config = CurveConfig {
        source: binary(),
        solver: SolverChoice::As,
        sweep: Sweep::Distortion(Grid::new(0.05, 0.45, 9).unwrap()),
        settings: SolverSettings::default(),
    };
    let rows = cmd_curve(&config).unwrap();
    assert_eq!(rows.len(), 9);
    for pair in rows.windows(2) {
        assert!(pair[0].d < pair[1].d);
        assert!(pair[0].rate_nats.unwrap() > pair[1].rate_nats.unwrap());
    }
    assert!(rows.iter().all(|r| r.converged));
}

#[test]
fn curve_header_is_stable() {
    let row = CurveRow {
        d: 0.1,
        rate_nats: Some(0.5),
        rate_bits: None,
        lambda: Some(1.0),
        iterations: Some(3),
        converged: true,
        r_psi: None,
        r_phi: None,
        r_lambda: None,
        r_eta: None,
        wall_time_s: 0.0,
    };
    let mut buf = Vec::new();
    write_csv(&[row], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "D,R_nats,R_bits,lambda,iterations,converged,r_psi,r_phi,r_lambda,r_eta,wall_time_s"
    );
}

#[test]
fn slope_sweep_leaves_gaps_at_large_distortion() {
    let gaussian = SourceSpec::parse("gaussian", SourceParams::default()).unwrap();
    let config = CurveConfig {
        source: gaussian,
        solver: SolverChoice::Ba,
        sweep: Sweep::Slope(Grid::new(0.01, 10.0, 1000).unwrap()),
        settings: SolverSettings::default(),
    };
    let rows = cmd_curve(&config).unwrap();
    assert_eq!(rows.len(), 1000);
    let spacing = (3.95 - 0.05) / 24.0;
    let ds: Vec<f64> = rows
        .iter()
        .map(|r| r.d)
        .filter(|d| (1.0..=4.0).contains(d))
        .collect();
    let widest = ds.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    assert!(
        widest > spacing,
        "widest gap {widest} vs grid spacing {spacing}"
    );
}

#[test]
fn alternating_curve_rejects_slope_grid() {
    let config = CurveConfig {
        source: binary(),
        solver: SolverChoice::As,
        sweep: Sweep::Slope(Grid::new(0.1, 1.0, 3).unwrap()),
        settings: SolverSettings::default(),
    };
    assert!(cmd_curve(&config).is_err());
}

#[test]
fn residual_trace_starts_at_zero() {
    let rows = cmd_residuals(&binary(), 0.2, &AsOptions::default()).unwrap();
    assert_eq!(rows[0].iter, 0);
    let first = &rows[0];
    for v in [first.r_psi, first.r_phi, first.r_lambda, first.r_eta] {
        assert!(v.is_finite() && v >= 0.0);
    }
    assert!(first.r_psi.max(first.r_phi).max(first.r_lambda) > 0.0);
    assert!(rows.windows(2).all(|w| w[1].iter == w[0].iter + 1));
}

#[test]
fn grid_parsing() {
    let g: Grid = "0.5:2:4".parse().unwrap();
    assert_eq!(g.values(), vec![0.5, 1.0, 1.5, 2.0]);
    assert!("1:0:4".parse::<Grid>().is_err());
    assert!("0:1:1".parse::<Grid>().is_err());
    assert!("0:1".parse::<Grid>().is_err());
}

#[test]
fn fixture_listing_includes_bifurcation() {
    let list = fixtures();
    assert!(list
        .iter()
        .any(|f| f.name == "bifurcation" && f.m == 2 && f.n == 3));
}

#[test]
fn binary_reports_exit_codes() {
    let ok = bin()
        .args(["solve", "--distortion", "0.1"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(exit::OK));
    let json: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(json["alternating"]["converged"].as_bool().unwrap());

    let capped = bin()
        .args([
            "solve",
            "--source",
            "gaussian",
            "--distortion",
            "0.5",
            "--max-iter",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(exit::NOT_CONVERGED));

    let bad = bin()
        .args(["solve", "--distortion", "0.1", "--solver", "xx"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(exit::INVALID_INPUT));
}
