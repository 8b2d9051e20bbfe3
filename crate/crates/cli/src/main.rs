use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ratedist_cli::output::{emit_rows, sink, write_json};
use ratedist_cli::{
    cmd_compare, cmd_curve, cmd_residuals, cmd_solve, exit, fixtures, CliError, CompareCase,
    CompareConfig, CurveConfig, Format, Grid, Result, SolveConfig, SolverSettings, SourceParams,
    SourceSpec, Sweep,
};

/// Rate-distortion functions by alternating Sinkhorn iterations, with a
/// Blahut-Arimoto baseline.
#[derive(Parser, Debug)]
#[command(name = "ratedist", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve at a single distortion target
    Solve {
        #[command(flatten)]
        common: Common,
        /// Target expected distortion
        #[arg(long)]
        distortion: f64,
        /// Include the transition law and output marginal
        #[arg(long)]
        full: bool,
    },
    /// Sweep a grid of distortions (or slopes, for ba) and write one row per point
    Curve {
        #[command(flatten)]
        common: Common,
        /// Smallest distortion (default just above the minimum)
        #[arg(long)]
        dmin: Option<f64>,
        /// Largest distortion (default the zero-rate distortion)
        #[arg(long)]
        dmax: Option<f64>,
        /// Number of grid points
        #[arg(long, default_value_t = 25)]
        points: usize,
        /// Slope grid start:stop:points for a parametric ba sweep
        #[arg(long)]
        lambda_grid: Option<String>,
    },
    /// Time both solvers on the six benchmark cases, or on one source
    Compare {
        #[command(flatten)]
        common: Common,
        /// Single target for the given source instead of the benchmark cases
        #[arg(long)]
        distortion: Option<f64>,
        /// Timed runs per solver; mean and median are reported
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Per-iteration KKT residuals of one alternating run
    Residuals {
        #[command(flatten)]
        common: Common,
        /// Target expected distortion
        #[arg(long)]
        distortion: f64,
    },
    /// List the built-in sources
    Fixtures {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Fixture name (binary, gaussian, laplacian, bifurcation) or problem JSON path
    #[arg(long, default_value = "binary")]
    source: String,
    /// P(X = 1) for the binary source
    #[arg(long)]
    p: Option<f64>,
    /// Scale of the gaussian or laplacian source
    #[arg(long)]
    sigma: Option<f64>,
    /// Grid half-width M
    #[arg(long)]
    grid_m: Option<f64>,
    /// Grid cell width
    #[arg(long)]
    grid_delta: Option<f64>,
    /// as, ba or both
    #[arg(long, default_value = "as")]
    solver: String,
    /// Iteration cap per solver run
    #[arg(long)]
    max_iter: Option<usize>,
    /// Residual tolerance for as, rate-change tolerance for ba
    #[arg(long)]
    tol: Option<f64>,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn source(&self) -> Result<SourceSpec> {
        let params = SourceParams {
            p: self.p,
            sigma: self.sigma,
            grid_m: self.grid_m,
            grid_delta: self.grid_delta,
        };
        SourceSpec::parse(&self.source, params)
    }

    fn settings(&self) -> SolverSettings {
        let mut settings = SolverSettings::default();
        if let Some(n) = self.max_iter {
            settings.as_opts.max_iter = n;
            settings.ba_opts.max_iter = n;
        }
        if let Some(t) = self.tol {
            settings.as_opts.residual_tol = t;
            settings.ba_opts.tol = t;
        }
        settings
    }

    fn format(&self, default: Format) -> Result<Format> {
        self.format.as_deref().map_or(Ok(default), str::parse)
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve {
            common,
            distortion,
            full,
        } => {
            let config = SolveConfig {
                source: common.source()?,
                distortion,
                solver: common.solver.parse()?,
                settings: common.settings(),
                full,
            };
            let report = cmd_solve(&config)?;
            match common.format(Format::Json)? {
                Format::Json => write_json(&report, sink(common.out.as_deref())?)?,
                Format::Csv => {
                    emit_rows(&report.labelled_rows(), Format::Csv, common.out.as_deref())?
                }
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if report.converged() {
                exit::OK
            } else {
                exit::NOT_CONVERGED
            })
        }
        Command::Curve {
            common,
            dmin,
            dmax,
            points,
            lambda_grid,
        } => {
            let source = common.source()?;
            let sweep = match (lambda_grid, dmin, dmax) {
                (Some(g), None, None) => Sweep::Slope(g.parse()?),
                (None, Some(lo), Some(hi)) => Sweep::Distortion(Grid::new(lo, hi, points)?),
                (None, lo, hi) => {
                    let problem = source.build()?;
                    let lo = lo.unwrap_or(
                        problem.min_distortion()
                            + 0.02 * (problem.max_distortion() - problem.min_distortion()),
                    );
                    let hi = hi.unwrap_or(problem.max_distortion());
                    Sweep::Distortion(Grid::new(lo, hi, points)?)
                }
                (Some(_), _, _) => {
                    return Err(CliError::Invalid(
                        "give either --lambda-grid or --dmin/--dmax, not both".into(),
                    ))
                }
            };
            let config = CurveConfig {
                source,
                solver: common.solver.parse()?,
                sweep,
                settings: common.settings(),
            };
            let rows = cmd_curve(&config)?;
            emit_rows(&rows, common.format(Format::Csv)?, common.out.as_deref())?;
            Ok(if rows.iter().all(|r| r.converged) {
                exit::OK
            } else {
                exit::NOT_CONVERGED
            })
        }
        Command::Compare {
            common,
            distortion,
            repeats,
        } => {
            let mut config = CompareConfig {
                repeats,
                ..CompareConfig::default()
            };
            if let Some(n) = common.max_iter {
                config.max_iter = n;
            }
            if let Some(d) = distortion {
                let source = common.source()?;
                config.cases = vec![CompareCase {
                    label: source.to_string(),
                    problem: source.build()?,
                    distortion: d,
                }];
            }
            let rows = cmd_compare(&config)?;
            emit_rows(&rows, common.format(Format::Csv)?, common.out.as_deref())?;
            Ok(exit::OK)
        }
        Command::Residuals { common, distortion } => {
            let mut opts = common.settings().as_opts;
            if common.max_iter.is_none() {
                opts.max_iter = 10_000;
            }
            let rows = cmd_residuals(&common.source()?, distortion, &opts)?;
            emit_rows(&rows, common.format(Format::Csv)?, common.out.as_deref())?;
            Ok(exit::OK)
        }
        Command::Fixtures { out } => {
            write_json(&fixtures(), sink(out.as_deref())?)?;
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
