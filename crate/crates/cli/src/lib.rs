//! Command-line front end: config resolution, exports and verification runs.

pub mod output;
pub mod suites;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use invisible::config::{resolve_config, Config, Construction};
use invisible::metric::{ball_grid, max_admissible_epsilon, sym_index, unknown_count};
use invisible::verify::{pair_obstruction, offset_start, ray_starts, trace_settings, Direction};
use invisible::{integrate, Error, GeodesicState};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use output::{to_json, Cell, Table};
use suites::{run_suite, Suite, SuiteOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "invisible", version, about = "Metrics on R^n with invisible root directions")]
pub struct Cli {
    /// JSON config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set n=3` or `--set integrator.rel_tol=1e-10`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Write the main artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve the config and print the construction report.
    Build,
    /// Export H, its smallest eigenvalue and ball membership on a grid (CSV).
    Field {
        /// Points per axis.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Half-width of the grid box; defaults to the obstacle radius.
        #[arg(long)]
        extent: Option<f64>,
    },
    /// Trace geodesics in one direction and export their polylines (CSV).
    Trace {
        /// `root:i`, `root:-i` or `custom:c_1,...,c_n`.
        #[arg(long)]
        direction: Direction,
        /// Offset of one ray from the origin, in the hyperplane orthogonal to
        /// the direction (n-1 comma-separated values). Repeatable.
        #[arg(long = "offset", value_name = "O_1,...")]
        offsets: Vec<String>,
        /// Number of grid rays when no offsets are given.
        #[arg(long, default_value_t = 9)]
        rays: usize,
    },
    /// Run verification suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Restrict the invisibility suite to these directions. Repeatable.
        #[arg(long)]
        direction: Vec<Direction>,
        #[arg(long, default_value_t = 100)]
        rays: usize,
        /// Random points for the symmetry suite.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Scan the flatness obstruction over the base ball (CSV).
    Obstruction {
        /// Points per axis; defaults to the config's epsilon grid.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Largest epsilon keeping H positive definite on the base-ball grid.
    EpsilonMax {
        #[arg(long)]
        grid: Option<usize>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// Machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        let v = match self {
            CliError::Core(e) => json!({"error": e.kind(), "message": e.to_string()}),
            CliError::Io(m) => json!({"error": "Io", "message": m}),
        };
        serde_json::to_string(&v).expect("error serializes")
    }
}

/// The main artifact and whether all assertions it carries passed.
pub struct Outcome {
    pub artifact: String,
    pub passed: bool,
}

pub fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    Ok(Config::from_json(&text, &cli.overrides)?)
}

pub fn run_command(command: &Command, c: &Construction) -> Result<Outcome, CliError> {
    let pass = |artifact: String| Ok(Outcome { artifact, passed: true });
    match command {
        Command::Build => pass(to_json(&json!({"resolved": c.resolved, "report": c.report}))),
        Command::Field { grid, extent } => pass(field_csv(c, *grid, *extent)?),
        Command::Trace { direction, offsets, rays } => pass(trace_csv(c, direction, offsets, *rays)?),
        Command::Obstruction { grid } => pass(obstruction_csv(c, grid.unwrap_or(c.resolved.epsilon_grid))?),
        Command::EpsilonMax { grid } => {
            let grid = grid.unwrap_or(c.resolved.epsilon_grid);
            let base = c.field.base();
            let eps_max = max_admissible_epsilon(base.roots(), base.bumps(), grid)?;
            pass(to_json(&json!({
                "epsilon_max": eps_max,
                "epsilon_auto": eps_max * 0.5,
                "grid": grid,
                "config_digest": c.report.config_digest,
            })))
        }
        Command::Verify { suite, direction, rays, samples } => {
            let opts = SuiteOptions { directions: direction.clone(), rays: *rays, samples: *samples };
            let results: Vec<_> = suite.expand().into_iter().map(|s| run_suite(c, s, &opts)).collect();
            let passed = results.iter().all(|r| r.passed);
            let artifact = to_json(&json!({
                "passed": passed,
                "config_digest": c.report.config_digest,
                "suites": results,
            }));
            Ok(Outcome { artifact, passed })
        }
    }
}

/// Parses, resolves, runs, writes the artifact; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = load_config(cli)
        .and_then(|cfg| Ok(resolve_config(&cfg)?))
        .and_then(|c| run_command(&cli.command, &c));
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}", e.to_json());
            return EXIT_INVALID;
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &outcome.artifact).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(outcome.artifact.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::from(e)),
                _ => Ok(()),
            }
        }
    };
    if let Err(e) = written {
        eprintln!("{}", e.to_json());
        return EXIT_INVALID;
    }
    if outcome.passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn coords(n: usize, prefix: &str) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Regular grid of `points^n` nodes over `[-extent, extent]^n`, first axis fastest.
fn box_grid(n: usize, points: usize, extent: f64) -> Vec<DVector<f64>> {
    let coord = |k: usize| if points == 1 { 0.0 } else { -extent + 2.0 * extent * k as f64 / (points - 1) as f64 };
    (0..points.pow(n as u32))
        .map(|flat| {
            let mut rem = flat;
            DVector::from_fn(n, |_, _| {
                let k = rem % points;
                rem /= points;
                coord(k)
            })
        })
        .collect()
}

fn field_csv(c: &Construction, grid: usize, extent: Option<f64>) -> Result<String, CliError> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point per axis".into()).into());
    }
    let hf = &c.field;
    let n = hf.dimension();
    let extent = extent.unwrap_or_else(|| hf.obstacle_radius());
    let mut header = coords(n, "x");
    for a in 0..n {
        for b in a..n {
            header.push(format!("h_{}{}", a + 1, b + 1));
        }
    }
    header.push("min_eig".into());
    header.push("in_ball".into());
    let rows = box_grid(n, grid, extent)
        .par_iter()
        .map(|x| {
            let (h, rep) = hf.solve_h(x)?;
            let mut row: Vec<Cell> = x.iter().map(|&v| Cell::Float(v)).collect();
            let mut packed = vec![0.0; unknown_count(n)];
            for a in 0..n {
                for b in a..n {
                    packed[sym_index(n, a, b)] = h[(a, b)];
                }
            }
            row.extend(packed.into_iter().map(Cell::Float));
            row.push(Cell::Float(rep.min_eigenvalue));
            row.push(Cell::Int(rep.ball.map_or(0, |i| i as i64 + 1)));
            Ok(row)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Table { header, rows }.to_csv()?)
}

fn trace_csv(c: &Construction, direction: &Direction, offsets: &[String], rays: usize) -> Result<String, CliError> {
    let hf = &c.field;
    let n = hf.dimension();
    let momentum = direction.momentum(hf.roots())?;
    let starts = if offsets.is_empty() {
        ray_starts(hf, &momentum, rays.max(1))
    } else {
        offsets
            .iter()
            .map(|o| {
                let parsed = o
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidArgument(format!("cannot parse offset `{o}`")))?;
                offset_start(hf, &momentum, &parsed)
            })
            .collect::<Result<Vec<_>, Error>>()?
    };
    let r = &c.resolved;
    let settings = trace_settings(hf, r.integrator.rel_tol, r.integrator.abs_tol, r.integrator.max_param);
    let traces = starts
        .par_iter()
        .map(|x0| integrate(hf, &GeodesicState::new(x0.clone(), momentum.clone()), &settings))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut header = vec!["ray".to_string(), "t".to_string()];
    header.extend(coords(n, "x"));
    header.extend(coords(n, "p"));
    let mut table = Table::new(header);
    for (i, trace) in traces.iter().enumerate() {
        for s in &trace.polyline {
            let mut row = vec![Cell::Int(i as i64), Cell::Float(s.t)];
            row.extend(s.x.iter().chain(s.p.iter()).map(|&v| Cell::Float(v)));
            table.rows.push(row);
        }
    }
    Ok(table.to_csv()?)
}

fn obstruction_csv(c: &Construction, grid: usize) -> Result<String, CliError> {
    let base = c.field.base();
    let (rs, bumps) = (base.roots(), base.bumps());
    let n = rs.dimension();
    let pairs: Vec<(usize, usize)> = rs.pairs().collect();
    let mut header = coords(n, "x");
    header.extend(pairs.iter().map(|(k, l)| format!("o_{}_{}", k + 1, l + 1)));
    let mut table = Table::new(header);
    for x in ball_grid(bumps.center(), bumps.radius(), grid) {
        let mut row: Vec<Cell> = x.iter().map(|&v| Cell::Float(v)).collect();
        row.extend(pairs.iter().map(|&(k, l)| Cell::Float(pair_obstruction(rs, bumps, k, l, &x))));
        table.rows.push(row);
    }
    Ok(table.to_csv()?)
}
