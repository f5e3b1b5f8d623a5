//! Verification suites as run by `verify`.

use invisible::config::Construction;
use invisible::verify::{
    resolution_for, trace_settings, verify_energy_level, verify_flatness, verify_invisibility, verify_symmetry,
    Direction, CURVATURE_STEP_RATIO, ENERGY_LEVEL_POINTS, ENERGY_LEVEL_TOL, SYMMETRY_TOL,
};
use invisible::{validate_geometry, Error};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Invisibility,
    Symmetry,
    Energy,
    Flatness,
    Geometry,
    All,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Geometry, Suite::Energy, Suite::Symmetry, Suite::Invisibility, Suite::Flatness],
            s => vec![s],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Suite::Invisibility => "invisibility",
            Suite::Symmetry => "symmetry",
            Suite::Energy => "energy",
            Suite::Flatness => "flatness",
            Suite::Geometry => "geometry",
            Suite::All => "all",
        }
    }
}

pub struct SuiteOptions {
    /// Empty means every signed root direction.
    pub directions: Vec<Direction>,
    pub rays: usize,
    pub samples: usize,
}

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub passed: bool,
    pub thresholds: Value,
    pub metrics: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

/// Runs one suite. Numerical failures are reported as a failed suite rather
/// than an error.
pub fn run_suite(c: &Construction, suite: Suite, opts: &SuiteOptions) -> SuiteResult {
    let thresholds = thresholds(c, suite);
    match evaluate(c, suite, opts) {
        Ok((passed, metrics)) => SuiteResult { suite: suite.name(), passed, thresholds, metrics, error: None },
        Err(e) => SuiteResult {
            suite: suite.name(),
            passed: false,
            thresholds,
            metrics: Value::Null,
            error: Some(json!({"kind": e.kind(), "message": e.to_string()})),
        },
    }
}

fn thresholds(c: &Construction, suite: Suite) -> Value {
    let th = &c.resolved.thresholds;
    match suite {
        Suite::Invisibility => json!({
            "lateral": th.lateral * c.resolved.ball_radius,
            "lateral_over_radius": th.lateral,
            "angular": th.angular,
            "energy_drift": th.energy_drift,
        }),
        Suite::Symmetry => json!({"residual": SYMMETRY_TOL}),
        Suite::Energy => json!({"deviation": ENERGY_LEVEL_TOL, "points": ENERGY_LEVEL_POINTS}),
        Suite::Flatness => json!({"curvature_floor_ratio": th.curvature_floor_ratio}),
        Suite::Geometry | Suite::All => Value::Null,
    }
}

fn evaluate(c: &Construction, suite: Suite, opts: &SuiteOptions) -> Result<(bool, Value), Error> {
    let hf = &c.field;
    let r = &c.resolved;
    match suite {
        Suite::Geometry => {
            let g = validate_geometry(hf);
            Ok((g.passed(), serde_json::to_value(&g).expect("serializes")))
        }
        Suite::Energy => {
            let rep = verify_energy_level(hf.base(), resolution_for(r.n, ENERGY_LEVEL_POINTS))?;
            Ok((rep.max_deviation <= ENERGY_LEVEL_TOL, serde_json::to_value(&rep).expect("serializes")))
        }
        Suite::Symmetry => {
            let rep = verify_symmetry(hf, opts.samples, r.seed.unwrap_or(0))?;
            Ok((rep.max_residual <= SYMMETRY_TOL, serde_json::to_value(&rep).expect("serializes")))
        }
        Suite::Flatness => {
            let rep = verify_flatness(hf, r.epsilon_grid, r.ball_radius * CURVATURE_STEP_RATIO)?;
            let passed = rep.passed(r.thresholds.curvature_floor_ratio);
            let mut metrics = serde_json::to_value(&rep).expect("serializes");
            metrics["floor"] = json!(rep.floor());
            Ok((passed, metrics))
        }
        Suite::Invisibility => {
            let settings = trace_settings(hf, r.integrator.rel_tol, r.integrator.abs_tol, r.integrator.max_param);
            let directions = if opts.directions.is_empty() {
                Direction::all_roots(hf.roots().len())
            } else {
                opts.directions.clone()
            };
            let lateral = r.thresholds.lateral * r.ball_radius;
            let mut entries = Vec::new();
            let mut invisible_count = 0;
            for d in &directions {
                let rep = verify_invisibility(hf, d, opts.rays, &settings)?;
                let invisible = rep.invisible(lateral, r.thresholds.angular)
                    && rep.max_energy_drift <= r.thresholds.energy_drift
                    && rep.pairing_violations == 0;
                invisible_count += invisible as usize;
                let mut v = serde_json::to_value(&rep).expect("serializes");
                v["max_lateral_over_radius"] = json!(rep.max_lateral / r.ball_radius);
                v["invisible"] = json!(invisible);
                entries.push(v);
            }
            let passed = invisible_count == directions.len();
            Ok((
                passed,
                json!({
                    "invisible_directions": format!("{invisible_count}/{}", directions.len()),
                    "directions": entries,
                }),
            ))
        }
        Suite::All => unreachable!("expanded before evaluation"),
    }
}
