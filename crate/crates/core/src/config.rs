//! Run configuration: the free parameters of the construction, their `"auto"`
//! resolution, and the digest that ties every report to a resolved config.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bumps::{BumpSet, Profile};
use crate::error::{Error, Result};
use crate::geometry::{auto_radius, validate_geometry, GeometryReport};
use crate::metric::{condition_range, max_admissible_epsilon, BaseMetric, HamiltonianField};
use crate::rootsys::{build_roots, build_weyl_group_with, root_count, RootSystem, MAX_DIMENSION};

/// Two amplitudes closer than this count as satisfying `a_kl = a_k - a_l`.
pub const AMPLITUDE_DEGENERACY_TOL: f64 = 1e-9;

/// Range of seeded amplitudes.
pub const SEEDED_AMPLITUDE_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// A value or the literal string `"auto"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Auto<T> {
    Auto(AutoTag),
    Value(T),
}

impl<T> Default for Auto<T> {
    fn default() -> Self {
        Auto::Auto(AutoTag::Auto)
    }
}

impl<T: Clone> Auto<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Auto::Auto(_) => None,
            Auto::Value(v) => Some(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitudes {
    List(Vec<f64>),
    Seeded { seed: u64 },
}

impl Default for Amplitudes {
    fn default() -> Self {
        Amplitudes::Seeded { seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_param: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-12, max_param: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Lateral deviation bound, in units of the ball radius.
    pub lateral: f64,
    /// Angular deviation bound, radians.
    pub angular: f64,
    pub energy_drift: f64,
    /// Required ratio of curvature to the unperturbed noise floor.
    pub curvature_floor_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { lateral: 1e-6, angular: 1e-8, energy_drift: 1e-9, curvature_floor_ratio: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub epsilon: Auto<f64>,
    pub ball_radius: Auto<f64>,
    pub chamber_point: Auto<Vec<f64>>,
    pub amplitudes: Amplitudes,
    pub profile: String,
    pub integrator: IntegratorConfig,
    pub thresholds: Thresholds,
    /// Grid points per axis for the admissible-epsilon search.
    pub epsilon_grid: Auto<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n: 2,
            epsilon: Auto::default(),
            ball_radius: Auto::default(),
            chamber_point: Auto::default(),
            amplitudes: Amplitudes::default(),
            profile: "mollifier".into(),
            integrator: IntegratorConfig::default(),
            thresholds: Thresholds::default(),
            epsilon_grid: Auto::default(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigInvalid { field: field.into(), message: message.into() }
}

impl Config {
    pub fn for_dimension(n: usize) -> Self {
        Config { n, ..Config::default() }
    }

    /// Parses a JSON config and applies `key=value` overrides (dotted keys,
    /// values parsed as JSON and otherwise taken as strings).
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| invalid("config", e.to_string()))?
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| invalid("config", e.to_string()))
    }
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(assignment, "override must look like key=value"))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor.as_object_mut().ok_or_else(|| invalid(key, "cannot descend into a non-object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(invalid(key, "empty key"))
}

/// Every field concrete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub n: usize,
    pub epsilon: f64,
    pub ball_radius: f64,
    pub chamber_point: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub seed: Option<u64>,
    pub profile: Profile,
    pub integrator: IntegratorConfig,
    pub thresholds: Thresholds,
    pub epsilon_grid: usize,
}

impl ResolvedConfig {
    /// Hex SHA-256 of the compact JSON serialization.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionReport {
    pub n: usize,
    pub root_count: usize,
    pub group_order: usize,
    /// Present when epsilon was resolved automatically.
    pub epsilon_max: Option<f64>,
    pub epsilon: f64,
    pub ball_radius: f64,
    pub chamber_point: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub amplitudes: Vec<f64>,
    pub gradient_bound: f64,
    pub hessian_bound: f64,
    pub condition_unperturbed: f64,
    pub condition_min: f64,
    pub condition_max: f64,
    pub geometry: GeometryReport,
    pub config_digest: String,
}

/// A resolved config together with the field it describes.
#[derive(Debug, Clone)]
pub struct Construction {
    pub resolved: ResolvedConfig,
    pub field: HamiltonianField<f64>,
    pub report: ConstructionReport,
}

/// Points per axis used by default for the admissible-epsilon grid.
pub fn default_epsilon_grid(n: usize) -> usize {
    (5000f64.powf(1.0 / n as f64).round() as usize).clamp(5, 41)
}

/// Seeded amplitudes, uniform in [`SEEDED_AMPLITUDE_RANGE`].
pub fn seeded_amplitudes(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = SEEDED_AMPLITUDE_RANGE;
    (0..root_count(n)).map(|_| rng.random_range(lo..hi)).collect()
}

/// Rejects amplitudes with `a_kl = a_k - a_l` for some pair.
pub fn check_amplitudes(rs: &RootSystem<f64>, amplitudes: &[f64]) -> Result<()> {
    for (k, l) in rs.pairs() {
        let a_kl = amplitudes[rs.pair_index(k, l)];
        let diff = amplitudes[k] - amplitudes[l];
        if (a_kl - diff).abs() <= AMPLITUDE_DEGENERACY_TOL {
            return Err(Error::AmplitudeDegenerate { k: k + 1, l: l + 1, a_kl, diff });
        }
    }
    Ok(())
}

/// Resolves `"auto"` fields (chamber point, then radius, then epsilon) and
/// builds the field.
pub fn resolve_config(raw: &Config) -> Result<Construction> {
    let n = raw.n;
    if !(2..=MAX_DIMENSION).contains(&n) {
        return Err(invalid("n", format!("must be in 2..={MAX_DIMENSION}, got {n}")));
    }
    let profile: Profile = raw.profile.parse()?;
    let it = &raw.integrator;
    for (name, v) in [("integrator.rel_tol", it.rel_tol), ("integrator.abs_tol", it.abs_tol), ("integrator.max_param", it.max_param)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive"));
        }
    }
    let th = &raw.thresholds;
    for (name, v) in [
        ("thresholds.lateral", th.lateral),
        ("thresholds.angular", th.angular),
        ("thresholds.energy_drift", th.energy_drift),
        ("thresholds.curvature_floor_ratio", th.curvature_floor_ratio),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive"));
        }
    }

    let rs = build_roots::<f64>(n)?;
    let count = rs.len();

    let chamber_point = match &raw.chamber_point {
        Auto::Auto(_) => None,
        Auto::Value(p) => Some(DVector::from_vec(p.clone())),
    };
    let group = build_weyl_group_with(&rs, chamber_point).map_err(|e| match e {
        Error::ChamberPoint(m) => invalid("chamber_point", m),
        other => other,
    })?;

    let ball_radius = match raw.ball_radius {
        Auto::Auto(_) => auto_radius(&rs, &group),
        Auto::Value(r) if r > 0.0 && r.is_finite() => r,
        Auto::Value(_) => return Err(invalid("ball_radius", "must be positive")),
    };

    let (amplitudes, seed) = match &raw.amplitudes {
        Amplitudes::List(a) => {
            if a.len() != count {
                return Err(invalid("amplitudes", format!("expected {count} values, got {}", a.len())));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(invalid("amplitudes", "values must be finite"));
            }
            (a.clone(), None)
        }
        Amplitudes::Seeded { seed } => (seeded_amplitudes(n, *seed), Some(*seed)),
    };
    check_amplitudes(&rs, &amplitudes)?;

    let bumps = BumpSet::new(group.chamber_point().clone(), ball_radius, amplitudes.clone(), profile)?;
    let epsilon_grid = match raw.epsilon_grid {
        Auto::Auto(_) => default_epsilon_grid(n),
        Auto::Value(g) if g >= 2 => g,
        Auto::Value(_) => return Err(invalid("epsilon_grid", "needs at least 2 points per axis")),
    };
    let (epsilon, epsilon_max) = match raw.epsilon {
        Auto::Auto(_) => {
            let eps_max = max_admissible_epsilon(&rs, &bumps, epsilon_grid)?;
            (eps_max * 0.5, Some(eps_max))
        }
        Auto::Value(e) if e >= 0.0 && e.is_finite() => (e, None),
        Auto::Value(_) => return Err(invalid("epsilon", "must be non-negative")),
    };

    let base = BaseMetric::new(rs.clone(), bumps.clone(), epsilon)?;
    let condition_unperturbed = base.unperturbed_condition();
    let (condition_min, condition_max) = condition_range(&base, epsilon_grid)?;
    let field = HamiltonianField::new(base, group.clone());
    let geometry = validate_geometry(&field);

    let resolved = ResolvedConfig {
        n,
        epsilon,
        ball_radius,
        chamber_point: group.chamber_point().iter().copied().collect(),
        amplitudes: amplitudes.clone(),
        seed,
        profile,
        integrator: raw.integrator.clone(),
        thresholds: raw.thresholds.clone(),
        epsilon_grid,
    };
    let (gradient_bound, hessian_bound) = bumps.bounds();
    let report = ConstructionReport {
        n,
        root_count: count,
        group_order: group.order(),
        epsilon_max,
        epsilon,
        ball_radius,
        chamber_point: resolved.chamber_point.clone(),
        centers: group.centers().iter().map(|c| c.iter().copied().collect()).collect(),
        amplitudes,
        gradient_bound,
        hessian_bound,
        condition_unperturbed,
        condition_min,
        condition_max,
        geometry,
        config_digest: resolved.digest(),
    };
    Ok(Construction { resolved, field, report })
}

impl ResolvedConfig {
    /// Back to a raw config with every field explicit; resolving it again
    /// reproduces the same construction.
    pub fn to_config(&self) -> Config {
        Config {
            n: self.n,
            epsilon: Auto::Value(self.epsilon),
            ball_radius: Auto::Value(self.ball_radius),
            chamber_point: Auto::Value(self.chamber_point.clone()),
            amplitudes: Amplitudes::List(self.amplitudes.clone()),
            profile: "mollifier".into(),
            integrator: self.integrator.clone(),
            thresholds: self.thresholds.clone(),
            epsilon_grid: Auto::Value(self.epsilon_grid),
        }
    }
}
