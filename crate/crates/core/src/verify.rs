//! Verification suites: invisibility of directions, reflection symmetry of the
//! field, energy-level membership of the sections, the first-order flatness
//! obstruction and finite-difference curvature.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bumps::BumpSet;
use crate::error::{Error, Result};
use crate::geodesic::{integrate, GeodesicState, Line, TraceResult, TraceSettings};
use crate::geometry::validate_geometry;
use crate::metric::{BaseMetric, HamiltonianField};
use crate::rootsys::RootSystem;
use crate::scalar::{lit, to_f64, Real};

/// Launch direction of a bundle of rays.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// Root `index` (0-based), negated when `negative`.
    Root { index: usize, negative: bool },
    Custom(Vec<f64>),
}

impl Direction {
    /// Momentum with unit energy: `+-v_k` for roots, `sqrt(2)` times the unit
    /// vector otherwise.
    pub fn momentum<T: Real>(&self, rs: &RootSystem<T>) -> Result<DVector<T>> {
        match self {
            Direction::Root { index, negative } => {
                if *index >= rs.len() {
                    return Err(Error::InvalidArgument(format!(
                        "root index {} out of range 1..={}",
                        index + 1,
                        rs.len()
                    )));
                }
                let v = rs.root(*index).clone();
                Ok(if *negative { -v } else { v })
            }
            Direction::Custom(c) => {
                if c.len() != rs.dimension() {
                    return Err(Error::InvalidArgument(format!(
                        "direction needs {} components, got {}",
                        rs.dimension(),
                        c.len()
                    )));
                }
                let d = DVector::from_iterator(c.len(), c.iter().map(|&x| lit::<T>(x)));
                let norm = d.norm();
                if !(norm > T::zero()) || !norm.is_finite() {
                    return Err(Error::InvalidArgument("direction must be nonzero".into()));
                }
                Ok(d * (lit::<T>(2.0).sqrt() / norm))
            }
        }
    }

    pub fn root_index(&self) -> Option<usize> {
        match self {
            Direction::Root { index, .. } => Some(*index),
            Direction::Custom(_) => None,
        }
    }

    /// All `2N` signed root directions.
    pub fn all_roots(count: usize) -> Vec<Direction> {
        (0..count)
            .flat_map(|index| {
                [Direction::Root { index, negative: false }, Direction::Root { index, negative: true }]
            })
            .collect()
    }
}

impl FromStr for Direction {
    type Err = Error;

    /// `root:i`, `root:-i` (1-based) or `custom:c_1,...,c_n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse direction `{s}`"));
        if let Some(rest) = s.strip_prefix("root:") {
            let (negative, digits) = match rest.strip_prefix('-') {
                Some(d) => (true, d),
                None => (false, rest),
            };
            let i: usize = digits.trim().parse().map_err(|_| bad())?;
            if i == 0 {
                return Err(bad());
            }
            Ok(Direction::Root { index: i - 1, negative })
        } else if let Some(rest) = s.strip_prefix("custom:") {
            let comps = rest
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            Ok(Direction::Custom(comps))
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Root { index, negative } => {
                write!(f, "root:{}{}", if *negative { "-" } else { "" }, index + 1)
            }
            Direction::Custom(c) => {
                let parts: Vec<String> = c.iter().map(|x| format!("{x}")).collect();
                write!(f, "custom:{}", parts.join(","))
            }
        }
    }
}

/// Deviation of `exit` from `entry`: lateral offset measured at the obstacle
/// (feet of the origin on both lines) and the angle between the directions.
pub fn line_deviation<T: Real>(entry: &Line<T>, exit: &Line<T>) -> (T, T) {
    let origin = DVector::zeros(entry.point.len());
    let lateral = exit.distance_to(&entry.foot(&origin)).max(entry.distance_to(&exit.foot(&origin)));
    let chord = (&entry.direction - &exit.direction).norm();
    let angular = lit::<T>(2.0) * (chord * lit::<T>(0.5)).min(T::one()).asin();
    (lateral, angular)
}

/// Orthonormal basis of the complement of `u`.
pub fn orthogonal_basis<T: Real>(u: &DVector<T>) -> Vec<DVector<T>> {
    let n = u.len();
    let u = u.normalize();
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(n - 1);
    for axis in 0..n {
        let mut e = DVector::zeros(n);
        e[axis] = T::one();
        let mut w = &e - &u * u.dot(&e);
        for b in &basis {
            let c = b.dot(&w);
            w -= b * c;
        }
        if w.norm() > lit::<T>(1e-6) && basis.len() < n - 1 {
            basis.push(w.normalize());
        }
    }
    basis
}

/// Launch points for a bundle of parallel rays: a cell-centred grid on the
/// hyperplane orthogonal to `momentum`, covering the obstacle, set back behind it.
pub fn ray_starts<T: Real>(hf: &HamiltonianField<T>, momentum: &DVector<T>, count: usize) -> Vec<DVector<T>> {
    let n = hf.dimension();
    let r = hf.obstacle_radius();
    let u = momentum.normalize();
    let basis = orthogonal_basis(&u);
    let dims = (n - 1) as u32;
    let mut per_axis = (count as f64).powf(1.0 / dims as f64).round().max(1.0) as usize;
    while per_axis.pow(dims) < count {
        per_axis += 1;
    }
    let cell = r * lit::<T>(2.0 / per_axis as f64);
    let setback = r * lit::<T>(1.1);
    (0..per_axis.pow(dims))
        .map(|flat| {
            let mut rem = flat;
            let mut point = -&u * setback;
            for b in &basis {
                let k = rem % per_axis;
                rem /= per_axis;
                point += b * (-r + cell * (lit::<T>(k as f64) + lit::<T>(0.5)));
            }
            point
        })
        .collect()
}

/// Launch point for a ray with momentum direction `momentum` whose line passes
/// at `offsets` (coordinates in [`orthogonal_basis`]) from the origin.
pub fn offset_start<T: Real>(hf: &HamiltonianField<T>, momentum: &DVector<T>, offsets: &[f64]) -> Result<DVector<T>> {
    let n = hf.dimension();
    if offsets.len() != n - 1 {
        return Err(Error::InvalidArgument(format!("offset needs {} components, got {}", n - 1, offsets.len())));
    }
    let u = momentum.normalize();
    let mut point = -&u * (hf.obstacle_radius() * lit::<T>(1.1));
    for (b, &o) in orthogonal_basis(&u).iter().zip(offsets) {
        point += b * lit::<T>(o);
    }
    Ok(point)
}

/// Integrator settings sized to the obstacle of `hf`.
pub fn trace_settings<T: Real>(hf: &HamiltonianField<T>, rel_tol: T, abs_tol: T, max_param: T) -> TraceSettings<T> {
    TraceSettings {
        bounding_radius: hf.obstacle_radius() * lit::<T>(3.0),
        rel_tol,
        abs_tol,
        max_param,
    }
}

/// Integrates one ray per start point, in parallel, preserving order.
pub fn shoot<T: Real>(
    hf: &HamiltonianField<T>,
    momentum: &DVector<T>,
    starts: &[DVector<T>],
    settings: &TraceSettings<T>,
) -> Result<Vec<TraceResult<T>>> {
    starts
        .par_iter()
        .map(|x0| integrate(hf, &GeodesicState::new(x0.clone(), momentum.clone()), settings))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayRecord {
    pub entry_point: Vec<f64>,
    pub entry_direction: Vec<f64>,
    pub exit_point: Vec<f64>,
    pub exit_direction: Vec<f64>,
    pub lateral: f64,
    pub angular: f64,
    pub balls_crossed: Vec<usize>,
    pub energy_drift: f64,
    pub time_delay: f64,
}

fn to_vec<T: Real>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|&x| to_f64(x)).collect()
}

impl RayRecord {
    pub fn from_trace<T: Real>(trace: &TraceResult<T>) -> Self {
        let (lateral, angular) = line_deviation(&trace.entry_line, &trace.exit_line);
        RayRecord {
            entry_point: to_vec(&trace.entry_line.point),
            entry_direction: to_vec(&trace.entry_line.direction),
            exit_point: to_vec(&trace.exit_line.point),
            exit_direction: to_vec(&trace.exit_line.direction),
            lateral: to_f64(lateral),
            angular: to_f64(angular),
            balls_crossed: trace.balls_crossed(),
            energy_drift: to_f64(trace.energy_drift),
            time_delay: to_f64(trace.time_delay),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvisibilityReport {
    pub direction: String,
    pub rays: usize,
    pub max_lateral: f64,
    pub max_angular: f64,
    /// Rays that crossed at least one ball.
    pub hits: usize,
    pub max_energy_drift: f64,
    pub max_time_delay: f64,
    /// Root directions only: rays whose crossed balls are not a single mirror pair.
    pub pairing_violations: usize,
    #[serde(skip)]
    pub records: Vec<RayRecord>,
}

impl InvisibilityReport {
    pub fn invisible(&self, max_lateral: f64, max_angular: f64) -> bool {
        self.max_lateral <= max_lateral && self.max_angular <= max_angular
    }
}

/// Whether `crossed` is empty or exactly one mirror pair under `pairing`.
pub fn is_mirror_pair(crossed: &[usize], pairing: &[Option<usize>]) -> bool {
    match crossed {
        [] => true,
        [a, b] => pairing.get(*a).copied().flatten() == Some(*b),
        _ => false,
    }
}

/// Shoots `ray_count` parallel rays in `direction` and measures how far the
/// exit lines stray from the entry lines.
pub fn verify_invisibility<T: Real>(
    hf: &HamiltonianField<T>,
    direction: &Direction,
    ray_count: usize,
    settings: &TraceSettings<T>,
) -> Result<InvisibilityReport> {
    let geometry = validate_geometry(hf);
    if !geometry.passed() {
        return Err(Error::GeometryInvalid(geometry.failures().join("; ")));
    }
    let momentum = direction.momentum(hf.roots())?;
    let starts = ray_starts(hf, &momentum, ray_count);
    let traces = shoot(hf, &momentum, &starts, settings)?;
    let records: Vec<RayRecord> = traces.iter().map(RayRecord::from_trace).collect();

    let pairing = direction.root_index().map(|k| &geometry.pairings[k]);
    let pairing_violations = match pairing {
        Some(p) => records.iter().filter(|r| !is_mirror_pair(&r.balls_crossed, p)).count(),
        None => 0,
    };
    let max = |f: fn(&RayRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    Ok(InvisibilityReport {
        direction: direction.to_string(),
        rays: records.len(),
        max_lateral: max(|r| r.lateral),
        max_angular: max(|r| r.angular),
        hits: records.iter().filter(|r| !r.balls_crossed.is_empty()).count(),
        max_energy_drift: max(|r| r.energy_drift),
        max_time_delay: max(|r| r.time_delay.abs()),
        pairing_violations,
        records,
    })
}

/// `max |p(t) - v_k - eps grad phi_k(x(t))|` over the accepted states of a
/// trace through a single-ball field launched with momentum `v_k`.
pub fn section_deviation<T: Real>(base: &BaseMetric<T>, trace: &TraceResult<T>, root: usize) -> T {
    trace
        .polyline
        .iter()
        .map(|s| (&s.p - base.section(root, &s.x)).norm())
        .fold(T::zero(), |a, b| a.max(b))
}

/// Largest `|s x(t_m - tau) - x(t_m + tau)|`, with `t_m` the time the trace
/// crosses the mirror of `root`.
pub fn mirror_residual<T: Real>(rs: &RootSystem<T>, trace: &TraceResult<T>, root: usize) -> Option<T> {
    let v = rs.root(root);
    let s = rs.reflection(root);
    let side = |t: T| trace.state_at(t).x.dot(v);
    let seg = trace.segments.iter().find(|seg| {
        let a = side(seg.t0);
        let b = side(seg.t1());
        a == T::zero() || (a < T::zero()) != (b < T::zero())
    })?;
    let (mut lo, mut hi) = (seg.t0, seg.t1());
    let lo_sign = side(lo) < T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * lit::<T>(0.5);
        if (side(mid) < T::zero()) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_mid = (lo + hi) * lit::<T>(0.5);
    let t0 = trace.initial().t;
    let t1 = trace.last().t;
    let span = (t_mid - t0).min(t1 - t_mid);
    const SAMPLES: usize = 400;
    let mut worst = T::zero();
    for j in 0..=SAMPLES {
        let tau = span * lit::<T>(j as f64 / SAMPLES as f64);
        let before = &s * trace.state_at(t_mid - tau).x;
        let after = trace.state_at(t_mid + tau).x;
        worst = worst.max((before - after).norm());
    }
    Some(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub samples: usize,
    pub generators: usize,
    pub max_residual: f64,
}

/// `max ||H(s x) - s H(x) s^T||` over random points of the obstacle's box and
/// every generating reflection.
pub fn verify_symmetry<T: Real>(hf: &HamiltonianField<T>, samples: usize, seed: u64) -> Result<SymmetryReport> {
    let n = hf.dimension();
    let r = to_f64(hf.obstacle_radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<DVector<T>> = (0..samples)
        .map(|_| DVector::from_fn(n, |_, _| lit::<T>(rng.random_range(-r..r))))
        .collect();
    let generators = hf.group().generators();
    let residuals = points
        .par_iter()
        .map(|x| {
            let h = hf.h(x)?;
            let mut worst = T::zero();
            for s in generators {
                let lhs = hf.h(&(s * x))?;
                let rhs = s * &h * s.transpose();
                worst = worst.max((lhs - rhs).amax());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<T>>>()?;
    let max_residual = residuals.into_iter().fold(T::zero(), |a, b| a.max(b));
    Ok(SymmetryReport { samples, generators: generators.len(), max_residual: to_f64(max_residual) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub points: usize,
    /// `max |(H w_i, w_i)/2 - 1|`.
    pub max_deviation: f64,
    pub min_eigenvalue: f64,
}

/// Grid resolution per axis giving at least `target` points inside the ball.
pub fn resolution_for(n: usize, target: usize) -> usize {
    let mut res = 2usize;
    loop {
        let count = crate::metric::ball_grid(&DVector::<f64>::zeros(n), 1.0, res).len();
        if count >= target {
            return res;
        }
        let ratio = (target as f64 / count.max(1) as f64).powf(1.0 / n as f64);
        res = ((res as f64 * ratio).ceil() as usize).max(res + 1);
    }
}

/// Checks that every section `w_i` lies on the unit energy level of the base metric.
pub fn verify_energy_level<T: Real>(base: &BaseMetric<T>, resolution: usize) -> Result<EnergyReport> {
    let grid = base.ball_grid(resolution);
    let half = lit::<T>(0.5);
    let per_point = grid
        .par_iter()
        .map(|y| {
            let sol = base.solve(y)?;
            let dev = base
                .sections(y)
                .iter()
                .map(|w| ((&sol.h * w).dot(w) * half - T::one()).abs())
                .fold(T::zero(), |a, b| a.max(b));
            Ok((dev, sol.h.symmetric_eigenvalues().min()))
        })
        .collect::<Result<Vec<(T, T)>>>()?;
    let max_deviation = per_point.iter().fold(T::zero(), |a, &(d, _)| a.max(d));
    let min_eigenvalue = per_point.iter().fold(T::one(), |a, &(_, e)| a.min(e));
    Ok(EnergyReport {
        points: grid.len(),
        max_deviation: to_f64(max_deviation),
        min_eigenvalue: to_f64(min_eigenvalue),
    })
}

/// `(grad(phi_kl - (phi_k - phi_l))(x), v_k + v_l)`; must vanish identically
/// for the metric to be flat.
pub fn pair_obstruction<T: Real>(rs: &RootSystem<T>, bumps: &BumpSet<T>, k: usize, l: usize, x: &DVector<T>) -> T {
    let kl = rs.pair_index(k, l);
    let grad = bumps.grad_phi(kl, x) - bumps.grad_phi(k, x) + bumps.grad_phi(l, x);
    grad.dot(&(rs.root(k) + rs.root(l)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionPair {
    /// 1-based root indices.
    pub k: usize,
    pub l: usize,
    pub max_abs: f64,
}

/// Largest obstruction magnitude per pair over the base-ball grid.
pub fn obstruction_scan<T: Real>(rs: &RootSystem<T>, bumps: &BumpSet<T>, resolution: usize) -> Vec<ObstructionPair> {
    let grid = crate::metric::ball_grid(bumps.center(), bumps.radius(), resolution);
    rs.pairs()
        .map(|(k, l)| {
            let max_abs = grid
                .iter()
                .map(|x| pair_obstruction(rs, bumps, k, l, x).abs())
                .fold(T::zero(), |a, b| a.max(b));
            ObstructionPair { k: k + 1, l: l + 1, max_abs: to_f64(max_abs) }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub x: Vec<f64>,
    /// Largest `|R^i_jkl|`.
    pub max_riemann: f64,
    pub scalar: f64,
    /// `max |R_h - R_2h|` over lowered components, a truncation estimate.
    pub fd_error: f64,
    /// Largest violation of the pair symmetries of the lowered tensor.
    pub symmetry_residual: f64,
}

/// `Gamma^i_jk` stored at `[i][j][k]` (flattened).
fn christoffel<T: Real>(hf: &HamiltonianField<T>, x: &DVector<T>, step: T) -> Result<Vec<T>> {
    let n = hf.dimension();
    let h_inv = hf.h(x)?;
    let two_h = step * lit::<T>(2.0);
    let mut dg: Vec<DMatrix<T>> = Vec::with_capacity(n);
    for l in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[l] += step;
        xm[l] -= step;
        dg.push((hf.metric_tensor(&xp)? - hf.metric_tensor(&xm)?) / two_h);
    }
    let half = lit::<T>(0.5);
    let mut gamma = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = T::zero();
                for l in 0..n {
                    acc += h_inv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                }
                gamma[(i * n + j) * n + k] = acc * half;
            }
        }
    }
    Ok(gamma)
}

/// Mixed `R^i_jkl` at `[i][j][k][l]` (flattened).
fn riemann<T: Real>(hf: &HamiltonianField<T>, x: &DVector<T>, step: T) -> Result<Vec<T>> {
    let n = hf.dimension();
    let gamma = christoffel(hf, x, step)?;
    let g = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
    let two_h = step * lit::<T>(2.0);
    let mut dgamma = Vec::with_capacity(n);
    for m in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[m] += step;
        xm[m] -= step;
        let gp = christoffel(hf, &xp, step)?;
        let gm = christoffel(hf, &xm, step)?;
        dgamma.push(gp.iter().zip(&gm).map(|(&a, &b)| (a - b) / two_h).collect::<Vec<T>>());
    }
    let dg = |m: usize, i: usize, j: usize, k: usize| dgamma[m][(i * n + j) * n + k];
    let mut r = vec![T::zero(); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = dg(k, i, l, j) - dg(l, i, k, j);
                    for m in 0..n {
                        acc += g(i, k, m) * g(m, l, j) - g(i, l, m) * g(m, k, j);
                    }
                    r[((i * n + j) * n + k) * n + l] = acc;
                }
            }
        }
    }
    Ok(r)
}

fn lower<T: Real>(metric: &DMatrix<T>, mixed: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); mixed.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = T::zero();
                    for m in 0..n {
                        acc += metric[(i, m)] * mixed[((m * n + j) * n + k) * n + l];
                    }
                    out[((i * n + j) * n + k) * n + l] = acc;
                }
            }
        }
    }
    out
}

/// Riemann tensor of `G = H^{-1}` at `x` by nested central differences.
pub fn curvature<T: Real>(hf: &HamiltonianField<T>, x: &DVector<T>, fd_step: T) -> Result<CurvatureSample> {
    let n = hf.dimension();
    let mixed = riemann(hf, x, fd_step)?;
    let coarse = riemann(hf, x, fd_step * lit::<T>(2.0))?;
    let metric = hf.metric_tensor(x)?;
    let inverse = hf.h(x)?;
    let low = lower(&metric, &mixed, n);
    let low_coarse = lower(&metric, &coarse, n);

    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut symmetry = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = low[idx(i, j, k, l)];
                    symmetry = symmetry
                        .max((r + low[idx(j, i, k, l)]).abs())
                        .max((r + low[idx(i, j, l, k)]).abs())
                        .max((r - low[idx(k, l, i, j)]).abs());
                }
            }
        }
    }
    let mut scalar = T::zero();
    for j in 0..n {
        for l in 0..n {
            let ricci = (0..n).fold(T::zero(), |acc, i| acc + mixed[idx(i, j, i, l)]);
            scalar += inverse[(j, l)] * ricci;
        }
    }
    let max_riemann = mixed.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let fd_error = low.iter().zip(&low_coarse).fold(T::zero(), |a, (&p, &q)| a.max((p - q).abs()));
    Ok(CurvatureSample {
        x: to_vec(x),
        max_riemann: to_f64(max_riemann),
        scalar: to_f64(scalar),
        fd_error: to_f64(fd_error),
        symmetry_residual: to_f64(symmetry),
    })
}

/// Default curvature probe: a quarter radius off the base-ball center along the diagonal.
pub fn curvature_probe<T: Real>(hf: &HamiltonianField<T>) -> DVector<T> {
    let n = hf.dimension();
    let diag = DVector::from_element(n, T::one()).normalize();
    hf.base().bumps().center() + diag * (hf.radius() * lit::<T>(0.25))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub obstruction: Vec<ObstructionPair>,
    pub max_obstruction: f64,
    /// Obstruction large enough to certify non-flatness at first order.
    pub obstructed: bool,
    pub curvature: CurvatureSample,
    /// Same probe and stencil on the unperturbed field.
    pub noise_floor: CurvatureSample,
}

/// Obstruction threshold above which a pair counts as violated.
pub const OBSTRUCTION_FLOOR: f64 = 1e-6;
/// Bound on `||H(s x) - s H(x) s^T||`.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Bound on `|(H w_i, w_i)/2 - 1|`.
pub const ENERGY_LEVEL_TOL: f64 = 1e-10;
/// Grid points inside the base ball for the energy-level check.
pub const ENERGY_LEVEL_POINTS: usize = 10_000;
/// Curvature of the unperturbed field must stay below this.
pub const FLAT_CURVATURE_TOL: f64 = 1e-6;
/// Finite-difference step for curvature, in units of the ball radius.
pub const CURVATURE_STEP_RATIO: f64 = 1e-3;

impl FlatnessReport {
    /// Noise level the curvature is compared against: the unperturbed
    /// curvature or the Richardson error estimate, whichever is larger.
    pub fn floor(&self) -> f64 {
        self.noise_floor.max_riemann.max(self.noise_floor.fd_error).max(self.curvature.fd_error)
    }

    /// Curvature clears `ratio` times the floor (only asserted when obstructed),
    /// the unperturbed field reads flat, and the Riemann symmetries hold.
    pub fn passed(&self, ratio: f64) -> bool {
        let curved = !self.obstructed || self.curvature.max_riemann > ratio * self.floor();
        let symmetric = self.curvature.symmetry_residual <= 10.0 * self.curvature.fd_error.max(f64::EPSILON);
        curved && symmetric && self.noise_floor.max_riemann <= FLAT_CURVATURE_TOL
    }
}

pub fn verify_flatness<T: Real>(hf: &HamiltonianField<T>, resolution: usize, fd_step: T) -> Result<FlatnessReport> {
    let obstruction = obstruction_scan(hf.roots(), hf.base().bumps(), resolution);
    let max_obstruction = obstruction.iter().map(|p| p.max_abs).fold(0.0, f64::max);
    let probe = curvature_probe(hf);
    let curvature = curvature(hf, &probe, fd_step)?;
    let noise_floor = self::curvature(&hf.with_epsilon(T::zero()), &probe, fd_step)?;
    Ok(FlatnessReport {
        obstruction,
        max_obstruction,
        obstructed: max_obstruction > OBSTRUCTION_FLOOR,
        curvature,
        noise_floor,
    })
}
