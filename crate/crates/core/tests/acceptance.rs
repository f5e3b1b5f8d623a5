//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use invisible::bumps::{BumpSet, Profile};
use invisible::geodesic::hamilton_rhs;
use invisible::metric::BaseMetric;
use invisible::verify::*;
use invisible::{integrate, validate_geometry, GeodesicState, HamiltonianField};
use nalgebra::{DMatrix, DVector};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn energy_level() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2, 3] {
        let c = default_construction(n);
        let start = Instant::now();
        let rep = verify_energy_level(c.field.base(), resolution_for(n, ENERGY_LEVEL_POINTS)).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ok &= rep.points >= ENERGY_LEVEL_POINTS
            && rep.max_deviation <= ENERGY_LEVEL_TOL
            && elapsed <= Duration::from_secs(10);
        parts.push(format!("n={n}: {:.2e} over {} points in {:.2?}", rep.max_deviation, rep.points, elapsed));
    }
    ensure(ok, parts.join("; "))
}

fn invisibility() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2, 3] {
        let c = default_construction(n);
        let hf = &c.field;
        let rho = c.resolved.ball_radius;
        let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
        let start = Instant::now();
        let (mut lat, mut ang, mut count) = (0.0f64, 0.0f64, 0);
        for d in Direction::all_roots(hf.roots().len()) {
            let rep = verify_invisibility(hf, &d, 100, &settings).map_err(|e| e.to_string())?;
            ok &= rep.rays >= 100 && rep.hits > 0;
            lat = lat.max(rep.max_lateral);
            ang = ang.max(rep.max_angular);
            count += 1;
        }
        let elapsed = start.elapsed();
        ok &= lat <= 1e-6 * rho && ang <= 1e-8 && elapsed <= Duration::from_secs(120);
        parts.push(format!("n={n}: {count} directions, lateral {:.2e} rho, angular {ang:.2e} in {elapsed:.2?}", lat / rho));
    }
    ensure(ok, parts.join("; "))
}

fn visibility_control() -> Check {
    let c = default_construction(2);
    let hf = &c.field;
    let rho = c.resolved.ball_radius;
    let v = hf.roots().root(0);
    let (s, co) = 0.3f64.sin_cos();
    let rotated = Direction::Custom(vec![co * v[0] - s * v[1], s * v[0] + co * v[1]]);
    let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [rotated, "custom:0.92,0.39".parse().unwrap()] {
        let rep = verify_invisibility(hf, &d, 100, &settings).map_err(|e| e.to_string())?;
        ok &= rep.max_lateral >= 1e-4 * rho;
        parts.push(format!("{}: lateral {:.3e} rho", rep.direction, rep.max_lateral / rho));
    }
    ensure(ok, parts.join("; "))
}

fn section_invariance() -> Check {
    let mut worst = 0.0f64;
    let mut traces = 0;
    for n in [2, 3] {
        let c = default_construction(n);
        let base = c.field.base().clone();
        let single = HamiltonianField::single_ball(base.clone(), c.field.group().clone());
        let settings = trace_settings(&single, 1e-12, 1e-12, 1e3);
        let rho = c.resolved.ball_radius;
        let center = base.bumps().center().clone();
        for k in 0..base.roots().len() {
            for sign in [1.0, -1.0] {
                let p0 = base.roots().root(k) * sign;
                let u = p0.normalize();
                let basis = orthogonal_basis(&u);
                for o in [-0.8, -0.4, 0.0, 0.3, 0.7] {
                    let mut x0 = &center - &u * (1.5 * rho);
                    x0 += &basis[0] * (o * rho);
                    if n > 2 {
                        x0 += &basis[1] * (0.25 * o * rho);
                    }
                    let trace = integrate(&single, &GeodesicState::new(x0, p0.clone()), &settings).map_err(|e| e.to_string())?;
                    if trace.balls_crossed().is_empty() {
                        return Err(format!("n={n} root {k}: ray at offset {o} missed the ball"));
                    }
                    for s in &trace.polyline {
                        worst = worst.max((&s.p - base.section(k, &s.x) * sign).norm());
                    }
                    traces += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-8, format!("{traces} traces through the single ball, sup deviation {worst:.2e}"))
}

fn non_flatness() -> Check {
    let c = default_construction(2);
    let hf = &c.field;
    let rep = verify_flatness(hf, c.resolved.epsilon_grid, c.resolved.ball_radius * CURVATURE_STEP_RATIO)
        .map_err(|e| e.to_string())?;
    let ratio = c.resolved.thresholds.curvature_floor_ratio;
    let ok = rep.max_obstruction > OBSTRUCTION_FLOOR
        && rep.curvature.max_riemann > ratio * rep.floor()
        && rep.noise_floor.max_riemann <= FLAT_CURVATURE_TOL;
    ensure(
        ok,
        format!(
            "obstruction {:.3e}, |Riemann| {:.3e} vs floor {:.2e} (eps=0 curvature {:.1e})",
            rep.max_obstruction, rep.curvature.max_riemann, rep.floor(), rep.noise_floor.max_riemann
        ),
    )
}

fn symmetry() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2, 3] {
        let c = default_construction(n);
        let rep = verify_symmetry(&c.field, 1000, 42).map_err(|e| e.to_string())?;
        ok &= rep.max_residual <= SYMMETRY_TOL;
        parts.push(format!("n={n}: {:.2e} over {} points x {} generators", rep.max_residual, rep.samples, rep.generators));
    }
    ensure(ok, parts.join("; "))
}

fn geometry() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2, 3, 4] {
        let c = default_construction(n);
        let hf = &c.field;
        let g = validate_geometry(hf);
        ok &= g.passed();
        let rays = if n == 4 { 27 } else { 100 };
        let settings = trace_settings(hf, 1e-10, 1e-10, 1e3);
        let (mut violations, mut hits, mut total) = (0, 0, 0);
        for d in Direction::all_roots(hf.roots().len()) {
            let rep = verify_invisibility(hf, &d, rays, &settings).map_err(|e| e.to_string())?;
            violations += rep.pairing_violations;
            hits += rep.hits;
            total += rep.rays;
        }
        ok &= violations == 0 && hits > 0;
        parts.push(format!(
            "n={n}: checks {}, {hits}/{total} rays hit, {violations} not a mirror pair",
            if g.passed() { "pass" } else { "fail" }
        ));
    }
    ensure(ok, parts.join("; "))
}

fn oracles() -> Check {
    let mut worst_solve = 0.0f64;
    let mut worst_dh = 0.0f64;
    let mut worst_rhs = 0.0f64;
    for n in [2, 3] {
        let c = default_construction(n);
        let hf = &c.field;
        let mut rng = rng(7 + n as u64);
        let rho = hf.radius();
        let centers = hf.group().centers().to_vec();
        for i in 0..100 {
            let x = point_in_ball(&mut rng, &centers[i % centers.len()], rho, 0.95);
            let h = hf.h(&x).map_err(|e| e.to_string())?;
            worst_solve = worst_solve.max((&h - oracle_h(hf, &x)).amax());
            let p = hf.roots().root(i % hf.roots().len()).clone();
            let (_, dp) = hamilton_rhs(hf, &GeodesicState::new(x.clone(), p.clone())).map_err(|e| e.to_string())?;
            for m in 0..n {
                let fd = fd_matrix(|y| hf.h(y).unwrap(), &x, m, 1e-4);
                worst_dh = worst_dh.max((hf.dh(&x, m).map_err(|e| e.to_string())? - &fd).amax());
                let fd_dp = -0.5 * (&fd * &p).dot(&p);
                worst_rhs = worst_rhs.max((dp[m] - fd_dp).abs());
            }
        }
    }
    let (mut worst_grad, mut worst_hess) = (0.0f64, 0.0f64);
    for n in [2, 3, 4] {
        let c = default_construction(n);
        let bumps = c.field.base().bumps();
        let mut rng = rng(100 + n as u64);
        for _ in 0..100 {
            let x = point_in_ball(&mut rng, bumps.center(), bumps.radius(), 0.98);
            for i in 0..bumps.len() {
                let phi = |y: &DVector<f64>| DMatrix::from_element(1, 1, bumps.phi(i, y));
                let grad = bumps.grad_phi(i, &x);
                for m in 0..n {
                    worst_grad = worst_grad.max((grad[m] - fd_matrix(phi, &x, m, 1e-4)[(0, 0)]).abs());
                    let col = fd_matrix(|y| DMatrix::from_column_slice(n, 1, bumps.grad_phi(i, y).as_slice()), &x, m, 1e-4);
                    worst_hess = worst_hess.max((bumps.hess_phi(i, &x).column(m) - col.column(0)).amax());
                }
            }
        }
    }
    let ok = worst_solve <= 1e-8 && worst_dh <= 1e-6 && worst_rhs <= 1e-6 && worst_grad <= 1e-6 && worst_hess <= 1e-5;
    ensure(
        ok,
        format!(
            "solve {worst_solve:.1e}, dH {worst_dh:.1e}, rhs {worst_rhs:.1e}, grad {worst_grad:.1e}, hessian {worst_hess:.1e}"
        ),
    )
}

fn trivial_limits() -> Check {
    let c = default_construction(2);
    let base = c.field.base();
    let zero_amp = BumpSet::new(
        base.bumps().center().clone(),
        base.bumps().radius(),
        vec![0.0; base.roots().len()],
        Profile::Mollifier,
    )
    .map_err(|e| e.to_string())?;
    let zero_field = HamiltonianField::new(
        BaseMetric::new(base.roots().clone(), zero_amp, base.epsilon()).map_err(|e| e.to_string())?,
        c.field.group().clone(),
    );
    let flat_field = c.field.with_epsilon(0.0);
    let mut worst_h = 0.0f64;
    let mut worst_dev = 0.0f64;
    let mut drift = 0.0f64;
    for (name, hf) in [("zero amplitudes", &zero_field), ("eps=0", &flat_field)] {
        let mut rng = rng(3);
        let r = hf.obstacle_radius();
        for i in 0..500 {
            let x = if i % 2 == 0 {
                point_in_ball(&mut rng, &DVector::zeros(2), r, 1.0)
            } else {
                point_in_ball(&mut rng, &hf.group().centers()[i % 6], hf.radius(), 1.0)
            };
            worst_h = worst_h.max((hf.h(&x).map_err(|e| e.to_string())? - DMatrix::identity(2, 2)).amax());
        }
        let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
        let mut dirs = Direction::all_roots(3);
        dirs.push("custom:0.92,0.39".parse().unwrap());
        for d in dirs {
            let rep = verify_invisibility(hf, &d, 100, &settings).map_err(|e| format!("{name}: {e}"))?;
            worst_dev = worst_dev.max(rep.max_lateral).max(rep.max_angular);
            drift = drift.max(rep.max_energy_drift);
        }
    }
    ensure(
        worst_h <= 1e-12 && worst_dev <= 1e-10 && drift <= 1e-10,
        format!("|H - Id| {worst_h:.1e}, deviations {worst_dev:.1e}, energy drift {drift:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("energy level", energy_level),
        ("invisibility", invisibility),
        ("visibility control", visibility_control),
        ("section invariance", section_invariance),
        ("non-flatness", non_flatness),
        ("symmetry", symmetry),
        ("geometry", geometry),
        ("oracle equivalence", oracles),
        ("trivial limits", trivial_limits),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {} {name} ({:.1?}): {detail}", i + 1, start.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
