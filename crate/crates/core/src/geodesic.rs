//! Geodesic flow of `h(x, p) = (H(x) p, p) / 2`.
//!
//! The state is `(x, p)` with `dx/dt = H p` and `dp_m/dt = -(dH/dx_m p, p) / 2`.
//! Integration uses the Dormand-Prince 5(4) pair with its continuous extension;
//! ball entries are located on the dense output, so steps outside the balls can
//! stay long without skipping over thin crossings.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::segment_distance;
use crate::metric::HamiltonianField;
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState<T: Real> {
    pub x: DVector<T>,
    pub p: DVector<T>,
    pub t: T,
}

impl<T: Real> GeodesicState<T> {
    pub fn new(x: DVector<T>, p: DVector<T>) -> Self {
        GeodesicState { x, p, t: T::zero() }
    }

    fn packed(&self) -> DVector<T> {
        let n = self.x.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.x[i] } else { self.p[i - n] })
    }

    fn unpack(y: &DVector<T>, t: T) -> Self {
        let n = y.len() / 2;
        GeodesicState { x: y.rows(0, n).into_owned(), p: y.rows(n, n).into_owned(), t }
    }
}

/// A straight line through `point` with unit `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line<T: Real> {
    pub point: DVector<T>,
    pub direction: DVector<T>,
}

impl<T: Real> Line<T> {
    pub fn new(point: DVector<T>, direction: &DVector<T>) -> Self {
        Line { point, direction: direction.normalize() }
    }

    pub fn distance_to(&self, x: &DVector<T>) -> T {
        let d = x - &self.point;
        let along = d.dot(&self.direction);
        (d - &self.direction * along).norm()
    }

    /// Point of the line closest to `x`.
    pub fn foot(&self, x: &DVector<T>) -> DVector<T> {
        let along = (x - &self.point).dot(&self.direction);
        &self.point + &self.direction * along
    }
}

/// Right-hand side of Hamilton's equations at `s`.
pub fn hamilton_rhs<T: Real>(
    hf: &HamiltonianField<T>,
    s: &GeodesicState<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    let eval = Flow::eval(hf, &s.packed())?;
    let n = s.x.len();
    Ok((eval.dy.rows(0, n).into_owned(), eval.dy.rows(n, n).into_owned()))
}

struct Flow<T: Real> {
    dy: DVector<T>,
    energy: T,
}

impl<T: Real> Flow<T> {
    fn eval(hf: &HamiltonianField<T>, y: &DVector<T>) -> Result<Self> {
        let n = y.len() / 2;
        let x = y.rows(0, n).into_owned();
        let p = y.rows(n, n).into_owned();
        let jet = hf.jet(&x)?;
        let hp = &jet.h * &p;
        let energy = hp.dot(&p) * lit::<T>(0.5);
        let half = lit::<T>(0.5);
        let mut dy = DVector::zeros(2 * n);
        for i in 0..n {
            dy[i] = hp[i];
        }
        for (m, d) in jet.dh.iter().enumerate() {
            dy[n + m] = -(d * &p).dot(&p) * half;
        }
        Ok(Flow { dy, energy })
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Continuous extension of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<T: Real> {
    pub t0: T,
    pub h: T,
    cont: [DVector<T>; 5],
}

impl<T: Real> DenseSegment<T> {
    fn packed_at(&self, t: T) -> DVector<T> {
        let s = (t - self.t0) / self.h;
        let s1 = T::one() - s;
        let c = &self.cont;
        &c[0] + (&c[1] + (&c[2] + (&c[3] + &c[4] * s1) * s) * s1) * s
    }

    /// Position at parameter `t` within the step.
    pub fn position_at(&self, t: T) -> DVector<T> {
        let y = self.packed_at(t);
        let n = y.len() / 2;
        y.rows(0, n).into_owned()
    }

    pub fn state_at(&self, t: T) -> GeodesicState<T> {
        GeodesicState::unpack(&self.packed_at(t), t)
    }

    pub fn t1(&self) -> T {
        self.t0 + self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T> {
    pub ball: usize,
    pub t_enter: T,
}

#[derive(Debug, Clone)]
pub struct TraceSettings<T> {
    pub bounding_radius: T,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Cap on the flow parameter.
    pub max_param: T,
}

impl<T: Real> TraceSettings<T> {
    pub fn new(bounding_radius: T, tol: T) -> Self {
        TraceSettings { bounding_radius, rel_tol: tol, abs_tol: tol, max_param: lit(1e3) }
    }
}

#[derive(Debug, Clone)]
pub struct TraceResult<T: Real> {
    /// Accepted states, starting with the initial one.
    pub polyline: Vec<GeodesicState<T>>,
    pub segments: Vec<DenseSegment<T>>,
    pub entry_line: Line<T>,
    pub exit_line: Line<T>,
    pub crossings: Vec<Crossing<T>>,
    pub energy_drift: T,
    /// Flow time beyond what straight travel between the end points would take.
    pub time_delay: T,
    pub rejected_steps: usize,
}

impl<T: Real> TraceResult<T> {
    /// Ball indices in the order they were entered.
    pub fn balls_crossed(&self) -> Vec<usize> {
        self.crossings.iter().map(|c| c.ball).collect()
    }

    pub fn initial(&self) -> &GeodesicState<T> {
        &self.polyline[0]
    }

    pub fn last(&self) -> &GeodesicState<T> {
        self.polyline.last().expect("trace holds the initial state")
    }

    /// Dense state at any `t` within the trace.
    pub fn state_at(&self, t: T) -> GeodesicState<T> {
        let idx = self.segments.partition_point(|s| s.t1() < t);
        let idx = idx.min(self.segments.len().saturating_sub(1));
        match self.segments.get(idx) {
            Some(seg) => seg.state_at(t),
            None => self.polyline[0].clone(),
        }
    }
}

/// Number of dense samples per step scanned for ball crossings.
const CROSSING_SAMPLES: usize = 16;

/// Integrates the geodesic from `s0` until it leaves the bounding sphere.
pub fn integrate<T: Real>(
    hf: &HamiltonianField<T>,
    s0: &GeodesicState<T>,
    settings: &TraceSettings<T>,
) -> Result<TraceResult<T>> {
    let n = hf.dimension();
    if s0.x.len() != n || s0.p.len() != n {
        return Err(Error::InvalidArgument("state dimension mismatch".into()));
    }
    if let Some(ball) = hf.locate(&s0.x) {
        return Err(Error::InvalidArgument(format!("initial point lies inside ball {ball}")));
    }
    if !(s0.x.norm() < settings.bounding_radius) {
        return Err(Error::InvalidArgument("initial point outside the bounding sphere".into()));
    }

    let rho = hf.radius();
    let centers: Vec<DVector<T>> = hf.pieces().iter().map(|p| p.center.clone()).collect();
    let min_step = lit::<T>(1e-14);
    let safety = lit::<T>(0.9);
    let grow = lit::<T>(5.0);
    let shrink = lit::<T>(0.2);
    let fifth = lit::<T>(0.2);

    let mut y = s0.packed();
    let mut t = s0.t;
    let mut k0 = Flow::eval(hf, &y)?;
    let energy0 = k0.energy;
    if !(energy0 > T::zero()) {
        return Err(Error::InvalidArgument("initial energy must be positive".into()));
    }
    let speed = k0.dy.rows(0, n).norm();
    // Each step moves at most a quarter radius.
    let h_max = rho * lit::<T>(0.25) / speed;
    let mut h = h_max;

    let entry_line = Line::new(s0.x.clone(), &k0.dy.rows(0, n).into_owned());
    let mut polyline = vec![GeodesicState { t, ..s0.clone() }];
    let mut segments: Vec<DenseSegment<T>> = Vec::new();
    let mut crossings = Vec::new();
    let mut energy_drift = T::zero();
    let mut rejected_steps = 0;

    loop {
        if t > s0.t + settings.max_param {
            return Err(Error::EscapeFailure { t: to_f64(t) });
        }
        if h < min_step {
            return Err(Error::StepFailure { t: to_f64(t), h: to_f64(h) });
        }

        let attempt = dopri_step(hf, &y, &k0, h);
        let (y_new, k_new, stages) = match attempt {
            Ok(v) => v,
            Err(_) => {
                // A stage left the admissible region; retry with a shorter step.
                rejected_steps += 1;
                h *= lit::<T>(0.25);
                continue;
            }
        };

        let mut err_sum = T::zero();
        for i in 0..y.len() {
            let mut e = T::zero();
            for (j, k) in stages.iter().enumerate() {
                e += k[i] * lit::<T>(E[j]);
            }
            e *= h;
            let scale = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sum += (e / scale) * (e / scale);
        }
        let err = (err_sum / lit::<T>(y.len() as f64)).sqrt();
        let factor = if err == T::zero() { grow } else { (safety * err.powf(-fifth)).min(grow).max(shrink) };

        if err > T::one() {
            rejected_steps += 1;
            h *= factor.min(T::one());
            continue;
        }

        // Accepted.
        let ydiff = &y_new - &y;
        let bspl = &k0.dy * h - &ydiff;
        let mut dsum = DVector::zeros(y.len());
        for (j, k) in stages.iter().enumerate() {
            dsum += k * lit::<T>(D[j]);
        }
        let segment = DenseSegment {
            t0: t,
            h,
            cont: [y.clone(), ydiff.clone(), bspl.clone(), &ydiff - &k_new.dy * h - &bspl, dsum * h],
        };

        let x_old = y.rows(0, n).into_owned();
        let x_new = y_new.rows(0, n).into_owned();
        detect_crossings(&segment, &x_old, &x_new, &centers, rho, &mut crossings);

        t += h;
        y = y_new;
        k0 = k_new;
        energy_drift = energy_drift.max((k0.energy - energy0).abs());
        polyline.push(GeodesicState::unpack(&y, t));
        segments.push(segment);

        let x = y.rows(0, n);
        let dx = k0.dy.rows(0, n);
        if x.norm() > settings.bounding_radius && x.dot(&dx) > T::zero() {
            break;
        }
        h = (h * factor).min(h_max);
    }

    let last = polyline.last().expect("at least one accepted step");
    let dx_end = k0.dy.rows(0, n).into_owned();
    let exit_line = Line::new(last.x.clone(), &dx_end);
    let straight = (&last.x - &polyline[0].x).dot(&entry_line.direction) / speed;
    let time_delay = (last.t - polyline[0].t) - straight;
    crossings.sort_by(|a, b| a.t_enter.partial_cmp(&b.t_enter).unwrap_or(std::cmp::Ordering::Equal));

    Ok(TraceResult {
        polyline,
        segments,
        entry_line,
        exit_line,
        crossings,
        energy_drift,
        time_delay,
        rejected_steps,
    })
}

type StepOutput<T> = (DVector<T>, Flow<T>, Vec<DVector<T>>);

fn dopri_step<T: Real>(
    hf: &HamiltonianField<T>,
    y: &DVector<T>,
    k0: &Flow<T>,
    h: T,
) -> Result<StepOutput<T>> {
    let mut stages: Vec<DVector<T>> = Vec::with_capacity(7);
    stages.push(k0.dy.clone());
    let mut last = None;
    for (i, row) in A.iter().enumerate().skip(1) {
        let mut yi = y.clone();
        for (j, k) in stages.iter().enumerate() {
            if row[j] != 0.0 {
                yi += k * (lit::<T>(row[j]) * h);
            }
        }
        let f = Flow::eval(hf, &yi)?;
        debug_assert!(C[i] > 0.0);
        stages.push(f.dy.clone());
        if i == 6 {
            last = Some((yi, f));
        }
    }
    let (y_new, k_new) = last.expect("seven stages");
    Ok((y_new, k_new, stages))
}

fn detect_crossings<T: Real>(
    seg: &DenseSegment<T>,
    x_old: &DVector<T>,
    x_new: &DVector<T>,
    centers: &[DVector<T>],
    rho: T,
    out: &mut Vec<Crossing<T>>,
) {
    let chord = (x_new - x_old).norm();
    let slack = rho + chord * lit::<T>(0.25) + lit::<T>(1e-12);
    let r2 = rho * rho;
    let bisect_tol = lit::<T>(1e-10);
    for (ball, c) in centers.iter().enumerate() {
        if segment_distance(x_old, x_new, c, c) > slack {
            continue;
        }
        let gap = |t: T| (seg.position_at(t) - c).norm_squared() - r2;
        let mut prev_t = seg.t0;
        let mut prev = (x_old - c).norm_squared() - r2;
        for j in 1..=CROSSING_SAMPLES {
            let tj = if j == CROSSING_SAMPLES {
                seg.t1()
            } else {
                seg.t0 + seg.h * lit::<T>(j as f64 / CROSSING_SAMPLES as f64)
            };
            let cur = if j == CROSSING_SAMPLES { (x_new - c).norm_squared() - r2 } else { gap(tj) };
            if prev >= T::zero() && cur < T::zero() {
                let (mut lo, mut hi) = (prev_t, tj);
                while hi - lo > bisect_tol {
                    let mid = (lo + hi) * lit::<T>(0.5);
                    if gap(mid) >= T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push(Crossing { ball, t_enter: (lo + hi) * lit::<T>(0.5) });
            }
            prev = cur;
            prev_t = tj;
        }
    }
}
