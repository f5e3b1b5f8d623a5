//! Placement checks for the balls carrying copies of the base metric.
//!
//! A root-direction line must meet either no ball or exactly one mirror-symmetric
//! pair. That holds when the balls are disjoint, the capsules spanned by every
//! mirror pair are disjoint, and no three centers are collinear.

use nalgebra::DVector;
use serde::Serialize;

use crate::metric::HamiltonianField;
use crate::rootsys::{RootSystem, WeylGroup};
use crate::scalar::{lit, to_f64, Real};

/// Fraction of the touching radius used for the automatic ball radius.
pub const AUTO_RADIUS_FILL: f64 = 0.9;

/// Triangle height below which three centers count as collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Closest distance between segments `[p1, q1]` and `[p2, q2]` in `R^n`.
pub fn segment_distance<T: Real>(
    p1: &DVector<T>,
    q1: &DVector<T>,
    p2: &DVector<T>,
    q2: &DVector<T>,
) -> T {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let tiny = T::default_epsilon();
    let clamp = |v: T| v.max(T::zero()).min(T::one());

    let (s, t) = if a <= tiny && e <= tiny {
        (T::zero(), T::zero())
    } else if a <= tiny {
        (T::zero(), clamp(f / e))
    } else {
        let c = d1.dot(&r);
        if e <= tiny {
            (clamp(-c / a), T::zero())
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > tiny * a * e { clamp((b * f - c * e) / denom) } else { T::zero() };
            let mut t = (b * s + f) / e;
            if t < T::zero() {
                t = T::zero();
                s = clamp(-c / a);
            } else if t > T::one() {
                t = T::one();
                s = clamp((b - c) / a);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Height of the triangle `(a, b, c)` over its longest side.
fn triangle_height<T: Real>(a: &DVector<T>, b: &DVector<T>, c: &DVector<T>) -> T {
    let u = b - a;
    let w = c - a;
    let uu = u.norm_squared();
    let ww = w.norm_squared();
    let uw = u.dot(&w);
    // |u ^ w|^2 = |u|^2 |w|^2 - (u.w)^2
    let area2 = (uu * ww - uw * uw).max(T::zero());
    let longest = uu.max(ww).max((c - b).norm_squared());
    if longest == T::zero() {
        return T::zero();
    }
    (area2 / longest).sqrt()
}

/// For each root, the permutation of balls induced by its reflection.
pub fn mirror_pairings<T: Real>(rs: &RootSystem<T>, group: &WeylGroup<T>) -> Vec<Vec<Option<usize>>> {
    (0..rs.len())
        .map(|k| {
            let s = rs.reflection(k);
            (0..group.order()).map(|i| group.mirror_partner(&s, i)).collect()
        })
        .collect()
}

/// Separation governing the ball radius: nearest pair of centers, and nearest
/// pair of mirror-pair segments for every root. Balls of radius `rho` satisfy
/// all placement checks when `2 rho` is below it.
pub fn placement_separation<T: Real>(rs: &RootSystem<T>, group: &WeylGroup<T>) -> T {
    let centers = group.centers();
    let mut sep = T::max_value().unwrap_or_else(|| lit(f64::MAX));
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            sep = sep.min((&centers[i] - &centers[j]).norm());
        }
    }
    for pairing in mirror_pairings(rs, group) {
        let segments: Vec<(usize, usize)> = pairing
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.filter(|&j| i < j).map(|j| (i, j)))
            .collect();
        for (x, &(a, b)) in segments.iter().enumerate() {
            for &(c, d) in &segments[x + 1..] {
                let dist = segment_distance(&centers[a], &centers[b], &centers[c], &centers[d]);
                sep = sep.min(dist);
            }
        }
    }
    sep
}

/// Automatic ball radius: a fixed fraction of half the placement separation.
pub fn auto_radius<T: Real>(rs: &RootSystem<T>, group: &WeylGroup<T>) -> T {
    placement_separation(rs, group) * lit::<T>(0.5 * AUTO_RADIUS_FILL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    /// Smallest slack found (negative when violated).
    pub margin: f64,
    /// Offending ball indices (pair or triple), if any.
    pub violation: Option<Vec<usize>>,
    /// Root index the violation belongs to, for per-root checks.
    pub root: Option<usize>,
}

impl CheckOutcome {
    fn new(margin: f64, violation: Option<Vec<usize>>, root: Option<usize>) -> Self {
        CheckOutcome { passed: violation.is_none(), margin, violation, root }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub radius: f64,
    pub balls_disjoint: CheckOutcome,
    pub pair_hulls_disjoint: CheckOutcome,
    pub no_three_collinear: CheckOutcome,
    /// `pairings[k][i]`: partner of ball `i` under the reflection in root `k`.
    #[serde(skip)]
    pub pairings: Vec<Vec<Option<usize>>>,
}

impl GeometryReport {
    pub fn passed(&self) -> bool {
        self.balls_disjoint.passed && self.pair_hulls_disjoint.passed && self.no_three_collinear.passed
    }

    /// Human-readable list of the failed checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |name: &str, c: &CheckOutcome| {
            if !c.passed {
                out.push(format!("{name} (balls {:?}, root {:?})", c.violation, c.root));
            }
        };
        push("balls overlap", &self.balls_disjoint);
        push("pair hulls overlap", &self.pair_hulls_disjoint);
        push("three centers collinear", &self.no_three_collinear);
        out
    }
}

/// Checks the ball placement of `hf`.
pub fn validate_geometry<T: Real>(hf: &HamiltonianField<T>) -> GeometryReport {
    let rs = hf.roots();
    let group = hf.group();
    let centers: Vec<DVector<T>> = hf.pieces().iter().map(|p| p.center.clone()).collect();
    let rho = hf.radius();
    let two_rho = rho * lit::<T>(2.0);

    // (a) balls pairwise disjoint
    let mut margin = f64::INFINITY;
    let mut violation = None;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let slack = to_f64((&centers[i] - &centers[j]).norm() - two_rho);
            if slack < margin {
                margin = slack;
            }
            if slack <= 0.0 && violation.is_none() {
                violation = Some(vec![i, j]);
            }
        }
    }
    let balls_disjoint = CheckOutcome::new(margin, violation, None);

    // (b) per root: balls pair up and the capsules of the pairs are disjoint
    let pairings = mirror_pairings(rs, group);
    let mut margin = f64::INFINITY;
    let mut violation = None;
    let mut violating_root = None;
    if centers.len() > 1 {
        for (k, pairing) in pairings.iter().enumerate() {
            let mut segments = Vec::new();
            for i in 0..centers.len() {
                match pairing.get(i).copied().flatten() {
                    Some(j) if j != i && pairing[j] == Some(i) => {
                        if i < j {
                            segments.push((i, j));
                        }
                    }
                    _ => {
                        if violation.is_none() {
                            violation = Some(vec![i]);
                            violating_root = Some(k);
                        }
                        margin = margin.min(f64::NEG_INFINITY);
                    }
                }
            }
            for (x, &(a, b)) in segments.iter().enumerate() {
                for &(c, d) in &segments[x + 1..] {
                    let dist = segment_distance(&centers[a], &centers[b], &centers[c], &centers[d]);
                    let slack = to_f64(dist - two_rho);
                    margin = margin.min(slack);
                    if slack <= 0.0 && violation.is_none() {
                        violation = Some(vec![a, b, c, d]);
                        violating_root = Some(k);
                    }
                }
            }
        }
    }
    let pair_hulls_disjoint = CheckOutcome::new(margin, violation, violating_root);

    // (c) no three centers collinear
    let mut margin = f64::INFINITY;
    let mut violation = None;
    let collinear = lit::<T>(COLLINEAR_TOL);
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            for k in (j + 1)..centers.len() {
                let height = triangle_height(&centers[i], &centers[j], &centers[k]);
                margin = margin.min(to_f64(height));
                if height <= collinear && violation.is_none() {
                    violation = Some(vec![i, j, k]);
                }
            }
        }
    }
    let no_three_collinear = CheckOutcome::new(margin, violation, None);

    GeometryReport {
        radius: to_f64(rho),
        balls_disjoint,
        pair_hulls_disjoint,
        no_three_collinear,
        pairings,
    }
}
