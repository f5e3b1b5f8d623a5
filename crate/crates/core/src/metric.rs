//! The Hamiltonian matrix field `H(x)` of the constructed metric.
//!
//! On the base ball the `N` sections `p = w_i(y) = v_i + eps * grad phi_i(y)`
//! are required to lie on the unit energy level, `(H w_i, w_i) = 2`. With the
//! `N = n(n+1)/2` independent entries `h_ab` (`a <= b`, lexicographic) this is a
//! square linear system, solved pointwise. Every other ball carries the
//! pushforward `H(x) = R H_base(R^T (x - c) + P_1) R^T` by its group element,
//! and `H = Id` outside all balls.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use serde::Serialize;

use crate::bumps::BumpSet;
use crate::error::{Error, Result};
use crate::rootsys::{RootSystem, WeylGroup};
use crate::scalar::{lit, to_f64, tol, Real};

/// Systems with a larger 1-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest accepted row residual of the pointwise solve.
pub const MAX_RESIDUAL: f64 = 1e-10;

/// Number of independent entries of a symmetric `n x n` matrix.
pub fn unknown_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of `h_ab` (`a <= b`) in the lexicographic unknown vector.
pub fn sym_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a <= b && b < n);
    a * (2 * n - a + 1) / 2 + (b - a)
}

/// Rebuilds the symmetric matrix from its lexicographic upper triangle.
pub fn unpack_symmetric<T: Real>(n: usize, packed: &DVector<T>) -> DMatrix<T> {
    DMatrix::from_fn(n, n, |r, c| {
        let (a, b) = if r <= c { (r, c) } else { (c, r) };
        packed[sym_index(n, a, b)]
    })
}

fn coefficient_row<T: Real>(w: &DVector<T>, row: &mut [T]) {
    let n = w.len();
    let two = lit::<T>(2.0);
    for a in 0..n {
        for b in a..n {
            let coeff = if a == b { w[a] * w[a] } else { two * w[a] * w[b] };
            row[sym_index(n, a, b)] = coeff;
        }
    }
}

fn one_norm<T: Real>(m: &DMatrix<T>) -> T {
    m.column_iter()
        .map(|col| col.iter().fold(T::zero(), |s, &v| s + v.abs()))
        .fold(T::zero(), |a, b| a.max(b))
}

/// Diagnostics of one pointwise solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub condition_number: f64,
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// Ball containing the point, `None` outside the obstacle.
    pub ball: Option<usize>,
}

/// Solution of the base-ball system at one point.
pub struct BaseSolution<T: Real> {
    pub h: DMatrix<T>,
    pub condition: T,
    pub residual: T,
    lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    sections: Vec<DVector<T>>,
    packed: DVector<T>,
}

/// `H` and its spatial derivatives at one point.
#[derive(Debug, Clone)]
pub struct FieldJet<T: Real> {
    pub h: DMatrix<T>,
    /// `dh[m] = dH/dx_m`.
    pub dh: Vec<DMatrix<T>>,
    pub ball: Option<usize>,
}

/// The pointwise linear system on the base ball.
#[derive(Debug, Clone)]
pub struct BaseMetric<T: Real> {
    roots: RootSystem<T>,
    bumps: BumpSet<T>,
    epsilon: T,
}

impl<T: Real> BaseMetric<T> {
    pub fn new(roots: RootSystem<T>, bumps: BumpSet<T>, epsilon: T) -> Result<Self> {
        if bumps.len() != roots.len() {
            return Err(Error::InvalidArgument(format!(
                "need {} amplitudes, got {}",
                roots.len(),
                bumps.len()
            )));
        }
        if bumps.dimension() != roots.dimension() {
            return Err(Error::InvalidArgument("bump center has the wrong dimension".into()));
        }
        if !(epsilon >= T::zero()) {
            return Err(Error::InvalidArgument("epsilon must be non-negative".into()));
        }
        Ok(BaseMetric { roots, bumps, epsilon })
    }

    pub fn roots(&self) -> &RootSystem<T> {
        &self.roots
    }

    pub fn bumps(&self) -> &BumpSet<T> {
        &self.bumps
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: T) -> Self {
        BaseMetric { epsilon, ..self.clone() }
    }

    pub fn dimension(&self) -> usize {
        self.roots.dimension()
    }

    /// `w_i(y) = v_i + eps * grad phi_i(y)`.
    pub fn section(&self, i: usize, y: &DVector<T>) -> DVector<T> {
        self.roots.root(i) + self.bumps.grad_phi(i, y) * self.epsilon
    }

    pub fn sections(&self, y: &DVector<T>) -> Vec<DVector<T>> {
        (0..self.roots.len()).map(|i| self.section(i, y)).collect()
    }

    /// Row `i`: coefficients of `(H w_i, w_i)` in the unknowns `h_ab`; right-hand side 2.
    pub fn assemble_system(&self, y: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let sections = self.sections(y);
        (Self::system_for(&sections), DVector::from_element(sections.len(), lit::<T>(2.0)))
    }

    fn system_for(sections: &[DVector<T>]) -> DMatrix<T> {
        let count = sections.len();
        let mut a = DMatrix::zeros(count, count);
        let mut row = vec![T::zero(); count];
        for (i, w) in sections.iter().enumerate() {
            coefficient_row(w, &mut row);
            for (j, &c) in row.iter().enumerate() {
                a[(i, j)] = c;
            }
        }
        a
    }

    /// Solves the system at `y` (base-ball coordinates).
    pub fn solve(&self, y: &DVector<T>) -> Result<BaseSolution<T>> {
        let n = self.dimension();
        let sections = self.sections(y);
        let a = Self::system_for(&sections);
        let rhs = DVector::from_element(sections.len(), lit::<T>(2.0));
        let lu = a.clone().lu();
        let singular = || Error::SingularSystem { condition: f64::INFINITY };
        let inverse = lu.try_inverse().ok_or_else(singular)?;
        let condition = one_norm(&a) * one_norm(&inverse);
        if !condition.is_finite() || condition > lit::<T>(MAX_CONDITION) {
            return Err(Error::SingularSystem { condition: to_f64(condition) });
        }
        let packed = lu.solve(&rhs).ok_or_else(singular)?;
        let residual = (&a * &packed - &rhs).amax();
        if residual > tol::<T>(MAX_RESIDUAL) {
            return Err(Error::SingularSystem { condition: to_f64(condition) });
        }
        Ok(BaseSolution {
            h: unpack_symmetric(n, &packed),
            condition,
            residual,
            lu,
            sections,
            packed,
        })
    }

    /// `dH_base/dy_q` for every `q`, from `A dh = -(dA) h`.
    pub fn derivatives(&self, y: &DVector<T>, sol: &BaseSolution<T>) -> Vec<DMatrix<T>> {
        let n = self.dimension();
        let count = self.roots.len();
        let Some((_, hessians)) = self.bumps.derivatives(y) else {
            return vec![DMatrix::zeros(n, n); n];
        };
        if self.epsilon == T::zero() {
            return vec![DMatrix::zeros(n, n); n];
        }
        let two = lit::<T>(2.0);
        (0..n)
            .map(|q| {
                let mut rhs = DVector::zeros(count);
                for (i, w) in sol.sections.iter().enumerate() {
                    let dw = hessians[i].column(q) * self.epsilon;
                    let mut acc = T::zero();
                    for a in 0..n {
                        for b in a..n {
                            let d = if a == b {
                                two * w[a] * dw[a]
                            } else {
                                two * (dw[a] * w[b] + w[a] * dw[b])
                            };
                            acc += d * sol.packed[sym_index(n, a, b)];
                        }
                    }
                    rhs[i] = -acc;
                }
                let dpacked = sol.lu.solve(&rhs).expect("factorization already checked");
                unpack_symmetric(n, &dpacked)
            })
            .collect()
    }

    /// Condition number of the unperturbed (`eps = 0`) system; depends only on `n`.
    pub fn unperturbed_condition(&self) -> T {
        let sections: Vec<DVector<T>> = self.roots.roots().to_vec();
        let a = Self::system_for(&sections);
        let inverse = a.clone().try_inverse().expect("root system determines the metric");
        one_norm(&a) * one_norm(&inverse)
    }

    /// Grid of points strictly inside the base ball, `resolution` per axis.
    pub fn ball_grid(&self, resolution: usize) -> Vec<DVector<T>> {
        ball_grid(self.bumps.center(), self.bumps.radius(), resolution)
    }
}

/// Regular grid over `[-1, 1]^n` scaled into the ball, keeping interior points.
pub fn ball_grid<T: Real>(center: &DVector<T>, radius: T, resolution: usize) -> Vec<DVector<T>> {
    let n = center.len();
    let res = resolution.max(2);
    let total = res.pow(n as u32);
    let step = lit::<T>(2.0 / (res - 1) as f64);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut rem = flat;
        let u = DVector::from_fn(n, |_, _| {
            let k = rem % res;
            rem /= res;
            -T::one() + step * lit::<T>(k as f64)
        });
        if u.norm_squared() < T::one() - lit::<T>(1e-9) {
            out.push(center + u * radius);
        }
    }
    out
}

/// Isometric copy of the base ball.
#[derive(Debug, Clone)]
pub struct Piece<T: Real> {
    pub center: DVector<T>,
    pub rotation: DMatrix<T>,
}

/// The global, Weyl-symmetrized Hamiltonian field.
#[derive(Debug, Clone)]
pub struct HamiltonianField<T: Real> {
    base: BaseMetric<T>,
    group: WeylGroup<T>,
    pieces: Vec<Piece<T>>,
}

impl<T: Real> HamiltonianField<T> {
    /// One piece per group element: ball `i` is the image of the base ball under element `i`.
    pub fn new(base: BaseMetric<T>, group: WeylGroup<T>) -> Self {
        let center = base.bumps().center().clone();
        let pieces = group
            .elements()
            .iter()
            .map(|r| Piece { center: r * &center, rotation: r.clone() })
            .collect();
        HamiltonianField { base, group, pieces }
    }

    /// Only the base ball, without symmetrization.
    pub fn single_ball(base: BaseMetric<T>, group: WeylGroup<T>) -> Self {
        let n = base.dimension();
        let pieces = vec![Piece {
            center: base.bumps().center().clone(),
            rotation: DMatrix::identity(n, n),
        }];
        HamiltonianField { base, group, pieces }
    }

    pub fn base(&self) -> &BaseMetric<T> {
        &self.base
    }

    pub fn group(&self) -> &WeylGroup<T> {
        &self.group
    }

    pub fn roots(&self) -> &RootSystem<T> {
        self.base.roots()
    }

    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    /// Mutable access to the pieces, for building deliberately broken fields.
    pub fn pieces_mut(&mut self) -> &mut [Piece<T>] {
        &mut self.pieces
    }

    pub fn epsilon(&self) -> T {
        self.base.epsilon()
    }

    pub fn radius(&self) -> T {
        self.base.bumps().radius()
    }

    pub fn dimension(&self) -> usize {
        self.base.dimension()
    }

    pub fn with_epsilon(&self, epsilon: T) -> Self {
        HamiltonianField { base: self.base.with_epsilon(epsilon), ..self.clone() }
    }

    /// Radius of a sphere about the origin containing every ball.
    pub fn obstacle_radius(&self) -> T {
        self.pieces.iter().fold(T::zero(), |m, p| m.max(p.center.norm())) + self.radius()
    }

    /// Index of the ball strictly containing `x`.
    pub fn locate(&self, x: &DVector<T>) -> Option<usize> {
        let r2 = self.radius() * self.radius();
        self.pieces.iter().position(|p| (x - &p.center).norm_squared() < r2)
    }

    /// Base-ball coordinates of `x` seen from piece `i`.
    pub fn to_base(&self, i: usize, x: &DVector<T>) -> DVector<T> {
        let p = &self.pieces[i];
        p.rotation.transpose() * (x - &p.center) + self.base.bumps().center()
    }

    /// `H(x)` with diagnostics.
    pub fn solve_h(&self, x: &DVector<T>) -> Result<(DMatrix<T>, SolveReport)> {
        let n = self.dimension();
        let Some(i) = self.locate(x) else {
            return Ok((
                DMatrix::identity(n, n),
                SolveReport {
                    condition_number: to_f64(self.base.unperturbed_condition()),
                    residual: 0.0,
                    min_eigenvalue: 1.0,
                    ball: None,
                },
            ));
        };
        let y = self.to_base(i, x);
        let sol = self.base.solve(&y)?;
        let r = &self.pieces[i].rotation;
        let h = r * &sol.h * r.transpose();
        let min_eigenvalue = h.clone().symmetric_eigenvalues().min();
        if min_eigenvalue <= T::zero() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: to_f64(min_eigenvalue) });
        }
        Ok((
            h,
            SolveReport {
                condition_number: to_f64(sol.condition),
                residual: to_f64(sol.residual),
                min_eigenvalue: to_f64(min_eigenvalue),
                ball: Some(i),
            },
        ))
    }

    /// `H(x)` only.
    pub fn h(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        self.solve_h(x).map(|(h, _)| h)
    }

    /// `H(x)` and all of `dH/dx_m`; positive definiteness is checked by Cholesky.
    pub fn jet(&self, x: &DVector<T>) -> Result<FieldJet<T>> {
        let n = self.dimension();
        let Some(i) = self.locate(x) else {
            return Ok(FieldJet {
                h: DMatrix::identity(n, n),
                dh: vec![DMatrix::zeros(n, n); n],
                ball: None,
            });
        };
        let y = self.to_base(i, x);
        let sol = self.base.solve(&y)?;
        let base_dh = self.base.derivatives(&y, &sol);
        let r = &self.pieces[i].rotation;
        let rt = r.transpose();
        let h = r * &sol.h * &rt;
        if Cholesky::new(h.clone()).is_none() {
            let min_eigenvalue = h.clone().symmetric_eigenvalues().min();
            return Err(Error::NotPositiveDefinite { min_eigenvalue: to_f64(min_eigenvalue) });
        }
        // y = R^T (x - c) + P_1, so dy_q/dx_m = R[m, q].
        let dh = (0..n)
            .map(|m| {
                let mut acc = DMatrix::zeros(n, n);
                for (q, d) in base_dh.iter().enumerate() {
                    acc += d * r[(m, q)];
                }
                r * acc * &rt
            })
            .collect();
        Ok(FieldJet { h, dh, ball: Some(i) })
    }

    /// `dH/dx_m`.
    pub fn dh(&self, x: &DVector<T>, m: usize) -> Result<DMatrix<T>> {
        let mut jet = self.jet(x)?;
        Ok(jet.dh.swap_remove(m))
    }

    /// `h(x, p) = (H(x) p, p) / 2`.
    pub fn energy(&self, x: &DVector<T>, p: &DVector<T>) -> Result<T> {
        let h = self.h(x)?;
        Ok((&h * p).dot(p) * lit::<T>(0.5))
    }

    /// Metric tensor `G = H^{-1}`.
    pub fn metric_tensor(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        let h = self.h(x)?;
        h.try_inverse().ok_or(Error::SingularSystem { condition: f64::INFINITY })
    }
}

/// Largest perturbation strength for which the base-ball solve stays well posed
/// and `min eig H > 0.01` on the grid, halved.
pub fn max_admissible_epsilon<T: Real>(
    roots: &RootSystem<T>,
    bumps: &BumpSet<T>,
    resolution: usize,
) -> Result<T> {
    const ITERATIONS: usize = 30;
    let upper = lit::<T>(2.0);
    let lower = lit::<T>(1e-6);
    let floor = lit::<T>(0.01);
    let base = BaseMetric::new(roots.clone(), bumps.clone(), T::zero())?;
    let grid = base.ball_grid(resolution);

    let admissible = |eps: T| {
        let metric = base.with_epsilon(eps);
        grid.iter().all(|y| match metric.solve(y) {
            Ok(sol) => sol.h.symmetric_eigenvalues().min() > floor,
            Err(_) => false,
        })
    };

    if admissible(upper) {
        return Ok(upper);
    }
    if !admissible(lower) {
        return Err(Error::ThresholdNotFound);
    }
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..ITERATIONS {
        let mid = (lo + hi) * lit::<T>(0.5);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo * lit::<T>(0.5))
}

/// Smallest and largest condition number of the base-ball system on the grid.
pub fn condition_range<T: Real>(base: &BaseMetric<T>, resolution: usize) -> Result<(T, T)> {
    let mut lo = T::max_value().unwrap_or_else(|| lit(f64::MAX));
    let mut hi = T::zero();
    for y in base.ball_grid(resolution) {
        let c = base.solve(&y)?.condition;
        lo = lo.min(c);
        hi = hi.max(c);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bumps::Profile;
    use crate::rootsys::{build_roots, build_weyl_group};

    fn plane_field(epsilon: f64) -> HamiltonianField<f64> {
        let rs = build_roots::<f64>(2).unwrap();
        let w = build_weyl_group(&rs).unwrap();
        let bs = BumpSet::new(w.chamber_point().clone(), 0.35, vec![1.2, 0.8, 0.6], Profile::Mollifier)
            .unwrap();
        HamiltonianField::new(BaseMetric::new(rs, bs, epsilon).unwrap(), w)
    }

    #[test]
    fn sym_index_is_lexicographic() {
        let n = 3;
        let mut expect = 0;
        for a in 0..n {
            for b in a..n {
                assert_eq!(sym_index(n, a, b), expect);
                expect += 1;
            }
        }
        assert_eq!(expect, unknown_count(n));
    }

    #[test]
    fn unperturbed_solution_is_identity() {
        let hf = plane_field(0.0);
        let y = hf.base().bumps().center() + DVector::from_vec(vec![0.1, 0.05]);
        let sol = hf.base().solve(&y).unwrap();
        assert!((sol.h - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn outside_support_is_exact_identity() {
        let hf = plane_field(0.05);
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let (h, report) = hf.solve_h(&x).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2));
        assert_eq!(report.ball, None);
        for m in 0..2 {
            assert_eq!(hf.dh(&x, m).unwrap(), DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn sections_lie_on_unit_level() {
        let hf = plane_field(0.05);
        let base = hf.base();
        for y in base.ball_grid(15) {
            let h = base.solve(&y).unwrap().h;
            for w in base.sections(&y) {
                assert!(((&h * &w).dot(&w) * 0.5 - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unperturbed_condition_matches_plane_value() {
        let hf = plane_field(0.0);
        let c = hf.base().unperturbed_condition();
        let (lo, hi) = condition_range(hf.base(), 9).unwrap();
        assert!((lo - c).abs() < 1e-9 && (hi - c).abs() < 1e-9);
    }

    #[test]
    fn too_large_epsilon_is_rejected() {
        let hf = plane_field(50.0);
        let mut saw_error = false;
        for x in hf.base().ball_grid(9) {
            if hf.solve_h(&x).is_err() {
                saw_error = true;
            }
        }
        assert!(saw_error);
    }

    #[test]
    fn admissible_epsilon_zero_amplitudes_hits_upper_bound() {
        let hf = plane_field(0.0);
        let zero = hf.base().bumps().scaled(0.0);
        let eps = max_admissible_epsilon(hf.roots(), &zero, 9).unwrap();
        assert_eq!(eps, 2.0);
    }

    #[test]
    fn ball_grid_stays_inside() {
        let c = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let g = ball_grid(&c, 0.5, 7);
        assert!(!g.is_empty());
        assert!(g.iter().all(|y| (y - &c).norm() < 0.5));
    }
}
