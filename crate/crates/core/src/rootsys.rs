//! The `A_n` root system in intrinsic coordinates and its Weyl group.
//!
//! Roots live in the hyperplane `x_1 + ... + x_{n+1} = 0` of `R^{n+1}`. An
//! orthonormal basis of that hyperplane (Gram-Schmidt on `e_i - e_{n+1}`)
//! identifies it with `R^n`, and every quantity downstream works in those
//! coordinates.
//!
//! Root order (0-based): indices `0..n` hold `v_i = e_i - e_{n+1}`; indices
//! `n..N` hold the differences `v_k - v_l` for `k < l` in lexicographic order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, tol, Real};

/// Largest supported dimension. The Weyl group has `(n+1)!` elements and is
/// enumerated explicitly.
pub const MAX_DIMENSION: usize = 5;

/// Matrix distance below which two group elements are identified.
pub const GROUP_DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RootSystem<T: Real> {
    n: usize,
    roots: Vec<DVector<T>>,
    /// `(a, b)` such that root `i` is the image of `e_a - e_b` (0-based, `b` may equal `n`).
    ambient: Vec<(usize, usize)>,
    /// `n x (n+1)`, orthonormal rows spanning the sum-zero hyperplane.
    embedding: DMatrix<T>,
}

/// Number of positive roots of `A_n`.
pub fn root_count(n: usize) -> usize {
    n * (n + 1) / 2
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Builds the root system of `A_n` with `n >= 2`.
pub fn build_roots<T: Real>(n: usize) -> Result<RootSystem<T>> {
    if !(2..=MAX_DIMENSION).contains(&n) {
        return Err(Error::InvalidDimension { n, max: MAX_DIMENSION });
    }
    let m = n + 1;
    let ambient_basis: Vec<DVector<T>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = T::one();
            e[n] = -T::one();
            e
        })
        .collect();

    // Modified Gram-Schmidt on e_i - e_{n+1}.
    let mut rows: Vec<DVector<T>> = Vec::with_capacity(n);
    for e in &ambient_basis {
        let mut u = e.clone();
        for q in &rows {
            let proj = q.dot(&u);
            u.axpy(-proj, q, T::one());
        }
        let norm = u.norm();
        rows.push(u / norm);
    }
    let embedding = DMatrix::from_fn(n, m, |r, c| rows[r][c]);

    let mut roots: Vec<DVector<T>> = ambient_basis.iter().map(|e| &embedding * e).collect();
    let mut ambient: Vec<(usize, usize)> = (0..n).map(|i| (i, n)).collect();
    for k in 0..n {
        for l in (k + 1)..n {
            let diff = &roots[k] - &roots[l];
            roots.push(diff);
            ambient.push((k, l));
        }
    }

    Ok(RootSystem { n, roots, ambient, embedding })
}

impl<T: Real> RootSystem<T> {
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// `N = n(n+1)/2`.
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn roots(&self) -> &[DVector<T>] {
        &self.roots
    }

    pub fn root(&self, i: usize) -> &DVector<T> {
        &self.roots[i]
    }

    pub fn embedding(&self) -> &DMatrix<T> {
        &self.embedding
    }

    /// Ambient pair `(a, b)` with root `i` the image of `e_a - e_b`.
    pub fn ambient_pair(&self, i: usize) -> (usize, usize) {
        self.ambient[i]
    }

    /// Index of the root `v_k - v_l`, for `0 <= k < l < n`.
    pub fn pair_index(&self, k: usize, l: usize) -> usize {
        assert!(k < l && l < self.n, "pair_index needs k < l < n (got {k}, {l})");
        let n = self.n;
        n + k * (2 * n - k - 1) / 2 + (l - k - 1)
    }

    /// All pairs `(k, l)` with `k < l < n`, in root order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |k| ((k + 1)..self.n).map(move |l| (k, l)))
    }

    /// Reflection matrix through the hyperplane orthogonal to root `i`.
    pub fn reflection(&self, i: usize) -> DMatrix<T> {
        reflection_matrix(&self.roots[i])
    }

    /// Finds `j` and a sign with `m * v_i = sign * v_j`.
    pub fn root_image(&self, m: &DMatrix<T>, i: usize) -> Option<(usize, i8)> {
        let image = m * &self.roots[i];
        let tol = tol::<T>(GROUP_DEDUP_TOL);
        self.roots.iter().enumerate().find_map(|(j, v)| {
            if (&image - v).norm() < tol {
                Some((j, 1))
            } else if (&image + v).norm() < tol {
                Some((j, -1))
            } else {
                None
            }
        })
    }
}

/// `s_v = I - 2 v v^T / (v, v)`.
pub fn reflection_matrix<T: Real>(v: &DVector<T>) -> DMatrix<T> {
    let n = v.len();
    let scale = lit::<T>(2.0) / v.norm_squared();
    DMatrix::identity(n, n) - v * v.transpose() * scale
}

#[derive(Debug, Clone)]
pub struct WeylGroup<T: Real> {
    /// Element 0 is the identity.
    elements: Vec<DMatrix<T>>,
    generators: Vec<DMatrix<T>>,
    chamber_point: DVector<T>,
    /// `centers[i] = elements[i] * chamber_point`.
    centers: Vec<DVector<T>>,
}

/// Default chamber point: the normalized half-sum of positive roots, which
/// pairs strictly positively with every positive root.
pub fn default_chamber_point<T: Real>(rs: &RootSystem<T>) -> DVector<T> {
    let mut w = DVector::zeros(rs.dimension());
    for v in rs.roots() {
        w += v;
    }
    w.normalize()
}

/// Generates the Weyl group with the default chamber point.
pub fn build_weyl_group<T: Real>(rs: &RootSystem<T>) -> Result<WeylGroup<T>> {
    build_weyl_group_with(rs, None)
}

/// Generates the Weyl group; `chamber_point` must pair strictly positively
/// with every positive root.
pub fn build_weyl_group_with<T: Real>(
    rs: &RootSystem<T>,
    chamber_point: Option<DVector<T>>,
) -> Result<WeylGroup<T>> {
    let n = rs.dimension();
    let chamber_point = match chamber_point {
        None => default_chamber_point(rs),
        Some(p) => {
            if p.len() != n {
                return Err(Error::ChamberPoint(format!(
                    "expected {n} coordinates, got {}",
                    p.len()
                )));
            }
            if let Some(i) = rs.roots().iter().position(|v| v.dot(&p) <= T::zero()) {
                return Err(Error::ChamberPoint(format!(
                    "not strictly inside the fundamental chamber: (p, v_{}) <= 0",
                    i + 1
                )));
            }
            p
        }
    };

    let generators: Vec<DMatrix<T>> = (0..rs.len()).map(|i| rs.reflection(i)).collect();
    let expected = factorial(n + 1);
    let tol = tol::<T>(GROUP_DEDUP_TOL);

    let mut elements = vec![DMatrix::<T>::identity(n, n)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let g = elements[frontier].clone();
        frontier += 1;
        for s in &generators {
            let candidate = s * &g;
            if !elements.iter().any(|e| (e - &candidate).norm() < tol) {
                elements.push(candidate);
                if elements.len() > expected {
                    return Err(Error::GroupClosure { expected, found: elements.len() });
                }
            }
        }
    }
    if elements.len() != expected {
        return Err(Error::GroupClosure { expected, found: elements.len() });
    }

    let centers = elements.iter().map(|r| r * &chamber_point).collect();
    Ok(WeylGroup { elements, generators, chamber_point, centers })
}

impl<T: Real> WeylGroup<T> {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DMatrix<T>] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &DMatrix<T> {
        &self.elements[i]
    }

    pub fn generators(&self) -> &[DMatrix<T>] {
        &self.generators
    }

    pub fn chamber_point(&self) -> &DVector<T> {
        &self.chamber_point
    }

    pub fn centers(&self) -> &[DVector<T>] {
        &self.centers
    }

    /// Index of the group element closest to `m`, if within the dedup tolerance.
    pub fn find_element(&self, m: &DMatrix<T>) -> Option<usize> {
        let tol = tol::<T>(GROUP_DEDUP_TOL);
        self.elements.iter().position(|e| (e - m).norm() < tol)
    }

    /// Index `j` with `centers[j] = s * centers[i]`, for the reflection `s`.
    pub fn mirror_partner(&self, s: &DMatrix<T>, i: usize) -> Option<usize> {
        let image = s * &self.centers[i];
        let tol = tol::<T>(GROUP_DEDUP_TOL);
        self.centers.iter().position(|c| (c - &image).norm() < tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Integer inner product of `e_a - e_b` and `e_c - e_d` in `R^{n+1}`.
    fn ambient_dot(p: (usize, usize), q: (usize, usize)) -> i64 {
        let delta = |i: usize, j: usize| i64::from(i == j);
        delta(p.0, q.0) - delta(p.0, q.1) - delta(p.1, q.0) + delta(p.1, q.1)
    }

    #[test]
    fn rejects_small_dimension() {
        assert!(matches!(build_roots::<f64>(1), Err(Error::InvalidDimension { n: 1, .. })));
        assert!(build_roots::<f64>(0).is_err());
    }

    #[test]
    fn plane_gram_values() {
        let rs = build_roots::<f64>(2).unwrap();
        assert_eq!(rs.len(), 3);
        let v = rs.roots();
        assert!((v[0].dot(&v[0]) - 2.0).abs() < 1e-12);
        assert!((v[1].dot(&v[1]) - 2.0).abs() < 1e-12);
        assert!((v[0].dot(&v[1]) - 1.0).abs() < 1e-12);
        assert_eq!(v[2], &v[0] - &v[1]);
        assert!((v[2].dot(&v[2]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gram_matches_ambient_enumeration() {
        for n in 2..=4 {
            let rs = build_roots::<f64>(n).unwrap();
            // Brute force: every e_a - e_b with a < b in R^{n+1} appears exactly once.
            let mut seen: Vec<(usize, usize)> = (0..rs.len()).map(|i| rs.ambient_pair(i)).collect();
            seen.sort();
            let mut all: Vec<(usize, usize)> =
                (0..=n).flat_map(|a| ((a + 1)..=n).map(move |b| (a, b))).collect();
            all.sort();
            assert_eq!(seen, all);
            assert_eq!(rs.len(), root_count(n));

            for i in 0..rs.len() {
                assert!((rs.root(i).norm() - 2f64.sqrt()).abs() < 1e-12);
                for j in 0..rs.len() {
                    let expected = ambient_dot(rs.ambient_pair(i), rs.ambient_pair(j)) as f64;
                    assert!((rs.root(i).dot(rs.root(j)) - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pair_index_is_exact_difference() {
        for n in 2..=5 {
            let rs = build_roots::<f64>(n).unwrap();
            for (offset, (k, l)) in rs.pairs().collect::<Vec<_>>().into_iter().enumerate() {
                let idx = rs.pair_index(k, l);
                assert_eq!(idx, n + offset);
                assert_eq!(rs.root(idx), &(rs.root(k) - rs.root(l)));
                assert_eq!(rs.ambient_pair(idx), (k, l));
            }
        }
    }

    #[test]
    fn embedding_is_orthonormal_and_first_roots_are_a_basis() {
        for n in 2..=4 {
            let rs = build_roots::<f64>(n).unwrap();
            let b = rs.embedding();
            let gram = b * b.transpose();
            assert!((gram - DMatrix::identity(n, n)).norm() < 1e-12);
            for r in 0..n {
                assert!(b.row(r).sum().abs() < 1e-12);
            }
            let basis = DMatrix::from_fn(n, n, |r, c| rs.root(c)[r]);
            assert!(basis.determinant().abs() > 1e-6);
        }
    }

    #[test]
    fn group_orders() {
        for (n, order) in [(2, 6), (3, 24), (4, 120)] {
            let rs = build_roots::<f64>(n).unwrap();
            let w = build_weyl_group(&rs).unwrap();
            assert_eq!(w.order(), order);
            assert_eq!(w.centers().len(), order);
        }
    }

    #[test]
    fn elements_orthogonal_and_permute_roots() {
        for n in 2..=4 {
            let rs = build_roots::<f64>(n).unwrap();
            let w = build_weyl_group(&rs).unwrap();
            for r in w.elements() {
                assert!((r * r.transpose() - DMatrix::identity(n, n)).norm() < 1e-12);
                let mut hit = vec![false; rs.len()];
                for i in 0..rs.len() {
                    let (j, _) = rs.root_image(r, i).expect("image is a root");
                    hit[j] = true;
                }
                assert!(hit.iter().all(|&h| h));
            }
        }
    }

    #[test]
    fn generators_are_involutive_reflections() {
        let rs = build_roots::<f64>(3).unwrap();
        let w = build_weyl_group(&rs).unwrap();
        for (i, s) in w.generators().iter().enumerate() {
            let v = rs.root(i);
            assert!((s * s - DMatrix::identity(3, 3)).norm() < 1e-12);
            assert!((s * v + v).norm() < 1e-12);
            for u in rs.roots() {
                let perp = u - v * (u.dot(v) / v.dot(v));
                assert!((s * &perp - &perp).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn chamber_point_strictly_inside() {
        for n in 2..=5 {
            let rs = build_roots::<f64>(n).unwrap();
            let p = default_chamber_point(&rs);
            assert!((p.norm() - 1.0).abs() < 1e-12);
            for v in rs.roots() {
                assert!(v.dot(&p) > 1e-3);
            }
        }
    }

    #[test]
    fn rejects_chamber_point_on_a_wall() {
        let rs = build_roots::<f64>(2).unwrap();
        // Orthogonal to v_3 = v_1 - v_2.
        let wall = rs.root(0) + rs.root(1);
        assert!(matches!(build_weyl_group_with(&rs, Some(wall)), Err(Error::ChamberPoint(_))));
        assert!(build_weyl_group_with(&rs, Some(DVector::from_vec(vec![1.0]))).is_err());
    }

    #[test]
    fn plane_centers_distinct_and_no_three_collinear() {
        let rs = build_roots::<f64>(2).unwrap();
        let w = build_weyl_group(&rs).unwrap();
        let c = w.centers();
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                assert!((&c[i] - &c[j]).norm() > 1e-6);
                for k in (j + 1)..c.len() {
                    let a = &c[j] - &c[i];
                    let b = &c[k] - &c[i];
                    let cross = a[0] * b[1] - a[1] * b[0];
                    assert!(cross.abs() > 1e-6, "centers {i}, {j}, {k} collinear");
                }
            }
        }
    }

    #[test]
    fn orbit_is_injective() {
        let rs = build_roots::<f64>(4).unwrap();
        let w = build_weyl_group(&rs).unwrap();
        let c = w.centers();
        let mut min = f64::INFINITY;
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                min = min.min((&c[i] - &c[j]).norm());
            }
        }
        assert!(min > 1e-3);
    }

    #[test]
    fn mirror_partner_pairs_plane_centers() {
        let rs = build_roots::<f64>(2).unwrap();
        let w = build_weyl_group(&rs).unwrap();
        let s = rs.reflection(0);
        let partners: Vec<usize> =
            (0..w.order()).map(|i| w.mirror_partner(&s, i).unwrap()).collect();
        for (i, &j) in partners.iter().enumerate() {
            assert_ne!(i, j);
            assert_eq!(partners[j], i);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let rs = build_roots::<f32>(3).unwrap();
        let w = build_weyl_group(&rs).unwrap();
        assert_eq!(w.order(), 24);
    }
}
