//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use invisible::config::{resolve_config, Config, Construction};
use invisible::HamiltonianField;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn default_construction(n: usize) -> Construction {
    resolve_config(&Config::for_dimension(n)).expect("default config resolves")
}

/// Mollifier `a exp(1 - 1/(1 - q))`, `q = |x - c|^2 / r^2`, and its gradient.
pub fn mollifier(a: f64, center: &DVector<f64>, r: f64, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let d = x - center;
    let q = d.norm_squared() / (r * r);
    if q >= 1.0 {
        return (0.0, DVector::zeros(x.len()));
    }
    let s = 1.0 - q;
    let f = (1.0 - 1.0 / s).exp();
    (a * f, d * (-a * f / (s * s) * 2.0 / (r * r)))
}

/// `H` at a base-ball point from the defining constraints `(H w_i, w_i) = 2`
/// and symmetry, over all `n^2` entries, solved by SVD.
pub fn constraint_solve(hf: &HamiltonianField<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let base = hf.base();
    let rs = base.roots();
    let bumps = base.bumps();
    let n = rs.dimension();
    let eps = base.epsilon();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..rs.len() {
        let (_, g) = mollifier(bumps.amplitude(i), bumps.center(), bumps.radius(), y);
        let w = rs.root(i) + g * eps;
        rows.push((0..n * n).map(|e| w[e / n] * w[e % n]).collect());
        rhs.push(2.0);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let mut row = vec![0.0; n * n];
            row[a * n + b] = 1.0;
            row[b * n + a] = -1.0;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    let m = DMatrix::from_fn(rows.len(), n * n, |i, j| rows[i][j]);
    let sol = m.svd(true, true).solve(&DVector::from_vec(rhs), 1e-14).expect("svd solve");
    DMatrix::from_fn(n, n, |a, b| sol[a * n + b])
}

/// `H` anywhere, by locating the ball through the group orbit of the base
/// center and conjugating the constraint solution.
pub fn oracle_h(hf: &HamiltonianField<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let group = hf.group();
    let p1 = group.chamber_point();
    let r = hf.radius();
    for g in group.elements() {
        if (x - g * p1).norm() < r {
            let y = g.transpose() * x;
            return g * constraint_solve(hf, &y) * g.transpose();
        }
    }
    DMatrix::identity(n, n)
}

/// Uniform random point inside ball `center`, radius `r`, scaled by `frac`.
pub fn point_in_ball(rng: &mut ChaCha8Rng, center: &DVector<f64>, r: f64, frac: f64) -> DVector<f64> {
    let n = center.len();
    loop {
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if u.norm_squared() < 1.0 {
            return center + u * (r * frac);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central difference of a matrix-valued function along axis `m`, with one
/// Richardson step (`h` and `h/2`) to cancel the second-order term.
pub fn fd_matrix(f: impl Fn(&DVector<f64>) -> DMatrix<f64>, x: &DVector<f64>, m: usize, h: f64) -> DMatrix<f64> {
    let central = |h: f64| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[m] += h;
        xm[m] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    };
    (central(h * 0.5) * 4.0 - central(h)) / 3.0
}
