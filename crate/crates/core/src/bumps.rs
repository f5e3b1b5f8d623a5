//! Compactly supported bump functions, one per root, on the base ball.
//!
//! `phi_i(x) = a_i * psi(|x - c| / rho)` with the mollifier
//! `psi(r) = exp(1 - 1 / (1 - r^2))` for `r < 1` and `0` otherwise. Everything
//! is written in terms of `q = |x - c|^2 / rho^2`, which keeps the gradient and
//! Hessian free of the `1/r` factors a radial chain rule would introduce.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Mollifier,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mollifier" => Ok(Profile::Mollifier),
            other => Err(Error::ConfigInvalid {
                field: "profile".into(),
                message: format!("unknown profile `{other}` (supported: mollifier)"),
            }),
        }
    }
}

/// Profile value and its first two derivatives with respect to `q`.
#[derive(Debug, Clone, Copy)]
struct Jet<T> {
    f: T,
    df: T,
    d2f: T,
}

impl Profile {
    fn jet<T: Real>(self, q: T) -> Option<Jet<T>> {
        match self {
            Profile::Mollifier => {
                if q >= T::one() {
                    return None;
                }
                let s = T::one() - q;
                let inv = T::one() / s;
                let exponent = T::one() - inv;
                // Exact zero once the value would leave the normal range.
                if exponent < T::min_normal().ln() {
                    return None;
                }
                let f = exponent.exp();
                let inv2 = inv * inv;
                Some(Jet {
                    f,
                    df: -f * inv2,
                    d2f: f * (inv2 * inv2 - lit::<T>(2.0) * inv2 * inv),
                })
            }
        }
    }
}

/// Per-bump gradients and Hessians at one point.
pub type BumpDerivatives<T> = (Vec<DVector<T>>, Vec<DMatrix<T>>);

#[derive(Debug, Clone)]
pub struct BumpSet<T: Real> {
    center: DVector<T>,
    radius: T,
    amplitudes: Vec<T>,
    profile: Profile,
}

impl<T: Real> BumpSet<T> {
    pub fn new(center: DVector<T>, radius: T, amplitudes: Vec<T>, profile: Profile) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidArgument("bump radius must be positive".into()));
        }
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("at least one amplitude required".into()));
        }
        Ok(BumpSet { center, radius, amplitudes, profile })
    }

    pub fn center(&self) -> &DVector<T> {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn amplitude(&self, i: usize) -> T {
        self.amplitudes[i]
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// Same bumps with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        BumpSet {
            amplitudes: self.amplitudes.iter().map(|&a| a * factor).collect(),
            ..self.clone()
        }
    }

    /// Whether `x` lies strictly inside the support ball.
    pub fn contains(&self, x: &DVector<T>) -> bool {
        (x - &self.center).norm_squared() < self.radius * self.radius
    }

    fn local(&self, x: &DVector<T>) -> (DVector<T>, Option<Jet<T>>) {
        let d = x - &self.center;
        let q = d.norm_squared() / (self.radius * self.radius);
        let jet = self.profile.jet(q);
        (d, jet)
    }

    pub fn phi(&self, i: usize, x: &DVector<T>) -> T {
        match self.local(x).1 {
            Some(jet) => self.amplitudes[i] * jet.f,
            None => T::zero(),
        }
    }

    pub fn grad_phi(&self, i: usize, x: &DVector<T>) -> DVector<T> {
        let (d, jet) = self.local(x);
        match jet {
            Some(jet) => {
                let r2 = self.radius * self.radius;
                d * (self.amplitudes[i] * jet.df * lit::<T>(2.0) / r2)
            }
            None => DVector::zeros(x.len()),
        }
    }

    pub fn hess_phi(&self, i: usize, x: &DVector<T>) -> DMatrix<T> {
        let n = x.len();
        let (d, jet) = self.local(x);
        match jet {
            Some(jet) => {
                let r2 = self.radius * self.radius;
                let a = self.amplitudes[i];
                let outer = &d * d.transpose() * (a * jet.d2f * lit::<T>(4.0) / (r2 * r2));
                outer + DMatrix::identity(n, n) * (a * jet.df * lit::<T>(2.0) / r2)
            }
            None => DMatrix::zeros(n, n),
        }
    }

    /// Gradient and Hessian of every bump at `x`, sharing the profile evaluation.
    pub fn derivatives(&self, x: &DVector<T>) -> Option<BumpDerivatives<T>> {
        let n = x.len();
        let (d, jet) = self.local(x);
        let jet = jet?;
        let r2 = self.radius * self.radius;
        let two = lit::<T>(2.0);
        let unit_grad = &d * (jet.df * two / r2);
        let unit_hess = &d * d.transpose() * (jet.d2f * lit::<T>(4.0) / (r2 * r2))
            + DMatrix::identity(n, n) * (jet.df * two / r2);
        let grads = self.amplitudes.iter().map(|&a| &unit_grad * a).collect();
        let hessians = self.amplitudes.iter().map(|&a| &unit_hess * a).collect();
        Some((grads, hessians))
    }

    /// Upper estimates of `sup |grad phi_i|` and `sup ||Hess phi_i||_2` over the
    /// ball for the unit amplitude, from a dense radial scan.
    pub fn unit_bounds(&self) -> (T, T) {
        const SAMPLES: usize = 4096;
        let r2 = self.radius * self.radius;
        let two = lit::<T>(2.0);
        let four = lit::<T>(4.0);
        let mut grad = T::zero();
        let mut hess = T::zero();
        for k in 0..SAMPLES {
            let q = lit::<T>(k as f64 / SAMPLES as f64);
            if let Some(jet) = self.profile.jet(q) {
                // |d| = rho sqrt(q)
                grad = grad.max((jet.df * two * q.sqrt() / self.radius).abs());
                let tangential = (jet.df * two / r2).abs();
                let radial = ((four * q * jet.d2f + two * jet.df) / r2).abs();
                hess = hess.max(tangential.max(radial));
            }
        }
        (grad, hess)
    }

    /// `(sup |grad phi_i|, sup ||Hess phi_i||)` scaled by the largest amplitude.
    pub fn bounds(&self) -> (T, T) {
        let amax = self.amplitudes.iter().fold(T::zero(), |m, &a| m.max(a.abs()));
        let (g, h) = self.unit_bounds();
        (g * amax, h * amax)
    }
}
