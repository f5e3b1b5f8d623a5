//! Smooth Riemannian metrics on `R^n` that are Euclidean outside a compact set
//! and leave every root direction of `A_n` invisible, together with the
//! numerical machinery that checks those claims.
//!
//! All numerical types are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the double-precision instantiation used by the tools.

// Negated float comparisons are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bumps;
pub mod config;
pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod metric;
pub mod rootsys;
pub mod scalar;
pub mod verify;

pub use bumps::{BumpSet, Profile};
pub use config::{resolve_config, Config, Construction, ConstructionReport, ResolvedConfig};
pub use error::{Error, Result};
pub use geodesic::{integrate, GeodesicState, TraceResult, TraceSettings};
pub use geometry::{validate_geometry, GeometryReport};
pub use metric::{max_admissible_epsilon, BaseMetric, HamiltonianField, SolveReport};
pub use rootsys::{build_roots, build_weyl_group, RootSystem, WeylGroup};
pub use scalar::Real;
pub use verify::Direction;

pub type RootSystem64 = RootSystem<f64>;
pub type WeylGroup64 = WeylGroup<f64>;
pub type BumpSet64 = BumpSet<f64>;
pub type BaseMetric64 = BaseMetric<f64>;
pub type HamiltonianField64 = HamiltonianField<f64>;
