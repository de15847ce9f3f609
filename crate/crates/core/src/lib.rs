//! Diffeomorphic modelling of longitudinal changes in daily activity curves.
//!
//! Day-averaged, smoothed activity profiles are treated as planar curves.
//! The change between two visits is a deformation of the plane generated by
//! Gaussian-kernel vector fields, fully described by momenta on control
//! points and estimated by geodesic shooting. Cohort variability is then
//! summarized by PCA on the momenta and related to covariates by regression.
//!
//! The geometric core ([`kernel`], [`shooting`], [`currents`], [`matching`],
//! [`optim`]) is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the pipeline uses.

pub mod currents;
pub mod error;
pub mod fpca;
pub mod geometry;
pub mod ingest;
pub mod kernel;
pub mod matching;
pub mod optim;
pub mod render;
pub mod scalar;
pub mod shooting;
pub mod spline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::Vec2;
pub use scalar::Scalar;

pub type Point = geometry::Vec2<f64>;
pub type Curve = geometry::Curve<f64>;
pub type ControlPoints = kernel::ControlPoints<f64>;
pub type MomentaField = shooting::MomentaField<f64>;
pub type GeodesicPath = shooting::GeodesicPath<f64>;
pub type MatchConfig = matching::MatchConfig<f64>;
pub type MatchResult = matching::MatchResult<f64>;
pub type CurrentRep = currents::CurrentRep<f64>;

pub type Curve32 = geometry::Curve<f32>;
pub type MomentaField32 = shooting::MomentaField<f32>;
pub type MatchConfig32 = matching::MatchConfig<f32>;
