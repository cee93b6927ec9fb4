//! Monte-Carlo laboratory for discretized Brownian last passage percolation.
//!
//! The crate simulates the semi-discrete Brownian LPP field on a spatial grid,
//! extracts leftmost/rightmost geodesics and their weight functions, samples
//! the Brownian-Bessel boundary problem that describes the local environment
//! of a geodesic, and provides the estimators used to check the scaling
//! behaviour of these objects (variations, tail exponents, two-sample
//! distances, bootstrap correlations, Hölder ratios).
//!
//! Module map:
//!
//! * [`rng`] and [`process`]: seeded streams and the boundary/reference
//!   process samplers.
//! * [`field`]: the LPP field, dynamic-programming sweeps, geodesics,
//!   approximate directed landscape and KPZ fixed point evolution.
//! * [`analysis`]: weight functions, α-variation, environments, overlap and
//!   Hölder statistics.
//! * [`limit`]: the Brownian-Bessel boundary maximization and the ν, μ
//!   estimators.
//! * [`stats`]: generic estimators (moments, tails, two-sample distance,
//!   bootstrap, regression).
//! * [`experiments`]: replica-parallel experiments assembled from the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod field;
pub mod limit;
pub mod path;
pub mod process;
pub mod rng;
pub mod selftest;
pub mod stats;

pub use error::{Error, Result};
pub use field::{GridPoint, LandscapeQuery, LppField, TieBreak};
pub use path::SampledPath;
pub use rng::Rng;
