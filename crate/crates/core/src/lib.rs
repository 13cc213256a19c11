//! Infinite partition-of-unity (IPU) copulas.
//!
//! An IPU copula mixes products of component densities `f_{k,i}` over a
//! discrete driver vector `Z` whose marginals are pinned to the component
//! masses `α_{k,i}`. Choosing the driver from a copula fitted to observed
//! ranks (a shuffle of M, a Bernstein copula, ...) yields a data-driven
//! dependence model that can carry upper tail dependence; feeding its samples
//! through fitted marginal quantiles yields Monte Carlo Value-at-Risk
//! estimates for the aggregate loss.
//!
//! The crate is organised along that pipeline:
//!
//! * [`data`] — observation ingestion, ranks, pseudo-observations;
//! * [`families`] — negative binomial / Poisson partition families;
//! * [`drivers`] — base copulas on `(0,1)^d` and the driver transform;
//! * [`engine`] — copula sampling and density evaluation;
//! * [`tails`] — upper tail dependence coefficients;
//! * [`risk`] — marginal fitting, quantiles and VaR aggregation.

pub mod data;
pub mod drivers;
pub mod engine;
mod error;
pub mod families;
pub mod risk;
pub mod tails;

pub use data::{ObservationSet, PseudoObservations, RankConvention, RankMatrix};
pub use drivers::{BaseCopula, DriverSpec, Slope};
pub use engine::{CopulaSampler, DensityEvaluator, DensityValue, IpuModel, Samples, TruncationPolicy};
pub use error::{Error, Result};
pub use families::{FamilyKind, FamilyParams};
pub use risk::{FitMethod, MarginalModel, VarReport};
pub use tails::TailEstimate;
