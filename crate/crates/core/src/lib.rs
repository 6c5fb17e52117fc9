//! Direct CO₂ emissions from electricity generation.
//!
//! The crate evaluates emission-factor methods of increasing IPCC tier on
//! hourly zonal generation data, aggregates the results (monthly means,
//! trailing rolling means, annual totals and average emission factors) and
//! tests whether two methods differ on average with a HAC-based mean
//! difference statistic.
//!
//! Module map:
//!
//! - [`fuel`]: fuel categories, IPCC/ISPRA parameter sets, unit conversion.
//! - [`estimators`]: the emission formulas and the six-method matrix.
//! - [`ingest`]: generation CSV parsing, label mapping, gap handling.
//! - [`series`]: hourly series and their aggregate views.
//! - [`stats`]: autocovariances, long-run variance, non-rejection intervals.
//! - [`report`]: command orchestration and output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod fuel;
pub mod ingest;
pub mod report;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{Method, MethodConfig, MethodId};
pub use fuel::{EfSource, FuelKind, FuelParameters, Registry};
pub use ingest::{GenerationRecord, Source, ZoneId};
pub use series::{AnnualSummary, DifferenceSeries, EmissionSeries};
pub use stats::MeanDifferenceReport;
