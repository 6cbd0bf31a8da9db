//! Evaluation of cluster id assignment schemes.
//!
//! A baseline and an experiment label the clusters of a current clustering
//! with ids. Together with one or more historical labeled clusterings, the
//! two labelings are rewritten into a pair of membership clusterings over an
//! expanded element universe (current items, historical items, and synthetic
//! elements standing in for ids without history). Pointwise membership-diff
//! metrics over that pair then measure how large the id diff is (impact) and,
//! given an ideal clustering, whether it moves toward semantic id stability
//! (quality).
//!
//! Module map:
//!
//! - [`model`]: elements, labeled clusterings, weights, validation.
//! - [`index`]: dense membership indexes used by the metric kernels.
//! - [`transform`]: construction of the Base/Exp/Weight inputs, including
//!   multi-epoch history, item alignment and the collapsed fast path.
//! - [`metrics`]: pointwise and aggregate impact/quality metrics and IQ.
//! - [`judgement`]: pair sampling, automatic verdicts, verdict ingestion and a
//!   naive estimator over judged pairs.
//! - [`schemes`]: reference id assignment schemes (fresh ids, majority vote).
//! - [`io`], [`config`], [`report`], [`figures`], [`cli`]: file formats and the
//!   command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod figures;
pub mod index;
pub mod io;
pub mod judgement;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod report;
pub mod schemes;
pub mod transform;

pub use error::{Error, Result};
pub use index::{MembershipIndex, Universe};
pub use metrics::{
    Distances, EvalOptions, ImpactMetrics, MetricsReport, PointwiseImpact, PointwiseQuality,
    PointwiseRecord, QualityMetrics,
};
pub use model::{
    Cluster, ClusterId, ElementKind, ElementRef, LabeledClustering, Snapshot, ValidationReport,
    WeightMap,
};
pub use transform::{AssignmentMode, EvalInputs, HistoricalEpoch, IdCensus, TransformConfig};
